//! Slow reference solvers for cross-checking the fast code paths.
//!
//! Everything here is deliberately naive: exhaustive subset enumeration,
//! least squares through the SVD, cyclic coordinate descent for the lasso,
//! and a brute-force grid search for the loss rank infimum.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::criteria::{alpha_star, loss_rank_alpha, Criterion, CriterionInput, PERFECT_FIT_RHO};
use crate::error::{Error, Result};
use crate::linreg::StandardizedDataset;
use crate::selector::prefer;

/// Hard ceiling on `max_subset_dim` (2^20 subsets).
pub const MAX_EXHAUSTIVE_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub max_subset_dim: usize,
    pub cd_tol: f64,
    pub cd_max_iters: usize,
    /// `(log10 min, log10 max, count)` of the alpha grid.
    pub alpha_grid: (f64, f64, usize),
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_subset_dim: 12,
            cd_tol: 1e-10,
            cd_max_iters: 1_000_000,
            alpha_grid: (-8.0, 8.0, 1_000_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustiveResult {
    pub subset: Vec<usize>,
    pub score: f64,
    /// Number of subsets examined; always `2^d - 1`.
    pub visited: usize,
    /// Subsets skipped as rank-deficient, too large or infeasible.
    pub skipped: usize,
}

/// Least squares through the thin SVD. Returns `None` when the smallest
/// singular value is below `1e-10` times the largest.
pub fn svd_least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    if !(smax > 0.0) || s.min() < 1e-10 * smax {
        return None;
    }
    svd.solve(y, 0.0).ok()
}

/// Residual sum of squares of the refit of `subset`, or `None` when the
/// columns are (numerically) dependent.
pub fn refit_rss(data: &StandardizedDataset, subset: &[usize]) -> Option<f64> {
    let a = data.x.select_columns(subset);
    let beta = svd_least_squares(&a, &data.y)?;
    let r = &data.y - a * beta;
    Some(r.norm_squared())
}

fn subset_score(criterion: Criterion, n: usize, y_sq: f64, rss: f64, df: usize) -> Option<f64> {
    let nf = n as f64;
    if rss <= PERFECT_FIT_RHO * y_sq {
        return (df + 1 < n).then_some(f64::NEG_INFINITY);
    }
    match criterion {
        Criterion::LossRank => {
            // entropy form, kept apart from the KL form used by the library
            let rho = rss / y_sq;
            if nf * (1.0 - rho) <= df as f64 {
                return None;
            }
            let p = df as f64 / nf;
            let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
            Some(0.5 * nf * rss.ln() + 0.5 * nf * h + 0.5 * df as f64 * ((1.0 - rho) / rho).ln())
        }
        Criterion::Bic => Some(0.5 * nf * (rss / nf).ln() + 0.5 * df as f64 * nf.ln()),
        _ => None,
    }
}

/// Minimizes a refit criterion (`LR` or `BIC`) over all `2^d - 1` nonempty
/// subsets, with the selector's tie rule.
pub fn best_subset_exhaustive(
    data: &StandardizedDataset,
    criterion: Criterion,
    cfg: &OracleConfig,
) -> Result<ExhaustiveResult> {
    if !criterion.uses_refit() {
        return Err(Error::InvalidInput(format!("{criterion} is not defined on arbitrary subsets")));
    }
    let (n, d) = data.x.shape();
    let limit = cfg.max_subset_dim.min(MAX_EXHAUSTIVE_DIM);
    if d > limit {
        return Err(Error::DimensionTooLarge { d, limit });
    }
    let y_sq = data.y.norm_squared();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut visited = 0;
    let mut skipped = 0;
    for mask in 1u32..(1u32 << d) {
        visited += 1;
        let subset: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
        if subset.len() > n - 1 {
            skipped += 1;
            continue;
        }
        let Some(score) = refit_rss(data, &subset).and_then(|rss| subset_score(criterion, n, y_sq, rss, subset.len()))
        else {
            skipped += 1;
            continue;
        };
        let better = match &best {
            None => true,
            Some((s, v)) => prefer(score, &subset, *v, s),
        };
        if better {
            best = Some((subset, score));
        }
    }
    let (subset, score) = best.ok_or(Error::AllInfeasible(criterion))?;
    Ok(ExhaustiveResult { subset, score, visited, skipped })
}

/// Cyclic coordinate descent for `||y - X b||^2 + lambda ||b||_1`, started
/// from zero. Stops once a full sweep moves no coefficient by more than
/// `cd_tol`.
pub fn lasso_fixed_lambda_cd(data: &StandardizedDataset, lambda: f64, cfg: &OracleConfig) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::DomainError(format!("lambda must be positive, got {lambda}")));
    }
    let (n, d) = data.x.shape();
    let col_sq: Vec<f64> = (0..d).map(|j| data.x.column(j).norm_squared()).collect();
    let mut beta = vec![0.0; d];
    let mut r: Vec<f64> = data.y.iter().copied().collect();
    let half = 0.5 * lambda;
    for _ in 0..cfg.cd_max_iters {
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = data.x.column(j);
            let mut z = 0.0;
            for i in 0..n {
                z += col[i] * r[i];
            }
            z += col_sq[j] * beta[j];
            let new = if z > half {
                (z - half) / col_sq[j]
            } else if z < -half {
                (z + half) / col_sq[j]
            } else {
                0.0
            };
            let delta = new - beta[j];
            if delta != 0.0 {
                for i in 0..n {
                    r[i] -= delta * col[i];
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < cfg.cd_tol {
            return Ok(beta);
        }
    }
    Err(Error::NoConvergence(cfg.cd_max_iters))
}

/// Location of the loss rank infimum found by [`loss_rank_grid_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMinimum {
    pub alpha: f64,
    pub value: f64,
    /// Index of the best grid point before refinement.
    pub index: usize,
    pub count: usize,
}

impl GridMinimum {
    pub fn is_interior(&self) -> bool {
        self.index > 0 && self.index + 1 < self.count
    }
}

/// Scans `loss_rank_alpha` over the log-spaced alpha grid, then polishes the
/// best bracket with a golden-section search.
pub fn loss_rank_grid_search(input: &CriterionInput, cfg: &OracleConfig) -> Result<GridMinimum> {
    if !input.is_feasible() {
        return Err(Error::Infeasible);
    }
    let (lo, hi, count) = cfg.alpha_grid;
    if count < 3 || !(hi > lo) {
        return Err(Error::DomainError("alpha grid needs at least three points".into()));
    }
    let step = (hi - lo) / (count - 1) as f64;
    let at = |i: usize| 10f64.powf(lo + step * i as f64);
    let mut index = 0;
    let mut value = f64::INFINITY;
    for i in 0..count {
        let v = loss_rank_alpha(input, at(i))?;
        if v < value {
            value = v;
            index = i;
        }
    }
    let mut alpha = at(index);
    if index > 0 && index + 1 < count {
        let (mut a, mut b) = (at(index - 1).ln(), at(index + 1).ln());
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |t: f64| loss_rank_alpha(input, t.exp());
        for _ in 0..100 {
            let c = b - g * (b - a);
            let e = a + g * (b - a);
            if f(c)? < f(e)? {
                b = e;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        let v = f(t)?;
        if v < value {
            value = v;
            alpha = t.exp();
        }
    }
    Ok(GridMinimum { alpha, value, index, count })
}

/// `inf_alpha LR^alpha` by grid search.
pub fn loss_rank_grid_min(input: &CriterionInput, cfg: &OracleConfig) -> Result<f64> {
    loss_rank_grid_search(input, cfg).map(|m| m.value)
}

/// `LR^alpha` evaluated at the closed-form stationary point.
pub fn loss_rank_at_alpha_star(input: &CriterionInput) -> Result<f64> {
    loss_rank_alpha(input, alpha_star(input)?)
}

/// `tr[(G_A + lambda W^-1)^-1 G_A]` through an explicit inverse.
pub fn lasso_df_dense(data: &StandardizedDataset, beta: &[f64], lambda: f64) -> Option<f64> {
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    if active.is_empty() {
        return None;
    }
    let xa = data.x.select_columns(&active);
    let g = xa.tr_mul(&xa);
    let mut m = g.clone();
    for (k, &j) in active.iter().enumerate() {
        m[(k, k)] += lambda / beta[j].abs();
    }
    let inv = m.try_inverse()?;
    Some((inv * g).trace())
}
