//! Closed-form model-selection criteria.
//!
//! The loss rank and BIC score a subset through its least-squares refit
//! (`rho`, `df`), so they are step functions along the lasso path. GCV and
//! BIC-tilde score the lasso coefficients themselves at a given `lambda` and
//! are continuous in `lambda`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linreg::{OlsFit, StandardizedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "LR")]
    LossRank,
    #[serde(rename = "BIC")]
    Bic,
    #[serde(rename = "GCV")]
    Gcv,
    #[serde(rename = "BIC_TILDE")]
    BicTilde,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::LossRank,
        Criterion::Bic,
        Criterion::Gcv,
        Criterion::BicTilde,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Criterion::LossRank => "LR",
            Criterion::Bic => "BIC",
            Criterion::Gcv => "GCV",
            Criterion::BicTilde => "BIC_TILDE",
        }
    }

    /// Whether the criterion scores the least-squares refit of a subset
    /// (as opposed to the shrunken lasso coefficients at a given lambda).
    pub fn uses_refit(self) -> bool {
        matches!(self, Criterion::LossRank | Criterion::Bic)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "LR" | "LOSS_RANK" => Ok(Criterion::LossRank),
            "BIC" => Ok(Criterion::Bic),
            "GCV" => Ok(Criterion::Gcv),
            "BIC_TILDE" | "BICT" => Ok(Criterion::BicTilde),
            other => Err(Error::InvalidInput(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Sufficient statistics of a subset refit for the loss rank criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionInput {
    pub n: usize,
    pub y_sq_norm: f64,
    pub rho: f64,
    pub df: usize,
}

impl CriterionInput {
    /// Validates `1 <= df <= n - 1`, `||y||^2 > 0` and `rho` in `[0, 1]`.
    /// The closed interval is accepted so that boundary fits can be scored
    /// (as infeasible) instead of rejected.
    pub fn new(n: usize, y_sq_norm: f64, rho: f64, df: usize) -> Result<Self> {
        if n < 2 || df < 1 || df > n - 1 {
            return Err(Error::DomainError(format!("need 1 <= df <= n - 1, got df = {df}, n = {n}")));
        }
        if !(y_sq_norm > 0.0) || !y_sq_norm.is_finite() {
            return Err(Error::DomainError(format!("||y||^2 must be positive, got {y_sq_norm}")));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::DomainError(format!("rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self { n, y_sq_norm, rho, df })
    }

    pub fn from_fit(fit: &OlsFit) -> Result<Self> {
        Self::new(fit.n, fit.y_sq_norm, fit.rho, fit.df)
    }

    /// `n (1 - rho) > df` with `0 < rho`: the loss rank has an interior
    /// minimizer in `alpha`.
    pub fn is_feasible(&self) -> bool {
        self.rho > 0.0 && (self.n as f64) * (1.0 - self.rho) > self.df as f64
    }

    fn p(&self) -> f64 {
        self.df as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionScore {
    pub criterion: Criterion,
    pub value: f64,
    pub feasible: bool,
}

impl CriterionScore {
    pub fn finite(criterion: Criterion, value: f64) -> Self {
        Self { criterion, value, feasible: true }
    }

    pub fn infeasible(criterion: Criterion) -> Self {
        Self { criterion, value: f64::INFINITY, feasible: false }
    }

    /// An exact fit (`rss = 0`): the criterion diverges to `-inf`.
    pub fn perfect_fit(criterion: Criterion) -> Self {
        Self { criterion, value: f64::NEG_INFINITY, feasible: false }
    }

    /// Finite scores and perfect fits take part in selection; `+inf`
    /// (infeasible) scores do not.
    pub fn is_selectable(&self) -> bool {
        self.value < f64::INFINITY && !self.value.is_nan()
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("{name} = {v} is outside (0, 1)")))
    }
}

/// Kullback-Leibler divergence between Bernoulli(p) and Bernoulli(q).
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    check_open_unit("q", q)?;
    Ok(kl_with_complement(p, q, 1.0 - q))
}

// `q_c` is `1 - q`, passed separately so that q close to 1 keeps precision.
fn kl_with_complement(p: f64, q: f64, q_c: f64) -> f64 {
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / q_c).ln()
}

/// Binary entropy in nats.
pub fn entropy(p: f64) -> Result<f64> {
    check_open_unit("p", p)?;
    Ok(-p * p.ln() - (1.0 - p) * (-p).ln_1p())
}

/// Minimizer of [`loss_rank_alpha`] over `alpha > 0`:
/// `rho df / (n (1 - rho) - df)`.
pub fn alpha_star(input: &CriterionInput) -> Result<f64> {
    if !input.is_feasible() {
        return Err(Error::Infeasible);
    }
    let n = input.n as f64;
    let df = input.df as f64;
    Ok(input.rho * df / (n * (1.0 - input.rho) - df))
}

/// Loss rank of the projection onto a `df`-dimensional subspace with the
/// ridge-type regularizer `alpha`.
pub fn loss_rank_alpha(input: &CriterionInput, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::DomainError(format!("alpha must be positive and finite, got {alpha}")));
    }
    let n = input.n as f64;
    let df = input.df as f64;
    Ok(0.5 * n * input.y_sq_norm.ln() + 0.5 * n * (input.rho + alpha).ln()
        - 0.5 * df * alpha.ln()
        - 0.5 * (n - df) * alpha.ln_1p())
}

/// Relative residual `rho` at or below which a refit counts as a perfect
/// fit. Exact fits leave rounding residue around `1e-30`.
pub const PERFECT_FIT_RHO: f64 = 1e-20;

/// Score of a refit with zero residual. Exact fits with `df < n - 1` win
/// (`-inf`); saturated ones, which interpolate any centered response, are
/// infeasible.
fn zero_residual(criterion: Criterion, n: usize, df: usize) -> CriterionScore {
    if df + 1 < n {
        CriterionScore::perfect_fit(criterion)
    } else {
        CriterionScore::infeasible(criterion)
    }
}

/// Loss rank criterion: `(n/2) log ||y||^2 - (n/2) KL(df/n || 1 - rho)`.
///
/// Scores `+inf` (infeasible) when `n (1 - rho) <= df` or the fit is
/// saturated, and `-inf` for any other perfect fit.
pub fn loss_rank(input: &CriterionInput) -> CriterionScore {
    if input.rho <= PERFECT_FIT_RHO {
        return zero_residual(Criterion::LossRank, input.n, input.df);
    }
    if !input.is_feasible() {
        return CriterionScore::infeasible(Criterion::LossRank);
    }
    let n = input.n as f64;
    let kl = kl_with_complement(input.p(), 1.0 - input.rho, input.rho);
    CriterionScore::finite(Criterion::LossRank, 0.5 * n * input.y_sq_norm.ln() - 0.5 * n * kl)
}

/// The entropy form of the loss rank,
/// `(n/2) log(n sigma^2) + (n/2) H(df/n) + (df/2) log((1 - rho)/rho)`.
/// Agrees with [`loss_rank`] on feasible inputs.
pub fn loss_rank_entropy_form(input: &CriterionInput) -> Result<f64> {
    if !input.is_feasible() {
        return Err(Error::Infeasible);
    }
    let n = input.n as f64;
    let df = input.df as f64;
    let n_sigma2 = input.rho * input.y_sq_norm;
    Ok(0.5 * n * n_sigma2.ln()
        + 0.5 * n * entropy(input.p())?
        + 0.5 * df * ((1.0 - input.rho) / input.rho).ln())
}

/// `(n/2) log sigma2_hat + (df/2) log n`.
pub fn bic(n: usize, sigma2_hat: f64, df: usize) -> Result<f64> {
    if !(sigma2_hat > 0.0) {
        return Err(Error::DomainError(format!("sigma2_hat must be positive, got {sigma2_hat}")));
    }
    let n = n as f64;
    Ok(0.5 * n * sigma2_hat.ln() + 0.5 * df as f64 * n.ln())
}

pub fn bic_score(fit: &OlsFit) -> CriterionScore {
    if fit.rho <= PERFECT_FIT_RHO {
        return zero_residual(Criterion::Bic, fit.n, fit.df);
    }
    match bic(fit.n, fit.sigma2_hat, fit.df) {
        Ok(v) => CriterionScore::finite(Criterion::Bic, v),
        Err(_) => zero_residual(Criterion::Bic, fit.n, fit.df),
    }
}

/// Scores a refit under a refit-based criterion.
pub fn score_refit(criterion: Criterion, fit: &OlsFit) -> Result<CriterionScore> {
    match criterion {
        Criterion::LossRank => Ok(loss_rank(&CriterionInput::from_fit(fit)?)),
        Criterion::Bic => Ok(bic_score(fit)),
        other => Err(Error::InvalidInput(format!("{other} does not score least-squares refits"))),
    }
}

/// Residual sum of squares and effective degrees of freedom of a lasso
/// solution, as used by GCV and BIC-tilde.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoFitStats {
    pub rss: f64,
    pub df: f64,
    pub n: usize,
}

impl LassoFitStats {
    pub fn gcv(&self) -> f64 {
        let n = self.n as f64;
        (self.rss / n) / (1.0 - self.df / n).powi(2)
    }

    pub fn bic_tilde(&self) -> Result<f64> {
        if !(self.rss > 0.0) {
            return Err(Error::PerfectFit);
        }
        let n = self.n as f64;
        Ok((self.rss / n).ln() + self.df * n.ln() / n)
    }
}

/// `tr[(G + lambda W^-1)^-1 G]` where `G` is the Gram matrix of the active
/// columns and `W = diag(|beta_j|)` over the active set. This equals
/// `tr[X_A (X_A' X_A + lambda W^-1)^-1 X_A']`.
pub(crate) fn effective_df(gram: &DMatrix<f64>, abs_beta: &[f64], lambda: f64) -> Option<f64> {
    let k = abs_beta.len();
    let mut m = gram.clone();
    for (i, &w) in abs_beta.iter().enumerate() {
        m[(i, i)] += lambda / w;
    }
    let chol = m.cholesky()?;
    // tr(M^-1 G) = k - lambda * sum_j (M^-1)_jj / w_j
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(k, k))?;
    let mut correction = 0.0;
    for j in 0..k {
        let diag = l_inv.column(j).norm_squared();
        correction += diag / abs_beta[j];
    }
    Some(k as f64 - lambda * correction)
}

/// RSS and effective degrees of freedom of the lasso coefficients
/// `beta_lambda` (length `d`) at penalty `lambda`.
pub fn lasso_fit_stats(data: &StandardizedDataset, beta_lambda: &[f64], lambda: f64) -> Result<LassoFitStats> {
    let (n, d) = data.x.shape();
    if beta_lambda.len() != d {
        return Err(Error::InvalidInput(format!(
            "coefficient vector has length {}, expected {d}",
            beta_lambda.len()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::DomainError(format!("lambda must be positive, got {lambda}")));
    }
    let active: Vec<usize> = (0..d).filter(|&j| beta_lambda[j] != 0.0).collect();
    if active.is_empty() {
        return Err(Error::AllZeroCoefficients);
    }
    let xa = data.x.select_columns(&active);
    let beta_a = DVector::from_iterator(active.len(), active.iter().map(|&j| beta_lambda[j]));
    let rss = (&data.y - &xa * &beta_a).norm_squared();
    let gram = xa.tr_mul(&xa);
    let abs_beta: Vec<f64> = beta_a.iter().map(|b| b.abs()).collect();
    let df = effective_df(&gram, &abs_beta, lambda)
        .ok_or_else(|| Error::RankDeficient(active.clone()))?;
    if df >= n as f64 {
        return Err(Error::DegreesOfFreedomOverflow { df, n });
    }
    Ok(LassoFitStats { rss, df, n })
}

/// Effective degrees of freedom of the lasso solution at `lambda`.
pub fn lasso_df(data: &StandardizedDataset, beta_lambda: &[f64], lambda: f64) -> Result<f64> {
    lasso_fit_stats(data, beta_lambda, lambda).map(|s| s.df)
}

/// `(1/n) ||y - X beta||^2 / (1 - DF/n)^2`.
pub fn gcv_lasso(data: &StandardizedDataset, beta_lambda: &[f64], lambda: f64) -> Result<f64> {
    lasso_fit_stats(data, beta_lambda, lambda).map(|s| s.gcv())
}

/// `log(||y - X beta||^2 / n) + DF log(n) / n`.
pub fn bic_tilde(data: &StandardizedDataset, beta_lambda: &[f64], lambda: f64) -> Result<f64> {
    lasso_fit_stats(data, beta_lambda, lambda)?.bic_tilde()
}
