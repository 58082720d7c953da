//! Path -> candidates -> scores -> chosen subset.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DVector;
use serde::Serialize;

use crate::criteria::{effective_df, score_refit, Criterion, CriterionScore, LassoFitStats};
use crate::error::{Error, Result};
use crate::lasso_path::{
    candidate_subsets, compute_lars_path_with_gram, default_max_steps, CandidateModel, ExclusionCounts,
    GramCache, LassoPath,
};
use crate::linreg::{standardize, Dataset, OlsFit, StandardizedDataset};

/// Relative tolerance under which two scores count as tied.
pub const SCORE_TIE_TOL: f64 = 1e-9;

/// Log-spaced lambda grid, by default on `[lambda_max * min_ratio, lambda_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaGrid {
    pub count: usize,
    pub min_ratio: f64,
    /// Absolute `(min, max)` overriding the range relative to `lambda_max`.
    pub bounds: Option<(f64, f64)>,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self { count: 1000, min_ratio: 1e-4, bounds: None }
    }
}

impl LambdaGrid {
    pub fn absolute(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min > 0.0) || !(max > min) || !max.is_finite() || count < 2 {
            return Err(Error::InvalidInput(format!(
                "lambda grid needs 0 < min < max and count >= 2, got ({min}, {max}, {count})"
            )));
        }
        Ok(Self { count, min_ratio: min / max, bounds: Some((min, max)) })
    }

    /// Grid values in decreasing order.
    pub fn values(&self, lambda_max: f64) -> Vec<f64> {
        let (lo, hi) = match self.bounds {
            Some((lo, hi)) => (lo, hi),
            None => (lambda_max * self.min_ratio, lambda_max),
        };
        if self.count < 2 || !(hi > 0.0) || !(lo > 0.0) {
            return Vec::new();
        }
        let hi = hi.ln();
        let lo = lo.ln();
        let step = (hi - lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| (hi - step * i as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectOptions {
    pub criteria: Vec<Criterion>,
    /// Defaults to `8 min(d, n - 1)`.
    pub max_steps: Option<usize>,
    pub grid: LambdaGrid,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            criteria: Criterion::ALL.to_vec(),
            max_steps: None,
            grid: LambdaGrid::default(),
        }
    }
}

impl SelectOptions {
    pub fn with_criteria(criteria: &[Criterion]) -> Self {
        Self { criteria: criteria.to_vec(), ..Self::default() }
    }
}

/// Score of a candidate under one criterion. Grid-based criteria also carry
/// the grid lambda at which the candidate attained its best value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CandidateScore {
    pub score: CriterionScore,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoredCandidate {
    pub candidate: CandidateModel,
    /// Missing for grid-based criteria when no grid point fell inside the
    /// candidate's lambda interval.
    pub scores: BTreeMap<Criterion, CandidateScore>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Choice {
    pub criterion: Criterion,
    pub subset: Vec<usize>,
    pub names: Vec<String>,
    pub score: f64,
    /// Lambda intervals `(lo, hi]` over which the path produces this subset.
    pub plateau: Vec<(f64, f64)>,
    /// Minimizing grid lambda, for criteria evaluated on the lambda grid.
    pub lambda: Option<f64>,
    /// Unpenalized refit on the standardized scale.
    pub fit: OlsFit,
    pub intercept: f64,
    /// Refit slopes on the raw covariate scale, aligned with `subset`.
    pub raw_coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub excluded: ExclusionCounts,
    /// Candidates that scored `+inf` (infeasible).
    pub infeasible: BTreeMap<Criterion, usize>,
    /// Grid points skipped because the effective degrees of freedom reached `n`.
    pub grid_df_overflow: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub n: usize,
    pub d: usize,
    pub lambda_max: f64,
    pub names: Vec<String>,
    pub candidates: Vec<ScoredCandidate>,
    pub chosen: BTreeMap<Criterion, Choice>,
    pub diagnostics: Diagnostics,
}

impl SelectionReport {
    pub fn chosen_subset(&self, criterion: Criterion) -> Option<&[usize]> {
        self.chosen.get(&criterion).map(|c| c.subset.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FitClass {
    Underfitted,
    Correct,
    Overfitted,
}

/// `Correct` iff `selected == truth`, `Overfitted` iff `selected` strictly
/// contains `truth`, `Underfitted` otherwise.
pub fn classify_fit(selected: &[usize], truth: &[usize]) -> FitClass {
    let covers = truth.iter().all(|t| selected.contains(t));
    if !covers {
        FitClass::Underfitted
    } else if selected.iter().all(|s| truth.contains(s)) {
        FitClass::Correct
    } else {
        FitClass::Overfitted
    }
}

/// Standardize, trace the lasso path, score every candidate under each
/// requested criterion and pick the minimizer.
pub fn select(dataset: &Dataset, criteria: &[Criterion]) -> Result<SelectionReport> {
    select_with(dataset, &SelectOptions::with_criteria(criteria))
}

pub fn select_with(dataset: &Dataset, opts: &SelectOptions) -> Result<SelectionReport> {
    let data = standardize(dataset)?;
    select_standardized(&data, opts)
}

pub fn select_standardized(data: &StandardizedDataset, opts: &SelectOptions) -> Result<SelectionReport> {
    if opts.criteria.is_empty() {
        return Err(Error::InvalidInput("no criterion requested".into()));
    }
    let (n, d) = data.x.shape();
    let gram = GramCache::new(data);
    let max_steps = opts.max_steps.unwrap_or_else(|| default_max_steps(n, d));
    let path = compute_lars_path_with_gram(data, &gram, max_steps)?;
    let cset = candidate_subsets(&path, data)?;

    let mut criteria = opts.criteria.clone();
    criteria.sort();
    criteria.dedup();

    let mut scored: Vec<ScoredCandidate> = cset
        .candidates
        .into_iter()
        .map(|candidate| ScoredCandidate { candidate, scores: BTreeMap::new() })
        .collect();
    let mut diagnostics = Diagnostics { excluded: cset.excluded, ..Diagnostics::default() };

    for &criterion in criteria.iter().filter(|c| c.uses_refit()) {
        for sc in scored.iter_mut() {
            let score = score_refit(criterion, &sc.candidate.fit)?;
            sc.scores.insert(criterion, CandidateScore { score, lambda: None });
        }
    }

    let grid_criteria: Vec<Criterion> = criteria.iter().copied().filter(|c| !c.uses_refit()).collect();
    if !grid_criteria.is_empty() {
        let points = grid_scores(data, &gram, &path, &scored, &opts.grid);
        diagnostics.grid_df_overflow = points.iter().filter(|p| p.overflow).count();
        for p in points.iter().filter(|p| !p.overflow) {
            for &criterion in &grid_criteria {
                let score = match criterion {
                    Criterion::Gcv => CriterionScore::finite(criterion, p.stats.gcv()),
                    _ => match p.stats.bic_tilde() {
                        Ok(v) => CriterionScore::finite(criterion, v),
                        Err(_) => CriterionScore::infeasible(criterion),
                    },
                };
                let entry = scored[p.candidate].scores.entry(criterion);
                let slot = entry.or_insert(CandidateScore { score, lambda: Some(p.lambda) });
                if score.feasible && (!slot.score.feasible || score.value < slot.score.value) {
                    *slot = CandidateScore { score, lambda: Some(p.lambda) };
                }
            }
        }
    }

    let names: Vec<String> = (0..d).map(|j| data.name(j)).collect();
    let mut chosen = BTreeMap::new();
    for &criterion in &criteria {
        let infeasible = scored
            .iter()
            .filter(|s| s.scores.get(&criterion).is_some_and(|cs| !cs.score.is_selectable()))
            .count();
        diagnostics.infeasible.insert(criterion, infeasible);
        let best = argmin(&scored, criterion).ok_or(Error::AllInfeasible(criterion))?;
        let sc = &scored[best];
        let cand = &sc.candidate;
        let cs = sc.scores[&criterion];
        let (intercept, raw) = data.to_raw_scale(&cand.subset, &cand.fit.beta);
        chosen.insert(
            criterion,
            Choice {
                criterion,
                subset: cand.subset.clone(),
                names: cand.subset.iter().map(|&j| names[j].clone()).collect(),
                score: cs.score.value,
                plateau: cand.intervals.clone(),
                lambda: cs.lambda,
                fit: cand.fit.clone(),
                intercept,
                raw_coefficients: raw,
            },
        );
    }

    Ok(SelectionReport {
        n,
        d,
        lambda_max: path.lambda_max,
        names,
        candidates: scored,
        chosen,
        diagnostics,
    })
}

/// Whether `(va, a)` beats `(vb, b)`: lower score, with near-ties broken by
/// smaller df and then the lexicographically smaller subset.
pub fn prefer(va: f64, a: &[usize], vb: f64, b: &[usize]) -> bool {
    let scale = va.abs().max(vb.abs());
    let tie = va == vb || (scale.is_finite() && (va - vb).abs() <= SCORE_TIE_TOL * scale);
    if tie {
        (a.len(), a) < (b.len(), b)
    } else {
        va < vb
    }
}

fn argmin(scored: &[ScoredCandidate], criterion: Criterion) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, sc) in scored.iter().enumerate() {
        let Some(cs) = sc.scores.get(&criterion) else { continue };
        if !cs.score.is_selectable() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let bs = scored[b].scores[&criterion].score.value;
                if prefer(cs.score.value, &sc.candidate.subset, bs, &scored[b].candidate.subset) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

struct GridPoint {
    lambda: f64,
    candidate: usize,
    stats: LassoFitStats,
    overflow: bool,
}

fn grid_scores(
    data: &StandardizedDataset,
    gram: &GramCache,
    path: &LassoPath,
    scored: &[ScoredCandidate],
    grid: &LambdaGrid,
) -> Vec<GridPoint> {
    let by_subset: HashMap<&[usize], usize> = scored
        .iter()
        .enumerate()
        .map(|(i, s)| (s.candidate.subset.as_slice(), i))
        .collect();
    let n = data.n();
    let mut out = Vec::new();
    for lambda in grid.values(path.lambda_max) {
        let beta = path.coefficients_at(lambda);
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let Some(&candidate) = by_subset.get(support.as_slice()) else { continue };
        let Some(stats) = lasso_stats_with_gram(data, gram, &support, &beta, lambda) else { continue };
        out.push(GridPoint {
            lambda,
            candidate,
            overflow: stats.df >= n as f64,
            stats,
        });
    }
    out
}

fn lasso_stats_with_gram(
    data: &StandardizedDataset,
    gram: &GramCache,
    support: &[usize],
    beta: &[f64],
    lambda: f64,
) -> Option<LassoFitStats> {
    let mut fitted = DVector::zeros(data.n());
    for &j in support {
        fitted.axpy(beta[j], &data.x.column(j), 1.0);
    }
    let rss = (&data.y - fitted).norm_squared();
    let g = gram.submatrix(support);
    let abs_beta: Vec<f64> = support.iter().map(|&j| beta[j].abs()).collect();
    let df = effective_df(&g, &abs_beta, lambda)?;
    Some(LassoFitStats { rss, df, n: data.n() })
}

/// Criterion values along a lambda grid, for plotting criterion curves.
#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub lambda: f64,
    pub active_size: usize,
    pub lr: Option<f64>,
    pub bic: Option<f64>,
    pub gcv: Option<f64>,
    pub bic_tilde: Option<f64>,
}

/// Evaluates every criterion at each grid lambda. The loss rank and BIC are
/// step functions (they depend on lambda only through the active set);
/// GCV and BIC-tilde vary continuously.
pub fn criterion_traces(data: &StandardizedDataset, path: &LassoPath, grid: &[f64]) -> Result<Vec<TracePoint>> {
    let gram = GramCache::new(data);
    let cset = candidate_subsets(path, data)?;
    let by_subset: HashMap<&[usize], &CandidateModel> =
        cset.candidates.iter().map(|c| (c.subset.as_slice(), c)).collect();
    let finite = |s: CriterionScore| s.feasible.then_some(s.value);
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let beta = path.coefficients_at(lambda);
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let mut point = TracePoint {
            lambda,
            active_size: support.len(),
            lr: None,
            bic: None,
            gcv: None,
            bic_tilde: None,
        };
        if let Some(cand) = by_subset.get(support.as_slice()) {
            point.lr = finite(score_refit(Criterion::LossRank, &cand.fit)?);
            point.bic = finite(score_refit(Criterion::Bic, &cand.fit)?);
        }
        if !support.is_empty() && support.len() < data.n() {
            if let Some(stats) = lasso_stats_with_gram(data, &gram, &support, &beta, lambda) {
                if stats.df < data.n() as f64 {
                    point.gcv = Some(stats.gcv());
                    point.bic_tilde = stats.bic_tilde().ok();
                }
            }
        }
        out.push(point);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(classify_fit(&[0, 1, 4], &[0, 1, 4]), FitClass::Correct);
        assert_eq!(classify_fit(&[0, 1, 4, 6], &[0, 1, 4]), FitClass::Overfitted);
        assert_eq!(classify_fit(&[0, 1], &[0, 1, 4]), FitClass::Underfitted);
        assert_eq!(classify_fit(&[0, 1, 6], &[0, 1, 4]), FitClass::Underfitted);
        assert_eq!(classify_fit(&[], &[2]), FitClass::Underfitted);
    }

    #[test]
    fn tie_break_prefers_parsimony() {
        assert!(prefer(1.0, &[0], 1.0 + 1e-12, &[0, 1]));
        assert!(!prefer(1.0, &[0, 1], 1.0, &[2]));
        assert!(prefer(1.0, &[0, 2], 1.0, &[1, 2]));
        assert!(prefer(0.5, &[0, 1, 2], 1.0, &[0]));
        assert!(prefer(f64::NEG_INFINITY, &[0, 1, 2], 323.0, &[0]));
        assert!(!prefer(323.0, &[0], f64::NEG_INFINITY, &[0, 1, 2]));
        assert!(prefer(f64::NEG_INFINITY, &[0], f64::NEG_INFINITY, &[0, 1]));
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = LambdaGrid { count: 5, min_ratio: 1e-4, bounds: None }.values(10.0);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 10.0).abs() < 1e-12);
        assert!((g[4] - 1e-3).abs() < 1e-15);
        assert!((g[1] / g[0] - g[2] / g[1]).abs() < 1e-12);
        let a = LambdaGrid::absolute(0.01, 10.0, 4).unwrap().values(123.0);
        assert!((a[0] - 10.0).abs() < 1e-12 && (a[3] - 0.01).abs() < 1e-15);
        assert!(LambdaGrid::absolute(1.0, 1.0, 4).is_err());
        assert!(LambdaGrid::absolute(0.1, 1.0, 1).is_err());
    }

    #[test]
    fn exact_linear_relation() {
        use nalgebra::DMatrix;
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 4.0, 7.0, 11.0]);
        let y = x.column(0) * 2.0;
        let ds = Dataset::new(x, y, None).unwrap();
        let report = select(&ds, &[Criterion::LossRank, Criterion::Bic]).unwrap();
        for c in [Criterion::LossRank, Criterion::Bic] {
            let choice = &report.chosen[&c];
            assert_eq!(choice.subset, vec![0]);
            assert!((choice.raw_coefficients[0] - 2.0).abs() < 1e-12);
            assert!(choice.intercept.abs() < 1e-12);
        }
    }
}
