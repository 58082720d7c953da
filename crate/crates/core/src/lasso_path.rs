//! Lasso solution path by least angle regression with the lasso
//! modification (an active coefficient that crosses zero leaves the set).
//!
//! The penalty is parameterized as `||y - X b||^2 + lambda * sum |b_j|`, so
//! the stationarity conditions read `2 x_j'r = lambda sign(b_j)` on the
//! active set and `|2 x_j'r| <= lambda` elsewhere, and
//! `lambda_max = 2 max_j |x_j'y|`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linreg::{ols_fit, OlsFit, StandardizedDataset, UpdatableQr};

/// Relative tolerance used to decide simultaneous entries.
const TIE_TOL: f64 = 1e-12;
/// Relative equiangular residual that triggers a full refactorization.
const DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct PathSegment {
    pub lambda_hi: f64,
    pub lambda_lo: f64,
    /// Sorted active indices.
    pub active: Vec<usize>,
    pub beta_hi: Vec<f64>,
    pub beta_lo: Vec<f64>,
}

impl PathSegment {
    /// Affine interpolation; `lambda` is expected in `[lambda_lo, lambda_hi]`.
    pub fn coefficients_at(&self, lambda: f64) -> Vec<f64> {
        let width = self.lambda_hi - self.lambda_lo;
        let t = if width > 0.0 { (self.lambda_hi - lambda) / width } else { 1.0 };
        self.beta_hi
            .iter()
            .zip(&self.beta_lo)
            .map(|(hi, lo)| hi + t * (lo - hi))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathEvent {
    Enter(usize),
    Leave(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct Breakpoint {
    pub lambda: f64,
    pub event: PathEvent,
    /// Active-set size after the event.
    pub active_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// The residual correlation vanished (the path reached `lambda = 0`).
    ReachedZero,
    /// The active set holds `n - 1` covariates and another one would have to
    /// enter; the path stops at that `lambda`.
    Saturated,
    MaxSteps,
    /// `y` is orthogonal to every column.
    EmptyPath,
}

#[derive(Debug, Clone, Serialize)]
pub struct LassoPath {
    pub segments: Vec<PathSegment>,
    pub breakpoints: Vec<Breakpoint>,
    pub lambda_max: f64,
    pub n: usize,
    pub d: usize,
    pub termination: Termination,
}

impl LassoPath {
    /// Smallest `lambda` covered by the path (0 unless truncated).
    pub fn lambda_min(&self) -> f64 {
        self.segments.last().map_or(self.lambda_max, |s| s.lambda_lo)
    }

    /// Lasso coefficients at `lambda`; zero at or above `lambda_max`, and the
    /// path endpoint below [`lambda_min`](Self::lambda_min).
    pub fn coefficients_at(&self, lambda: f64) -> Vec<f64> {
        if lambda >= self.lambda_max || self.segments.is_empty() {
            return vec![0.0; self.d];
        }
        // segments are ordered by decreasing lambda
        let idx = self.segments.partition_point(|s| s.lambda_lo >= lambda);
        match self.segments.get(idx) {
            Some(seg) => seg.coefficients_at(lambda),
            None => self.segments.last().map(|s| s.beta_lo.clone()).unwrap_or_default(),
        }
    }

    /// Active set at `lambda` (empty at or above `lambda_max`).
    pub fn active_at(&self, lambda: f64) -> &[usize] {
        if lambda >= self.lambda_max || self.segments.is_empty() {
            return &[];
        }
        let idx = self.segments.partition_point(|s| s.lambda_lo >= lambda);
        let idx = idx.min(self.segments.len() - 1);
        &self.segments[idx].active
    }
}

pub fn default_max_steps(n: usize, d: usize) -> usize {
    8 * d.min(n - 1).max(1)
}

/// Gram matrix `X'X` and `X'y` of a standardized dataset.
#[derive(Debug, Clone)]
pub struct GramCache {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl GramCache {
    pub fn new(data: &StandardizedDataset) -> Self {
        Self {
            xtx: data.x.tr_mul(&data.x),
            xty: data.x.tr_mul(&data.y),
        }
    }

    pub(crate) fn submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        DMatrix::from_fn(k, k, |r, c| self.xtx[(idx[r], idx[c])])
    }
}

/// Lower Cholesky factor of the active Gram block, stored by rows, updated
/// in place as columns enter and leave.
#[derive(Debug, Default)]
struct CholFactor {
    rows: Vec<Vec<f64>>,
}

impl CholFactor {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&z).map(|(l, zj)| l * zj).sum();
            z.push((b[i] - s) / row[i]);
        }
        z
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        let k = x.len();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.rows[j][i] * x[j];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }

    /// Appends a column with cross-products `g` against the current set and
    /// squared norm `g_jj`. Fails when the column is numerically in the span.
    fn push(&mut self, g: &[f64], g_jj: f64) -> bool {
        let mut w = self.forward(g);
        let diag2 = g_jj - w.iter().map(|v| v * v).sum::<f64>();
        if !(diag2 > 1e-10 * g_jj.max(f64::MIN_POSITIVE)) {
            return false;
        }
        w.push(diag2.sqrt());
        self.rows.push(w);
        true
    }

    /// Deletes position `p`, restoring triangularity with Givens rotations.
    fn remove(&mut self, p: usize) {
        self.rows.remove(p);
        let k = self.rows.len();
        // rows p.. now carry one extra trailing entry each
        for i in p..k {
            let a = self.rows[i][i];
            let b = self.rows[i][i + 1];
            let r = a.hypot(b);
            let (c, s) = if r > 0.0 { (a / r, b / r) } else { (1.0, 0.0) };
            for row in self.rows[i..].iter_mut() {
                let (x, y) = (row[i], row[i + 1]);
                row[i] = c * x + s * y;
                row[i + 1] = -s * x + c * y;
            }
            self.rows[i][i] = r;
            self.rows[i].truncate(i + 1);
        }
    }

    fn rebuild(gram: &DMatrix<f64>) -> Option<Self> {
        let mut f = Self::default();
        for j in 0..gram.nrows() {
            let g: Vec<f64> = (0..j).map(|i| gram[(i, j)]).collect();
            if !f.push(&g, gram[(j, j)]) {
                return None;
            }
        }
        Some(f)
    }
}

/// Traces the lasso path from `lambda_max` down to 0 (or until the path
/// saturates or `max_steps` segments have been computed).
pub fn compute_lars_path(data: &StandardizedDataset, max_steps: usize) -> Result<LassoPath> {
    let gram = GramCache::new(data);
    compute_lars_path_with_gram(data, &gram, max_steps)
}

pub fn compute_lars_path_with_gram(
    data: &StandardizedDataset,
    gram: &GramCache,
    max_steps: usize,
) -> Result<LassoPath> {
    if max_steps < 1 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    let (n, d) = data.x.shape();
    let xtx = &gram.xtx;
    let xty = &gram.xty;

    let c_max0 = xty.amax();
    let mut path = LassoPath {
        segments: Vec::new(),
        breakpoints: Vec::new(),
        lambda_max: 2.0 * c_max0,
        n,
        d,
        termination: Termination::EmptyPath,
    };
    let col_norm = (0..d).map(|j| xtx[(j, j)]).fold(0.0f64, f64::max).sqrt();
    if c_max0 <= 1e-13 * data.y.norm() * col_norm {
        path.lambda_max = 0.0;
        return Ok(path);
    }
    let max_active = d.min(n - 1);

    let mut beta = vec![0.0; d];
    let mut corr: Vec<f64> = xty.iter().cloned().collect();
    let mut c_max = c_max0;
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; d];
    let mut chol = CholFactor::default();
    let mut just_dropped: Option<usize> = None;

    // first entrant: lowest index among ties
    let first = (0..d)
        .find(|&j| corr[j].abs() >= c_max * (1.0 - TIE_TOL))
        .expect("max exists");
    enter(first, &corr, xtx, &mut active, &mut signs, &mut in_active, &mut chol)?;
    path.breakpoints.push(Breakpoint {
        lambda: 2.0 * c_max,
        event: PathEvent::Enter(first),
        active_size: 1,
    });

    let mut steps = 0;
    loop {
        if steps >= max_steps {
            path.termination = Termination::MaxSteps;
            break;
        }
        steps += 1;

        // equiangular direction: G_AA dir = signs
        let mut dir = chol.solve(&signs);
        if equiangular_residual(xtx, &active, &dir, &signs) > DRIFT_TOL {
            let g = gram.submatrix(&active);
            chol = CholFactor::rebuild(&g).ok_or(Error::DegenerateDesign(*active.last().unwrap()))?;
            dir = chol.solve(&signs);
        }

        // a = X' X_A dir
        let mut a = vec![0.0; d];
        for (&j, &dj) in active.iter().zip(&dir) {
            for (ai, g) in a.iter_mut().zip(xtx.column(j).iter()) {
                *ai += dj * g;
            }
        }

        let mut gamma = c_max;
        let mut event: Option<PathEvent> = None;
        let tie = TIE_TOL * c_max;

        if active.len() < d {
            for j in 0..d {
                if in_active[j] {
                    continue;
                }
                for (num, den) in [(c_max - corr[j], 1.0 - a[j]), (c_max + corr[j], 1.0 + a[j])] {
                    // a variable that just left sits on the boundary it crossed
                    if den <= 1e-12 || (Some(j) == just_dropped && num.abs() <= tie * 1e3) {
                        continue;
                    }
                    let g = (num / den).max(0.0);
                    if num / den < -tie * 1e3 {
                        continue;
                    }
                    if g < gamma - tie {
                        gamma = g;
                        event = Some(PathEvent::Enter(j));
                    }
                }
            }
        }
        for (pos, &j) in active.iter().enumerate() {
            if beta[j] == 0.0 || dir[pos] == 0.0 {
                continue;
            }
            let g = -beta[j] / dir[pos];
            if g > 0.0 && g < gamma - tie {
                gamma = g;
                event = Some(PathEvent::Leave(j));
            }
        }
        if gamma < 0.0 {
            return Err(Error::NoProgress(gamma));
        }

        // An entry that cannot be accommodated ends the path here.
        if let Some(PathEvent::Enter(_)) = event {
            if active.len() >= max_active {
                let beta_lo = advanced(&beta, &active, &dir, gamma);
                push_segment(&mut path, c_max, c_max - gamma, &active, &beta, &beta_lo);
                path.termination = Termination::Saturated;
                break;
            }
        }

        let beta_lo = advanced(&beta, &active, &dir, gamma);
        let c_next = if event.is_none() { 0.0 } else { (c_max - gamma).max(0.0) };
        push_segment(&mut path, c_max, c_next, &active, &beta, &beta_lo);
        beta = beta_lo;
        c_max = c_next;
        just_dropped = None;

        // refresh correlations c = X'y - X'X beta
        corr.copy_from_slice(xty.as_slice());
        for &j in &active {
            let bj = beta[j];
            if bj != 0.0 {
                for (ci, g) in corr.iter_mut().zip(xtx.column(j).iter()) {
                    *ci -= bj * g;
                }
            }
        }

        match event {
            None => {
                path.termination = Termination::ReachedZero;
                break;
            }
            Some(PathEvent::Enter(j)) => {
                enter(j, &corr, xtx, &mut active, &mut signs, &mut in_active, &mut chol)?;
            }
            Some(PathEvent::Leave(j)) => {
                let pos = active.iter().position(|&v| v == j).expect("active");
                beta[j] = 0.0;
                active.remove(pos);
                signs.remove(pos);
                in_active[j] = false;
                chol.remove(pos);
                just_dropped = Some(j);
            }
        }
        path.breakpoints.push(Breakpoint {
            lambda: 2.0 * c_max,
            event: event.expect("handled above"),
            active_size: active.len(),
        });
        if c_max <= 1e-13 * c_max0 {
            path.termination = Termination::ReachedZero;
            break;
        }
    }
    Ok(path)
}

fn enter(
    j: usize,
    corr: &[f64],
    xtx: &DMatrix<f64>,
    active: &mut Vec<usize>,
    signs: &mut Vec<f64>,
    in_active: &mut [bool],
    chol: &mut CholFactor,
) -> Result<()> {
    let g: Vec<f64> = active.iter().map(|&i| xtx[(i, j)]).collect();
    if !chol.push(&g, xtx[(j, j)]) {
        return Err(Error::DegenerateDesign(j));
    }
    active.push(j);
    signs.push(if corr[j] >= 0.0 { 1.0 } else { -1.0 });
    in_active[j] = true;
    debug_assert_eq!(chol.len(), active.len());
    Ok(())
}

fn advanced(beta: &[f64], active: &[usize], dir: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = beta.to_vec();
    for (&j, &dj) in active.iter().zip(dir) {
        out[j] += gamma * dj;
    }
    out
}

fn equiangular_residual(xtx: &DMatrix<f64>, active: &[usize], dir: &[f64], signs: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (r, &i) in active.iter().enumerate() {
        let v: f64 = active.iter().zip(dir).map(|(&j, &dj)| xtx[(i, j)] * dj).sum();
        worst = worst.max((v - signs[r]).abs());
    }
    worst
}

fn push_segment(path: &mut LassoPath, c_hi: f64, c_lo: f64, active: &[usize], beta_hi: &[f64], beta_lo: &[f64]) {
    // zero-length segments (simultaneous events) carry no interval
    if c_hi - c_lo <= TIE_TOL * c_hi {
        return;
    }
    let mut sorted = active.to_vec();
    sorted.sort_unstable();
    path.segments.push(PathSegment {
        lambda_hi: 2.0 * c_hi,
        lambda_lo: 2.0 * c_lo,
        active: sorted,
        beta_hi: beta_hi.to_vec(),
        beta_lo: beta_lo.to_vec(),
    });
}

/// Worst violations of the lasso stationarity conditions at `beta`:
/// `(max_j inactive (|2 x_j'r| - lambda), max_j active |2 x_j'r - lambda sign(b_j)|)`.
pub fn kkt_violations(data: &StandardizedDataset, beta: &[f64], lambda: f64) -> (f64, f64) {
    let b = DVector::from_column_slice(beta);
    let r = &data.y - &data.x * b;
    let grad = data.x.tr_mul(&r) * 2.0;
    let mut inactive = f64::NEG_INFINITY;
    let mut active = 0.0f64;
    for (j, g) in grad.iter().enumerate() {
        if beta[j] == 0.0 {
            inactive = inactive.max(g.abs() - lambda);
        } else {
            active = active.max((g - lambda * beta[j].signum()).abs());
        }
    }
    (inactive, active)
}

/// Lasso objective `||y - X b||^2 + lambda ||b||_1`.
pub fn lasso_objective(data: &StandardizedDataset, beta: &[f64], lambda: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    (&data.y - &data.x * b).norm_squared() + lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
}

/// A distinct active set from the path, with its least-squares refit.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateModel {
    pub subset: Vec<usize>,
    /// `(lo, hi]` intervals on which this subset is the active set, by
    /// decreasing lambda. Usually a single interval; a subset can recur after
    /// a drop and re-entry.
    pub intervals: Vec<(f64, f64)>,
    pub df: usize,
    pub fit: OlsFit,
}

impl CandidateModel {
    pub fn lambda_interval(&self) -> (f64, f64) {
        self.intervals[0]
    }

    pub fn contains_lambda(&self, lambda: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lambda > lo && lambda <= hi)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExclusionCounts {
    /// `df > n - 1`
    pub too_large: usize,
    pub rank_deficient: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateSet {
    pub candidates: Vec<CandidateModel>,
    pub excluded: ExclusionCounts,
}

/// One candidate per distinct nonempty active set on the path, in order of
/// first appearance (decreasing lambda). Sets with more than `n - 1`
/// covariates or a rank-deficient design are excluded.
pub fn candidate_subsets(path: &LassoPath, data: &StandardizedDataset) -> Result<CandidateSet> {
    let n = data.n();
    let mut order: Vec<(Vec<usize>, Vec<(f64, f64)>)> = Vec::new();
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    for seg in &path.segments {
        if seg.active.is_empty() {
            continue;
        }
        match index.get(seg.active.as_slice()) {
            Some(&i) => {
                let intervals = &mut order[i].1;
                let last = intervals.last_mut().expect("nonempty");
                if last.0 == seg.lambda_hi {
                    last.0 = seg.lambda_lo;
                } else {
                    intervals.push((seg.lambda_lo, seg.lambda_hi));
                }
            }
            None => {
                index.insert(seg.active.as_slice(), order.len());
                order.push((seg.active.clone(), vec![(seg.lambda_lo, seg.lambda_hi)]));
            }
        }
    }

    let mut excluded = ExclusionCounts::default();
    let mut candidates = Vec::with_capacity(order.len());
    // consecutive candidates differ in few columns, so one factorization is
    // updated along the way; a fresh pivoted QR decides the doubtful cases
    let mut qr = UpdatableQr::new();
    for (subset, intervals) in order {
        if subset.len() > n - 1 {
            excluded.too_large += 1;
            continue;
        }
        let fast = if qr.set_columns(data, &subset) { qr.fit(data) } else { None };
        let fit = match fast {
            Some(fit) => Ok(fit),
            None => ols_fit(data, &subset),
        };
        match fit {
            Ok(fit) => candidates.push(CandidateModel {
                df: subset.len(),
                subset,
                intervals,
                fit,
            }),
            Err(Error::RankDeficient(_)) => excluded.rank_deficient += 1,
            Err(e) => return Err(e),
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(CandidateSet { candidates, excluded })
}
