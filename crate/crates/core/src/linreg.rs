//! Dense least-squares primitives: dataset validation, standardization and
//! ordinary least-squares refits of covariate subsets.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative singular-value floor below which a design submatrix is treated as
/// rank-deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Raw regression data: `n` observations of `d` covariates and a response.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, names: Option<Vec<String>>) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 rows, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidInput("need at least one covariate".into()));
        }
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "design has {n} rows but response has {} entries",
                y.len()
            )));
        }
        if let Some(names) = &names {
            if names.len() != d {
                return Err(Error::InvalidInput(format!(
                    "{} covariate names given for {d} columns",
                    names.len()
                )));
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { x, y, names })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Same data with the response multiplied by `c`.
    pub fn with_scaled_response(&self, c: f64) -> Self {
        Self {
            x: self.x.clone(),
            y: &self.y * c,
            names: self.names.clone(),
        }
    }
}

/// Centered response and centered, unit-variance design, plus the transform
/// needed to map coefficients back to the raw scale.
#[derive(Debug, Clone)]
pub struct StandardizedDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub col_scales: Vec<f64>,
    pub col_means: Vec<f64>,
    pub y_mean: f64,
    pub names: Option<Vec<String>>,
}

impl StandardizedDataset {
    /// Wraps data that the caller has already prepared, with an identity
    /// transform. No centering or scaling is applied.
    pub fn from_prepared(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let d = x.ncols();
        let ds = Dataset::new(x, y, None)?;
        Ok(Self {
            x: ds.x,
            y: ds.y,
            col_scales: vec![1.0; d],
            col_means: vec![0.0; d],
            y_mean: 0.0,
            names: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn y_sq_norm(&self) -> f64 {
        squared_norm(self.y.as_slice())
    }

    /// Covariate label, falling back to the 1-based column number.
    pub fn name(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    /// The standardized values as a plain dataset (used to re-standardize).
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: self.y.clone(),
            names: self.names.clone(),
        }
    }

    /// Maps standardized-scale coefficients on `subset` to raw-scale slopes
    /// and an intercept.
    pub fn to_raw_scale(&self, subset: &[usize], beta: &[f64]) -> (f64, Vec<f64>) {
        let slopes: Vec<f64> = subset
            .iter()
            .zip(beta)
            .map(|(&j, &b)| b / self.col_scales[j])
            .collect();
        let intercept = self.y_mean
            - subset
                .iter()
                .zip(&slopes)
                .map(|(&j, &s)| s * self.col_means[j])
                .sum::<f64>();
        (intercept, slopes)
    }

    pub(crate) fn columns(&self, subset: &[usize]) -> DMatrix<f64> {
        self.x.select_columns(subset)
    }
}

/// Ordinary least-squares refit of one covariate subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub subset: Vec<usize>,
    /// Coefficients on the standardized scale, aligned with `subset`.
    pub beta: Vec<f64>,
    pub rss: f64,
    /// `rss / n`
    pub sigma2_hat: f64,
    /// `rss / ||y||^2`
    pub rho: f64,
    pub df: usize,
    pub n: usize,
    pub y_sq_norm: f64,
}

pub fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Centers the response and centers/scales every covariate column to unit
/// sample standard deviation (divisor `n - 1`).
pub fn standardize(data: &Dataset) -> Result<StandardizedDataset> {
    let (n, d) = data.x.shape();
    let nf = n as f64;
    let mut x = data.x.clone();
    let mut col_means = Vec::with_capacity(d);
    let mut col_scales = Vec::with_capacity(d);
    for j in 0..d {
        let mut col = x.column_mut(j);
        let mean = col.sum() / nf;
        col.add_scalar_mut(-mean);
        let var = col.norm_squared() / (nf - 1.0);
        let sd = var.sqrt();
        // Zero variance, or variance that is pure rounding noise of the mean.
        if sd == 0.0 || sd <= 1e-12 * mean.abs() {
            return Err(Error::ConstantColumn(j));
        }
        col /= sd;
        col_means.push(mean);
        col_scales.push(sd);
    }
    let y_mean = data.y.sum() / nf;
    let y = data.y.add_scalar(-y_mean);
    Ok(StandardizedDataset {
        x,
        y,
        col_scales,
        col_means,
        y_mean,
        names: data.names.clone(),
    })
}

fn validate_subset(subset: &[usize], d: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    for (i, &j) in subset.iter().enumerate() {
        if j >= d {
            return Err(Error::InvalidInput(format!("column index {j} out of range (d = {d})")));
        }
        if subset[..i].contains(&j) {
            return Err(Error::InvalidInput(format!("column index {j} repeated")));
        }
    }
    Ok(())
}

/// Least-squares refit of `subset` via a column-pivoted QR factorization.
pub fn ols_fit(data: &StandardizedDataset, subset: &[usize]) -> Result<OlsFit> {
    let (n, d) = data.x.shape();
    validate_subset(subset, d)?;
    let k = subset.len();
    if k > n - 1 {
        return Err(Error::InvalidInput(format!(
            "subset size {k} exceeds n - 1 = {}",
            n - 1
        )));
    }
    let xs = data.columns(subset);
    let beta = least_squares(xs.clone(), &data.y).ok_or_else(|| Error::RankDeficient(subset.to_vec()))?;

    let resid = &data.y - &xs * &beta;
    let rss = resid.norm_squared();
    let y_sq_norm = data.y_sq_norm();
    let rho = if y_sq_norm > 0.0 { rss / y_sq_norm } else { 0.0 };
    Ok(OlsFit {
        subset: subset.to_vec(),
        beta: beta.as_slice().to_vec(),
        rss,
        sigma2_hat: rss / n as f64,
        rho,
        df: k,
        n,
        y_sq_norm,
    })
}

/// Solves `min ||a b - y||` for a tall full-rank `a`; `None` when the
/// pivoted triangular factor signals numerical rank deficiency.
pub(crate) fn least_squares(a: DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let k = a.ncols();
    let qr = a.col_piv_qr();
    let (q, r, p) = qr.unpack();
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < RANK_TOL * max {
        return None;
    }
    let qty = q.tr_mul(y);
    let r_sq = r.view((0, 0), (k, k));
    let mut z = r_sq.solve_upper_triangular(&qty)?;
    p.inv_permute_rows(&mut z);
    Some(z)
}

/// Thin QR factorization of a changing set of columns of a standardized
/// design, updated by Gram-Schmidt (with one reorthogonalization pass) when a
/// column is added and by Givens rotations when one is removed.
pub(crate) struct UpdatableQr {
    cols: Vec<usize>,
    q: Vec<Vec<f64>>,
    /// Column `c` holds the `c + 1` nonzero entries of column `c` of R.
    r: Vec<Vec<f64>>,
}

impl UpdatableQr {
    pub(crate) fn new() -> Self {
        Self { cols: Vec::new(), q: Vec::new(), r: Vec::new() }
    }

    /// Brings the factored set to `target` (any order). Returns `false` when
    /// a new column is numerically dependent on the others; the factorization
    /// is then left empty.
    pub(crate) fn set_columns(&mut self, data: &StandardizedDataset, target: &[usize]) -> bool {
        let mut pos = 0;
        while pos < self.cols.len() {
            if target.contains(&self.cols[pos]) {
                pos += 1;
            } else {
                self.remove(pos);
            }
        }
        for &j in target {
            if !self.cols.contains(&j) && !self.push(data, j) {
                *self = Self::new();
                return false;
            }
        }
        true
    }

    fn push(&mut self, data: &StandardizedDataset, j: usize) -> bool {
        let col = data.x.column(j);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm0 = squared_norm(&v).sqrt();
        let k = self.q.len();
        let mut h = vec![0.0; k];
        for _ in 0..2 {
            for (c, qc) in self.q.iter().enumerate() {
                let dot: f64 = qc.iter().zip(&v).map(|(a, b)| a * b).sum();
                h[c] += dot;
                for (vi, qi) in v.iter_mut().zip(qc) {
                    *vi -= dot * qi;
                }
            }
        }
        let rkk = squared_norm(&v).sqrt();
        let max_diag = self.r.iter().enumerate().map(|(c, rc)| rc[c].abs()).fold(norm0, f64::max);
        if !(rkk > RANK_TOL * max_diag) {
            return false;
        }
        for vi in v.iter_mut() {
            *vi /= rkk;
        }
        h.push(rkk);
        self.q.push(v);
        self.r.push(h);
        self.cols.push(j);
        true
    }

    fn remove(&mut self, pos: usize) {
        self.cols.remove(pos);
        self.r.remove(pos);
        let k = self.r.len();
        for j in pos..k {
            let (a, b) = (self.r[j][j], self.r[j][j + 1]);
            let rho = a.hypot(b);
            if rho > 0.0 {
                let (c, s) = (a / rho, b / rho);
                for rc in self.r[j..].iter_mut() {
                    let (x, y) = (rc[j], rc[j + 1]);
                    rc[j] = c * x + s * y;
                    rc[j + 1] = -s * x + c * y;
                }
                let (left, right) = self.q.split_at_mut(j + 1);
                for (x, y) in left[j].iter_mut().zip(right[0].iter_mut()) {
                    let (u, w) = (*x, *y);
                    *x = c * u + s * w;
                    *y = -s * u + c * w;
                }
            }
            self.r[j].pop();
        }
        self.q.pop();
    }

    /// Least-squares fit on the factored columns, as an [`OlsFit`] over the
    /// sorted subset. The residual is recomputed from the data and rejected
    /// (`None`) if it is not orthogonal to the columns to working precision.
    pub(crate) fn fit(&self, data: &StandardizedDataset) -> Option<OlsFit> {
        let k = self.cols.len();
        if k == 0 {
            return None;
        }
        let y = data.y.as_slice();
        let qty: Vec<f64> = self.q.iter().map(|qc| qc.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
        let mut coef = qty;
        for i in (0..k).rev() {
            let mut acc = coef[i];
            for c in i + 1..k {
                acc -= self.r[c][i] * coef[c];
            }
            coef[i] = acc / self.r[i][i];
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| self.cols[i]);
        let subset: Vec<usize> = order.iter().map(|&i| self.cols[i]).collect();
        let beta: Vec<f64> = order.iter().map(|&i| coef[i]).collect();

        let mut resid = data.y.clone();
        for (&j, &b) in subset.iter().zip(&beta) {
            resid.axpy(-b, &data.x.column(j), 1.0);
        }
        let y_norm = data.y.norm();
        for &j in &subset {
            let col = data.x.column(j);
            if col.dot(&resid).abs() > 1e-8 * y_norm * col.norm() {
                return None;
            }
        }
        let rss = resid.norm_squared();
        let n = data.n();
        let y_sq_norm = data.y_sq_norm();
        Some(OlsFit {
            subset,
            beta,
            rss,
            sigma2_hat: rss / n as f64,
            rho: if y_sq_norm > 0.0 { rss / y_sq_norm } else { 0.0 },
            df: k,
            n,
            y_sq_norm,
        })
    }
}
