//! Monte Carlo studies on AR(1) Gaussian designs.
//!
//! Each replication draws from its own ChaCha stream, keyed by the study
//! seed, the replication index and a role tag, so a study gives the same
//! tally whatever the number of worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::Criterion;
use crate::error::{Error, Result};
use crate::linreg::Dataset;
use crate::selector::{classify_fit, select, FitClass};

const ROLE_DESIGN: u64 = 0;
const ROLE_NOISE: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimDesign {
    pub n: usize,
    pub d: usize,
    pub beta_true: Vec<f64>,
    pub sigma: f64,
    /// AR(1) correlation: `corr(x_i, x_j) = corr^|i - j|`.
    pub corr: f64,
    pub reps: usize,
    pub criteria: Vec<Criterion>,
    pub seed: u64,
    /// Draw the design once and reuse it in every replication.
    pub fixed_design: bool,
}

impl SimDesign {
    /// `beta = (3, 1.5, 0, 0, 2, 0, 0, 0)`, `corr = 0.5`, 100 replications.
    pub fn example1(sigma: f64, n: usize) -> Self {
        Self {
            n,
            d: 8,
            beta_true: vec![3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
            sigma,
            corr: 0.5,
            reps: 100,
            criteria: Criterion::ALL.to_vec(),
            seed: 1,
            fixed_design: false,
        }
    }

    /// `d = 300`, coefficients 30, 60, ..., 300 (1-based) equal to 10.
    pub fn example2(sigma: f64, n: usize) -> Self {
        let d = 300;
        let beta_true = (0..d).map(|j| if (j + 1) % 30 == 0 { 10.0 } else { 0.0 }).collect();
        Self {
            n,
            d,
            beta_true,
            sigma,
            corr: 0.5,
            reps: 100,
            criteria: Criterion::ALL.to_vec(),
            seed: 1,
            fixed_design: false,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_criteria(mut self, criteria: &[Criterion]) -> Self {
        self.criteria = criteria.to_vec();
        self
    }

    /// Indices of the nonzero true coefficients.
    pub fn truth(&self) -> Vec<usize> {
        (0..self.d).filter(|&j| self.beta_true[j] != 0.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_true.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "beta_true has {} entries, expected d = {}",
                self.beta_true.len(),
                self.d
            )));
        }
        if self.truth().is_empty() {
            return Err(Error::InvalidInput("beta_true has no nonzero entry".into()));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput("n must be at least 2".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.corr) {
            return Err(Error::InvalidInput(format!("corr must lie in [0, 1), got {}", self.corr)));
        }
        if self.criteria.is_empty() {
            return Err(Error::InvalidInput("no criterion requested".into()));
        }
        Ok(())
    }

    fn rng(&self, rep: usize, role: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((rep as u64) << 8) | role);
        rng
    }
}

/// Toeplitz matrix `corr^|i - j|`.
pub fn ar1_covariance(d: usize, corr: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| corr.powi(i.abs_diff(j) as i32))
}

/// Lower Cholesky factor of [`ar1_covariance`].
pub fn ar1_cholesky(d: usize, corr: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&corr) {
        return Err(Error::DomainError(format!("corr must lie in [0, 1), got {corr}")));
    }
    ar1_covariance(d, corr)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::DomainError("AR(1) covariance is not positive definite".into()))
}

/// `n` independent rows from `N(0, Sigma)` with `Sigma = corr^|i - j|`.
pub fn sample_ar1_design<R: Rng + ?Sized>(n: usize, d: usize, corr: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let l = ar1_cholesky(d, corr)?;
    Ok(sample_with_factor(n, &l, rng))
}

fn sample_with_factor<R: Rng + ?Sized>(n: usize, l: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let d = l.nrows();
    // row-major fill so that the stream layout does not depend on storage order
    let z = DMatrix::from_row_iterator(n, d, (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    z * l.transpose()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CriterionOutcome {
    pub class: FitClass,
    pub zeros: usize,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub outcomes: BTreeMap<Criterion, CriterionOutcome>,
}

/// The response and design of one replication.
pub fn replication_data(design: &SimDesign, rep: usize) -> Result<Dataset> {
    design.validate()?;
    if rep >= design.reps {
        return Err(Error::InvalidInput(format!("rep {rep} out of range (reps = {})", design.reps)));
    }
    let l = ar1_cholesky(design.d, design.corr)?;
    let design_rep = if design.fixed_design { 0 } else { rep };
    let x = sample_with_factor(design.n, &l, &mut design.rng(design_rep, ROLE_DESIGN));
    let mut noise_rng = design.rng(rep, ROLE_NOISE);
    let beta = DVector::from_column_slice(&design.beta_true);
    let mut y = &x * beta;
    for v in y.iter_mut() {
        let e: f64 = noise_rng.sample(StandardNormal);
        *v += design.sigma * e;
    }
    Dataset::new(x, y, None)
}

pub fn run_replication(design: &SimDesign, rep: usize) -> Result<ReplicationOutcome> {
    let data = replication_data(design, rep)?;
    let report = select(&data, &design.criteria)?;
    let truth = design.truth();
    let outcomes = report
        .chosen
        .iter()
        .map(|(&c, choice)| {
            let outcome = CriterionOutcome {
                class: classify_fit(&choice.subset, &truth),
                zeros: design.d - choice.subset.len(),
                selected: choice.subset.clone(),
            };
            (c, outcome)
        })
        .collect();
    Ok(ReplicationOutcome { rep, outcomes })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CriterionTally {
    pub underfit: usize,
    pub correct: usize,
    pub overfit: usize,
    pub zeros_total: usize,
}

impl CriterionTally {
    pub fn total(&self) -> usize {
        self.underfit + self.correct + self.overfit
    }

    fn pct(&self, k: usize) -> f64 {
        if self.total() == 0 {
            f64::NAN
        } else {
            100.0 * k as f64 / self.total() as f64
        }
    }

    pub fn underfit_pct(&self) -> f64 {
        self.pct(self.underfit)
    }

    pub fn correct_pct(&self) -> f64 {
        self.pct(self.correct)
    }

    pub fn overfit_pct(&self) -> f64 {
        self.pct(self.overfit)
    }

    pub fn avg_zeros(&self) -> f64 {
        if self.total() == 0 {
            f64::NAN
        } else {
            self.zeros_total as f64 / self.total() as f64
        }
    }

    fn add(&mut self, o: &CriterionOutcome) {
        match o.class {
            FitClass::Underfitted => self.underfit += 1,
            FitClass::Correct => self.correct += 1,
            FitClass::Overfitted => self.overfit += 1,
        }
        self.zeros_total += o.zeros;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloTally {
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub seed: u64,
    pub per_criterion: BTreeMap<Criterion, CriterionTally>,
    pub failures: Vec<ReplicationFailure>,
}

impl MonteCarloTally {
    pub fn get(&self, c: Criterion) -> CriterionTally {
        self.per_criterion.get(&c).copied().unwrap_or_default()
    }

    /// One row per criterion. `reps` counts completed replications.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["sigma", "n", "d", "method", "underfit_pct", "correct_pct", "overfit_pct", "avg_zeros", "reps", "failures"])
            .map_err(io)?;
        for (c, t) in &self.per_criterion {
            w.write_record([
                self.sigma.to_string(),
                self.n.to_string(),
                self.d.to_string(),
                c.tag().to_string(),
                t.underfit_pct().to_string(),
                t.correct_pct().to_string(),
                t.overfit_pct().to_string(),
                t.avg_zeros().to_string(),
                t.total().to_string(),
                self.failures.len().to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tally serializes")
    }

    /// Plain-text table in the usual layout of simulation summaries.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:<10} {:>15} {:>19} {:>14} {:>18}",
            "sigma", "n", "Method", "Under-fitted(%)", "Correctly fitted(%)", "Overfitted(%)", "Ave. No. of zeros"
        );
        for (c, t) in &self.per_criterion {
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:<10} {:>15} {:>19} {:>14} {:>18}",
                sig6(self.sigma),
                self.n,
                c.tag(),
                sig6(t.underfit_pct()),
                sig6(t.correct_pct()),
                sig6(t.overfit_pct()),
                sig6(t.avg_zeros())
            );
        }
        if !self.failures.is_empty() {
            let _ = writeln!(s, "failed replications: {}", self.failures.len());
        }
        s
    }
}

/// Formats with six significant digits, trimming trailing zeros.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Runs every replication on a pool of `workers` threads and tallies the
/// outcomes. Failed replications are listed rather than counted.
pub fn run_study(design: &SimDesign, workers: usize) -> Result<MonteCarloTally> {
    design.validate()?;
    if workers == 0 {
        return Err(Error::InvalidInput("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<Result<ReplicationOutcome>> =
        pool.install(|| (0..design.reps).into_par_iter().map(|r| run_replication(design, r)).collect());

    let mut per_criterion: BTreeMap<Criterion, CriterionTally> =
        design.criteria.iter().map(|&c| (c, CriterionTally::default())).collect();
    let mut failures = Vec::new();
    for (rep, res) in results.into_iter().enumerate() {
        match res {
            Ok(out) => {
                for (c, o) in &out.outcomes {
                    per_criterion.entry(*c).or_default().add(o);
                }
            }
            Err(e) => failures.push(ReplicationFailure { rep, error: e.to_string() }),
        }
    }
    Ok(MonteCarloTally {
        sigma: design.sigma,
        n: design.n,
        d: design.d,
        reps: design.reps,
        seed: design.seed,
        per_criterion,
        failures,
    })
}
