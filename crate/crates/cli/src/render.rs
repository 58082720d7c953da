//! Output views. The CSV and JSON renderings are built from the same rows, so
//! both carry the same numbers (full precision); tables use six significant
//! digits.

use std::collections::BTreeMap;

use lossrank_core::criteria::bic;
use lossrank_core::lasso_path::{LassoPath, PathEvent};
use lossrank_core::selector::TracePoint;
use lossrank_core::simbench::{sig6, MonteCarloTally};
use lossrank_core::{ols_fit, select, standardize, Criterion, Dataset, SelectionReport, StandardizedDataset};
use serde::Serialize;

use crate::{Failure, Format};

fn csv_failure(e: impl std::fmt::Display) -> Failure {
    Failure::Compute(format!("cannot write csv: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Compute(format!("cannot write json: {e}")))
}

fn write_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_failure)?;
    for r in rows {
        w.write_record(r).map_err(csv_failure)?;
    }
    let bytes = w.into_inner().map_err(csv_failure)?;
    String::from_utf8(bytes).map_err(csv_failure)
}

/// Right-aligned plain-text table.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header.to_vec());
    for r in rows {
        s += &line(r.iter().map(String::as_str).collect());
    }
    s
}

fn full(v: f64) -> String {
    v.to_string()
}

fn opt_full(v: Option<f64>) -> String {
    v.map(full).unwrap_or_default()
}

fn one_based(subset: &[usize]) -> Vec<usize> {
    subset.iter().map(|j| j + 1).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn braces(v: &[usize]) -> String {
    format!("{{{}}}", v.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
}

fn intervals_full(iv: &[(f64, f64)]) -> String {
    iv.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect::<Vec<_>>().join(";")
}

fn intervals_short(iv: &[(f64, f64)]) -> String {
    iv.iter()
        .map(|(lo, hi)| format!("({}, {}]", sig6(*lo), sig6(*hi)))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Serialize)]
struct CandidateRow {
    variables: Vec<usize>,
    names: Vec<String>,
    df: usize,
    intervals: Vec<(f64, f64)>,
    rho: f64,
    /// `None` for infeasible (`+inf`) scores and grid criteria the grid missed.
    scores: BTreeMap<Criterion, Option<f64>>,
}

#[derive(Serialize)]
struct ChosenRow {
    criterion: Criterion,
    variables: Vec<usize>,
    names: Vec<String>,
    df: usize,
    score: Option<f64>,
    plateau: Vec<(f64, f64)>,
    lambda: Option<f64>,
    rho: f64,
    intercept: f64,
    coefficients: Vec<f64>,
}

#[derive(Serialize)]
struct SelectView {
    n: usize,
    d: usize,
    lambda_max: f64,
    criteria: Vec<Criterion>,
    candidates: Vec<CandidateRow>,
    chosen: Vec<ChosenRow>,
    excluded_too_large: usize,
    excluded_rank_deficient: usize,
}

fn finite_or_neg(v: f64) -> Option<f64> {
    // perfect fits (-inf) stay visible; +inf means infeasible
    (v < f64::INFINITY).then_some(v)
}

impl SelectView {
    fn new(report: &SelectionReport) -> Self {
        let criteria: Vec<Criterion> = report.chosen.keys().copied().collect();
        let candidates = report
            .candidates
            .iter()
            .map(|sc| CandidateRow {
                variables: one_based(&sc.candidate.subset),
                names: sc.candidate.subset.iter().map(|&j| report.names[j].clone()).collect(),
                df: sc.candidate.df,
                intervals: sc.candidate.intervals.clone(),
                rho: sc.candidate.fit.rho,
                scores: criteria
                    .iter()
                    .map(|c| (*c, sc.scores.get(c).and_then(|s| finite_or_neg(s.score.value))))
                    .collect(),
            })
            .collect();
        let chosen = report
            .chosen
            .values()
            .map(|c| ChosenRow {
                criterion: c.criterion,
                variables: one_based(&c.subset),
                names: c.names.clone(),
                df: c.subset.len(),
                score: finite_or_neg(c.score),
                plateau: c.plateau.clone(),
                lambda: c.lambda,
                rho: c.fit.rho,
                intercept: c.intercept,
                coefficients: c.raw_coefficients.clone(),
            })
            .collect();
        Self {
            n: report.n,
            d: report.d,
            lambda_max: report.lambda_max,
            criteria,
            candidates,
            chosen,
            excluded_too_large: report.diagnostics.excluded.too_large,
            excluded_rank_deficient: report.diagnostics.excluded.rank_deficient,
        }
    }

    const CSV_HEADER: [&'static str; 12] = [
        "record",
        "criterion",
        "variables",
        "names",
        "df",
        "intervals",
        "rho",
        "score",
        "lambda",
        "intercept",
        "coefficients",
        "scores",
    ];

    fn csv(&self) -> Result<String, Failure> {
        let mut rows = Vec::new();
        for c in &self.candidates {
            let scores: Vec<String> = c
                .scores
                .iter()
                .map(|(k, v)| format!("{}={}", k.tag(), v.map_or("inf".to_string(), full)))
                .collect();
            rows.push(vec![
                "candidate".into(),
                String::new(),
                join(&c.variables),
                join(&c.names),
                c.df.to_string(),
                intervals_full(&c.intervals),
                full(c.rho),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                scores.join(";"),
            ]);
        }
        for c in &self.chosen {
            rows.push(vec![
                "chosen".into(),
                c.criterion.tag().into(),
                join(&c.variables),
                join(&c.names),
                c.df.to_string(),
                intervals_full(&c.plateau),
                full(c.rho),
                opt_full(c.score),
                opt_full(c.lambda),
                full(c.intercept),
                join(&c.coefficients),
                String::new(),
            ]);
        }
        write_csv(&Self::CSV_HEADER, &rows)
    }

    fn table(&self) -> String {
        let mut header = vec!["variables", "df", "rho"];
        let tags: Vec<&str> = self.criteria.iter().map(|c| c.tag()).collect();
        header.extend(&tags);
        header.push("lambda interval");
        let rows: Vec<Vec<String>> = self
            .candidates
            .iter()
            .map(|c| {
                let mut r = vec![braces(&c.variables), c.df.to_string(), sig6(c.rho)];
                r.extend(c.scores.values().map(|v| v.map_or("inf".to_string(), sig6)));
                r.push(intervals_short(&c.intervals));
                r
            })
            .collect();
        let mut s = format!(
            "n = {}, d = {}, lambda_max = {}, candidates = {} (excluded: {} too large, {} rank-deficient)\n\n",
            self.n,
            self.d,
            sig6(self.lambda_max),
            self.candidates.len(),
            self.excluded_too_large,
            self.excluded_rank_deficient
        );
        s += &table(&header, &rows);
        s += "\n";
        let rows: Vec<Vec<String>> = self
            .chosen
            .iter()
            .map(|c| {
                vec![
                    c.criterion.tag().to_string(),
                    braces(&c.variables),
                    c.names.join(","),
                    c.score.map_or("inf".to_string(), sig6),
                    intervals_short(&c.plateau),
                    c.lambda.map(sig6).unwrap_or_default(),
                ]
            })
            .collect();
        s += &table(&["criterion", "variables", "names", "score", "plateau", "grid lambda"], &rows);
        s += "\nrefit on the raw scale\n";
        for c in &self.chosen {
            let terms: Vec<String> = c
                .names
                .iter()
                .zip(&c.coefficients)
                .map(|(n, b)| format!("{} * {n}", sig6(*b)))
                .collect();
            s += &format!("  {:<10} y = {} + {}\n", c.criterion.tag(), sig6(c.intercept), terms.join(" + "));
        }
        s
    }
}

pub fn selection(report: &SelectionReport, format: Format) -> Result<String, Failure> {
    let view = SelectView::new(report);
    match format {
        Format::Table => Ok(view.table()),
        Format::Csv => view.csv(),
        Format::Json => to_json(&view),
    }
}

#[derive(Serialize)]
struct BreakpointRow {
    lambda: f64,
    event: &'static str,
    variable: usize,
    name: String,
    active_size: usize,
}

#[derive(Serialize)]
struct PathView<'a> {
    n: usize,
    d: usize,
    lambda_max: f64,
    termination: String,
    breakpoints: Vec<BreakpointRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    traces: Option<&'a [TracePoint]>,
}

pub fn path(data: &StandardizedDataset, path: &LassoPath, traces: Option<&[TracePoint]>, format: Format) -> Result<String, Failure> {
    let breakpoints: Vec<BreakpointRow> = path
        .breakpoints
        .iter()
        .map(|b| {
            let (event, j) = match b.event {
                PathEvent::Enter(j) => ("enter", j),
                PathEvent::Leave(j) => ("leave", j),
            };
            BreakpointRow { lambda: b.lambda, event, variable: j + 1, name: data.name(j), active_size: b.active_size }
        })
        .collect();
    let view = PathView {
        n: path.n,
        d: path.d,
        lambda_max: path.lambda_max,
        termination: format!("{:?}", path.termination),
        breakpoints,
        traces,
    };
    let trace_cells = |t: &TracePoint, f: &dyn Fn(f64) -> String| -> Vec<String> {
        let o = |v: Option<f64>| v.map(f).unwrap_or_default();
        vec![f(t.lambda), t.active_size.to_string(), o(t.lr), o(t.bic), o(t.gcv), o(t.bic_tilde)]
    };
    const TRACE_HEADER: [&str; 6] = ["lambda", "active_size", "LR", "BIC", "GCV", "BIC_TILDE"];
    match format {
        Format::Json => to_json(&view),
        Format::Csv => match traces {
            Some(t) => {
                let rows: Vec<Vec<String>> = t.iter().map(|p| trace_cells(p, &full)).collect();
                write_csv(&TRACE_HEADER, &rows)
            }
            None => {
                let rows: Vec<Vec<String>> = view
                    .breakpoints
                    .iter()
                    .map(|b| {
                        vec![full(b.lambda), b.event.into(), b.variable.to_string(), b.name.clone(), b.active_size.to_string()]
                    })
                    .collect();
                write_csv(&["lambda", "event", "variable", "name", "active_size"], &rows)
            }
        },
        Format::Table => {
            let rows: Vec<Vec<String>> = view
                .breakpoints
                .iter()
                .map(|b| vec![sig6(b.lambda), b.event.into(), b.variable.to_string(), b.name.clone(), b.active_size.to_string()])
                .collect();
            let mut s = format!(
                "lambda_max = {}, {} breakpoints, termination: {}\n\n",
                sig6(view.lambda_max),
                view.breakpoints.len(),
                view.termination
            );
            s += &table(&["lambda", "event", "variable", "name", "active_size"], &rows);
            if let Some(t) = traces {
                let rows: Vec<Vec<String>> = t.iter().map(|p| trace_cells(p, &sig6)).collect();
                s += "\n";
                s += &table(&TRACE_HEADER, &rows);
            }
            Ok(s)
        }
    }
}

pub fn tally(t: &MonteCarloTally, format: Format) -> Result<String, Failure> {
    match format {
        Format::Table => Ok(t.to_table()),
        Format::Csv => t.to_csv().map_err(|e| Failure::Compute(e.to_string())),
        Format::Json => Ok(t.to_json() + "\n"),
    }
}

/// Models reported for the prostate data, 1-based.
const EXPECTED_LR: [usize; 3] = [1, 2, 5];
const EXPECTED_GCV: [usize; 7] = [1, 2, 3, 4, 5, 7, 8];
const EXPECTED_BIC_TILDE: [usize; 6] = [1, 2, 3, 4, 5, 8];

#[derive(Serialize)]
struct BicRow {
    model: &'static str,
    variables: Vec<usize>,
    bic: f64,
}

#[derive(Serialize)]
pub struct ProstateDemo {
    chosen: BTreeMap<Criterion, Vec<usize>>,
    names: BTreeMap<Criterion, Vec<String>>,
    bic: Vec<BicRow>,
}

impl ProstateDemo {
    pub fn run(data: &Dataset) -> lossrank_core::Result<Self> {
        let report = select(data, &Criterion::ALL)?;
        let std = standardize(data)?;
        let mut bic_rows = Vec::new();
        for (model, vars) in [("GCV", &EXPECTED_GCV[..]), ("BIC_TILDE", &EXPECTED_BIC_TILDE[..]), ("LR", &EXPECTED_LR[..])] {
            let subset: Vec<usize> = vars.iter().map(|v| v - 1).collect();
            let fit = ols_fit(&std, &subset)?;
            bic_rows.push(BicRow { model, variables: vars.to_vec(), bic: bic(fit.n, fit.sigma2_hat, fit.df)? });
        }
        Ok(Self {
            chosen: report.chosen.iter().map(|(c, ch)| (*c, one_based(&ch.subset))).collect(),
            names: report.chosen.iter().map(|(c, ch)| (*c, ch.names.clone())).collect(),
            bic: bic_rows,
        })
    }

    pub fn check(&self) -> Result<(), String> {
        let mut bad = Vec::new();
        for (c, want) in [
            (Criterion::LossRank, &EXPECTED_LR[..]),
            (Criterion::Gcv, &EXPECTED_GCV[..]),
            (Criterion::BicTilde, &EXPECTED_BIC_TILDE[..]),
        ] {
            if self.chosen[&c] != want {
                bad.push(format!("{} chose {} (expected {})", c.tag(), braces(&self.chosen[&c]), braces(want)));
            }
        }
        if !(self.bic[2].bic < self.bic[1].bic && self.bic[1].bic < self.bic[0].bic) {
            bad.push("BIC does not order the models as LR < BIC_TILDE < GCV".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(format!("prostate check failed: {}", bad.join("; ")))
        }
    }

    pub fn render(&self, format: Format) -> Result<String, Failure> {
        match format {
            Format::Json => to_json(self),
            Format::Csv => {
                let mut rows: Vec<Vec<String>> = self
                    .chosen
                    .iter()
                    .map(|(c, v)| vec!["chosen".into(), c.tag().into(), join(v), String::new()])
                    .collect();
                rows.extend(
                    self.bic
                        .iter()
                        .map(|b| vec!["bic".into(), b.model.into(), join(&b.variables), full(b.bic)]),
                );
                write_csv(&["record", "criterion", "variables", "bic"], &rows)
            }
            Format::Table => {
                let rows: Vec<Vec<String>> = self
                    .chosen
                    .iter()
                    .map(|(c, v)| vec![c.tag().into(), braces(v), self.names[c].join(",")])
                    .collect();
                let mut s = table(&["criterion", "variables", "names"], &rows);
                s += "\n";
                let rows: Vec<Vec<String>> = self
                    .bic
                    .iter()
                    .map(|b| vec![b.model.into(), braces(&b.variables), sig6(b.bic)])
                    .collect();
                s += &table(&["model of", "variables", "BIC"], &rows);
                Ok(s)
            }
        }
    }
}
