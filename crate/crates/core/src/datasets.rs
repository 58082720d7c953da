//! CSV ingestion and the prostate cancer data loader.

use std::io::Read;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linreg::Dataset;

/// Covariates of the prostate data, in the customary order.
pub const PROSTATE_COVARIATES: [&str; 8] = ["lcavol", "lweight", "age", "lbph", "svi", "lcp", "gleason", "pgg45"];
pub const PROSTATE_RESPONSE: &str = "lpsa";
pub const PROSTATE_ROWS: usize = 97;

/// Environment variable overriding the prostate data location.
pub const PROSTATE_ENV: &str = "LOSSRANK_PROSTATE_CSV";

/// A header row followed by numeric rows. The response is the named column,
/// or the last column when `response` is `None`; every other column is a
/// covariate. Errors carry the 1-based line number and the column name.
pub fn read_csv<R: Read>(reader: R, response: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(&e, "header"))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            column: headers.first().cloned().unwrap_or_default(),
            message: "need at least one covariate and a response column".into(),
        });
    }
    let y_col = match response {
        Some(name) => headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: name.to_string(),
            message: "response column not found in header".into(),
        })?,
        None => headers.len() - 1,
    };
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != y_col).collect();

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(&e, ""))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row: line,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let cell = |c: usize| -> Result<f64> {
            let raw = &rec[c];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row: line,
                    column: headers[c].clone(),
                    message: format!("'{raw}' is not a finite number"),
                }),
            }
        };
        for &c in &x_cols {
            xs.push(cell(c)?);
        }
        ys.push(cell(y_col)?);
    }
    let n = ys.len();
    let d = x_cols.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 data rows, found {n}")));
    }
    let x = DMatrix::from_row_slice(n, d, &xs);
    let names = x_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(x, DVector::from_vec(ys), Some(names))
}

pub fn read_csv_file(path: &Path, response: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|_| Error::MissingDataFile(path.display().to_string()))?;
    read_csv(file, response)
}

fn parse_error(e: &csv::Error, column: &str) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { row, column: column.to_string(), message: e.to_string() }
}

/// `$LOSSRANK_PROSTATE_CSV` if set, otherwise `data/prostate.csv` at the
/// workspace root.
pub fn default_prostate_path() -> PathBuf {
    match std::env::var_os(PROSTATE_ENV) {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/prostate.csv"),
    }
}

/// Loads the prostate data: the eight covariates in [`PROSTATE_COVARIATES`]
/// order and `lpsa` as the response. Other columns in the file are ignored.
pub fn load_prostate(path: &Path) -> Result<Dataset> {
    if !path.is_file() {
        return Err(Error::MissingDataFile(path.display().to_string()));
    }
    let all = read_csv_file(path, Some(PROSTATE_RESPONSE))?;
    let names = all.names().unwrap_or_default();
    let mut cols = Vec::with_capacity(PROSTATE_COVARIATES.len());
    for want in PROSTATE_COVARIATES {
        let j = names.iter().position(|h| h == want).ok_or_else(|| Error::Parse {
            row: 1,
            column: want.to_string(),
            message: "required prostate column missing".into(),
        })?;
        cols.push(j);
    }
    let x = all.x().select_columns(&cols);
    let names = PROSTATE_COVARIATES.iter().map(|s| s.to_string()).collect();
    Dataset::new(x, all.y().clone(), Some(names))
}
