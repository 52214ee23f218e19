//! CSV artifacts. Absent values are written as empty fields; floats use
//! the shortest representation that round-trips.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::experiment::BoundRow;

pub const TRACE_HEADER: [&str; 9] = [
    "k",
    "f_value",
    "subopt",
    "bound_thm_asym",
    "bound_thm_nonasym",
    "bound_combined",
    "bound_prior",
    "prob_floor_asym",
    "prob_floor_nonasym",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "seed",
    "iterations",
    "f_star",
    "final_f_value",
    "final_subopt",
    "max_subopt_minus_bound",
    "bound_violations",
    "prior_violations_k_ge_10",
    "bounds_evaluated",
];

/// One row of a trace or bound-curve CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub values: [Option<f64>; 8],
}

impl CsvRow {
    pub fn from_parts(k: usize, f_value: Option<f64>, subopt: Option<f64>, bounds: Option<&BoundRow>) -> Self {
        let b = |f: fn(&BoundRow) -> Option<f64>| bounds.and_then(f);
        Self {
            k,
            values: [
                f_value,
                subopt,
                b(|r| Some(r.values.asymptotic)),
                b(|r| Some(r.values.nonasymptotic)),
                b(|r| Some(r.values.combined)),
                b(|r| r.prior),
                b(|r| Some(r.floor_asym)),
                b(|r| Some(r.floor_nonasym)),
            ],
        }
    }
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_rows(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        let mut rec = Vec::with_capacity(9);
        rec.push(row.k.to_string());
        rec.extend(row.values.iter().map(|v| field(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Per-seed digest of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub seed: u64,
    pub iterations: usize,
    pub f_star: f64,
    pub final_f_value: f64,
    pub final_subopt: f64,
    /// `max_k (subopt_k − bound_combined_k)`; positive means the bound was exceeded.
    pub max_subopt_minus_bound: Option<f64>,
    pub bound_violations: usize,
    pub prior_violations: usize,
}

impl SummaryRow {
    pub fn new(seed: u64, f_star: f64) -> Self {
        Self {
            seed,
            iterations: 0,
            f_star,
            final_f_value: f64::NAN,
            final_subopt: f64::NAN,
            max_subopt_minus_bound: None,
            bound_violations: 0,
            prior_violations: 0,
        }
    }

    pub fn observe(&mut self, k: usize, f_value: f64, subopt: f64, bounds: Option<&BoundRow>) {
        self.iterations = k;
        self.final_f_value = f_value;
        self.final_subopt = subopt;
        if let Some(b) = bounds {
            let excess = subopt - b.values.combined;
            self.max_subopt_minus_bound = Some(self.max_subopt_minus_bound.map_or(excess, |m| m.max(excess)));
            if excess > 0.0 {
                self.bound_violations += 1;
            }
            if k >= 10 && b.prior.is_some_and(|p| b.values.combined > p) {
                self.prior_violations += 1;
            }
        }
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        let evaluated = r.max_subopt_minus_bound.is_some();
        w.write_record([
            r.seed.to_string(),
            r.iterations.to_string(),
            r.f_star.to_string(),
            r.final_f_value.to_string(),
            r.final_subopt.to_string(),
            field(r.max_subopt_minus_bound),
            if evaluated { r.bound_violations.to_string() } else { String::new() },
            if evaluated { r.prior_violations.to_string() } else { String::new() },
            evaluated.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
