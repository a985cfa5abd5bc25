//! Plot-ready CSV and JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::quantile::QuantileSummary;
use crate::spec::ExperimentSpec;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One line of the figure: a quantile band for a named configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub summary: QuantileSummary,
}

/// Everything written for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub spec: ExperimentSpec,
    /// Name of the tracked metric, e.g. `error_to_minimizer`.
    pub metric: String,
    pub series: Vec<Series>,
    /// Scalar side results (refinement totals and the like), in insertion order.
    pub stats: Vec<(String, f64)>,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub const CSV_HEADER: &str = "iter,median,p10,p25,p75,p90,series";

pub fn to_csv(series: &[Series]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in series {
        for r in &s.summary.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter,
                num(r.median),
                num(r.p10),
                num(r.p25),
                num(r.p75),
                num(r.p90),
                s.name
            );
        }
    }
    out
}

pub fn to_json(report: &ExperimentReport) -> Result<String, BenchError> {
    serde_json::to_string_pretty(report).map_err(|e| BenchError::Invalid(e.to_string()))
}

pub fn emit_output(report: &ExperimentReport, format: Format, path: &Path) -> Result<(), BenchError> {
    let body = match format {
        Format::Csv => to_csv(&report.series),
        Format::Json => to_json(report)?,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| BenchError::io(path, e))
}
