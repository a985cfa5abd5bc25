use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Quantile levels reported per row, in output column order after the median.
pub const LEVELS: [f64; 4] = [0.10, 0.25, 0.75, 0.90];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub iter: usize,
    pub median: f64,
    pub p10: f64,
    pub p25: f64,
    pub p75: f64,
    pub p90: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub rows: Vec<QuantileRow>,
}

impl QuantileSummary {
    pub fn last(&self) -> Option<&QuantileRow> {
        self.rows.last()
    }

    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median).collect()
    }
}

/// Quantile of already sorted data, interpolating linearly between order
/// statistics at rank `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Per-column quantiles of a `replicates x iterations` matrix. Column `k`
/// becomes row `k` with `iter = first_iter + k`.
pub fn quantile_aggregate(matrix: &[Vec<f64>], first_iter: usize) -> Result<QuantileSummary, BenchError> {
    if matrix.is_empty() || matrix[0].is_empty() {
        return Err(BenchError::Invalid("cannot summarize an empty metric matrix".into()));
    }
    let cols = matrix[0].len();
    if matrix.iter().any(|r| r.len() != cols) {
        return Err(BenchError::Invalid("metric matrix is not rectangular".into()));
    }
    let mut column = Vec::with_capacity(matrix.len());
    let mut rows = Vec::with_capacity(cols);
    for k in 0..cols {
        column.clear();
        column.extend(matrix.iter().map(|r| r[k]));
        // NaN sorts last
        column.sort_by(|a, b| a.total_cmp(b));
        rows.push(QuantileRow {
            iter: first_iter + k,
            median: quantile_sorted(&column, 0.5),
            p10: quantile_sorted(&column, LEVELS[0]),
            p25: quantile_sorted(&column, LEVELS[1]),
            p75: quantile_sorted(&column, LEVELS[2]),
            p90: quantile_sorted(&column, LEVELS[3]),
        });
    }
    Ok(QuantileSummary { rows })
}
