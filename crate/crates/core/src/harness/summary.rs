//! Per-cell summaries and consistency curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FdpError, Result};

/// One (m, α, method) cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub m: usize,
    pub alpha: f64,
    pub method: String,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub coverage_rate: f64,
    pub mean_rejections: f64,
    /// Seconds spent simulating this m; empty unless timing was requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time: Option<f64>,
}

/// Linear-interpolation sample quantile (R type 7). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// (q25, median, q75) of a sample.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75))
}

/// Median bound minus α over m for one (method, α).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySeries {
    pub method: String,
    pub alpha: f64,
    /// (m, median − α), ascending in m.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of ln(gap) on ln(m) over positive gaps; NaN with fewer than two.
    pub slope: f64,
}

impl ConsistencySeries {
    /// Whether the gap at the largest m is below the gap at the smallest.
    pub fn shrinks(&self) -> bool {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.1 < a.1,
            _ => false,
        }
    }
}

/// Groups rows by (method, α) and reports the median gap over m.
///
/// Every group needs at least three distinct m values.
pub fn consistency_curve(rows: &[SummaryRow]) -> Result<Vec<ConsistencySeries>> {
    let mut groups: BTreeMap<(String, u64), BTreeMap<usize, f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.clone(), r.alpha.to_bits())).or_default().insert(r.m, r.median - r.alpha);
    }
    groups
        .into_iter()
        .map(|((method, abits), pts)| {
            if pts.len() < 3 {
                return Err(FdpError::InsufficientGrid { need: 3, got: pts.len() });
            }
            let points: Vec<(usize, f64)> = pts.into_iter().collect();
            let slope = log_log_slope(&points);
            Ok(ConsistencySeries { method, alpha: f64::from_bits(abits), points, slope })
        })
        .collect()
}

fn log_log_slope(points: &[(usize, f64)]) -> f64 {
    let xy: Vec<(f64, f64)> =
        points.iter().filter(|p| p.1 > 0.0).map(|&(m, g)| ((m as f64).ln(), g.ln())).collect();
    if xy.len() < 2 {
        return f64::NAN;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
