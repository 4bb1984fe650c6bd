//! Top-k path: BH selection, envelopes, m₀ upper bounds and BH-level bounds.
//!
//! The path is R_k = {i : p_i ≤ p₍ₖ₎}, k = 1..m.

use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, Method};
use crate::error::{FdpError, Result};
use crate::numerics::{h_inv, kr_factor, le_ulps, log2, KAPPA, KR_DELTA_MAX};

pub use crate::envelope::interpolate;

/// A vector of p-values with optional truth labels (`true` marks an alternative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueBatch {
    values: Vec<f64>,
    labels: Option<Vec<bool>>,
}

impl PValueBatch {
    pub fn new(values: Vec<f64>, labels: Option<Vec<bool>>) -> Result<Self> {
        if values.is_empty() {
            return Err(FdpError::domain("a p-value batch needs at least one value"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(FdpError::domain(format!("p-value {v} at index {i} is outside [0,1]")));
        }
        if let Some(l) = &labels {
            if l.len() != values.len() {
                return Err(FdpError::ShapeMismatch { expected: values.len(), got: l.len() });
            }
        }
        Ok(Self { values, labels })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn sorted(&self) -> SortedPValues {
        SortedPValues::from_batch(self)
    }
}

/// Order statistics of a batch together with the sorting permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedPValues {
    /// p₍₁₎ ≤ … ≤ p₍ₘ₎.
    pub sorted: Vec<f64>,
    /// `perm[j]` is the original index of `sorted[j]` (0-based).
    pub perm: Vec<usize>,
}

impl SortedPValues {
    /// Stable sort, so tied values keep their input order.
    pub fn from_batch(batch: &PValueBatch) -> Self {
        let mut perm: Vec<usize> = (0..batch.m()).collect();
        perm.sort_by(|&a, &b| batch.values[a].total_cmp(&batch.values[b]));
        let sorted = perm.iter().map(|&i| batch.values[i]).collect();
        Self { sorted, perm }
    }

    pub fn m(&self) -> usize {
        self.sorted.len()
    }

    /// Reproduces the input order.
    pub fn unsort(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (j, &i) in self.perm.iter().enumerate() {
            out[i] = self.sorted[j];
        }
        out
    }

    /// |R_k| = #{i : p_i ≤ p₍ₖ₎} for k = 1..m; equals k unless there are ties.
    pub fn path_sizes(&self) -> Vec<usize> {
        path_sizes(&self.sorted)
    }
}

/// Tie-aware top-k sizes for a nondecreasing slice.
pub fn path_sizes(sorted: &[f64]) -> Vec<usize> {
    let m = sorted.len();
    let mut sizes = vec![0; m];
    let mut j = m;
    while j > 0 {
        let mut i = j;
        while i > 0 && sorted[i - 1] == sorted[j - 1] {
            i -= 1;
        }
        for s in &mut sizes[i..j] {
            *s = j;
        }
        j = i;
    }
    sizes
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(FdpError::domain(format!("{name} must lie in (0,1), got {x}")))
    }
}

/// BH rejection count max{k : m·p₍ₖ₎ ≤ α·k}, 0 if none.
///
/// Ties within a few ulps count as satisfied.
pub fn bh_select(batch: &PValueBatch, alpha: f64) -> Result<usize> {
    bh_select_sorted(&batch.sorted().sorted, alpha)
}

/// [`bh_select`] on already sorted p-values.
pub fn bh_select_sorted(sorted: &[f64], alpha: f64) -> Result<usize> {
    check_unit(alpha, "alpha")?;
    let m = sorted.len() as f64;
    Ok((1..=sorted.len()).rev().find(|&k| le_ulps(m * sorted[k - 1], alpha * k as f64)).unwrap_or(0))
}

/// Wellner term (x/k)·h⁻¹(c/x) with x = m·p, clamped at 1.
#[inline]
fn wellner_term(x: f64, k: f64, c_delta: f64, p: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = (c_delta + 4.0 * log2(1.0 / p).ln_1p()) / x;
    let r = x / k;
    if r * (1.0 + (2.0 * y).sqrt()) >= 1.0 {
        return 1.0;
    }
    (r * h_inv(y)).min(1.0)
}

fn check_m_eff(m_eff: f64, m: usize) -> Result<()> {
    if m_eff > 0.0 && m_eff <= m as f64 {
        Ok(())
    } else {
        Err(FdpError::domain(format!("m_eff must lie in (0, {m}], got {m_eff}")))
    }
}

fn check_kr_delta(delta: f64) -> Result<()> {
    if delta <= KR_DELTA_MAX {
        Ok(())
    } else {
        Err(FdpError::domain(format!("KR bounds require delta <= 0.31, got {delta}")))
    }
}

/// Per-k bounds of the raw top-k envelope on sorted p-values.
pub fn topk_bounds(method: Method, sorted: &[f64], delta: f64, m_eff: f64) -> Result<Vec<f64>> {
    check_unit(delta, "delta")?;
    check_m_eff(m_eff, sorted.len())?;
    let ks = (1..=sorted.len()).map(|k| k as f64);
    let out = match method {
        Method::Simes => sorted.iter().zip(ks).map(|(&p, k)| (m_eff * p / (k * delta)).min(1.0)).collect(),
        Method::Dkw => {
            let dev = m_eff.sqrt() * (0.5 * (1.0 / delta).ln()).sqrt();
            sorted.iter().zip(ks).map(|(&p, k)| (m_eff * p / k + dev / k).min(1.0)).collect()
        }
        Method::Kr => {
            check_kr_delta(delta)?;
            let c = kr_factor(delta)?;
            sorted.iter().zip(ks).map(|(&p, k)| (c * (m_eff * p / k + 1.0 / k)).min(1.0)).collect()
        }
        Method::Wellner => {
            let c_delta = 2.0 * (KAPPA / delta).ln();
            sorted.iter().zip(ks).map(|(&p, k)| wellner_term(m_eff * p, k, c_delta, p)).collect()
        }
        Method::Hybrid => {
            let kr = topk_bounds(Method::Kr, sorted, delta / 2.0, m_eff)?;
            let we = topk_bounds(Method::Wellner, sorted, delta / 2.0, m_eff)?;
            kr.into_iter().zip(we).map(|(a, b)| a.min(b)).collect()
        }
        Method::Freedman | Method::Kru => {
            return Err(FdpError::domain(format!("{method} is not a top-k envelope")));
        }
    };
    Ok(out)
}

/// Raw top-k envelope with m replaced by `m_eff`.
pub fn topk_envelope(method: Method, batch: &PValueBatch, delta: f64, m_eff: f64) -> Result<Envelope> {
    let sorted = batch.sorted();
    let bounds = topk_bounds(method, &sorted.sorted, delta, m_eff)?;
    Ok(Envelope { bounds, method, delta, adaptive: false, interpolated: false, m_eff })
}

/// Adaptive top-k envelope on sorted p-values: m replaced by [`m0_upper_sorted`].
///
/// For Hybrid each half uses its own m₀ bound at δ/2; `m_eff` reports the larger.
pub fn topk_adaptive_envelope_sorted(method: Method, sorted: &[f64], delta: f64) -> Result<Envelope> {
    let (bounds, m_eff) = if method == Method::Hybrid {
        let m_kr = m0_upper_sorted(Method::Kr, sorted, delta / 2.0)?;
        let m_we = m0_upper_sorted(Method::Wellner, sorted, delta / 2.0)?;
        let kr = topk_bounds(Method::Kr, sorted, delta / 2.0, m_kr)?;
        let we = topk_bounds(Method::Wellner, sorted, delta / 2.0, m_we)?;
        (kr.into_iter().zip(we).map(|(a, b)| a.min(b)).collect(), m_kr.max(m_we))
    } else {
        let m0 = m0_upper_sorted(method, sorted, delta)?;
        (topk_bounds(method, sorted, delta, m0)?, m0)
    };
    Ok(Envelope { bounds, method, delta, adaptive: true, interpolated: false, m_eff })
}

/// Adaptive top-k envelope of a batch.
pub fn topk_adaptive_envelope(method: Method, batch: &PValueBatch, delta: f64) -> Result<Envelope> {
    topk_adaptive_envelope_sorted(method, &batch.sorted().sorted, delta)
}

/// Confidence upper bound on m₀ (number of true nulls).
pub fn m0_upper(method: Method, batch: &PValueBatch, delta: f64) -> Result<f64> {
    m0_upper_sorted(method, &batch.sorted().sorted, delta)
}

/// [`m0_upper`] on sorted p-values.
///
/// The infimum is taken over t = p₍ₖ₎ with V_t replaced by m − k. The result is
/// capped at m; a zero infimum (Simes with every p-value below δ) is reported as
/// the smallest positive double so that it remains a valid `m_eff`.
pub fn m0_upper_sorted(method: Method, sorted: &[f64], delta: f64) -> Result<f64> {
    check_unit(delta, "delta")?;
    let m = sorted.len();
    let mf = m as f64;
    let grid = sorted.iter().enumerate().map(|(i, &t)| (t, (m - i - 1) as f64));
    let inf = match method {
        Method::Simes => grid.filter(|&(t, _)| t < delta).map(|(t, v)| v / (1.0 - t / delta)).fold(mf, f64::min),
        Method::Dkw => {
            let c = 0.5 * (1.0 / delta).ln();
            grid.filter(|&(t, _)| t < 1.0)
                .map(|(t, v)| {
                    let u = 1.0 - t;
                    let s = c.sqrt() / (2.0 * u) + (c / (4.0 * u * u) + v / u).sqrt();
                    s * s
                })
                .fold(mf, f64::min)
        }
        Method::Kr => {
            check_kr_delta(delta)?;
            let c = kr_factor(delta)?;
            grid.filter(|&(t, _)| t < 1.0 / c).map(|(t, v)| (c + v) / (1.0 - c * t)).fold(mf, f64::min)
        }
        Method::Wellner => {
            let c_delta = 2.0 * (KAPPA / delta).ln();
            grid.filter(|&(t, _)| t > 0.0 && t < 1.0)
                .map(|(t, v)| {
                    let u = 1.0 - t;
                    let ct = c_delta + 4.0 * log2(1.0 / t).ln_1p();
                    let s = (t * ct / (2.0 * u * u)).sqrt() + (ct / (2.0 * u * u) + v / u).sqrt();
                    s * s
                })
                .fold(mf, f64::min)
        }
        other => return Err(FdpError::domain(format!("no m0 estimator for {other}"))),
    };
    Ok(inf.min(mf).max(f64::MIN_POSITIVE))
}

/// FDP bound at the BH rejection set of level `alpha`.
pub fn bh_fdp_bound(method: Method, batch: &PValueBatch, alpha: f64, delta: f64, adaptive: bool) -> Result<f64> {
    bh_fdp_bound_sorted(method, &batch.sorted().sorted, alpha, delta, adaptive)
}

/// [`bh_fdp_bound`] on sorted p-values.
pub fn bh_fdp_bound_sorted(method: Method, sorted: &[f64], alpha: f64, delta: f64, adaptive: bool) -> Result<f64> {
    check_unit(alpha, "alpha")?;
    check_unit(delta, "delta")?;
    let k_hat = bh_select_sorted(sorted, alpha)?;
    bh_fdp_bound_at(method, sorted, alpha, delta, adaptive, k_hat)
}

/// Closed-form BH-level bound for a known k̂.
pub(crate) fn bh_fdp_bound_at(
    method: Method,
    sorted: &[f64],
    alpha: f64,
    delta: f64,
    adaptive: bool,
    k_hat: usize,
) -> Result<f64> {
    let m = sorted.len() as f64;
    let kk = k_hat.max(1) as f64;
    let ratio = |meth: Method, d: f64| -> Result<f64> {
        if adaptive {
            Ok(m0_upper_sorted(meth, sorted, d)? / m)
        } else {
            Ok(1.0)
        }
    };
    let v = match method {
        Method::Simes => alpha * ratio(method, delta)? / delta,
        Method::Dkw => {
            let r = ratio(method, delta)?;
            alpha * r + (r * m).sqrt() * (0.5 * (1.0 / delta).ln()).sqrt() / kk
        }
        Method::Kr => {
            check_kr_delta(delta)?;
            kr_factor(delta)? * (alpha * ratio(method, delta)? + 1.0 / kk)
        }
        Method::Wellner => {
            let r = ratio(method, delta)?;
            let ar = alpha * r;
            let y = (2.0 * (KAPPA / delta).ln() + 4.0 * log2(m / (alpha * kk)).ln_1p()) / (alpha * kk * r);
            if ar * (1.0 + (2.0 * y).sqrt()) >= 1.0 {
                1.0
            } else {
                ar * h_inv(y)
            }
        }
        Method::Hybrid => {
            let kr = bh_fdp_bound_at(Method::Kr, sorted, alpha, delta / 2.0, adaptive, k_hat)?;
            let we = bh_fdp_bound_at(Method::Wellner, sorted, alpha, delta / 2.0, adaptive, k_hat)?;
            kr.min(we)
        }
        other => return Err(FdpError::domain(format!("{other} is not a top-k bound"))),
    };
    Ok(v.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch(v: &[f64]) -> PValueBatch {
        PValueBatch::new(v.to_vec(), None).unwrap()
    }

    #[test]
    fn batch_validation() {
        assert!(PValueBatch::new(vec![], None).is_err());
        assert!(PValueBatch::new(vec![0.5, 1.2], None).is_err());
        assert!(PValueBatch::new(vec![0.5, f64::NAN], None).is_err());
        assert!(PValueBatch::new(vec![0.5], Some(vec![true, false])).is_err());
    }

    #[test]
    fn sorting_roundtrip_and_ties() {
        let b = batch(&[0.3, 0.1, 0.3, 0.0]);
        let s = b.sorted();
        assert_eq!(s.sorted, vec![0.0, 0.1, 0.3, 0.3]);
        assert_eq!(s.perm, vec![3, 1, 0, 2]);
        assert_eq!(s.unsort(), b.values());
        assert_eq!(s.path_sizes(), vec![1, 2, 4, 4]);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_select(&batch(&[0.01, 0.02, 0.5]), 0.2).unwrap(), 2);
        assert_eq!(bh_select(&batch(&[1.0; 5]), 0.9).unwrap(), 0);
        assert_eq!(bh_select(&batch(&[0.0; 5]), 0.01).unwrap(), 5);
        assert!(bh_select(&batch(&[0.1]), 1.0).is_err());
    }

    #[test]
    fn wellner_example() {
        // m = 1000, k = 100, p₍₁₀₀₎ = 0.01.
        let mut v = vec![0.001; 99];
        v.push(0.01);
        v.extend(std::iter::repeat_n(0.9, 900));
        let env = topk_envelope(Method::Wellner, &batch(&v), 0.25, 1000.0).unwrap();
        assert_relative_eq!(env.bounds[99], 0.290_253_362_156_740_5, epsilon = 1e-11);
    }

    #[test]
    fn dkw_example() {
        let mut v = vec![0.001; 9];
        v.push(0.01);
        v.extend(std::iter::repeat_n(0.9, 90));
        let env = topk_envelope(Method::Dkw, &batch(&v), 0.25, 100.0).unwrap();
        assert_relative_eq!(env.bounds[9], 0.932_554_611_157_697_8, epsilon = 1e-13);
    }

    #[test]
    fn simes_zero_and_clamp() {
        let env = topk_envelope(Method::Simes, &batch(&[0.0, 1.0]), 0.25, 2.0).unwrap();
        assert_eq!(env.bounds, vec![0.0, 1.0]);
        for m in Method::TOPK {
            let e = topk_envelope(m, &batch(&[0.9, 0.95, 1.0]), 0.25, 3.0).unwrap();
            assert!(e.bounds.iter().all(|&b| b == 1.0), "{m}");
        }
    }

    #[test]
    fn domain_errors() {
        let b = batch(&[0.1, 0.2]);
        assert!(topk_envelope(Method::Kr, &b, 0.4, 2.0).is_err());
        assert!(topk_envelope(Method::Hybrid, &b, 0.7, 2.0).is_err());
        assert!(topk_envelope(Method::Hybrid, &b, 0.6, 2.0).is_ok());
        assert!(topk_envelope(Method::Simes, &b, 0.25, 0.0).is_err());
        assert!(topk_envelope(Method::Simes, &b, 0.25, 3.0).is_err());
        assert!(topk_envelope(Method::Freedman, &b, 0.25, 2.0).is_err());
    }

    #[test]
    fn m0_examples() {
        let ones = batch(&[1.0; 100]);
        assert_eq!(m0_upper(Method::Simes, &ones, 0.25).unwrap(), 100.0);
        let b = batch(&[0.01, 0.02, 0.03, 0.04]);
        let raw_grid_min = 0.752_112_826_128_412_9;
        assert_relative_eq!(m0_upper(Method::Dkw, &b, 0.25).unwrap(), raw_grid_min, epsilon = 1e-13);
        for m in [Method::Simes, Method::Dkw, Method::Kr, Method::Wellner] {
            let v = m0_upper(m, &b, 0.25).unwrap();
            assert!(v > 0.0 && v <= 4.0);
        }
    }

    #[test]
    fn bh_bound_examples() {
        let b = batch(&[0.001, 0.3, 0.6, 0.9]);
        assert_eq!(bh_fdp_bound(Method::Simes, &b, 0.2, 0.25, false).unwrap(), 0.8);
        let none = batch(&[0.9, 0.95]);
        assert_eq!(bh_fdp_bound(Method::Kr, &none, 0.2, 0.25, false).unwrap(), 1.0);
        // k̂ = m with α close to 1.
        let all = batch(&vec![0.001; 1000]);
        let a = 0.99;
        let w = bh_fdp_bound(Method::Wellner, &all, a, 0.25, false).unwrap();
        let y = (2.0 * (KAPPA / 0.25).ln() + 4.0 * log2(1.0 / a).ln_1p()) / (a * 1000.0);
        assert_relative_eq!(w, (a * h_inv(y)).min(1.0), epsilon = 1e-15);
    }

    #[test]
    fn hybrid_is_min_of_halves() {
        let v: Vec<f64> = (1..=50).map(|i| (i as f64 / 60.0).powi(3)).collect();
        let b = batch(&v);
        let h = topk_envelope(Method::Hybrid, &b, 0.25, 50.0).unwrap();
        let kr = topk_envelope(Method::Kr, &b, 0.125, 50.0).unwrap();
        let we = topk_envelope(Method::Wellner, &b, 0.125, 50.0).unwrap();
        for i in 0..50 {
            assert_eq!(h.bounds[i], kr.bounds[i].min(we.bounds[i]));
        }
    }
}
