//! Pre-ordered path: LF selection, Freedman/KR/KR-U envelopes and LF-level bounds.
//!
//! The path is R_k = {π(i) : i ≤ k, p_π(i) ≤ s}; p-values arrive already in path order.

use serde::{Deserialize, Serialize};

use crate::envelope::{Envelope, Method};
use crate::error::{FdpError, Result};
use crate::numerics::{bisect, freedman_delta_unchecked, kru_factor, le_ulps, KruKind, KruTable};

/// Path-ordered p-values with the selection threshold `s` and the null-proxy threshold `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreorderedData {
    pvalues: Vec<f64>,
    s: f64,
    lambda: f64,
    labels: Option<Vec<bool>>,
}

impl PreorderedData {
    /// Requires a nonempty vector in [0,1], s ∈ (0,1] and λ ∈ [0,1).
    pub fn new(pvalues: Vec<f64>, s: f64, lambda: f64, labels: Option<Vec<bool>>) -> Result<Self> {
        if pvalues.is_empty() {
            return Err(FdpError::domain("pre-ordered data needs at least one p-value"));
        }
        if let Some((i, v)) = pvalues.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(FdpError::domain(format!("p-value {v} at index {i} is outside [0,1]")));
        }
        if !(s > 0.0 && s <= 1.0) {
            return Err(FdpError::domain(format!("s must lie in (0,1], got {s}")));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(FdpError::domain(format!("lambda must lie in [0,1), got {lambda}")));
        }
        if let Some(l) = &labels {
            if l.len() != pvalues.len() {
                return Err(FdpError::ShapeMismatch { expected: pvalues.len(), got: l.len() });
            }
        }
        Ok(Self { pvalues, s, lambda, labels })
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m(&self) -> usize {
        self.pvalues.len()
    }

    /// B = s/(1 − λ).
    pub fn b(&self) -> f64 {
        self.s / (1.0 - self.lambda)
    }

    /// ν = s(1 + min(s, λ)/(1 − λ)).
    pub fn nu(&self) -> f64 {
        self.s * (1.0 + self.s.min(self.lambda) / (1.0 - self.lambda))
    }

    /// (A_k, N_k) for k = 1..m: counts of p ≤ s and of p > λ among the first k.
    pub fn counts(&self) -> (Vec<usize>, Vec<usize>) {
        let mut a = Vec::with_capacity(self.m());
        let mut n = Vec::with_capacity(self.m());
        let (mut ca, mut cn) = (0, 0);
        for &p in &self.pvalues {
            ca += usize::from(p <= self.s);
            cn += usize::from(p > self.lambda);
            a.push(ca);
            n.push(cn);
        }
        (a, n)
    }

    fn require_lambda_ge_s(&self) -> Result<()> {
        if self.lambda >= self.s {
            Ok(())
        } else {
            Err(FdpError::domain(format!("KR bounds require lambda >= s, got lambda={} s={}", self.lambda, self.s)))
        }
    }
}

/// Outcome of the LF procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LfSelection {
    /// Selected path index.
    pub k_hat: usize,
    /// Rejections A_{k̂}.
    pub r_hat: usize,
}

/// LF estimate B(1 + N_k)/(1 ∨ A_k).
#[inline]
pub fn lf_fdp_hat(b: f64, a_k: usize, n_k: usize) -> f64 {
    b * (1.0 + n_k as f64) / a_k.max(1) as f64
}

/// k̂ = max{k ∈ 0..m : FDP̂_k ≤ α}, with k̂ = 0 when no k qualifies.
///
/// Compared as B(1 + N_k) ≤ α(1 ∨ A_k), with ties within a few ulps accepted.
pub fn lf_select(data: &PreorderedData, alpha: f64) -> Result<LfSelection> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FdpError::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let (a, n) = data.counts();
    Ok(lf_select_counts(&a, &n, data.b(), alpha))
}

pub(crate) fn lf_select_counts(a: &[usize], n: &[usize], b: f64, alpha: f64) -> LfSelection {
    let k_hat = (1..=a.len()).rev().find(|&k| le_ulps(b * (1.0 + n[k - 1] as f64), alpha * a[k - 1].max(1) as f64)).unwrap_or(0);
    let r_hat = if k_hat == 0 { 0 } else { a[k_hat - 1] };
    LfSelection { k_hat, r_hat }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(FdpError::domain(format!("delta must lie in (0,1), got {delta}")))
    }
}

/// Per-k envelope for the pre-ordered path.
///
/// KR-U takes the exact minimum over all a ≥ 1 (see [`KruTable::minimize`]);
/// the minimizer never exceeds A_k.
pub fn preordered_envelope(method: Method, data: &PreorderedData, delta: f64) -> Result<Envelope> {
    check_delta(delta)?;
    let (a, n) = data.counts();
    let b = data.b();
    let bounds: Vec<f64> = match method {
        Method::Freedman => {
            let nu = data.nu();
            a.iter()
                .zip(&n)
                .enumerate()
                .map(|(i, (&ak, &nk))| {
                    if ak == 0 {
                        1.0
                    } else {
                        let k = (i + 1) as f64;
                        ((b * nk as f64 + freedman_delta_unchecked(nu * k, delta)) / ak as f64).min(1.0)
                    }
                })
                .collect()
        }
        Method::Kr => {
            data.require_lambda_ge_s()?;
            let c = kru_factor(1, delta, b)?;
            a.iter().zip(&n).map(|(&ak, &nk)| (c * (1.0 + b * nk as f64) / ak.max(1) as f64).min(1.0)).collect()
        }
        Method::Kru => {
            data.require_lambda_ge_s()?;
            let mut table = KruTable::new(KruKind::Preordered { b }, delta)?;
            a.iter()
                .zip(&n)
                .map(|(&ak, &nk)| table.minimize(1.0, b * nk as f64, ak.max(1) as f64, usize::MAX))
                .collect()
        }
        other => return Err(FdpError::domain(format!("{other} is not a pre-ordered envelope"))),
    };
    Ok(Envelope { bounds, method, delta, adaptive: false, interpolated: false, m_eff: data.m() as f64 })
}

/// FDP bound at the LF rejection set of level `alpha` (requires λ ≥ s).
pub fn lf_fdp_bound(method: Method, data: &PreorderedData, alpha: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    data.require_lambda_ge_s()?;
    let sel = lf_select(data, alpha)?;
    lf_fdp_bound_at(method, data.b(), data.nu(), sel, alpha, delta)
}

/// Closed-form LF-level bound for a known selection.
pub fn lf_fdp_bound_at(method: Method, b: f64, nu: f64, sel: LfSelection, alpha: f64, delta: f64) -> Result<f64> {
    let rr = sel.r_hat.max(1) as f64;
    let v = match method {
        Method::Kr => kru_factor(1, delta, b)? * (alpha + 1.0 / rr),
        Method::Freedman => alpha + freedman_delta_unchecked(nu * sel.k_hat as f64, delta) / rr,
        Method::Kru => {
            let mut table = KruTable::new(KruKind::Preordered { b }, delta)?;
            table.minimize(1.0 / rr, alpha, 1.0, sel.r_hat.max(1))
        }
        other => return Err(FdpError::domain(format!("{other} is not a pre-ordered bound"))),
    };
    Ok(v.min(1.0))
}

/// Limit quantities of the LF procedure under a VCT-type model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDiagnostics {
    /// Critical level ᾱ below which the LF procedure has no asymptotic power.
    pub alpha_bar: f64,
    /// t*_α, or +∞ when FDP^∞ stays below α.
    pub t_star: f64,
    /// (t, FDP^∞(t)) on the requested grid.
    pub curve: Vec<(f64, f64)>,
}

/// FDP^∞ as a function of the running signal fraction Π.
fn fdp_infinity(pi: f64, f1_s: f64, f1_lambda: f64, s: f64, lambda: f64) -> f64 {
    let up = (1.0 - f1_lambda) / (1.0 - lambda) - 1.0;
    let down = f1_s / s - 1.0;
    (1.0 + pi * up) / (1.0 + pi * down)
}

/// ᾱ, t*_α and the FDP^∞ curve.
///
/// `cum_pi(t)` is Π(t) = t⁻¹∫₀ᵗ π, continuous and nonincreasing with
/// `cum_pi(0) = π(0)`; `pi_limit` is π(1), the limit of Π at infinity.
#[allow(clippy::too_many_arguments)]
pub fn power_diagnostics_preordered<F: Fn(f64) -> f64>(
    cum_pi: F,
    pi_limit: f64,
    f1_s: f64,
    f1_lambda: f64,
    s: f64,
    lambda: f64,
    alpha: f64,
    grid: &[f64],
) -> Result<PowerDiagnostics> {
    if !(f1_s > s && f1_lambda > lambda) {
        return Err(FdpError::domain("need F1(s) > s and F1(lambda) > lambda"));
    }
    if !(s > 0.0 && s <= 1.0 && (0.0..1.0).contains(&lambda)) {
        return Err(FdpError::domain("need s in (0,1] and lambda in [0,1)"));
    }
    let fdp = |t: f64| fdp_infinity(cum_pi(t), f1_s, f1_lambda, s, lambda);
    let alpha_bar = fdp_infinity(cum_pi(0.0), f1_s, f1_lambda, s, lambda);
    if alpha <= alpha_bar {
        return Err(FdpError::domain(format!("alpha={alpha} must exceed the critical level {alpha_bar}")));
    }
    let curve = grid.iter().map(|&t| (t, fdp(t))).collect();
    let t_star = if fdp_infinity(pi_limit, f1_s, f1_lambda, s, lambda) <= alpha {
        f64::INFINITY
    } else {
        let mut hi = 1.0;
        while fdp(hi) <= alpha {
            hi *= 2.0;
            if !hi.is_finite() {
                return Ok(PowerDiagnostics { alpha_bar, t_star: f64::INFINITY, curve });
            }
        }
        bisect(|t| fdp(t) - alpha, 0.0, hi, 200)?
    };
    Ok(PowerDiagnostics { alpha_bar, t_star, curve })
}
