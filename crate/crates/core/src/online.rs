//! Online path: LORD critical values, the mFDR condition and online envelopes.
//!
//! The path is R_k = {i ≤ k : p_i ≤ α_i}.

use serde::{Deserialize, Serialize};

use crate::envelope::{interpolate_bounds, Method};
use crate::error::{FdpError, Result};
use crate::numerics::{freedman_delta_unchecked, kru_factor_online, KruKind, KruTable};

/// Default spending exponent, γ_j ∝ j^{-1.6}.
pub const DEFAULT_GAMMA_EXPONENT: f64 = 1.6;

/// Riemann zeta for s > 1 by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(FdpError::domain(format!("zeta requires s > 1, got {s}")));
    }
    const N: u32 = 1000;
    let n = f64::from(N);
    // Sum the small terms first.
    let head: f64 = (1..N).rev().map(|j| f64::from(j).powf(-s)).sum();
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    Ok(head + tail)
}

/// Spending sequence γ_j = j^{-exponent}/Z for j ≥ 1 and γ_0 = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpendingSequence {
    pub exponent: f64,
    /// Divide by Z = ζ(exponent) so that Σγ = 1; otherwise Z = 1.
    pub normalized: bool,
}

impl Default for SpendingSequence {
    fn default() -> Self {
        Self { exponent: DEFAULT_GAMMA_EXPONENT, normalized: true }
    }
}

impl SpendingSequence {
    /// The normalizing constant Z.
    pub fn normalizer(&self) -> Result<f64> {
        if self.normalized {
            zeta(self.exponent)
        } else if self.exponent > 0.0 {
            Ok(1.0)
        } else {
            Err(FdpError::domain("spending exponent must be positive"))
        }
    }
}

/// Incremental state of an online procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    /// Steps taken so far.
    pub k: usize,
    /// Σ_{i≤k} α_i.
    pub alpha_sum: f64,
    /// R(k).
    pub r: usize,
    /// τ_1 < τ_2 < … (1-based step indices).
    pub rejection_times: Vec<usize>,
    pub w0: f64,
    pub gamma: SpendingSequence,
    pub alpha_level: f64,
    /// γ_0..γ_{k+1}.
    gamma_table: Vec<f64>,
    inv_z: f64,
}

impl OnlineState {
    /// Fresh LORD state with initial wealth `w0 ∈ [0, α]`.
    pub fn new(alpha_level: f64, w0: f64, gamma: SpendingSequence) -> Result<Self> {
        if !(alpha_level > 0.0 && alpha_level < 1.0) {
            return Err(FdpError::domain(format!("alpha must lie in (0,1), got {alpha_level}")));
        }
        if !(0.0..=alpha_level).contains(&w0) {
            return Err(FdpError::domain(format!("W0 must lie in [0, alpha], got {w0}")));
        }
        let z = gamma.normalizer()?;
        let mut st = Self {
            k: 0,
            alpha_sum: 0.0,
            r: 0,
            rejection_times: Vec::new(),
            w0,
            gamma,
            alpha_level,
            gamma_table: vec![0.0],
            inv_z: 1.0 / z,
        };
        st.extend_gamma();
        Ok(st)
    }

    /// LORD with W₀ = α/2 and the default normalized spending sequence.
    pub fn lord_default(alpha_level: f64) -> Result<Self> {
        Self::new(alpha_level, alpha_level / 2.0, SpendingSequence::default())
    }

    fn extend_gamma(&mut self) {
        while self.gamma_table.len() < self.k + 2 {
            let j = self.gamma_table.len() as f64;
            self.gamma_table.push(j.powf(-self.gamma.exponent) * self.inv_z);
        }
    }

    /// γ_j for j ≤ k + 1.
    pub fn gamma_at(&self, j: usize) -> f64 {
        self.gamma_table[j]
    }

    /// LORD critical value for step k + 1; uses only past decisions.
    pub fn lord_next_alpha(&self) -> f64 {
        let t = self.k + 1;
        let g = &self.gamma_table;
        let mut a = self.w0 * g[t];
        if let Some((&tau1, rest)) = self.rejection_times.split_first() {
            let tail: f64 = rest.iter().map(|&tau| g[t - tau]).sum();
            a += (self.alpha_level - self.w0) * g[t - tau1] + self.alpha_level * tail;
        }
        a
    }

    /// Takes one step at critical value `alpha_k`; returns whether `p` was rejected.
    pub fn step_with(&mut self, p: f64, alpha_k: f64) -> bool {
        self.k += 1;
        self.alpha_sum += alpha_k;
        let rejected = p <= alpha_k;
        if rejected {
            self.r += 1;
            self.rejection_times.push(self.k);
        }
        self.extend_gamma();
        rejected
    }

    /// One LORD step: computes α_k, rejects iff p ≤ α_k, updates the state.
    pub fn step(&mut self, p: f64) -> (bool, f64) {
        let alpha_k = self.lord_next_alpha();
        (self.step_with(p, alpha_k), alpha_k)
    }
}

/// Σ_{i≤k} α_i ≤ α(1 ∨ R(k)).
pub fn check_mfdr_condition(state: &OnlineState) -> bool {
    state.alpha_sum <= state.alpha_level * state.r.max(1) as f64
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(FdpError::domain(format!("delta must lie in (0,1), got {delta}")))
    }
}

/// Reusable evaluator of the three online envelopes at a fixed δ.
#[derive(Debug, Clone)]
pub struct OnlineEnvelopes {
    delta: f64,
    kr1: f64,
    table: KruTable,
}

impl OnlineEnvelopes {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { delta, kr1: kru_factor_online(1, delta)?, table: KruTable::new(KruKind::Online, delta)? })
    }

    /// Bound from the critical-value sum and the rejection count.
    ///
    /// KR-U is minimized exactly over all a ≥ 1.
    pub fn bound(&mut self, method: Method, alpha_sum: f64, r: usize) -> Result<f64> {
        let rr = r.max(1) as f64;
        let v = match method {
            Method::Freedman => (alpha_sum + freedman_delta_unchecked(alpha_sum, self.delta)) / rr,
            Method::Kr => self.kr1 * (1.0 + alpha_sum) / rr,
            Method::Kru => self.table.minimize(1.0, alpha_sum, rr, usize::MAX),
            other => return Err(FdpError::domain(format!("{other} is not an online envelope"))),
        };
        Ok(v.min(1.0))
    }

    /// Bound at the current state.
    pub fn at_state(&mut self, method: Method, state: &OnlineState) -> Result<f64> {
        self.bound(method, state.alpha_sum, state.r)
    }
}

/// Online envelope value at the current state.
pub fn online_envelope(method: Method, state: &OnlineState, delta: f64) -> Result<f64> {
    OnlineEnvelopes::new(delta)?.at_state(method, state)
}

/// Level-α bounds for procedures satisfying the mFDR condition.
pub fn lord_fdp_bound(method: Method, alpha: f64, r: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let rr = r.max(1) as f64;
    let v = match method {
        Method::Freedman => alpha + freedman_delta_unchecked(alpha * rr, delta) / rr,
        Method::Kr => kru_factor_online(1, delta)? * (alpha + 1.0 / rr),
        Method::Kru => KruTable::new(KruKind::Online, delta)?.minimize(1.0 / rr, alpha, 1.0, usize::MAX),
        other => return Err(FdpError::domain(format!("{other} is not an online bound"))),
    };
    Ok(v.min(1.0))
}

/// One row of a processed stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineRecord {
    pub k: usize,
    pub alpha_k: f64,
    pub rejected: bool,
    #[serde(rename = "R_k")]
    pub r_k: usize,
    pub bound_freed: f64,
    pub bound_kr: f64,
    pub bound_kru: f64,
}

/// Runs LORD over a stream and records all three envelopes after each step.
pub fn run_lord_stream<I: IntoIterator<Item = f64>>(
    pvalues: I,
    mut state: OnlineState,
    delta: f64,
) -> Result<Vec<OnlineRecord>> {
    let mut env = OnlineEnvelopes::new(delta)?;
    let mut out = Vec::new();
    for p in pvalues {
        if !(0.0..=1.0).contains(&p) {
            return Err(FdpError::domain(format!("p-value {p} at step {} is outside [0,1]", state.k + 1)));
        }
        let (rejected, alpha_k) = state.step(p);
        out.push(OnlineRecord {
            k: state.k,
            alpha_k,
            rejected,
            r_k: state.r,
            bound_freed: env.at_state(Method::Freedman, &state)?,
            bound_kr: env.at_state(Method::Kr, &state)?,
            bound_kru: env.at_state(Method::Kru, &state)?,
        });
    }
    Ok(out)
}

/// Interpolates a recorded bound history against the rejection counts R(k).
pub fn interpolate_history(bounds: &[f64], rejections: &[usize]) -> Result<Vec<f64>> {
    interpolate_bounds(bounds, rejections)
}
