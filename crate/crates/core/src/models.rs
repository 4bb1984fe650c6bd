//! Synthetic data generators, oracle FDP and validation-only oracle bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FdpError, Result};
use crate::numerics::{bisect, freedman_delta_unchecked, gauss_upper_cdf, gauss_upper_quantile};
use crate::preordered::PreorderedData;
use crate::topk::PValueBatch;

/// Deterministic generator for replication `stream` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a run seed with a grid coordinate such as m.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sparse one-sided Gaussian location model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLocationConfig {
    pub m: usize,
    /// Additive signal offset in μ_m = √(2β ln m) + b.
    pub b: f64,
    /// Alternatives m₁ = ⌊c·m^{1−β}⌋.
    pub c: f64,
    pub beta: f64,
    /// Replaces μ_m when set.
    #[serde(default)]
    pub mu: Option<f64>,
}

impl GaussianLocationConfig {
    pub fn new(m: usize, b: f64, c: f64, beta: f64, mu: Option<f64>) -> Result<Self> {
        let cfg = Self { m, b, c, beta, mu };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Dense model with a fixed null fraction `pi0` and signal `mu`.
    pub fn dense(m: usize, pi0: f64, mu: f64) -> Result<Self> {
        Self::new(m, mu, 1.0 - pi0, 0.0, None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(FdpError::Config("m must be at least 1".into()));
        }
        if !(self.b > 0.0) {
            return Err(FdpError::Config(format!("b must be positive, got {}", self.b)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(FdpError::Config(format!("c must lie in (0,1), got {}", self.c)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(FdpError::Config(format!("beta must lie in [0,1), got {}", self.beta)));
        }
        if let Some(mu) = self.mu {
            if !mu.is_finite() {
                return Err(FdpError::Config("mu must be finite".into()));
            }
        }
        if self.m1() == 0 {
            return Err(FdpError::Config(format!("c*m^(1-beta) < 1 for m={}: no alternatives", self.m)));
        }
        Ok(())
    }

    pub fn m1(&self) -> usize {
        (self.c * (self.m as f64).powf(1.0 - self.beta)).floor() as usize
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| (2.0 * self.beta * (self.m as f64).ln()).sqrt() + self.b)
    }
}

/// Draws a labelled batch: the first m₁ entries are alternatives.
pub fn gen_gaussian_topk<R: Rng + ?Sized>(cfg: &GaussianLocationConfig, rng: &mut R) -> Result<PValueBatch> {
    cfg.validate()?;
    let m1 = cfg.m1();
    let mu = cfg.mu();
    let mut values = Vec::with_capacity(cfg.m);
    let mut labels = Vec::with_capacity(cfg.m);
    for i in 0..cfg.m {
        let alt = i < m1;
        let x: f64 = rng.sample::<f64, _>(StandardNormal) + if alt { mu } else { 0.0 };
        values.push(gauss_upper_cdf(x));
        labels.push(alt);
    }
    PValueBatch::new(values, Some(labels))
}

/// Instantaneous signal probability π(t), constant for t ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PiCurve {
    /// π(t) = π₁·b·e^{−bt}/(1 − e^{−b}), so that Π(1) = π₁.
    LfExponential { pi1: f64, b: f64 },
    /// π(t) = 1 ∧ (1/2 + 0 ∨ (z − z·t)/(2(z − 1))): decays linearly to 1/2 at t = 1.
    KnockoffLinear { z: f64 },
    /// Piecewise linear through `(t, π)` points on [0, 1], first t = 0, last t = 1.
    Tabulated { points: Vec<(f64, f64)> },
}

impl PiCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            PiCurve::LfExponential { pi1, b } => {
                if !(*b > 0.0) || !(*pi1 > 0.0) || self.pi(0.0) >= 1.0 {
                    return Err(FdpError::Config("lf-exponential needs b > 0, pi1 > 0 and pi(0) < 1".into()));
                }
            }
            PiCurve::KnockoffLinear { z } => {
                if !(*z > 1.0) {
                    return Err(FdpError::Config(format!("knockoff-linear needs z > 1, got {z}")));
                }
            }
            PiCurve::Tabulated { points } => {
                let ok = points.len() >= 2
                    && points[0].0 == 0.0
                    && points[points.len() - 1].0 == 1.0
                    && points.windows(2).all(|w| w[0].0 < w[1].0)
                    && points.iter().all(|&(_, p)| (0.0..=1.0).contains(&p))
                    && points[0].1 > 0.0;
                if !ok {
                    return Err(FdpError::Config("tabulated curve needs increasing t from 0 to 1, pi in [0,1], pi(0) > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn pi(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            PiCurve::LfExponential { pi1, b } => pi1 * b * (-b * t).exp() / (-(-b).exp_m1()),
            PiCurve::KnockoffLinear { z } => (0.5 + (0.5 * (z - z * t) / (z - 1.0)).max(0.0)).min(1.0),
            PiCurve::Tabulated { points } => {
                let i = points.partition_point(|&(x, _)| x <= t).clamp(1, points.len() - 1);
                let (x0, y0) = points[i - 1];
                let (x1, y1) = points[i];
                y0 + (y1 - y0) * (t - x0) / (x1 - x0)
            }
        }
    }

    /// ∫₀ˣ π.
    fn integral(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let head = x.min(1.0);
        let inner = match self {
            PiCurve::LfExponential { pi1, b } => pi1 * (-(-b * head).exp_m1()) / (-(-b).exp_m1()),
            PiCurve::KnockoffLinear { z } => {
                let knee = 1.0 / z;
                if head <= knee {
                    head
                } else {
                    let lin = |u: f64| 0.5 * u + 0.5 * z / (z - 1.0) * (u - 0.5 * u * u);
                    knee + lin(head) - lin(knee)
                }
            }
            PiCurve::Tabulated { points } => {
                let mut acc = 0.0;
                for w in points.windows(2) {
                    let (x0, y0) = w[0];
                    let (x1, _) = w[1];
                    if head <= x0 {
                        break;
                    }
                    let hi = head.min(x1);
                    acc += 0.5 * (y0 + self.pi(hi)) * (hi - x0);
                }
                acc
            }
        };
        inner + (x - 1.0).max(0.0) * self.pi(1.0)
    }

    /// Π(t) = t⁻¹∫₀ᵗ π with Π(0) = π(0).
    pub fn cum_mean(&self, t: f64) -> f64 {
        if t <= 0.0 {
            self.pi(0.0)
        } else {
            self.integral(t) / t
        }
    }
}

/// Marginal p-value law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum PLaw {
    Uniform,
    /// p = Φ̄(X) with X ~ N(μ, 1).
    OneSidedGaussian { mu: f64 },
    /// p = 1/2 with probability q, else 1.
    BinaryKnockoff { q: f64 },
}

impl PLaw {
    /// Null law of the knockoff setting.
    pub const KNOCKOFF_NULL: PLaw = PLaw::BinaryKnockoff { q: 0.5 };
    /// Alternative law of the knockoff setting.
    pub const KNOCKOFF_ALT: PLaw = PLaw::BinaryKnockoff { q: 0.9 };

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PLaw::Uniform => rng.random::<f64>(),
            PLaw::OneSidedGaussian { mu } => gauss_upper_cdf(rng.sample::<f64, _>(StandardNormal) + mu),
            PLaw::BinaryKnockoff { q } => {
                if rng.random::<f64>() < q {
                    0.5
                } else {
                    1.0
                }
            }
        }
    }

    /// F(t) = P(p ≤ t).
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match *self {
            PLaw::Uniform => t,
            PLaw::OneSidedGaussian { mu } => {
                if t == 0.0 {
                    0.0
                } else {
                    gauss_upper_cdf(gauss_upper_quantile(t).expect("t in (0,1)") - mu)
                }
            }
            PLaw::BinaryKnockoff { q } => {
                if t < 0.5 {
                    0.0
                } else {
                    q
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PLaw::Uniform => Ok(()),
            PLaw::OneSidedGaussian { mu } if mu.is_finite() => Ok(()),
            PLaw::BinaryKnockoff { q } if (0.0..=1.0).contains(&q) => Ok(()),
            other => Err(FdpError::Config(format!("invalid p-value law {other:?}"))),
        }
    }
}

/// Sparse varying-coefficient two-groups model for pre-ordered data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VctConfig {
    pub pi_curve: PiCurve,
    pub beta: f64,
    pub null_law: PLaw,
    pub alt_law: PLaw,
    pub s: f64,
    pub lambda: f64,
}

impl VctConfig {
    /// Binary knockoff setting with s = λ = 1/2.
    pub fn knockoff(z: f64, beta: f64) -> Self {
        Self {
            pi_curve: PiCurve::KnockoffLinear { z },
            beta,
            null_law: PLaw::KNOCKOFF_NULL,
            alt_law: PLaw::KNOCKOFF_ALT,
            s: 0.5,
            lambda: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pi_curve.validate()?;
        self.null_law.validate()?;
        self.alt_law.validate()?;
        if !(0.0..1.0).contains(&self.beta) {
            return Err(FdpError::Config(format!("beta must lie in [0,1), got {}", self.beta)));
        }
        Ok(())
    }
}

/// Draws path-ordered data with H_k ~ Bernoulli(π(m^{β−1}·k)).
pub fn gen_vct<R: Rng + ?Sized>(cfg: &VctConfig, m: usize, rng: &mut R) -> Result<PreorderedData> {
    cfg.validate()?;
    if m == 0 {
        return Err(FdpError::Config("m must be at least 1".into()));
    }
    let scale = (m as f64).powf(cfg.beta - 1.0);
    let mut p = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for k in 1..=m {
        let alt = rng.random::<f64>() < cfg.pi_curve.pi(scale * k as f64);
        p.push(if alt { cfg.alt_law.sample(rng) } else { cfg.null_law.sample(rng) });
        labels.push(alt);
    }
    PreorderedData::new(p, cfg.s, cfg.lambda, Some(labels))
}

/// I.i.d. two-groups stream for online experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineMixtureConfig {
    pub pi1: f64,
    pub mu: f64,
    pub length: usize,
}

impl OnlineMixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi1) || !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(FdpError::Config("online mixture needs pi1 in [0,1] and finite mu >= 0".into()));
        }
        Ok(())
    }
}

/// Draws `(pvalues, labels)`; an alternative is p = Φ̄(X) with X ~ N(μ, 1).
pub fn gen_online_mixture<R: Rng + ?Sized>(cfg: &OnlineMixtureConfig, rng: &mut R) -> Result<(Vec<f64>, Vec<bool>)> {
    cfg.validate()?;
    let mut p = Vec::with_capacity(cfg.length);
    let mut labels = Vec::with_capacity(cfg.length);
    for _ in 0..cfg.length {
        let alt = rng.random::<f64>() < cfg.pi1;
        let x: f64 = rng.sample(StandardNormal);
        p.push(gauss_upper_cdf(if alt { x + cfg.mu } else { x }));
        labels.push(alt);
    }
    Ok((p, labels))
}

/// FDP of every path element.
///
/// Hypotheses enter the path in the order `order`; R_k holds the first
/// `sizes[k-1]` of them. `labels[i]` is true when hypothesis i is an alternative.
pub fn true_fdp(order: &[usize], sizes: &[usize], labels: Option<&[bool]>) -> Result<Vec<f64>> {
    let labels = labels.ok_or(FdpError::MissingLabels)?;
    let mut out = Vec::with_capacity(sizes.len());
    let mut nulls = 0usize;
    let mut seen = 0usize;
    for (i, &s) in sizes.iter().enumerate() {
        if s < seen {
            return Err(FdpError::NonMonotone(i));
        }
        if s > order.len() {
            return Err(FdpError::ShapeMismatch { expected: order.len(), got: s });
        }
        for &h in &order[seen..s] {
            nulls += usize::from(!labels[h]);
        }
        seen = s;
        out.push(nulls as f64 / s.max(1) as f64);
    }
    Ok(out)
}

/// Oracle bound V̄_k on the false-discovery count along a sequence of tests.
///
/// `ordering` lists hypothesis indices in test order, `critical[i]` is α_i of
/// the i-th test, `pvalues`/`labels` are indexed by hypothesis.
pub fn oracle_vbar(
    labels: &[bool],
    ordering: &[usize],
    critical: &[f64],
    pvalues: &[f64],
    lambda: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(FdpError::domain(format!("lambda must lie in [0,1), got {lambda}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(FdpError::domain(format!("delta must lie in (0,1), got {delta}")));
    }
    if critical.len() != ordering.len() {
        return Err(FdpError::ShapeMismatch { expected: ordering.len(), got: critical.len() });
    }
    if labels.len() != pvalues.len() {
        return Err(FdpError::ShapeMismatch { expected: pvalues.len(), got: labels.len() });
    }
    let mut first = 0.0;
    let mut nu_sum = 0.0;
    let mut out = Vec::with_capacity(ordering.len());
    for (&h, &a) in ordering.iter().zip(critical) {
        if !labels[h] {
            if pvalues[h] > lambda {
                first += a / (1.0 - lambda);
            }
            nu_sum += a * (1.0 + a.min(lambda) / (1.0 - lambda));
        }
        out.push(first + freedman_delta_unchecked(nu_sum, delta));
    }
    Ok(out)
}

/// Roots t* and t♯ of G_m(t) = 2t/α and G_m(t) = t/(2α).
///
/// G_m(t) = (m₀/m)·t + (m₁/m)·Φ̄(Φ̄⁻¹(t) − μ_m); the roots are found by bisection
/// on ln t over [ln 1e-300, 0].
pub fn bh_theoretical_threshold(cfg: &GaussianLocationConfig, alpha: f64) -> Result<(f64, f64)> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FdpError::domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let m = cfg.m as f64;
    let f1 = cfg.m1() as f64 / m;
    let mu = cfg.mu();
    let ratio = |u: f64| {
        let t = u.exp();
        let q = gauss_upper_quantile(t.min(1.0 - f64::EPSILON)).expect("t in (0,1)");
        (1.0 - f1) + f1 * gauss_upper_cdf(q - mu) / t
    };
    let root = |c: f64| bisect(|u| ratio(u) - c, (1e-300f64).ln(), 0.0, 400).map(f64::exp);
    Ok((root(2.0 / alpha)?, root(0.5 / alpha)?))
}
