//! Scalar special functions and concentration-bound primitives.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{LN_2, PI};

use crate::error::{FdpError, Result};

/// κ = π²/6, the constant of the union bounds over slices.
pub const KAPPA: f64 = PI * PI / 6.0;

/// Largest δ for which the KR constant is valid.
pub const KR_DELTA_MAX: f64 = 0.31;

/// Accuracy settings for root finders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    /// Relative tolerance on the residual.
    pub rel_tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl ToleranceConfig {
    pub fn new(rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-8) {
            return Err(FdpError::domain(format!("rel_tol must lie in (0, 1e-8], got {rel_tol}")));
        }
        if max_iter == 0 {
            return Err(FdpError::domain("max_iter must be at least 1"));
        }
        Ok(Self { rel_tol, max_iter })
    }
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: 200 }
    }
}

/// log₂(x) as ln(x)/ln 2.
#[inline]
pub fn log2(x: f64) -> f64 {
    x.ln() / LN_2
}

/// h(1+x) evaluated without cancellation for small x.
fn h_of_excess(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // Alternating series Σ_{n≥2} (−1)ⁿ xⁿ/(n(n−1)).
        let mut term = x * x;
        let mut sum = 0.0;
        for n in 2..12u32 {
            let n = f64::from(n);
            sum += term / (n * (n - 1.0));
            term *= -x;
        }
        sum
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// h(λ) = λ(ln λ − 1) + 1 for λ > 1.
pub fn h_eval(lambda: f64) -> Result<f64> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(FdpError::domain(format!("h requires lambda > 1, got {lambda}")));
    }
    Ok(h_of_excess(lambda - 1.0))
}

/// Inverse of h on (1, ∞).
///
/// Newton on x = λ − 1 started from the upper end of the analytic bracket
/// `[√(2y), √(2y) + y/2]`; bisection takes over if a step leaves the bracket.
pub fn h_inverse(y: f64, tol: ToleranceConfig) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(FdpError::domain(format!("h_inverse requires y > 0, got {y}")));
    }
    let target = tol.rel_tol * y.max(1.0);
    let mut lo = (2.0 * y).sqrt();
    let mut hi = lo + 0.5 * y;
    let mut x = hi;
    for _ in 0..tol.max_iter {
        let g = h_of_excess(x) - y;
        if g.abs() <= target {
            return Ok(1.0 + x);
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(1.0 + x);
        }
        let step = g / x.ln_1p();
        let next = x - step;
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    Err(FdpError::NonConvergence { what: format!("h_inverse({y})"), iterations: tol.max_iter })
}

/// h⁻¹ with the default tolerance; only fails on a domain error.
pub(crate) fn h_inv(y: f64) -> f64 {
    h_inverse(y, ToleranceConfig::default()).expect("h_inverse converges for finite positive y")
}

/// Φ̄(z) = P(Z ≥ z) for a standard normal Z.
pub fn gauss_upper_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
#[inline]
fn gauss_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Lower-tail normal quantile from Acklam's rational approximation.
fn acklam_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// The z with Φ̄(z) = p, for p ∈ (0, 1).
pub fn gauss_upper_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FdpError::domain(format!("quantile requires p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the tail where p is small so that relative accuracy is kept.
    let (tail, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut z = -acklam_lower(tail);
    // Halley refinement against the accurate upper tail.
    for _ in 0..3 {
        let dens = gauss_pdf(z);
        if dens == 0.0 {
            break;
        }
        let u = (gauss_upper_cdf(z) - tail) / dens;
        let next = z + u / (1.0 - 0.5 * z * u);
        if next == z {
            break;
        }
        z = next;
    }
    if sign > 0.0 {
        Ok(z)
    } else {
        // Refine the reflected value against p itself.
        let mut w = -z;
        let dens = gauss_pdf(w);
        if dens > 0.0 {
            let u = (gauss_upper_cdf(w) - p) / dens;
            w += u / (1.0 - 0.5 * w * u);
        }
        Ok(w)
    }
}

fn check_delta(delta: f64, name: &str) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(FdpError::domain(format!("{name} must lie in (0,1), got {delta}")))
    }
}

/// ln(1/δ)/ln(1 + ln(1/δ)), the KR constant (0 < δ ≤ 0.31).
pub fn kr_factor(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= KR_DELTA_MAX) {
        return Err(FdpError::domain(format!("kr_factor requires 0 < delta <= 0.31, got {delta}")));
    }
    let l = -delta.ln();
    Ok(l / l.ln_1p())
}

/// ln(1/δ_a)/(a·ln(1 + (1 − δ_a^{B/a})/B)), the pre-ordered KR prefactor.
pub fn kru_factor(a: u64, delta_a: f64, b: f64) -> Result<f64> {
    if a == 0 {
        return Err(FdpError::domain("kru_factor requires a >= 1"));
    }
    check_delta(delta_a, "delta_a")?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(FdpError::domain(format!("kru_factor requires B > 0, got {b}")));
    }
    let a = a as f64;
    let ln_d = delta_a.ln();
    let one_minus_pow = -((b / a) * ln_d).exp_m1();
    Ok(-ln_d / (a * (one_minus_pow / b).ln_1p()))
}

/// ln(1/δ_a)/(a·ln(1 + ln(1/δ_a)/a)), the online KR prefactor.
pub fn kru_factor_online(a: u64, delta_a: f64) -> Result<f64> {
    if a == 0 {
        return Err(FdpError::domain("kru_factor_online requires a >= 1"));
    }
    check_delta(delta_a, "delta_a")?;
    let a = a as f64;
    let l = -delta_a.ln();
    Ok(l / (a * (l / a).ln_1p()))
}

/// δ_a = δ/(κa²), the per-a level of the union over a ≥ 1.
#[inline]
pub fn delta_a(delta: f64, a: u64) -> f64 {
    let a = a as f64;
    delta / (KAPPA * a * a)
}

/// Δ(u) = 2√ε_u·√(u∨1) + ε_u/2 with ε_u = ln((1+κ)/δ) + 2 ln(1 + log₂(u∨1)).
pub fn freedman_delta(u: f64, delta: f64) -> Result<f64> {
    check_delta(delta, "delta")?;
    if !(u >= 0.0) || !u.is_finite() {
        return Err(FdpError::domain(format!("freedman_delta requires finite u >= 0, got {u}")));
    }
    Ok(freedman_delta_unchecked(u, delta))
}

#[inline]
pub(crate) fn freedman_delta_unchecked(u: f64, delta: f64) -> f64 {
    let u = u.max(1.0);
    let eps = ((1.0 + KAPPA) / delta).ln() + 2.0 * log2(u).ln_1p();
    2.0 * eps.sqrt() * u.sqrt() + 0.5 * eps
}

/// Time-uniform Freedman bound 2√(Ṽε) + Bε/2 with Ṽ = v∨B².
pub fn stitched_freedman_bound(v: f64, b: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0 / (1.0 + KAPPA)) {
        return Err(FdpError::domain(format!(
            "stitched_freedman_bound requires 0 < delta < 1/(1+kappa), got {delta}"
        )));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(FdpError::domain(format!("B must be positive, got {b}")));
    }
    if !(v >= 0.0) || !v.is_finite() {
        return Err(FdpError::domain(format!("v must be finite and >= 0, got {v}")));
    }
    let b2 = b * b;
    let vt = v.max(b2);
    let eps = -delta.ln() + 2.0 * log2(vt / b2).ln_1p();
    Ok(2.0 * (vt * eps).sqrt() + 0.5 * b * eps)
}

/// Which KR prefactor a [`KruTable`] caches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KruKind {
    /// [`kru_factor`] with the given B.
    Preordered { b: f64 },
    /// [`kru_factor_online`].
    Online,
}

/// Lazily extended table of the union-bound prefactors c_a, a = 1, 2, ….
///
/// Every c_a is at least 1, so a term c_a·(a + x)/n with x ≥ 0 exceeds a/n;
/// [`KruTable::minimize`] stops scanning once a/n reaches the running minimum,
/// which makes the search exact over all a ≥ 1.
#[derive(Debug, Clone)]
pub struct KruTable {
    kind: KruKind,
    delta: f64,
    factors: Vec<f64>,
}

impl KruTable {
    pub fn new(kind: KruKind, delta: f64) -> Result<Self> {
        check_delta(delta, "delta")?;
        if let KruKind::Preordered { b } = kind {
            if !(b > 0.0) || !b.is_finite() {
                return Err(FdpError::domain(format!("B must be positive and finite, got {b}")));
            }
        }
        Ok(Self { kind, delta, factors: Vec::new() })
    }

    /// c_a for a ≥ 1.
    pub fn factor(&mut self, a: usize) -> f64 {
        while self.factors.len() < a {
            let next = self.factors.len() as u64 + 1;
            let da = delta_a(self.delta, next);
            let c = match self.kind {
                KruKind::Preordered { b } => kru_factor(next, da, b),
                KruKind::Online => kru_factor_online(next, da),
            }
            .expect("parameters validated at construction");
            self.factors.push(c);
        }
        self.factors[a - 1]
    }

    /// min(1, min over a ≥ 1 and a ≤ `a_max` of c_a·(scale·a + offset)/denom).
    ///
    /// Requires `scale > 0`, `offset ≥ 0` and `denom > 0`.
    pub fn minimize(&mut self, scale: f64, offset: f64, denom: f64, a_max: usize) -> f64 {
        let mut best = 1.0f64;
        let mut a = 1usize;
        while a <= a_max && (scale * a as f64 + offset) / denom < best {
            let v = self.factor(a) * (scale * a as f64 + offset) / denom;
            best = best.min(v);
            a += 1;
        }
        best
    }
}

/// `x ≤ y` for nonnegative `y`, also accepting `x` above `y` by a few ulps.
///
/// Step-up rules compare products of decimal inputs; exact decimal ties such as
/// 3·0.2 vs 2·0.3 must not be lost to rounding.
#[inline]
pub(crate) fn le_ulps(x: f64, y: f64) -> bool {
    x <= y * (1.0 + 8.0 * f64::EPSILON)
}

/// Bisection for an increasing-or-decreasing continuous `f` with a sign change on `[lo, hi]`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(FdpError::NonBracketing(format!("f({lo})={flo}, f({hi})={fhi}")));
    }
    let lo_neg = flo < 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn h_known_values() {
        assert_relative_eq!(h_eval(std::f64::consts::E).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(h_eval(2.0).unwrap(), 0.386_294_361_119_890_6, epsilon = 1e-15);
        assert!(h_eval(1.0 + 1e-9).unwrap() < 1e-17);
        assert!(h_eval(1.0).is_err());
        assert!(h_eval(0.5).is_err());
    }

    #[test]
    fn h_series_matches_closed_form_at_switch() {
        let x = 1e-3;
        let direct = (1.0 + x) * f64::ln_1p(x) - x;
        assert_relative_eq!(h_of_excess(x * 0.999_999), direct, max_relative = 1e-5);
    }

    #[test]
    fn h_inverse_known_values() {
        let t = ToleranceConfig::default();
        assert_relative_eq!(h_inverse(1.0, t).unwrap(), std::f64::consts::E, epsilon = 1e-11);
        assert_relative_eq!(h_inverse(0.386_294, t).unwrap(), 1.999_999_48, epsilon = 1e-8);
        assert_relative_eq!(h_inverse(1.190_360, t).unwrap(), 2.902_533_792_5, epsilon = 1e-9);
        assert!(h_inverse(0.0, t).is_err());
        assert!(h_inverse(-1.0, t).is_err());
    }

    #[test]
    fn h_inverse_sandwich_and_extremes() {
        let t = ToleranceConfig::default();
        for &y in &[1e-12, 1e-6, 0.3, 1.0, 17.0, 1e6, 1e12] {
            let l = h_inverse(y, t).unwrap();
            assert!(l >= 1.0 + (2.0 * y).sqrt() - 1e-12 * l);
            assert!(l <= (1.0 + (y / 2.0).sqrt()).powi(2) * (1.0 + 1e-12));
            assert!((h_eval(l).unwrap() - y).abs() <= 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn tolerance_config_validation() {
        assert!(ToleranceConfig::new(1e-9, 10).is_ok());
        assert!(ToleranceConfig::new(1e-6, 10).is_err());
        assert!(ToleranceConfig::new(0.0, 10).is_err());
        assert!(ToleranceConfig::new(1e-10, 0).is_err());
    }

    #[test]
    fn gaussian_tail() {
        assert_eq!(gauss_upper_cdf(0.0), 0.5);
        assert_eq!(gauss_upper_quantile(0.5).unwrap(), 0.0);
        assert_relative_eq!(gauss_upper_cdf(1.959_964), 0.024_999_999_096_442_4, epsilon = 1e-15);
        assert!(gauss_upper_quantile(0.0).is_err());
        assert!(gauss_upper_quantile(1.0).is_err());
    }

    #[test]
    fn gaussian_quantile_roundtrip() {
        let mut p = 1e-300;
        while p < 1.0 {
            let q = gauss_upper_quantile(p).unwrap();
            let back = gauss_upper_cdf(q);
            assert!((back - p).abs() <= 1e-12 * p, "p={p} back={back}");
            p *= 3.7;
        }
        for &p in &[0.6, 0.9, 0.975, 0.999_999] {
            let q = gauss_upper_quantile(p).unwrap();
            assert!((gauss_upper_cdf(q) - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn kr_constants() {
        assert_relative_eq!(kr_factor(0.25).unwrap(), 1.593_915_047_569_593_4, epsilon = 1e-14);
        assert_relative_eq!(kr_factor(0.05).unwrap(), 2.162_629_357_116_079_5, epsilon = 1e-14);
        assert_relative_eq!(kr_factor(0.31).unwrap(), 1.510_673_314_661_360_4, epsilon = 1e-14);
        assert!(kr_factor(0.32).is_err());
        assert!(kr_factor(0.0).is_err());
    }

    #[test]
    fn kru_constants() {
        let expect = [
            (1, 3.067_826_445_883_711_4),
            (10, 1.662_712_382_366_772_3),
            (100, 1.111_045_809_353_802_3),
            (1000, 1.015_699_822_700_396_2),
        ];
        for (a, v) in expect {
            assert_relative_eq!(kru_factor(a, delta_a(0.25, a), 1.0).unwrap(), v, max_relative = 1e-13);
        }
        let online = [
            (1, 1.778_735_552_080_977_4),
            (10, 1.297_525_725_105_496_4),
            (100, 1.054_499_163_193_987),
            (1000, 1.007_829_372_716_947),
        ];
        for (a, v) in online {
            assert_relative_eq!(kru_factor_online(a, delta_a(0.25, a)).unwrap(), v, max_relative = 1e-13);
        }
        assert_relative_eq!(kru_factor_online(1, 0.05).unwrap(), kr_factor(0.05).unwrap(), epsilon = 1e-15);
        assert!(kru_factor(0, 0.1, 1.0).is_err());
        assert!(kru_factor(1, 0.1, 0.0).is_err());
        assert!(kru_factor_online(1, 1.0).is_err());
    }

    #[test]
    fn freedman_delta_values() {
        assert_relative_eq!(freedman_delta(1.0, 0.25).unwrap(), 4.251_238_794_416_446, epsilon = 1e-13);
        assert_relative_eq!(freedman_delta(2.0, 0.25).unwrap(), 7.346_361_932_342_501, epsilon = 1e-13);
        assert_eq!(freedman_delta(0.0, 0.3).unwrap(), freedman_delta(1.0, 0.3).unwrap());
        let mut prev = 0.0;
        for i in 0..=20 {
            let v = freedman_delta(f64::from(1u32 << i), 0.25).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(freedman_delta(1.0, 1.0).is_err());
        assert!(freedman_delta(-1.0, 0.5).is_err());
    }

    #[test]
    fn stitched_freedman_values() {
        assert_relative_eq!(stitched_freedman_bound(0.0, 1.0, 0.1).unwrap(), 4.186_146_805_267_316, epsilon = 1e-13);
        let c = 3.0;
        let lhs = stitched_freedman_bound(c * c * 5.0, c, 0.1).unwrap();
        let rhs = c * stitched_freedman_bound(5.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-14);
        assert!(stitched_freedman_bound(1.0, 1.0, 0.4).is_err());
    }

    #[test]
    fn kru_table_matches_direct_minimum() {
        let mut t = KruTable::new(KruKind::Preordered { b: 1.0 }, 0.25).unwrap();
        for &(x, n) in &[(0.0, 1.0), (3.0, 40.0), (10.0, 400.0), (0.0, 5000.0)] {
            let brute = (1..=4 * (n as usize))
                .map(|a| kru_factor(a as u64, delta_a(0.25, a as u64), 1.0).unwrap() * (a as f64 + x) / n)
                .fold(1.0, f64::min);
            assert_eq!(t.minimize(1.0, x, n, usize::MAX), brute);
        }
        let mut o = KruTable::new(KruKind::Online, 0.25).unwrap();
        assert_eq!(o.factor(10), kru_factor_online(10, delta_a(0.25, 10)).unwrap());
        assert!(KruTable::new(KruKind::Preordered { b: 0.0 }, 0.25).is_err());
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 200).unwrap();
        assert_relative_eq!(r, std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 10).is_err());
    }
}
