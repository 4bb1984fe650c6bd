//! Envelope container, method tags and the interpolation pass.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FdpError, Result};

/// Envelope family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simes,
    Dkw,
    Kr,
    Wellner,
    /// Pointwise minimum of KR and Wellner, each at δ/2.
    Hybrid,
    Freedman,
    /// KR with a union bound over the free parameter a.
    Kru,
}

impl Method {
    /// Methods available on the top-k path.
    pub const TOPK: [Method; 5] = [Method::Simes, Method::Dkw, Method::Kr, Method::Wellner, Method::Hybrid];
    /// Methods available on pre-ordered and online paths.
    pub const SEQUENTIAL: [Method; 3] = [Method::Freedman, Method::Kr, Method::Kru];

    pub fn name(self) -> &'static str {
        match self {
            Method::Simes => "simes",
            Method::Dkw => "dkw",
            Method::Kr => "kr",
            Method::Wellner => "wellner",
            Method::Hybrid => "hybrid",
            Method::Freedman => "freedman",
            Method::Kru => "kru",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = FdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "simes" => Ok(Method::Simes),
            "dkw" => Ok(Method::Dkw),
            "kr" => Ok(Method::Kr),
            "wellner" | "well" => Ok(Method::Wellner),
            "hybrid" => Ok(Method::Hybrid),
            "freedman" | "freed" => Ok(Method::Freedman),
            "kru" => Ok(Method::Kru),
            other => Err(FdpError::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// Per-k FDP upper bounds along a path; `bounds[k-1]` bounds FDP(R_k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub bounds: Vec<f64>,
    pub method: Method,
    pub delta: f64,
    /// Built with an m₀ upper bound in place of m.
    pub adaptive: bool,
    /// Post-processed by [`interpolate`].
    pub interpolated: bool,
    /// Effective number of hypotheses used in the formulas.
    pub m_eff: f64,
}

impl Envelope {
    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Bound for the k-th path element (1-based); `k = 0` is the empty set.
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.bounds[k - 1]
        }
    }
}

/// Sharpens an envelope using nested-path structure.
///
/// `sizes[k-1]` is |R_k|. Output at k is
/// `min_{k'≤k}(|R_k| − |R_k'| + |R_k'|·b_k') / (|R_k| ∨ 1)`, computed in one
/// pass with a running minimum of `|R_k'|·b_k' − |R_k'|`.
pub fn interpolate(raw: &Envelope, sizes: &[usize]) -> Result<Envelope> {
    if sizes.len() != raw.bounds.len() {
        return Err(FdpError::ShapeMismatch { expected: raw.bounds.len(), got: sizes.len() });
    }
    let bounds = interpolate_bounds(&raw.bounds, sizes)?;
    Ok(Envelope { bounds, interpolated: true, ..raw.clone() })
}

/// Slice form of [`interpolate`].
pub fn interpolate_bounds(bounds: &[f64], sizes: &[usize]) -> Result<Vec<f64>> {
    if sizes.len() != bounds.len() {
        return Err(FdpError::ShapeMismatch { expected: bounds.len(), got: sizes.len() });
    }
    let mut out = Vec::with_capacity(bounds.len());
    let mut best = f64::INFINITY;
    let mut prev = 0usize;
    for (i, (&b, &s)) in bounds.iter().zip(sizes).enumerate() {
        if s < prev {
            return Err(FdpError::NonMonotone(i));
        }
        prev = s;
        let sf = s as f64;
        best = best.min(sf * b - sf);
        let v = (sf + best) / sf.max(1.0);
        out.push(v.clamp(0.0, 1.0).min(b));
    }
    Ok(out)
}
