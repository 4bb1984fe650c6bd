//! Experiment configuration, loadable from TOML.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envelope::Method;
use crate::error::{FdpError, Result};
use crate::models::{GaussianLocationConfig, OnlineMixtureConfig, VctConfig};
use crate::online::{SpendingSequence, DEFAULT_GAMMA_EXPONENT};

/// Which path and reference procedure an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Top-k path, BH reference.
    Topk,
    /// Pre-ordered path, LF reference.
    Preordered,
    /// Online path, LORD reference.
    Online,
}

/// Data-generating model; `m` comes from the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Gaussian {
        b: f64,
        c: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default)]
        mu: Option<f64>,
    },
    Vct(VctConfig),
    /// Online stream whose length is the grid value m.
    Mixture { pi1: f64, mu: f64 },
}

impl ModelConfig {
    /// Dense Gaussian model with null fraction `pi0` and signal `mu`.
    pub fn dense_gaussian(pi0: f64, mu: f64) -> Self {
        ModelConfig::Gaussian { b: mu, c: 1.0 - pi0, beta: 0.0, mu: None }
    }

    pub fn gaussian_at(&self, m: usize) -> Result<GaussianLocationConfig> {
        match *self {
            ModelConfig::Gaussian { b, c, beta, mu } => GaussianLocationConfig::new(m, b, c, beta, mu),
            _ => Err(FdpError::Config("expected a gaussian model".into())),
        }
    }

    pub fn mixture_at(&self, m: usize) -> Result<OnlineMixtureConfig> {
        match *self {
            ModelConfig::Mixture { pi1, mu } => {
                let cfg = OnlineMixtureConfig { pi1, mu, length: m };
                cfg.validate()?;
                Ok(cfg)
            }
            _ => Err(FdpError::Config("expected a mixture model".into())),
        }
    }

    fn setting(&self) -> Setting {
        match self {
            ModelConfig::Gaussian { .. } => Setting::Topk,
            ModelConfig::Vct(_) => Setting::Preordered,
            ModelConfig::Mixture { .. } => Setting::Online,
        }
    }
}

/// An envelope method plus its post-processing flags.
///
/// Text form: `wellner`, `wellner-adapt`, `kr-interp`, `dkw-adapt-interp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MethodSpec {
    pub method: Method,
    pub adaptive: bool,
    pub interpolated: bool,
}

impl MethodSpec {
    pub const fn raw(method: Method) -> Self {
        Self { method, adaptive: false, interpolated: false }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.method)?;
        if self.adaptive {
            f.write_str("-adapt")?;
        }
        if self.interpolated {
            f.write_str("-interp")?;
        }
        Ok(())
    }
}

impl FromStr for MethodSpec {
    type Err = FdpError;

    fn from_str(s: &str) -> Result<Self> {
        let mut s = s.trim().to_ascii_lowercase();
        let mut take = |suffix: &str| {
            let hit = s.ends_with(suffix);
            if hit {
                s.truncate(s.len() - suffix.len());
            }
            hit
        };
        let interpolated = take("-interp");
        let adaptive = take("-adapt");
        Ok(Self { method: s.parse()?, adaptive, interpolated })
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = FdpError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<MethodSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// LORD parameters for online experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LordConfig {
    /// W₀ as a fraction of α.
    pub w0_fraction: f64,
    pub gamma_exponent: f64,
    /// Use γ_j = j^{-exponent} without normalization.
    pub raw_gamma: bool,
}

impl Default for LordConfig {
    fn default() -> Self {
        Self { w0_fraction: 0.5, gamma_exponent: DEFAULT_GAMMA_EXPONENT, raw_gamma: false }
    }
}

impl LordConfig {
    pub fn spending(&self) -> SpendingSequence {
        SpendingSequence { exponent: self.gamma_exponent, normalized: !self.raw_gamma }
    }
}

fn default_delta() -> f64 {
    0.25
}

fn default_reps() -> usize {
    1000
}

fn default_interp_cap() -> usize {
    100_000
}

/// A replicated experiment over an (m, α) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub model: ModelConfig,
    pub m_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_reps")]
    pub replications: usize,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lord: LordConfig,
    /// Interpolated methods are skipped for m above this value.
    #[serde(default = "default_interp_cap")]
    pub interpolation_max_m: usize,
    /// Record wall time per row (makes output nondeterministic).
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| FdpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FdpError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FdpError::Config(msg));
        if self.m_grid.is_empty() || self.alpha_grid.is_empty() || self.methods.is_empty() {
            return bad("m_grid, alpha_grid and methods must be nonempty".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.model.setting() != self.setting {
            return bad(format!("model does not match setting {:?}", self.setting));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0,1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0,1)", self.delta));
        }
        if self.m_grid.contains(&0) {
            return bad("m values must be positive".into());
        }
        for spec in &self.methods {
            let allowed = match self.setting {
                Setting::Topk => Method::TOPK.contains(&spec.method),
                _ => Method::SEQUENTIAL.contains(&spec.method) && !spec.adaptive,
            };
            if !allowed {
                return bad(format!("method {spec} is not available for {:?}", self.setting));
            }
            let kr_delta = match spec.method {
                Method::Kr if self.setting == Setting::Topk => Some(self.delta),
                Method::Hybrid => Some(self.delta / 2.0),
                _ => None,
            };
            if kr_delta.is_some_and(|d| d > crate::numerics::KR_DELTA_MAX) {
                return bad(format!("method {spec} requires delta <= 0.31"));
            }
        }
        match &self.model {
            ModelConfig::Gaussian { .. } => {
                for &m in &self.m_grid {
                    self.model.gaussian_at(m)?;
                }
            }
            ModelConfig::Vct(v) => {
                v.validate()?;
                if v.lambda < v.s || !(v.s > 0.0 && v.s <= 1.0) || !(0.0..1.0).contains(&v.lambda) {
                    return bad("pre-ordered experiments need 0 < s <= lambda < 1".into());
                }
            }
            ModelConfig::Mixture { .. } => {
                self.model.mixture_at(1)?;
                let l = &self.lord;
                if !(0.0..=1.0).contains(&l.w0_fraction) {
                    return bad("lord.w0_fraction must lie in [0,1]".into());
                }
                l.spending().normalizer()?;
            }
        }
        Ok(())
    }
}
