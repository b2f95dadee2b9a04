//! TOML study configuration.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use thinpl_core::concentration::SemilinearOptions;
use thinpl_core::fem::SolverOptions;
use thinpl_core::geometry::{ForcingSpec, PeriodicProfile, ProfileConfig, ThinDomainSpec};
use thinpl_core::homogenize::Regime;
use thinpl_core::limit1d::Limit1dOptions;
use thinpl_core::{DomainSpec, Exponent};

fn default_eps_list() -> Vec<f64> {
    (3..=7).map(|k| 0.5f64.powi(k)).collect()
}

fn default_h_divisor() -> f64 {
    12.0
}

fn default_reference_n() -> usize {
    4096
}

fn default_cell_h() -> f64 {
    1.0 / 64.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub per_dim: usize,
    pub x_per_cell: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { per_dim: 64, x_per_cell: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub g: ProfileConfig,
    pub h: ProfileConfig,
    pub forcing: ForcingSpec,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    /// Mesh size is `eps / h_divisor`.
    #[serde(default = "default_h_divisor")]
    pub h_divisor: f64,
    /// Nodes of the 1D reference solution.
    #[serde(default = "default_reference_n")]
    pub reference_n: usize,
    /// Cell mesh size for the resonant coefficient.
    #[serde(default = "default_cell_h")]
    pub cell_h: f64,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub semilinear: SemilinearOptions,
    #[serde(default)]
    pub limit: Limit1dOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).context("parsing study config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            bail!("eps_list is empty");
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            bail!("eps_list must be strictly decreasing");
        }
        if !(self.beta > 0.0 && self.beta < self.alpha) {
            bail!("need 0 < beta < alpha (beta = {}, alpha = {})", self.beta, self.alpha);
        }
        if !(self.h_divisor >= 2.0) {
            bail!("h_divisor must be at least 2");
        }
        for &eps in &self.eps_list {
            self.spec(eps)?;
        }
        Ok(())
    }

    pub fn exponent(&self) -> Result<Exponent> {
        Ok(Exponent::new(self.p)?)
    }

    pub fn g_profile(&self) -> Result<PeriodicProfile<f64>> {
        Ok(PeriodicProfile::from_config(&self.g)?)
    }

    pub fn h_profile(&self) -> Result<PeriodicProfile<f64>> {
        Ok(PeriodicProfile::from_config(&self.h)?)
    }

    pub fn regime(&self) -> Regime {
        Regime::from_alpha(self.alpha)
    }

    pub fn spec(&self, eps: f64) -> Result<DomainSpec> {
        let spec = ThinDomainSpec::new(
            eps,
            self.alpha,
            self.beta,
            self.gamma,
            self.g_profile()?,
            self.h_profile()?,
            self.exponent()?,
            self.forcing.clone(),
        )
        .with_context(|| format!("domain at eps = {eps}"))?;
        Ok(spec)
    }

    pub fn target_h(&self, eps: f64) -> f64 {
        eps / self.h_divisor
    }

    /// Moves `alpha` to the representative of `regime`; `beta` is halved
    /// below the new `alpha` when it no longer fits.
    pub fn set_regime(&mut self, regime: Regime) {
        self.alpha = match regime {
            Regime::Sub => 0.5,
            Regime::Resonant => 1.0,
            Regime::Super => 1.5,
        };
        if self.beta >= self.alpha {
            self.beta = self.alpha / 2.0;
        }
    }

    /// Canonical TOML of everything that affects results.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        toml::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of [`StudyConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
