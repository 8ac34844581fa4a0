//! TOML experiment configuration.
//!
//! Grammar (unknown keys are rejected everywhere):
//!
//! ```toml
//! feedback = "first_full"       # required: first_full | semi_bandit | zeroth_full | bandit
//! learner = "so_oga"            # so_oga | ader
//! v = 1.5                       # SO-OGA free parameter (default: balanced)
//! expert_projection = "exact"   # exact | so_ip (Ader experts)
//! L = 12                        # SFTT block length (default: per feedback mode)
//! delta_smooth = 0.1            # smoothing radius (default: per feedback mode)
//! horizons = [1024, 2048]       # required
//! seeds = [0, 1, 2]             # required
//! quad_nodes = 128
//! out = "out"
//! adaptive = false              # interval metrics
//! dynamic = false               # per-round optima and dynamic metrics
//!
//! [domain]                      # required
//! kind = "box"                  # box | scaled_box | knapsack
//! dim = 3
//! scale = 0.5                   # scaled_box only
//! weights = [1.0, 2.0, 1.0]     # knapsack only
//! budget = 1.5                  # knapsack only
//!
//! [adversary]                   # required
//! kind = "iid_random"           # iid_random | piecewise_stationary | drifting
//! family = "quadratic"          # quadratic | linear
//! density = 0.5
//! noise_sigma = 0.1
//! instance_seed = 0
//! num_segments = 4
//! drift_rate = 0.1
//! drift_exponent = 0.5
//!
//! [verify]
//! instances = 20
//! samples = 10000
//! dim = 5
//! density = 0.5
//! bqnd_draws = 100000
//! so_ip_cases = 1000
//! sampler_draws = 100000
//! noise_sigma = 0.1
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::geometry::Domain;
use crate::harness::adversary::AdversarySpec;
use crate::harness::experiment::ExperimentSpec;
use crate::learners::{default_v, ExpertProjection, LearnerKind};
use crate::reductions::FeedbackMode;
use crate::surrogate::{DEFAULT_QUAD_NODES, MIN_QUAD_NODES};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "DR_ONLINE_OUT";
/// Name of the persisted effective configuration.
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub feedback: FeedbackMode,
    #[serde(default)]
    pub learner: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default)]
    pub expert_projection: ExpertProjection,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_smooth: Option<f64>,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default)]
    pub dynamic: bool,
    pub domain: DomainSpec,
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

fn default_quad_nodes() -> usize {
    DEFAULT_QUAD_NODES
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainShape {
    Box,
    ScaledBox,
    Knapsack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainShape,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        let stray = |key: &str| Error::Config(format!("domain key `{key}` does not apply to {:?}", self.kind));
        match self.kind {
            DomainShape::Box => {
                if self.scale.is_some() {
                    return Err(stray("scale"));
                }
                if self.weights.is_some() {
                    return Err(stray("weights"));
                }
                if self.budget.is_some() {
                    return Err(stray("budget"));
                }
                Domain::unit_box(self.dim)
            }
            DomainShape::ScaledBox => {
                if self.weights.is_some() {
                    return Err(stray("weights"));
                }
                if self.budget.is_some() {
                    return Err(stray("budget"));
                }
                let s = self.scale.ok_or_else(|| Error::Config("scaled_box needs `scale`".into()))?;
                Domain::scaled_box(self.dim, s)
            }
            DomainShape::Knapsack => {
                if self.scale.is_some() {
                    return Err(stray("scale"));
                }
                let w = self.weights.clone().ok_or_else(|| Error::Config("knapsack needs `weights`".into()))?;
                let b = self.budget.ok_or_else(|| Error::Config("knapsack needs `budget`".into()))?;
                if w.len() != self.dim {
                    return Err(Error::Config(format!("knapsack has {} weights but dim = {}", w.len(), self.dim)));
                }
                Domain::knapsack(w, b)
            }
        }
    }
}

/// Sizes of the certification sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    /// Random objectives per sweep.
    pub instances: usize,
    /// Random `(x, y, z)` triples or `(x, y)` pairs per instance.
    pub samples: usize,
    pub dim: usize,
    pub density: f64,
    /// Estimator draws per instance in the unbiasedness audit.
    pub bqnd_draws: usize,
    pub so_ip_cases: usize,
    /// Sampler draws in the distribution test.
    pub sampler_draws: usize,
    /// Noise of the oracle used by the estimator audit.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            instances: 20,
            samples: 10_000,
            dim: 5,
            density: 0.5,
            bqnd_draws: 100_000,
            so_ip_cases: 1000,
            sampler_draws: 100_000,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl VerifySpec {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 || self.samples == 0 || self.bqnd_draws < 2 || self.sampler_draws == 0 {
            return Err(Error::Config("verify sizes must be positive (bqnd_draws >= 2)".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("verify dim must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::Config(format!("verify density {} outside [0, 1]", self.density)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("verify noise_sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

impl Config {
    /// Parses and validates a configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("`horizons` must be a nonempty list of positive integers".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must be nonempty".into()));
        }
        if self.quad_nodes < MIN_QUAD_NODES {
            return Err(Error::Config(format!("quad_nodes must be at least {MIN_QUAD_NODES}")));
        }
        self.adversary.validate()?;
        self.verify.validate()?;
        let domain = self.domain.build()?;
        for &t in &self.horizons {
            self.experiment_spec_with(domain.clone()).reduction_params(t).validate(&domain)?;
        }
        Ok(())
    }

    /// Output directory after the `DR_ONLINE_OUT` override.
    pub fn resolved_out(&self) -> PathBuf {
        match std::env::var_os(OUT_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => self.out.clone(),
        }
    }

    fn experiment_spec_with(&self, domain: Domain) -> ExperimentSpec {
        ExperimentSpec {
            domain,
            adversary: self.adversary.clone(),
            mode: self.feedback,
            learner: self.learner,
            v: self.v,
            expert_projection: self.expert_projection,
            block_len: self.block_len,
            delta_smooth: self.delta_smooth,
            quad_nodes: self.quad_nodes,
            adaptive: self.adaptive,
            dynamic: self.dynamic,
        }
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        Ok(self.experiment_spec_with(self.domain.build()?))
    }

    /// The configuration with every default filled in, followed by the
    /// horizon-dependent parameters each run resolves to.
    pub fn effective_text(&self) -> Result<String> {
        let mut text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        let spec = self.experiment_spec()?;
        text.push_str("\n# Resolved per horizon:\n");
        for &t in &self.horizons {
            let p = spec.reduction_params(t);
            let v = self.v.unwrap_or_else(|| default_v(&spec.domain, p.learner_horizon()));
            text.push_str(&format!(
                "# T = {t}: L = {}, delta_smooth = {}, learner horizon = {}, v = {}\n",
                p.block_len,
                p.delta_smooth,
                p.learner_horizon(),
                v
            ));
        }
        Ok(text)
    }
}
