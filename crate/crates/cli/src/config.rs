//! Experiment configuration files (TOML).
//!
//! Every block is tagged with `kind` and unknown keys are rejected, so a
//! misspelt hyperparameter fails loudly instead of silently taking its
//! default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vrscp_core::baselines::ReinforceConfig;
use vrscp_core::env::{GridworldConfig, LinearGaussianTask, MdpSpec, TabularMdp};
use vrscp_core::estimators::Baseline;
use vrscp_core::objective::PolicyObjective;
use vrscp_core::policy::{FeatureMap, PolicyHandle};
use vrscp_core::synthetic::{SyntheticFunction, SyntheticOracle};
use vrscp_core::vrscp::HyperParams;

fn default_confidence() -> f64 {
    0.95
}

fn default_sigma() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Overrides the algorithm block's budget when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_budget: Option<u64>,
    /// Not part of the experiment's identity: excluded from the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Used by `eval` when no grid step is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<u64>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub environment: EnvironmentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyConfig>,
    pub algorithm: AlgorithmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvironmentConfig {
    Gridworld(GridworldConfig),
    RandomMdp(RandomMdpConfig),
    LinearGaussian(LinearGaussianTask),
    /// Synthetic strict-saddle oracle; takes no policy block.
    Saddle(SaddleConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMdpConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub mdp_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleConfig {
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicyConfig {
    Softmax {
        #[serde(default)]
        baseline: Baseline,
    },
    GaussianLinear {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "yes")]
        bias: bool,
        #[serde(default)]
        baseline: Baseline,
    },
    GaussianMlp {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "yes")]
        bias: bool,
        #[serde(default)]
        baseline: Baseline,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmConfig {
    Vrscp(HyperParams),
    Scrn(HyperParams),
    Reinforce(ReinforceConfig),
}

impl AlgorithmConfig {
    /// Tag written into every record.
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Vrscp(_) => "vrscp",
            AlgorithmConfig::Scrn(_) => "scrn",
            AlgorithmConfig::Reinforce(_) => "reinforce",
        }
    }

    fn probe_budget_mut(&mut self) -> &mut Option<u64> {
        match self {
            AlgorithmConfig::Vrscp(hp) | AlgorithmConfig::Scrn(hp) => &mut hp.probe_budget,
            AlgorithmConfig::Reinforce(c) => &mut c.probe_budget,
        }
    }
}

/// A constructed objective, ready for the optimizers.
pub enum Objective {
    Policy(PolicyObjective),
    Synthetic(SyntheticOracle),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Algorithm block with the top-level budget folded in.
    pub fn algorithm(&self) -> AlgorithmConfig {
        let mut alg = self.algorithm.clone();
        if let Some(b) = self.probe_budget {
            *alg.probe_budget_mut() = Some(b);
        }
        alg
    }

    /// Checks everything that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds: at least one seed is required");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            bail!("seeds: seed {} is listed twice", w[0]);
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            bail!("confidence: must lie in (0, 1), got {}", self.confidence);
        }
        if self.grid_step == Some(0) {
            bail!("grid_step: must be positive");
        }
        if self.probe_budget.is_some() && self.algorithm.clone().probe_budget_mut().is_some() {
            bail!("probe_budget: set either at the top level or in [algorithm], not both");
        }
        match &self.algorithm() {
            AlgorithmConfig::Vrscp(hp) | AlgorithmConfig::Scrn(hp) => hp.validate(),
            AlgorithmConfig::Reinforce(c) => c.validate(),
        }
        .context("[algorithm]")?;
        self.objective()?;
        Ok(())
    }

    pub fn objective(&self) -> Result<Objective> {
        let mdp = match &self.environment {
            EnvironmentConfig::Saddle(s) => {
                if self.policy.is_some() {
                    bail!("[policy]: the saddle environment takes no policy block");
                }
                return Ok(Objective::Synthetic(
                    SyntheticOracle::new(SyntheticFunction::Saddle, s.noise, vec![0.0, 0.0])
                    .context("[environment]")?,
                ));
            }
            EnvironmentConfig::Gridworld(g) => {
                MdpSpec::Tabular(TabularMdp::gridworld(g).context("[environment]")?)
            }
            EnvironmentConfig::RandomMdp(r) => MdpSpec::Tabular(
                TabularMdp::random(r.n_states, r.n_actions, r.gamma, r.horizon, r.mdp_seed)
                    .context("[environment]")?,
            ),
            EnvironmentConfig::LinearGaussian(t) => {
                t.validate().context("[environment]")?;
                MdpSpec::LinearGaussian(t.clone())
            }
        };
        let Some(policy) = &self.policy else {
            bail!("[policy]: required for this environment");
        };
        let features = |bias: bool| -> Result<FeatureMap> {
            match &mdp {
                MdpSpec::LinearGaussian(t) if bias => Ok(FeatureMap::RawWithBias { dim: t.state_dim() }),
                MdpSpec::LinearGaussian(t) => Ok(FeatureMap::Raw { dim: t.state_dim() }),
                MdpSpec::Tabular(_) => bail!("[policy]: Gaussian policies need a continuous environment"),
            }
        };
        let (handle, baseline) = match policy {
            PolicyConfig::Softmax { baseline } => {
                let Some(t) = mdp.as_tabular() else {
                    bail!("[policy]: softmax policies need a tabular environment");
                };
                (PolicyHandle::softmax(t.n_states, t.n_actions), *baseline)
            }
            PolicyConfig::GaussianLinear { sigma, bias, baseline } => {
                (PolicyHandle::gaussian_linear(features(*bias)?, *sigma), *baseline)
            }
            PolicyConfig::GaussianMlp { sigma, bias, baseline } => {
                (PolicyHandle::gaussian_mlp(features(*bias)?, *sigma), *baseline)
            }
        };
        let handle = handle.context("[policy]")?;
        Ok(Objective::Policy(
            PolicyObjective::new(mdp, handle, baseline).context("[policy]")?,
        ))
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    ///
    /// Fields are normalised through the typed config first, so formatting,
    /// key order and defaults spelt out explicitly do not change the hash.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
