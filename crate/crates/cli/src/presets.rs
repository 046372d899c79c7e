//! Shipped starting points: the published per-environment VR-SCP settings
//! (L, ρ, Q) and REINFORCE step sizes, mapped onto the desk-scale
//! environments by name.
//!
//! | preset   | environment                 | L   | ρ   | Q  | REINFORCE step |
//! |----------|-----------------------------|-----|-----|----|----------------|
//! | walker   | 5×5 gridworld               | 50  | 50  | 2  | 0.01           |
//! | hopper   | random MDP (10 states, 3 actions) | 100 | 50  | 2  | 0.001          |
//! | reacher  | linear-Gaussian, linear policy | 200 | 200 | 10 | 0.01           |
//! | humanoid | linear-Gaussian, MLP policy | 400 | 50  | 5  | 0.001          |

use anyhow::{bail, Result};
use vrscp_core::baselines::ReinforceConfig;
use vrscp_core::env::{GridworldConfig, LinearGaussianTask};
use vrscp_core::estimators::Baseline;
use vrscp_core::vrscp::HyperParams;

use crate::config::{AlgorithmConfig, EnvironmentConfig, ExperimentConfig, PolicyConfig, RandomMdpConfig};

pub const PRESETS: [&str; 4] = ["walker", "hopper", "reacher", "humanoid"];

/// `algorithm` is one of `vrscp`, `scrn` or `reinforce`.
pub fn preset(name: &str, algorithm: &str) -> Result<ExperimentConfig> {
    let (environment, policy, l, rho, q, step, epsilon) = match name {
        "walker" => (
            EnvironmentConfig::Gridworld(GridworldConfig::default()),
            PolicyConfig::Softmax { baseline: Baseline::Off },
            50.0,
            50.0,
            2,
            0.01,
            0.005,
        ),
        "hopper" => (
            EnvironmentConfig::RandomMdp(RandomMdpConfig {
                n_states: 10,
                n_actions: 3,
                gamma: 0.9,
                horizon: 10,
                mdp_seed: 1,
            }),
            PolicyConfig::Softmax { baseline: Baseline::Off },
            100.0,
            50.0,
            2,
            0.001,
            0.005,
        ),
        "reacher" => (
            EnvironmentConfig::LinearGaussian(LinearGaussianTask::default()),
            PolicyConfig::GaussianLinear {
                sigma: 1.0,
                bias: true,
                baseline: Baseline::Off,
            },
            200.0,
            200.0,
            10,
            0.01,
            0.01,
        ),
        "humanoid" => (
            EnvironmentConfig::LinearGaussian(LinearGaussianTask::default()),
            PolicyConfig::GaussianMlp {
                sigma: 1.0,
                bias: true,
                baseline: Baseline::Off,
            },
            400.0,
            50.0,
            5,
            0.001,
            0.01,
        ),
        other => bail!("unknown preset {other:?}; expected one of {}", PRESETS.join(", ")),
    };
    let hp = HyperParams {
        epsilon,
        rho,
        l,
        q: Some(q),
        ..HyperParams::default()
    };
    let algorithm = match algorithm {
        "vrscp" => AlgorithmConfig::Vrscp(hp),
        "scrn" => AlgorithmConfig::Scrn(hp),
        // same batch size as the cubic methods' checkpoint batch
        "reinforce" => AlgorithmConfig::Reinforce(ReinforceConfig {
            step_size: step,
            batch: hp.b_check,
            ..ReinforceConfig::default()
        }),
        other => bail!("unknown algorithm {other:?}; expected vrscp, scrn or reinforce"),
    };
    Ok(ExperimentConfig {
        seeds: (1..=10).collect(),
        probe_budget: Some(100_000),
        output_dir: None,
        grid_step: None,
        confidence: 0.95,
        environment,
        policy: Some(policy),
        algorithm,
    })
}
