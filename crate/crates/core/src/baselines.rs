//! Reference optimizers sharing the driver's sampling, streams and logging:
//! REINFORCE (fixed-step batch gradient ascent) and sub-sampled cubic Newton
//! without variance reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{draw_batch, StochasticObjective};
use crate::record::{IterationRecord, RunFailure, RunRecord, RunSummary, StepKind, Termination};
use crate::rng::Purpose;
use crate::vector::{first_non_finite, norm};
use crate::vrscp::{evaluate, final_mu, initial_params, run_cubic, GradientMode, HyperParams, RunOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReinforceConfig {
    pub step_size: f64,
    pub batch: usize,
    pub max_iterations: u64,
    pub probe_budget: Option<u64>,
    pub eval_batch: usize,
    /// Used only for the final stationarity diagnostic.
    pub rho: f64,
    pub mu_batch: usize,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            batch: 10,
            max_iterations: 100,
            probe_budget: None,
            eval_batch: 20,
            rho: 1.0,
            mu_batch: 1000,
        }
    }
}

impl ReinforceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.batch == 0 || self.eval_batch == 0 {
            return Err(Error::config("batch sizes must be at least 1"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::config("rho must be positive"));
        }
        Ok(())
    }
}

/// Per iteration: a fresh batch at `θ`, then `θ ← θ + η · batch_mean_grad`.
pub fn reinforce_run<O: StochasticObjective>(
    cfg: &ReinforceConfig,
    obj: &O,
    seed: u64,
    init: Option<Vec<f64>>,
) -> std::result::Result<RunRecord, RunFailure> {
    let algorithm = "reinforce";
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let fail = |partial: Vec<IterationRecord>, error: Error| RunFailure {
        algorithm: algorithm.to_string(),
        seed,
        partial,
        error,
    };
    let setup = || -> Result<(Vec<f64>, f64)> {
        cfg.validate()?;
        let theta = initial_params(obj, seed, init.clone())?;
        let ret = evaluate(obj, &theta, seed, cfg.eval_batch)?;
        Ok((theta, ret))
    };
    let (mut theta, initial_return) = setup().map_err(|e| fail(Vec::new(), e))?;

    let mut probes = 0u64;
    let mut samples = 0u64;
    let mut final_return = initial_return;
    let mut termination = Termination::MaxIterations;
    let mut t = 0u64;
    while t < cfg.max_iterations {
        if cfg.probe_budget.is_some_and(|b| probes >= b) {
            termination = Termination::ProbeBudget;
            break;
        }
        let step = || -> Result<(Vec<f64>, f64)> {
            let batch = draw_batch(obj, &theta, seed, Purpose::Batch, t, cfg.batch)?;
            let g = obj.batch_mean_grad(&batch, &theta)?;
            let next: Vec<f64> = theta
                .iter()
                .zip(&g)
                .map(|(p, gi)| p + cfg.step_size * gi)
                .collect();
            if let Some(i) = first_non_finite(&next) {
                return Err(Error::numeric(format!(
                    "iteration {t}: parameter {i} became non-finite"
                )));
            }
            let ret = evaluate(obj, &next, seed, cfg.eval_batch)?;
            Ok((next, ret))
        };
        let (next, ret) = step().map_err(|e| fail(iterations.clone(), e))?;
        let step_norm = norm(
            &next
                .iter()
                .zip(&theta)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        theta = next;
        samples += cfg.batch as u64;
        probes += cfg.batch as u64 * obj.probes_per_sample();
        final_return = ret;
        iterations.push(IterationRecord {
            t,
            probes,
            eval_return: ret,
            model_increase: None,
            step_norm,
            s_t: 0,
            checkpoint: true,
            branch: StepKind::Gradient,
        });
        t += 1;
    }
    if termination == Termination::MaxIterations
        && t < cfg.max_iterations
        && cfg.probe_budget.is_some_and(|b| probes >= b)
    {
        termination = Termination::ProbeBudget;
    }
    let (final_mu, mu_flagged) = match final_mu(obj, &theta, cfg.rho, seed, cfg.mu_batch) {
        Ok(Some(m)) => (Some(m.value), !m.converged),
        Ok(None) => (None, false),
        Err(e) => return Err(fail(iterations, e)),
    };
    Ok(RunRecord {
        algorithm: algorithm.to_string(),
        seed,
        iterations,
        summary: RunSummary {
            initial_return,
            final_return,
            final_mu,
            mu_flagged,
            termination,
            total_probes: probes,
            total_samples: samples,
            final_params: theta,
        },
    })
}

/// Sub-sampled cubic-regularized Newton: the driver with a fresh
/// `|B_check|` gradient batch every iteration.
pub fn scrn_run<O: StochasticObjective>(
    hp: &HyperParams,
    obj: &O,
    seed: u64,
    opts: RunOptions,
) -> std::result::Result<RunRecord, RunFailure> {
    run_cubic("scrn", hp, obj, seed, GradientMode::Fresh, opts)
}
