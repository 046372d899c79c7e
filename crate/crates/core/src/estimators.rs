//! Per-trajectory policy-gradient and Hessian-vector-product estimators.
//!
//! For a trajectory `τ` with returns-to-go `Ψ_h = Σ_{t≥h} γ^t r_t`:
//!
//! ```text
//! ∇̂J(θ,τ)      = Σ_h Ψ_h ∇log π_θ(a_h|s_h)                       (= ∇Φ(θ,τ))
//! ∇̂²J(θ,τ)[u]  = ⟨Σ_h ∇log π_θ(a_h|s_h), u⟩ ∇Φ(θ,τ) + Σ_h Ψ_h ∇²log π_θ(a_h|s_h) u
//! ```
//!
//! Transition probabilities do not depend on θ, so `∇log p(τ|π_θ)` is the sum
//! of the per-step scores. No importance weights are involved anywhere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::policy::PolicyHandle;
use crate::vector::{dot, first_non_finite, mean_in_order};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    #[default]
    Off,
    /// Leave-one-out mean of `Ψ_h` over the rest of the batch, per step.
    PerStepBatchMean,
}

#[derive(Debug, Clone)]
pub struct EstimatorContext {
    pub policy: PolicyHandle,
    pub gamma: f64,
    pub baseline: Baseline,
}

impl EstimatorContext {
    pub fn new(policy: PolicyHandle, gamma: f64, baseline: Baseline) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!(
                "discount must lie in (0,1), got {gamma}"
            )));
        }
        Ok(Self {
            policy,
            gamma,
            baseline,
        })
    }

    pub fn dim(&self) -> usize {
        self.policy.dim()
    }
}

/// `Σ_h w_h ∇log π_θ(a_h|s_h)`, accumulated in step order.
fn weighted_score_sum(
    ctx: &EstimatorContext,
    traj: &Trajectory,
    params: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ctx.dim()];
    for (h, ((s, a, _), w)) in traj.steps().zip(weights).enumerate() {
        ctx.policy
            .add_grad_log_prob(params, s, a, *w, &mut out)
            .map_err(|e| match e {
                Error::Numeric(m) => Error::numeric(format!("step {h}: {m}")),
                other => other,
            })?;
    }
    Ok(out)
}

/// Unbiased gradient estimate `Σ_h Ψ_h ∇log π_θ(a_h|s_h)`.
pub fn grad_estimate(ctx: &EstimatorContext, traj: &Trajectory, params: &[f64]) -> Result<Vec<f64>> {
    let psi = traj.returns_to_go(ctx.gamma);
    weighted_score_sum(ctx, traj, params, &psi)
}

/// `∇Φ(θ,τ)` with `Φ(θ,τ) = Σ_h Ψ_h log π_θ(a_h|s_h)`.
pub fn phi_grad(ctx: &EstimatorContext, traj: &Trajectory, params: &[f64]) -> Result<Vec<f64>> {
    let psi = traj.returns_to_go(ctx.gamma);
    weighted_score_sum(ctx, traj, params, &psi)
}

/// `∇̂²J(θ,τ)` with the trajectory-dependent parts precomputed, so repeated
/// products with different directions cost one pass of log-policy HVPs.
#[derive(Debug, Clone)]
pub struct PreparedHvp {
    traj: Trajectory,
    params: Vec<f64>,
    psi: Vec<f64>,
    score_sum: Vec<f64>,
    phi_grad: Vec<f64>,
}

impl PreparedHvp {
    pub fn new(ctx: &EstimatorContext, traj: Trajectory, params: &[f64]) -> Result<Self> {
        ctx.policy.check_params(params)?;
        let psi = traj.returns_to_go(ctx.gamma);
        let ones = vec![1.0; traj.len()];
        let score_sum = weighted_score_sum(ctx, &traj, params, &ones)?;
        let phi_grad = weighted_score_sum(ctx, &traj, params, &psi)?;
        Ok(Self {
            traj,
            params: params.to_vec(),
            psi,
            score_sum,
            phi_grad,
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn apply(&self, ctx: &EstimatorContext, vec: &[f64]) -> Result<Vec<f64>> {
        if vec.len() != ctx.dim() {
            return Err(Error::config(format!(
                "HVP direction has dimension {}, expected {}",
                vec.len(),
                ctx.dim()
            )));
        }
        let mut out = vec![0.0; ctx.dim()];
        for (h, ((s, a, _), psi)) in self.traj.steps().zip(&self.psi).enumerate() {
            ctx.policy
                .add_hvp_log_prob(&self.params, s, a, vec, *psi, &mut out)
                .map_err(|e| match e {
                    Error::Numeric(m) => Error::numeric(format!("step {h}: {m}")),
                    other => other,
                })?;
        }
        let c = dot(&self.score_sum, vec);
        for (o, p) in out.iter_mut().zip(&self.phi_grad) {
            *o += c * p;
        }
        if let Some(i) = first_non_finite(&out) {
            return Err(Error::numeric(format!("HVP estimate non-finite at {i}")));
        }
        Ok(out)
    }
}

/// Unbiased estimate of `∇²J(θ)·vec` from one trajectory.
pub fn hvp_estimate(
    ctx: &EstimatorContext,
    traj: &Trajectory,
    params: &[f64],
    vec: &[f64],
) -> Result<Vec<f64>> {
    if vec.len() != ctx.dim() {
        return Err(Error::config(format!(
            "HVP direction has dimension {}, expected {}",
            vec.len(),
            ctx.dim()
        )));
    }
    PreparedHvp::new(ctx, traj.clone(), params)?.apply(ctx, vec)
}

fn non_empty<T>(batch: &[T]) -> Result<()> {
    if batch.is_empty() {
        Err(Error::config("estimator batch is empty"))
    } else {
        Ok(())
    }
}

/// Per-trajectory gradient estimates for a batch, with the context's baseline
/// applied. Results are in batch order.
pub fn batch_grad_estimates(
    ctx: &EstimatorContext,
    trajectories: &[Trajectory],
    params: &[f64],
) -> Result<Vec<Vec<f64>>> {
    non_empty(trajectories)?;
    match ctx.baseline {
        Baseline::Off => trajectories
            .par_iter()
            .map(|t| grad_estimate(ctx, t, params))
            .collect(),
        Baseline::PerStepBatchMean => {
            let psis: Vec<Vec<f64>> = trajectories
                .iter()
                .map(|t| t.returns_to_go(ctx.gamma))
                .collect();
            let n = trajectories.len();
            let horizon = psis.iter().map(Vec::len).max().unwrap_or(0);
            let mut totals = vec![0.0; horizon];
            for psi in &psis {
                for (t, p) in totals.iter_mut().zip(psi) {
                    *t += p;
                }
            }
            trajectories
                .par_iter()
                .zip(psis.par_iter())
                .map(|(t, psi)| {
                    let adv: Vec<f64> = psi
                        .iter()
                        .zip(&totals)
                        .map(|(p, tot)| {
                            if n > 1 {
                                p - (tot - p) / (n - 1) as f64
                            } else {
                                *p
                            }
                        })
                        .collect();
                    weighted_score_sum(ctx, t, params, &adv)
                })
                .collect()
        }
    }
}

/// Mean gradient estimate over a batch, reduced in batch order.
pub fn batch_mean_grad(
    ctx: &EstimatorContext,
    trajectories: &[Trajectory],
    params: &[f64],
) -> Result<Vec<f64>> {
    Ok(mean_in_order(&batch_grad_estimates(ctx, trajectories, params)?))
}

/// Mean HVP estimate over a batch, reduced in batch order.
pub fn batch_mean_hvp(
    ctx: &EstimatorContext,
    trajectories: &[Trajectory],
    params: &[f64],
    vec: &[f64],
) -> Result<Vec<f64>> {
    non_empty(trajectories)?;
    let parts: Vec<Vec<f64>> = trajectories
        .par_iter()
        .map(|t| hvp_estimate(ctx, t, params, vec))
        .collect::<Result<_>>()?;
    Ok(mean_in_order(&parts))
}

/// Trace of the empirical covariance of a set of estimates (n − 1 divisor).
pub fn empirical_variance(estimates: &[Vec<f64>]) -> f64 {
    if estimates.len() < 2 {
        return 0.0;
    }
    let mean = mean_in_order(estimates);
    let ss: f64 = estimates
        .iter()
        .map(|e| e.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .sum();
    ss / (estimates.len() - 1) as f64
}

/// Dumps per-trajectory estimate vectors as CSV: `index,c0,c1,…`.
pub fn write_estimates_csv<W: Write>(mut w: W, estimates: &[Vec<f64>]) -> Result<()> {
    let d = estimates.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("index".to_string())
        .chain((0..d).map(|i| format!("c{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, e) in estimates.iter().enumerate() {
        let row: Vec<String> = e.iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{i},{}", row.join(","))?;
    }
    Ok(())
}
