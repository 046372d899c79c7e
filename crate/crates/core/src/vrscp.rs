//! Variance-reduced stochastic cubic-regularized Newton driver.
//!
//! Each iteration `t`:
//!
//! 1. `v_t` is a fresh `|B_check|`-sample gradient mean when `t mod Q = 0`,
//!    otherwise `v_t = v_{t−1} + (1/S_t) Σ_s ∇̂²J(θ_{s,t}, τ_s)(θ_t − θ_{t−1})`
//!    with `θ_{s,t}` interpolating from `θ_t` (s → 0) to `θ_{t−1}` (s = S_t);
//! 2. `U_t[·]` is the mean HVP over a fixed `|B_h|` batch drawn at `θ_t`;
//! 3. the cubic subsolver proposes `h_t`; if `m_t(h_t) > ρ^{−1/2}ε^{3/2}/6`
//!    the step is taken, otherwise the finalsolver step is taken and the run
//!    stops.
//!
//! Randomness comes from per-sample streams keyed by `(seed, purpose, t, i)`,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubic::{cubic_finalsolver, cubic_subsolver, CubicModel, SolverParams, SolverTrace};
use crate::error::{Error, Result};
use crate::objective::{draw_batch, mean_value, prepare_batch, BatchHvp, StochasticObjective};
use crate::record::{IterationRecord, RunFailure, RunRecord, RunSummary, StepKind, Termination};
use crate::rng::{stream, Purpose};
use crate::vector::{dot, first_non_finite, mean_in_order, norm, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub epsilon: f64,
    pub rho: f64,
    pub l: f64,
    /// Cubic penalty; `4ρ` when unset.
    pub m: Option<f64>,
    /// Checkpoint period; `round(√ρ·M/(√ε·L))` (at least 1) when unset.
    pub q: Option<u64>,
    /// Maximum number of iterations `T`.
    pub max_iterations: u64,
    pub b_check: usize,
    pub b_h: usize,
    /// Coefficient in `S_t = ⌈c_S·Q·‖θ_t − θ_{t−1}‖²/ε²⌉`.
    pub s_coeff: f64,
    pub s_min: u64,
    pub s_max: u64,
    pub c_s: f64,
    pub c_f: f64,
    pub c_prime: f64,
    /// Failure probability `ξ` used by the theory batch formulas.
    pub xi: f64,
    /// Stop once this many training probes have been consumed.
    pub probe_budget: Option<u64>,
    /// Samples in the fixed evaluation batch.
    pub eval_batch: usize,
    /// Samples for the final stationarity estimate when no exact oracle
    /// exists; 0 skips it.
    pub mu_batch: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            rho: 1.0,
            l: 1.0,
            m: None,
            q: None,
            max_iterations: 100,
            b_check: 100,
            b_h: 20,
            s_coeff: 1.0,
            s_min: 1,
            s_max: 256,
            c_s: 10.0,
            c_f: 10.0,
            c_prime: 1.0,
            xi: 0.05,
            probe_budget: None,
            eval_batch: 20,
            mu_batch: 1000,
        }
    }
}

impl HyperParams {
    pub fn m(&self) -> f64 {
        self.m.unwrap_or(4.0 * self.rho)
    }

    pub fn q(&self) -> u64 {
        self.q.unwrap_or_else(|| {
            let q = (self.rho.sqrt() * self.m() / (self.epsilon.sqrt() * self.l)).round();
            if q.is_finite() && q >= 1.0 {
                q as u64
            } else {
                1
            }
        })
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            l: self.l,
            eps: self.epsilon,
            rho: self.rho,
            c_s: self.c_s,
            c_f: self.c_f,
            c_prime: self.c_prime,
        }
    }

    /// Subsolver model increase required to keep iterating.
    pub fn threshold(&self) -> f64 {
        self.epsilon.powf(1.5) / (6.0 * self.rho.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("rho", self.rho), ("L", self.l)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(m) = self.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::config(format!("M must be positive, got {m}")));
            }
        }
        if self.q == Some(0) {
            return Err(Error::config("Q must be at least 1"));
        }
        if self.b_check == 0 || self.b_h == 0 {
            return Err(Error::config("batch sizes must be at least 1"));
        }
        if self.s_min == 0 || self.s_max < self.s_min {
            return Err(Error::config(format!(
                "need 1 ≤ S_min ≤ S_max, got {} and {}",
                self.s_min, self.s_max
            )));
        }
        if !(self.s_coeff > 0.0 && self.s_coeff.is_finite()) {
            return Err(Error::config("S_t coefficient must be positive"));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::config("xi must lie in (0,1)"));
        }
        if self.eval_batch == 0 {
            return Err(Error::config("evaluation batch must be at least 1"));
        }
        self.solver_params().validate(self.m())
    }

    /// Batch sizes from the convergence theory:
    /// `|B_check| = 19440 W² log²(4T/ξ)/ε²` and
    /// `|B_h| = 1080 L² log(4dT/ξ)/(ρε)`. `W` bounds the per-sample gradient
    /// norm and must be supplied by the caller.
    pub fn theory_batch_sizes(&self, w: f64, d: usize) -> (f64, f64) {
        let t = self.max_iterations.max(1) as f64;
        let l4 = (4.0 * t / self.xi).ln();
        let b_check = 19440.0 * w * w * l4 * l4 / (self.epsilon * self.epsilon);
        let b_h = 1080.0 * self.l * self.l * (4.0 * d as f64 * t / self.xi).ln()
            / (self.rho * self.epsilon);
        (b_check, b_h)
    }
}

/// `clamp(⌈c_S·Q·‖Δθ‖²/ε²⌉, S_min, S_max)`
pub fn compute_s_t(step_norm: f64, hp: &HyperParams) -> u64 {
    let raw = (hp.s_coeff * hp.q() as f64 * step_norm * step_norm / (hp.epsilon * hp.epsilon)).ceil();
    if !(raw >= hp.s_min as f64) {
        hp.s_min
    } else if raw >= hp.s_max as f64 {
        hp.s_max
    } else {
        raw as u64
    }
}

/// `(1/S_t) Σ_{s=1..S_t} ∇̂²J(θ_{s,t}, τ_s)(θ_cur − θ_prev)` with
/// `θ_{s,t} = (1 − s/S_t)θ_cur + (s/S_t)θ_prev` and `τ_s` drawn at `θ_{s,t}`
/// from stream `(seed, Correction, iteration, s − 1)`.
pub fn hvp_correction<O: StochasticObjective>(
    obj: &O,
    theta_prev: &[f64],
    theta_cur: &[f64],
    s_t: u64,
    seed: u64,
    iteration: u64,
) -> Result<Vec<f64>> {
    if s_t == 0 {
        return Err(Error::config("S_t must be at least 1"));
    }
    let delta = sub(theta_cur, theta_prev);
    let parts: Vec<Vec<f64>> = (1..=s_t)
        .into_par_iter()
        .map(|s| {
            let w = s as f64 / s_t as f64;
            let point: Vec<f64> = theta_cur
                .iter()
                .zip(theta_prev)
                .map(|(c, p)| (1.0 - w) * c + w * p)
                .collect();
            let mut rng = stream(seed, Purpose::Correction, iteration, s - 1);
            let sample = obj.draw(&point, &mut rng)?;
            let prepared = obj.prepare(sample, &point)?;
            obj.apply(&prepared, &delta)
        })
        .collect::<Result<_>>()?;
    Ok(mean_in_order(&parts))
}

/// How the gradient estimate is formed between checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Recursive HVP corrections between checkpoints.
    VarianceReduced,
    /// A fresh `|B_check|` batch every iteration (no variance reduction).
    Fresh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverState {
    pub t: u64,
    pub theta: Vec<f64>,
    pub theta_prev: Vec<f64>,
    /// Gradient estimate of the previous iteration (empty before `t = 0`).
    pub v: Vec<f64>,
    pub probes: u64,
    pub samples: u64,
}

impl DriverState {
    pub fn new(theta: Vec<f64>) -> Self {
        Self {
            t: 0,
            theta_prev: theta.clone(),
            theta,
            v: Vec::new(),
            probes: 0,
            samples: 0,
        }
    }
}

/// What one iteration did, for logging and external diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub t: u64,
    /// `θ_t`, where `v_t` and `U_t` were formed.
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    /// The HVP correction added to `v_{t−1}` (non-checkpoint iterations).
    pub correction: Option<Vec<f64>>,
    pub checkpoint: bool,
    pub s_t: u64,
    pub model_increase: f64,
    pub step: Vec<f64>,
    pub branch: StepKind,
    /// Samples consumed by this iteration.
    pub samples: u64,
    pub termination: Option<Termination>,
}

/// Performs one iteration, updating `state` in place.
pub fn vrscp_step<O: StochasticObjective>(
    state: &mut DriverState,
    hp: &HyperParams,
    obj: &O,
    seed: u64,
    mode: GradientMode,
    trace: Option<&mut SolverTrace>,
) -> Result<StepInfo> {
    let t = state.t;
    let d = obj.dim();
    let mut samples = 0u64;

    let checkpoint = mode == GradientMode::Fresh || t % hp.q() == 0 || state.v.len() != d;
    let (v, correction, s_t) = if checkpoint {
        let batch = draw_batch(obj, &state.theta, seed, Purpose::Checkpoint, t, hp.b_check)?;
        samples += hp.b_check as u64;
        (obj.batch_mean_grad(&batch, &state.theta)?, None, 0)
    } else {
        let s_t = compute_s_t(norm(&sub(&state.theta, &state.theta_prev)), hp);
        let c = hvp_correction(obj, &state.theta_prev, &state.theta, s_t, seed, t)?;
        samples += s_t;
        let v: Vec<f64> = state.v.iter().zip(&c).map(|(a, b)| a + b).collect();
        (v, Some(c), s_t)
    };
    if let Some(i) = first_non_finite(&v) {
        return Err(Error::numeric(format!(
            "iteration {t}: gradient estimate component {i} is non-finite"
        )));
    }

    let hbatch = draw_batch(obj, &state.theta, seed, Purpose::Hessian, t, hp.b_h)?;
    samples += hp.b_h as u64;
    let op = BatchHvp::new(obj, prepare_batch(obj, hbatch, &state.theta)?)?;
    let model = CubicModel::new(v.clone(), &op, hp.m())?;
    let params = hp.solver_params();
    let with_context = |e: Error| match op.take_error() {
        Some(inner) => Error::numeric(format!("iteration {t}: {inner} ({e})")),
        None => Error::numeric(format!("iteration {t}: {e}")),
    };

    let mut trace = trace;
    let sub_out = cubic_subsolver(
        &model,
        &params,
        &mut stream(seed, Purpose::Subsolver, t, 0),
        trace.as_deref_mut(),
    )
    .map_err(with_context)?;

    let (step, branch, termination) = if sub_out.model_increase > hp.threshold() {
        (sub_out.delta, StepKind::from(sub_out.branch), None)
    } else {
        let fin = cubic_finalsolver(&model, &params, trace).map_err(with_context)?;
        let reason = if fin.converged {
            Termination::Stationary
        } else {
            Termination::FinalsolverCap
        };
        (fin.delta, StepKind::Finalsolver, Some(reason))
    };
    if let Some(e) = op.take_error() {
        return Err(with_context(e));
    }

    let next: Vec<f64> = state.theta.iter().zip(&step).map(|(a, b)| a + b).collect();
    if let Some(i) = first_non_finite(&next) {
        return Err(Error::numeric(format!(
            "iteration {t}: parameter {i} became non-finite"
        )));
    }

    let info = StepInfo {
        t,
        theta: state.theta.clone(),
        v: v.clone(),
        correction,
        checkpoint,
        s_t,
        model_increase: sub_out.model_increase,
        step,
        branch,
        samples,
        termination,
    };
    state.theta_prev = std::mem::replace(&mut state.theta, next);
    state.v = v;
    state.samples += samples;
    state.probes += samples * obj.probes_per_sample();
    state.t += 1;
    Ok(info)
}

/// Options that do not change the optimization itself.
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Called after every iteration.
    pub observer: Option<&'a mut dyn FnMut(&StepInfo)>,
    /// Collects subsolver/finalsolver iterates of every iteration.
    pub trace: Option<&'a mut SolverTrace>,
    /// Overrides the starting point drawn from the `Init` stream.
    pub init: Option<Vec<f64>>,
}

pub(crate) fn evaluate<O: StochasticObjective>(
    obj: &O,
    params: &[f64],
    seed: u64,
    n: usize,
) -> Result<f64> {
    mean_value(obj, params, seed, Purpose::Evaluation, 0, n)
}

pub(crate) fn initial_params<O: StochasticObjective>(
    obj: &O,
    seed: u64,
    init: Option<Vec<f64>>,
) -> Result<Vec<f64>> {
    let theta = match init {
        Some(p) => p,
        None => obj.init_params(&mut stream(seed, Purpose::Init, 0, 0)),
    };
    obj.check_params(&theta)?;
    Ok(theta)
}

/// Runs the driver until termination, `T` iterations or the probe budget.
pub fn vrscp_run<O: StochasticObjective>(
    hp: &HyperParams,
    obj: &O,
    seed: u64,
    opts: RunOptions,
) -> std::result::Result<RunRecord, RunFailure> {
    run_cubic("vrscp", hp, obj, seed, GradientMode::VarianceReduced, opts)
}

pub(crate) fn run_cubic<O: StochasticObjective>(
    algorithm: &str,
    hp: &HyperParams,
    obj: &O,
    seed: u64,
    mode: GradientMode,
    mut opts: RunOptions,
) -> std::result::Result<RunRecord, RunFailure> {
    let mut iterations = Vec::new();
    let fail = |partial: Vec<IterationRecord>, error: Error| RunFailure {
        algorithm: algorithm.to_string(),
        seed,
        partial,
        error,
    };
    let setup = || -> Result<(Vec<f64>, f64)> {
        hp.validate()?;
        let theta = initial_params(obj, seed, opts.init.clone())?;
        let ret = evaluate(obj, &theta, seed, hp.eval_batch)?;
        Ok((theta, ret))
    };
    let (theta, initial_return) = setup().map_err(|e| fail(Vec::new(), e))?;

    let mut state = DriverState::new(theta);
    let mut final_return = initial_return;
    let mut termination = Termination::MaxIterations;
    while state.t < hp.max_iterations {
        if hp.probe_budget.is_some_and(|b| state.probes >= b) {
            termination = Termination::ProbeBudget;
            break;
        }
        let info = match vrscp_step(&mut state, hp, obj, seed, mode, opts.trace.as_deref_mut()) {
            Ok(i) => i,
            Err(e) => return Err(fail(iterations, e)),
        };
        final_return = match evaluate(obj, &state.theta, seed, hp.eval_batch) {
            Ok(r) => r,
            Err(e) => return Err(fail(iterations, e)),
        };
        iterations.push(IterationRecord {
            t: info.t,
            probes: state.probes,
            eval_return: final_return,
            model_increase: Some(info.model_increase),
            step_norm: norm(&info.step),
            s_t: info.s_t,
            checkpoint: info.checkpoint,
            branch: info.branch,
        });
        if let Some(obs) = opts.observer.as_deref_mut() {
            obs(&info);
        }
        if let Some(reason) = info.termination {
            termination = reason;
            break;
        }
    }
    if termination == Termination::MaxIterations
        && hp.probe_budget.is_some_and(|b| state.probes >= b)
        && state.t < hp.max_iterations
    {
        termination = Termination::ProbeBudget;
    }

    let mu = final_mu(obj, &state.theta, hp.rho, seed, hp.mu_batch);
    let (final_mu, mu_flagged) = match mu {
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
            total_probes: state.probes,
            total_samples: state.samples,
            final_params: state.theta,
        },
    })
}

/// Exact stationarity measure when the objective has an exact oracle,
/// otherwise an estimate from `batch` samples (skipped when `batch = 0`).
pub(crate) fn final_mu<O: StochasticObjective>(
    obj: &O,
    params: &[f64],
    rho: f64,
    seed: u64,
    batch: usize,
) -> Result<Option<MuEstimate>> {
    if obj.exact(params, false).is_some() {
        return mu_diagnostic(obj, params, rho, MuMode::Exact).map(Some);
    }
    if batch == 0 {
        return Ok(None);
    }
    mu_diagnostic(obj, params, rho, MuMode::Estimated { batch, seed }).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuMode {
    Exact,
    /// Batch-mean gradient and power iteration on the batch-mean HVP
    /// operator, from `batch` samples on the `Diagnostic` streams.
    Estimated { batch: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuEstimate {
    pub value: f64,
    pub grad_norm: f64,
    pub lambda_max: f64,
    /// False when the power iteration hit its iteration limit.
    pub converged: bool,
}

/// `max(‖∇J‖^{3/2}, λ_max³/ρ^{3/2})`
pub fn mu_value(grad_norm: f64, lambda_max: f64, rho: f64) -> f64 {
    grad_norm.powf(1.5).max(lambda_max.powi(3) / rho.powf(1.5))
}

const POWER_ITERATIONS: usize = 50;
const RAYLEIGH_TOL: f64 = 1e-6;

/// Power iteration for the eigenvalue of largest magnitude. Returns the
/// Rayleigh quotient and whether successive quotients settled within the
/// tolerance.
fn power_iteration(apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>, start: Vec<f64>) -> Result<(f64, bool)> {
    let mut x = start;
    let n = norm(&x);
    x.iter_mut().for_each(|v| *v /= n);
    let mut prev = f64::NAN;
    for _ in 0..POWER_ITERATIONS {
        let y = apply(&x)?;
        let q = dot(&x, &y);
        if (q - prev).abs() <= RAYLEIGH_TOL * q.abs().max(1.0) {
            return Ok((q, true));
        }
        prev = q;
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok((0.0, true));
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Ok((prev, false))
}

/// Largest algebraic eigenvalue of a symmetric-in-expectation operator: the
/// dominant magnitude `c` first, then the dominant eigenvalue of `U + cI`.
pub fn lambda_max_estimate(
    dim: usize,
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<(f64, bool)> {
    let start: Vec<f64> = (0..dim).map(|i| 1.0 + 0.1 * i as f64).collect();
    let (dominant, ok1) = power_iteration(apply, start.clone())?;
    let shift = dominant.abs();
    let shifted = |x: &[f64]| -> Result<Vec<f64>> {
        let mut y = apply(x)?;
        y.iter_mut().zip(x).for_each(|(a, b)| *a += shift * b);
        Ok(y)
    };
    let (top, ok2) = power_iteration(&shifted, start)?;
    Ok((top - shift, ok1 && ok2))
}

pub fn mu_diagnostic<O: StochasticObjective>(
    obj: &O,
    params: &[f64],
    rho: f64,
    mode: MuMode,
) -> Result<MuEstimate> {
    match mode {
        MuMode::Exact => {
            let ex = obj
                .exact(params, true)
                .ok_or_else(|| Error::config("exact stationarity needs an enumerable instance"))??;
            let h = ex.hessian.expect("hessian requested");
            let sym = (&h + h.transpose()) * 0.5;
            let lambda_max = sym.symmetric_eigenvalues().max();
            let grad_norm = norm(&ex.gradient);
            Ok(MuEstimate {
                value: mu_value(grad_norm, lambda_max, rho),
                grad_norm,
                lambda_max,
                converged: true,
            })
        }
        MuMode::Estimated { batch, seed } => {
            let samples = draw_batch(obj, params, seed, Purpose::Diagnostic, 0, batch)?;
            let grad = obj.batch_mean_grad(&samples, params)?;
            let op = BatchHvp::new(obj, prepare_batch(obj, samples, params)?)?;
            let apply = |x: &[f64]| op.try_apply(x);
            let (lambda_max, converged) = lambda_max_estimate(obj.dim(), &apply)?;
            let grad_norm = norm(&grad);
            Ok(MuEstimate {
                value: mu_value(grad_norm, lambda_max, rho),
                grad_norm,
                lambda_max,
                converged,
            })
        }
    }
}
