//! Stochastic first- and second-order oracles the optimizers run against.
//!
//! [`StochasticObjective`] abstracts "draw a sample at θ, turn it into a
//! gradient estimate or an HVP operator". [`PolicyObjective`] implements it by
//! trajectory sampling; the synthetic oracles in [`crate::synthetic`] return
//! noisy derivatives of analytic functions.

use rayon::prelude::*;
use std::sync::Mutex;

use crate::cubic::HessianOp;
use crate::env::{dynamic_programming_exact, sample_trajectory, ExactDerivatives, MdpSpec, Trajectory};
use crate::error::{Error, Result};
use crate::estimators::{self, Baseline, EstimatorContext, PreparedHvp};
use crate::policy::{PolicyFamily, PolicyHandle};
use crate::rng::{stream, Purpose, RngStream};
use crate::vector::mean_in_order;

pub trait StochasticObjective: Sync {
    type Sample: Send + Sync;
    type Prepared: Send + Sync;

    fn dim(&self) -> usize;

    /// System probes (state-action pairs) consumed per sample.
    fn probes_per_sample(&self) -> u64;

    fn init_params(&self, rng: &mut RngStream) -> Vec<f64>;

    fn check_params(&self, params: &[f64]) -> Result<()>;

    /// Draws one sample at `params`. Estimates built from the sample must be
    /// evaluated at the same `params`.
    fn draw(&self, params: &[f64], rng: &mut RngStream) -> Result<Self::Sample>;

    /// Unbiased scalar estimate of the objective (e.g. a discounted return).
    fn sample_value(&self, sample: &Self::Sample) -> f64;

    fn batch_mean_grad(&self, samples: &[Self::Sample], params: &[f64]) -> Result<Vec<f64>>;

    fn prepare(&self, sample: Self::Sample, params: &[f64]) -> Result<Self::Prepared>;

    fn apply(&self, prepared: &Self::Prepared, vec: &[f64]) -> Result<Vec<f64>>;

    /// Exact value and derivatives, when the instance admits them.
    fn exact(&self, _params: &[f64], _with_hessian: bool) -> Option<Result<ExactDerivatives>> {
        None
    }
}

/// Draws `n` samples at `params`, sample `i` from stream
/// `(seed, purpose, iteration, i)`. Output order is the index order.
pub fn draw_batch<O: StochasticObjective>(
    obj: &O,
    params: &[f64],
    seed: u64,
    purpose: Purpose,
    iteration: u64,
    n: usize,
) -> Result<Vec<O::Sample>> {
    (0..n)
        .into_par_iter()
        .map(|i| obj.draw(params, &mut stream(seed, purpose, iteration, i as u64)))
        .collect()
}

pub fn prepare_batch<O: StochasticObjective>(
    obj: &O,
    samples: Vec<O::Sample>,
    params: &[f64],
) -> Result<Vec<O::Prepared>> {
    samples
        .into_par_iter()
        .map(|s| obj.prepare(s, params))
        .collect()
}

/// Mean of the objective's sample values over `n` fresh samples.
pub fn mean_value<O: StochasticObjective>(
    obj: &O,
    params: &[f64],
    seed: u64,
    purpose: Purpose,
    iteration: u64,
    n: usize,
) -> Result<f64> {
    let samples = draw_batch(obj, params, seed, purpose, iteration, n)?;
    let sum: f64 = samples.iter().map(|s| obj.sample_value(s)).sum();
    Ok(sum / n as f64)
}

/// Batch-mean HVP operator over a fixed set of prepared samples.
///
/// Products fan out across threads and are reduced in index order. A failing
/// product yields a NaN vector (so the calling solver stops on a non-finite
/// iterate) and the underlying error is kept for [`BatchHvp::take_error`].
pub struct BatchHvp<'a, O: StochasticObjective> {
    obj: &'a O,
    prepared: Vec<O::Prepared>,
    error: Mutex<Option<Error>>,
}

impl<'a, O: StochasticObjective> BatchHvp<'a, O> {
    pub fn new(obj: &'a O, prepared: Vec<O::Prepared>) -> Result<Self> {
        if prepared.is_empty() {
            return Err(Error::config("HVP batch is empty"));
        }
        Ok(Self {
            obj,
            prepared,
            error: Mutex::new(None),
        })
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    pub fn try_apply(&self, vec: &[f64]) -> Result<Vec<f64>> {
        let parts: Vec<Vec<f64>> = self
            .prepared
            .par_iter()
            .map(|p| self.obj.apply(p, vec))
            .collect::<Result<_>>()?;
        Ok(mean_in_order(&parts))
    }

    pub fn take_error(&self) -> Option<Error> {
        self.error.lock().expect("HVP error slot poisoned").take()
    }
}

impl<O: StochasticObjective> HessianOp for BatchHvp<'_, O> {
    fn dim(&self) -> usize {
        self.obj.dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self.try_apply(x) {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.error.lock().expect("HVP error slot poisoned");
                slot.get_or_insert(e);
                vec![f64::NAN; x.len()]
            }
        }
    }
}

/// Discounted return of a policy on an MDP, estimated from trajectories.
#[derive(Debug, Clone)]
pub struct PolicyObjective {
    pub mdp: MdpSpec,
    pub ctx: EstimatorContext,
}

impl PolicyObjective {
    pub fn new(mdp: MdpSpec, policy: PolicyHandle, baseline: Baseline) -> Result<Self> {
        mdp.check_policy(&policy)?;
        let ctx = EstimatorContext::new(policy, mdp.gamma(), baseline)?;
        Ok(Self { mdp, ctx })
    }

    pub fn policy(&self) -> &PolicyHandle {
        &self.ctx.policy
    }
}

impl StochasticObjective for PolicyObjective {
    type Sample = Trajectory;
    type Prepared = PreparedHvp;

    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn probes_per_sample(&self) -> u64 {
        self.mdp.horizon() as u64
    }

    fn init_params(&self, rng: &mut RngStream) -> Vec<f64> {
        self.ctx.policy.init_params(rng).into_inner()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        self.ctx.policy.check_params(params)
    }

    fn draw(&self, params: &[f64], rng: &mut RngStream) -> Result<Trajectory> {
        sample_trajectory(&self.mdp, &self.ctx.policy, params, rng)
    }

    fn sample_value(&self, sample: &Trajectory) -> f64 {
        sample.discounted_return(self.ctx.gamma)
    }

    fn batch_mean_grad(&self, samples: &[Trajectory], params: &[f64]) -> Result<Vec<f64>> {
        estimators::batch_mean_grad(&self.ctx, samples, params)
    }

    fn prepare(&self, sample: Trajectory, params: &[f64]) -> Result<PreparedHvp> {
        PreparedHvp::new(&self.ctx, sample, params)
    }

    fn apply(&self, prepared: &PreparedHvp, vec: &[f64]) -> Result<Vec<f64>> {
        prepared.apply(&self.ctx, vec)
    }

    fn exact(&self, params: &[f64], with_hessian: bool) -> Option<Result<ExactDerivatives>> {
        match (&self.mdp, self.ctx.policy.family()) {
            (MdpSpec::Tabular(m), PolicyFamily::SoftmaxTabular { .. }) => Some(
                dynamic_programming_exact(m, &self.ctx.policy, params, with_hessian),
            ),
            _ => None,
        }
    }
}
