//! Exact objective, gradient and Hessian on tabular MDPs.
//!
//! Two independent routes are provided:
//!
//! * [`enumerate_exact`] walks every trajectory `τ` and differentiates
//!   `J(θ) = Σ_τ p(τ|π_θ) R(τ)` in closed form through `log p(τ|π_θ)`;
//! * [`dynamic_programming_exact`] propagates the state distribution together
//!   with its first and second derivatives through time, which scales to
//!   instances far beyond enumeration.

use nalgebra::{DMatrix, DVector};
use std::io::Write;

use super::{Action, State, TabularMdp, Trajectory};
use crate::error::{Error, Result};
use crate::policy::PolicyHandle;

/// Refuse enumerations with more than this many trajectories.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct ExactDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// `(|S|·|A|)^H`, the size of the trajectory space.
pub fn trajectory_count(mdp: &TabularMdp) -> f64 {
    ((mdp.n_states * mdp.n_actions) as f64).powi(mdp.horizon as i32)
}

struct PolicyTables {
    n_actions: usize,
    probs: Vec<f64>,
    scores: Vec<DVector<f64>>,
    hessians: Vec<DMatrix<f64>>,
}

impl PolicyTables {
    fn build(
        mdp: &TabularMdp,
        policy: &PolicyHandle,
        params: &[f64],
        with_hessian: bool,
    ) -> Result<Self> {
        mdp_policy_check(mdp, policy)?;
        policy.check_params(params)?;
        let d = policy.dim();
        let mut probs = Vec::with_capacity(mdp.n_states * mdp.n_actions);
        let mut scores = Vec::with_capacity(mdp.n_states * mdp.n_actions);
        let mut hessians = Vec::new();
        for s in 0..mdp.n_states {
            let st = State::Index(s);
            let p = policy.action_probs(params, &st)?;
            for a in 0..mdp.n_actions {
                let act = Action::Index(a);
                probs.push(p[a]);
                scores.push(DVector::from_vec(policy.grad_log_prob(params, &st, &act)?));
                if with_hessian {
                    let mut hess = DMatrix::zeros(d, d);
                    let mut e = vec![0.0; d];
                    for j in 0..d {
                        e[j] = 1.0;
                        let col = policy.hvp_log_prob(params, &st, &act, &e)?;
                        hess.set_column(j, &DVector::from_vec(col));
                        e[j] = 0.0;
                    }
                    hessians.push(hess);
                }
            }
        }
        Ok(Self {
            n_actions: mdp.n_actions,
            probs,
            scores,
            hessians,
        })
    }

    fn idx(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }
}

fn mdp_policy_check(mdp: &TabularMdp, policy: &PolicyHandle) -> Result<()> {
    use crate::policy::PolicyFamily;
    match policy.family() {
        PolicyFamily::SoftmaxTabular { n_states, n_actions }
            if *n_states == mdp.n_states && *n_actions == mdp.n_actions =>
        {
            Ok(())
        }
        other => Err(Error::config(format!(
            "exact oracle needs a softmax policy over this MDP, got {other:?}"
        ))),
    }
}

fn check_budget(mdp: &TabularMdp, budget: u64) -> Result<()> {
    let count = trajectory_count(mdp);
    if count > budget as f64 {
        return Err(Error::EnumerationBudget { count, budget });
    }
    Ok(())
}

/// Exact `J`, `∇J` and `∇²J` by enumerating every trajectory.
pub fn enumerate_exact(
    mdp: &TabularMdp,
    policy: &PolicyHandle,
    params: &[f64],
) -> Result<ExactDerivatives> {
    check_budget(mdp, ENUMERATION_BUDGET)?;
    let tables = PolicyTables::build(mdp, policy, params, true)?;
    let d = policy.dim();
    let mut acc = Accum {
        value: 0.0,
        grad: DVector::zeros(d),
        hess: DMatrix::zeros(d, d),
    };
    let score0 = DVector::zeros(d);
    let hess0 = DMatrix::zeros(d, d);
    for (s0, &p0) in mdp.initial().iter().enumerate() {
        if p0 > 0.0 {
            enumerate_from(mdp, &tables, 0, s0, p0, 0.0, 1.0, &score0, &hess0, &mut acc);
        }
    }
    Ok(ExactDerivatives {
        value: acc.value,
        gradient: acc.grad.as_slice().to_vec(),
        hessian: Some(acc.hess),
    })
}

struct Accum {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

#[allow(clippy::too_many_arguments)]
fn enumerate_from(
    mdp: &TabularMdp,
    tables: &PolicyTables,
    h: usize,
    s: usize,
    weight: f64,
    ret: f64,
    disc: f64,
    score_sum: &DVector<f64>,
    hess_sum: &DMatrix<f64>,
    acc: &mut Accum,
) {
    for a in 0..mdp.n_actions {
        let k = tables.idx(s, a);
        let w = weight * tables.probs[k];
        if w == 0.0 {
            continue;
        }
        let r = ret + disc * mdp.reward(s, a);
        let score = score_sum + &tables.scores[k];
        let hess = hess_sum + &tables.hessians[k];
        if h + 1 == mdp.horizon {
            // ∇²J contribution: p R (∇log p ∇log pᵀ + ∇² log p)
            let c = w * r;
            acc.value += c;
            acc.grad.axpy(c, &score, 1.0);
            acc.hess.ger(c, &score, &score, 1.0);
            acc.hess += c * &hess;
            continue;
        }
        for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
            if p > 0.0 {
                enumerate_from(
                    mdp,
                    tables,
                    h + 1,
                    s2,
                    w * p,
                    r,
                    disc * mdp.gamma,
                    &score,
                    &hess,
                    acc,
                );
            }
        }
    }
}

/// Calls `visit(τ, p(τ|π_θ))` for every trajectory with positive probability.
pub fn for_each_trajectory<F>(
    mdp: &TabularMdp,
    policy: &PolicyHandle,
    params: &[f64],
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&Trajectory, f64),
{
    check_budget(mdp, ENUMERATION_BUDGET)?;
    let tables = PolicyTables::build(mdp, policy, params, false)?;
    let mut states = Vec::with_capacity(mdp.horizon);
    let mut actions = Vec::with_capacity(mdp.horizon);
    let mut rewards = Vec::with_capacity(mdp.horizon);
    for (s0, &p0) in mdp.initial().iter().enumerate() {
        if p0 > 0.0 {
            visit_from(
                mdp, &tables, s0, p0, &mut states, &mut actions, &mut rewards, &mut visit,
            );
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn visit_from<F: FnMut(&Trajectory, f64)>(
    mdp: &TabularMdp,
    tables: &PolicyTables,
    s: usize,
    weight: f64,
    states: &mut Vec<State>,
    actions: &mut Vec<Action>,
    rewards: &mut Vec<f64>,
    visit: &mut F,
) {
    for a in 0..mdp.n_actions {
        let w = weight * tables.probs[tables.idx(s, a)];
        if w == 0.0 {
            continue;
        }
        states.push(State::Index(s));
        actions.push(Action::Index(a));
        rewards.push(mdp.reward(s, a));
        if states.len() == mdp.horizon {
            let t = Trajectory::new(states.clone(), actions.clone(), rewards.clone())
                .expect("parallel arrays");
            visit(&t, w);
        } else {
            for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
                if p > 0.0 {
                    visit_from(mdp, tables, s2, w * p, states, actions, rewards, visit);
                }
            }
        }
        states.pop();
        actions.pop();
        rewards.pop();
    }
}

/// Exact `J`, `∇J` and optionally `∇²J` by forward propagation of the state
/// distribution `x_h(s) = Pr(s_h = s)` and its derivatives.
pub fn dynamic_programming_exact(
    mdp: &TabularMdp,
    policy: &PolicyHandle,
    params: &[f64],
    with_hessian: bool,
) -> Result<ExactDerivatives> {
    let tables = PolicyTables::build(mdp, policy, params, with_hessian)?;
    let d = policy.dim();
    let ns = mdp.n_states;
    let mut x: Vec<f64> = mdp.initial().to_vec();
    let mut dx: Vec<DVector<f64>> = vec![DVector::zeros(d); ns];
    let mut ddx: Vec<DMatrix<f64>> = if with_hessian {
        vec![DMatrix::zeros(d, d); ns]
    } else {
        Vec::new()
    };

    let mut value = 0.0;
    let mut grad = DVector::zeros(d);
    let mut hess = if with_hessian {
        DMatrix::zeros(d, d)
    } else {
        DMatrix::zeros(0, 0)
    };
    let mut disc = 1.0;

    for h in 0..mdp.horizon {
        let last = h + 1 == mdp.horizon;
        let mut nx = vec![0.0; ns];
        let mut ndx: Vec<DVector<f64>> = if last { Vec::new() } else { vec![DVector::zeros(d); ns] };
        let mut nddx: Vec<DMatrix<f64>> = if last || !with_hessian {
            Vec::new()
        } else {
            vec![DMatrix::zeros(d, d); ns]
        };
        for s in 0..ns {
            let unreachable = x[s] == 0.0
                && dx[s].iter().all(|v| *v == 0.0)
                && (!with_hessian || ddx[s].iter().all(|v| *v == 0.0));
            if unreachable {
                continue;
            }
            for a in 0..mdp.n_actions {
                let k = tables.idx(s, a);
                let p = tables.probs[k];
                let g = &tables.scores[k];
                // q = x π, ∂q = π ∂x + q g
                let q = x[s] * p;
                let mut dq = p * &dx[s];
                dq.axpy(q, g, 1.0);
                // ∂²q = π ∂²x + π (∂x gᵀ + g ∂xᵀ) + q (∇² log π + g gᵀ)
                let ddq = if with_hessian {
                    let mut m = p * &ddx[s];
                    m.ger(p, &dx[s], g, 1.0);
                    m.ger(p, g, &dx[s], 1.0);
                    m.ger(q, g, g, 1.0);
                    m += q * &tables.hessians[k];
                    Some(m)
                } else {
                    None
                };
                let wr = disc * mdp.reward(s, a);
                value += wr * q;
                grad.axpy(wr, &dq, 1.0);
                if let Some(m) = &ddq {
                    hess += wr * m;
                }
                if last {
                    continue;
                }
                for (s2, &pt) in mdp.transition(s, a).iter().enumerate() {
                    if pt > 0.0 {
                        nx[s2] += pt * q;
                        ndx[s2].axpy(pt, &dq, 1.0);
                        if let Some(m) = &ddq {
                            nddx[s2] += pt * m;
                        }
                    }
                }
            }
        }
        x = nx;
        dx = ndx;
        ddx = nddx;
        disc *= mdp.gamma;
    }

    Ok(ExactDerivatives {
        value,
        gradient: grad.as_slice().to_vec(),
        hessian: with_hessian.then_some(hess),
    })
}

/// Exact distribution of `s_h` under `π_θ`.
pub fn state_marginal(
    mdp: &TabularMdp,
    policy: &PolicyHandle,
    params: &[f64],
    h: usize,
) -> Result<Vec<f64>> {
    let tables = PolicyTables::build(mdp, policy, params, false)?;
    let mut x = mdp.initial().to_vec();
    for _ in 0..h {
        let mut nx = vec![0.0; mdp.n_states];
        for (s, &xs) in x.iter().enumerate() {
            for a in 0..mdp.n_actions {
                let q = xs * tables.probs[tables.idx(s, a)];
                for (s2, &pt) in mdp.transition(s, a).iter().enumerate() {
                    nx[s2] += pt * q;
                }
            }
        }
        x = nx;
    }
    Ok(x)
}

/// Writes `m` as whitespace-separated rows in round-trip precision.
pub fn write_flat_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
