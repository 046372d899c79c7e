//! Finite-horizon MDPs, trajectories and sampling.

mod exact;
mod linear_gaussian;
mod tabular;

pub use exact::{
    dynamic_programming_exact, enumerate_exact, for_each_trajectory, state_marginal,
    trajectory_count, write_flat_matrix, ExactDerivatives, ENUMERATION_BUDGET,
};
pub use linear_gaussian::LinearGaussianTask;
pub use tabular::{GridworldConfig, TabularMdp};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyHandle;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum State {
    Index(usize),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Index(usize),
    Real(f64),
}

/// Ordered state/action/reward sequence. The three arrays always share a
/// length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    states: Vec<State>,
    actions: Vec<Action>,
    rewards: Vec<f64>,
}

impl Trajectory {
    pub fn new(states: Vec<State>, actions: Vec<Action>, rewards: Vec<f64>) -> Result<Self> {
        if states.len() != actions.len() || actions.len() != rewards.len() {
            return Err(Error::config(format!(
                "trajectory arrays differ in length: {} states, {} actions, {} rewards",
                states.len(),
                actions.len(),
                rewards.len()
            )));
        }
        Ok(Self {
            states,
            actions,
            rewards,
        })
    }

    fn with_capacity(h: usize) -> Self {
        Self {
            states: Vec::with_capacity(h),
            actions: Vec::with_capacity(h),
            rewards: Vec::with_capacity(h),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn steps(&self) -> impl Iterator<Item = (&State, &Action, f64)> {
        self.states
            .iter()
            .zip(&self.actions)
            .zip(&self.rewards)
            .map(|((s, a), r)| (s, a, *r))
    }

    /// `Σ_h γ^h r_h`, accumulated from the last step backwards so that it is
    /// bit-identical to `returns_to_go()[0]`.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let disc = discounts(self.rewards.len(), gamma);
        self.rewards
            .iter()
            .zip(&disc)
            .rev()
            .fold(0.0, |acc, (r, g)| acc + g * r)
    }

    /// `Ψ_h = Σ_{t ≥ h} γ^t r_t`, discounted from the start of the trajectory.
    pub fn returns_to_go(&self, gamma: f64) -> Vec<f64> {
        let n = self.rewards.len();
        let disc = discounts(n, gamma);
        let mut psi = vec![0.0; n];
        let mut acc = 0.0;
        for h in (0..n).rev() {
            acc += disc[h] * self.rewards[h];
            psi[h] = acc;
        }
        psi
    }
}

/// `[1, γ, γ², …]` by repeated multiplication.
pub(crate) fn discounts(n: usize, gamma: f64) -> Vec<f64> {
    let mut disc = Vec::with_capacity(n);
    let mut g = 1.0;
    for _ in 0..n {
        disc.push(g);
        g *= gamma;
    }
    disc
}

pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    traj.discounted_return(gamma)
}

pub fn returns_to_go(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    traj.returns_to_go(gamma)
}

/// A finite-horizon MDP.
#[derive(Debug, Clone, PartialEq)]
pub enum MdpSpec {
    Tabular(TabularMdp),
    LinearGaussian(LinearGaussianTask),
}

impl MdpSpec {
    pub fn horizon(&self) -> usize {
        match self {
            MdpSpec::Tabular(m) => m.horizon,
            MdpSpec::LinearGaussian(m) => m.horizon,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            MdpSpec::Tabular(m) => m.gamma,
            MdpSpec::LinearGaussian(m) => m.gamma,
        }
    }

    pub fn reward_bound(&self) -> f64 {
        match self {
            MdpSpec::Tabular(m) => m.reward_bound(),
            MdpSpec::LinearGaussian(m) => m.reward_bound(),
        }
    }

    pub fn as_tabular(&self) -> Option<&TabularMdp> {
        match self {
            MdpSpec::Tabular(m) => Some(m),
            _ => None,
        }
    }

    /// Checks that `policy` acts on this MDP's state and action spaces.
    pub fn check_policy(&self, policy: &PolicyHandle) -> Result<()> {
        use crate::policy::{FeatureMap, PolicyFamily};
        let ok = match (self, policy.family()) {
            (MdpSpec::Tabular(m), PolicyFamily::SoftmaxTabular { n_states, n_actions }) => {
                *n_states == m.n_states && *n_actions == m.n_actions
            }
            (MdpSpec::LinearGaussian(m), PolicyFamily::GaussianLinear { features, .. })
            | (MdpSpec::LinearGaussian(m), PolicyFamily::GaussianMlp { features, .. }) => {
                matches!(features, FeatureMap::Raw { dim } | FeatureMap::RawWithBias { dim } if *dim == m.state_dim())
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "policy {:?} is incompatible with this environment",
                policy.family()
            )))
        }
    }

    fn sample_initial(&self, rng: &mut RngStream) -> State {
        match self {
            MdpSpec::Tabular(m) => m.sample_initial(rng),
            MdpSpec::LinearGaussian(m) => m.sample_initial(rng),
        }
    }

    fn step(&self, s: &State, a: &Action, rng: &mut RngStream) -> Result<(f64, State)> {
        match self {
            MdpSpec::Tabular(m) => m.step(s, a, rng),
            MdpSpec::LinearGaussian(m) => m.step(s, a, rng),
        }
    }
}

/// Draws one trajectory of length `H` under `π_θ`.
///
/// Consumes only `rng`; identical `(mdp, params, rng state)` give
/// bit-identical trajectories.
pub fn sample_trajectory(
    mdp: &MdpSpec,
    policy: &PolicyHandle,
    params: &[f64],
    rng: &mut RngStream,
) -> Result<Trajectory> {
    policy.check_params(params)?;
    let horizon = mdp.horizon();
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let mut traj = Trajectory::with_capacity(horizon);
    let mut s = mdp.sample_initial(rng);
    for _ in 0..horizon {
        let a = policy.sample_action(params, &s, rng)?;
        let (r, next) = mdp.step(&s, &a, rng)?;
        traj.states.push(s);
        traj.actions.push(a);
        traj.rewards.push(r);
        s = next;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn traj_with_rewards(r: &[f64]) -> Trajectory {
        Trajectory::new(
            vec![State::Index(0); r.len()],
            vec![Action::Index(0); r.len()],
            r.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn discounted_return_examples() {
        assert_eq!(traj_with_rewards(&[1.0, 1.0, 1.0]).discounted_return(0.5), 1.75);
        assert_eq!(traj_with_rewards(&[]).discounted_return(0.9), 0.0);
        assert_relative_eq!(
            traj_with_rewards(&[2.0, -1.0]).discounted_return(0.9),
            1.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn returns_to_go_examples() {
        assert_eq!(
            traj_with_rewards(&[1.0, 1.0, 1.0]).returns_to_go(0.5),
            vec![1.75, 0.75, 0.25]
        );
        assert_eq!(traj_with_rewards(&[1.0]).returns_to_go(0.3), vec![1.0]);
    }

    #[test]
    fn mismatched_arrays_rejected() {
        assert!(Trajectory::new(vec![State::Index(0)], vec![], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn returns_to_go_telescopes(rewards in proptest::collection::vec(-5.0f64..5.0, 1..30), gamma in 0.01f64..0.99) {
            let t = traj_with_rewards(&rewards);
            let psi = t.returns_to_go(gamma);
            prop_assert_eq!(psi[0], t.discounted_return(gamma));
            for h in 0..rewards.len() {
                let next = if h + 1 < rewards.len() { psi[h + 1] } else { 0.0 };
                prop_assert!((psi[h] - next - gamma.powi(h as i32) * rewards[h]).abs() <= 1e-12 * (1.0 + psi[h].abs()));
            }
        }
    }

    #[test]
    fn deterministic_single_state_mdp() {
        let mdp = MdpSpec::Tabular(
            TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.5, -0.5], vec![1.0], 0.9, 3).unwrap(),
        );
        // logits strongly favour action 0; 60 is enough for p(a=1) < 1e-26
        let pol = PolicyHandle::softmax(1, 2).unwrap();
        let mut rng = stream(3, Purpose::Custom(1), 0, 0);
        let t = sample_trajectory(&mdp, &pol, &[60.0, 0.0], &mut rng).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.actions(), &[Action::Index(0); 3]);
        assert_eq!(t.rewards(), &[0.5; 3]);
    }

    #[test]
    fn forced_transition() {
        // P(s1 | s0, a) = 1, s1 absorbing
        let p = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mdp = MdpSpec::Tabular(
            TabularMdp::new(2, 2, p, vec![0.0; 4], vec![1.0, 0.0], 0.9, 4).unwrap(),
        );
        let pol = PolicyHandle::softmax(2, 2).unwrap();
        for i in 0..50 {
            let mut rng = stream(11, Purpose::Custom(2), 0, i);
            let t = sample_trajectory(&mdp, &pol, &[0.0; 4], &mut rng).unwrap();
            assert_eq!(t.states()[0], State::Index(0));
            assert_eq!(t.states()[1], State::Index(1));
        }
    }

    #[test]
    fn dimension_mismatch_and_non_finite_params() {
        let mdp = MdpSpec::Tabular(TabularMdp::random(3, 2, 0.9, 4, 5).unwrap());
        let pol = PolicyHandle::softmax(3, 2).unwrap();
        let mut rng = stream(1, Purpose::Custom(3), 0, 0);
        let err = sample_trajectory(&mdp, &pol, &[0.0; 5], &mut rng).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let mut bad = vec![0.0; 6];
        bad[4] = f64::INFINITY;
        let err = sample_trajectory(&mdp, &pol, &bad, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("parameter 4")));
    }

    #[test]
    fn sampling_is_reproducible() {
        let mdp = MdpSpec::Tabular(TabularMdp::gridworld(&GridworldConfig::default()).unwrap());
        let pol = PolicyHandle::softmax(25, 4).unwrap();
        let theta = pol.init_params(&mut stream(5, Purpose::Init, 0, 0));
        let a = sample_trajectory(&mdp, &pol, &theta, &mut stream(9, Purpose::Batch, 2, 7)).unwrap();
        let b = sample_trajectory(&mdp, &pol, &theta, &mut stream(9, Purpose::Batch, 2, 7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
    }
}
