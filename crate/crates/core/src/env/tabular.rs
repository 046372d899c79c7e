use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{Action, State};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Finite MDP with explicit transition, reward and initial tables.
///
/// `transitions[(s·|A| + a)·|S| + s'] = P(s' | s, a)`,
/// `rewards[s·|A| + a] = r(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    initial: Vec<f64>,
    pub gamma: f64,
    pub horizon: usize,
}

const ROW_TOL: f64 = 1e-12;

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
        gamma: f64,
        horizon: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("tabular MDP needs states and actions"));
        }
        if transitions.len() != n_states * n_actions * n_states {
            return Err(Error::config("transition table has the wrong size"));
        }
        if rewards.len() != n_states * n_actions || initial.len() != n_states {
            return Err(Error::config("reward or initial table has the wrong size"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("discount must lie in (0,1), got {gamma}")));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        for (row, chunk) in transitions.chunks_exact(n_states).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if chunk.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::config(format!(
                    "transition row (s={}, a={}) sums to {sum}",
                    row / n_actions,
                    row % n_actions
                )));
            }
        }
        let init_sum: f64 = initial.iter().sum();
        if initial.iter().any(|p| !(*p >= 0.0)) || (init_sum - 1.0).abs() > ROW_TOL {
            return Err(Error::config(format!("initial distribution sums to {init_sum}")));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("rewards must be finite"));
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            initial,
            gamma,
            horizon,
        })
    }

    /// Random MDP: Dirichlet(1) transition rows and initial distribution,
    /// rewards uniform in [0, 1]. Fully determined by `seed`.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw_simplex = |rng: &mut ChaCha8Rng| -> Result<Vec<f64>> {
            if n_states == 1 {
                return Ok(vec![1.0]);
            }
            // normalised Exp(1) draws are Dirichlet(1, ..., 1)
            let mut p: Vec<f64> = (0..n_states).map(|_| Exp1.sample(rng)).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            Ok(p)
        };
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            transitions.extend(draw_simplex(&mut rng)?);
        }
        let rewards = (0..n_states * n_actions)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let initial = draw_simplex(&mut rng)?;
        Self::new(
            n_states, n_actions, transitions, rewards, initial, gamma, horizon,
        )
    }

    /// Square gridworld with the start in the top-left corner and an
    /// absorbing goal in the bottom-right corner.
    ///
    /// Actions are up, right, down, left. With probability `slip` the move is
    /// replaced by a uniformly random one. Moving into a wall leaves the agent
    /// in place. Every step outside the goal costs `step_penalty`; entering the
    /// goal pays `goal_reward`. The reward table stores the expectation over
    /// the next state. The goal self-loops with zero reward.
    pub fn gridworld(cfg: &GridworldConfig) -> Result<Self> {
        let n = cfg.size;
        if n < 2 {
            return Err(Error::config("gridworld size must be at least 2"));
        }
        if !(0.0..=1.0).contains(&cfg.slip) {
            return Err(Error::config("slip probability must lie in [0,1]"));
        }
        let ns = n * n;
        let na = 4;
        let goal = ns - 1;
        let moves: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
        let target = |s: usize, m: usize| -> usize {
            let (r, c) = ((s / n) as isize, (s % n) as isize);
            let (nr, nc) = (r + moves[m].0, c + moves[m].1);
            if nr < 0 || nc < 0 || nr >= n as isize || nc >= n as isize {
                s
            } else {
                (nr as usize) * n + nc as usize
            }
        };
        let mut transitions = vec![0.0; ns * na * ns];
        let mut rewards = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                let row = &mut transitions[(s * na + a) * ns..(s * na + a + 1) * ns];
                if s == goal {
                    row[goal] = 1.0;
                    continue;
                }
                row[target(s, a)] += 1.0 - cfg.slip;
                for m in 0..na {
                    row[target(s, m)] += cfg.slip / na as f64;
                }
                rewards[s * na + a] = cfg.goal_reward * row[goal] - cfg.step_penalty;
            }
        }
        let mut initial = vec![0.0; ns];
        initial[0] = 1.0;
        Self::new(ns, na, transitions, rewards, initial, cfg.gamma, cfg.horizon)
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let k = s * self.n_actions + a;
        &self.transitions[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn reward_bound(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub(super) fn sample_initial(&self, rng: &mut RngStream) -> State {
        State::Index(sample_categorical(&self.initial, rng))
    }

    pub(super) fn step(&self, s: &State, a: &Action, rng: &mut RngStream) -> Result<(f64, State)> {
        let (s, a) = match (s, a) {
            (State::Index(s), Action::Index(a)) if *s < self.n_states && *a < self.n_actions => {
                (*s, *a)
            }
            _ => {
                return Err(Error::config(format!(
                    "({s:?}, {a:?}) is outside the tabular MDP"
                )))
            }
        };
        let next = sample_categorical(self.transition(s, a), rng);
        Ok((self.reward(s, a), State::Index(next)))
    }
}

fn sample_categorical(p: &[f64], rng: &mut RngStream) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last partial sum
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridworldConfig {
    pub size: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub goal_reward: f64,
    pub step_penalty: f64,
    pub slip: f64,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            size: 5,
            horizon: 15,
            gamma: 0.9,
            goal_reward: 1.0,
            step_penalty: 0.01,
            slip: 0.1,
        }
    }
}
