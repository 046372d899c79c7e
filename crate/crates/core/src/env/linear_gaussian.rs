use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Action, State};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Double-integrator regulation task.
///
/// State `x = (position, velocity)`, scalar control `u`:
///
/// ```text
/// x' = clamp([[1, dt], [0, 1]] x + [0, dt] u + w),  w ~ N(0, noise² I)
/// r  = −(‖x‖² + control_cost · u²)
/// ```
///
/// The control is clamped to `[-u_max, u_max]` before it enters the dynamics
/// and the state is clamped to `[-x_max, x_max]²`, which keeps rewards
/// bounded. Initial states are uniform on `[-1, 1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearGaussianTask {
    pub dt: f64,
    pub noise: f64,
    pub control_cost: f64,
    pub x_max: f64,
    pub u_max: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for LinearGaussianTask {
    fn default() -> Self {
        Self {
            dt: 0.1,
            noise: 0.05,
            control_cost: 0.1,
            x_max: 2.0,
            u_max: 2.0,
            gamma: 0.9,
            horizon: 20,
        }
    }
}

impl LinearGaussianTask {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("x_max", self.x_max),
            ("u_max", self.u_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.x_max >= 1.0) {
            return Err(Error::config("x_max must contain the initial box [-1, 1]"));
        }
        if !(self.noise >= 0.0) || !(self.control_cost >= 0.0) {
            return Err(Error::config("noise and control_cost must be non-negative"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!(
                "discount must lie in (0,1), got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn reward_bound(&self) -> f64 {
        2.0 * self.x_max * self.x_max + self.control_cost * self.u_max * self.u_max
    }

    pub(super) fn sample_initial(&self, rng: &mut RngStream) -> State {
        State::Point(vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
    }

    pub(super) fn step(&self, s: &State, a: &Action, rng: &mut RngStream) -> Result<(f64, State)> {
        let (x, u) = match (s, a) {
            (State::Point(x), Action::Real(u)) if x.len() == 2 => (x, *u),
            _ => {
                return Err(Error::config(format!(
                    "({s:?}, {a:?}) is outside the linear-Gaussian task"
                )))
            }
        };
        if !u.is_finite() {
            return Err(Error::numeric("non-finite control"));
        }
        let u = u.clamp(-self.u_max, self.u_max);
        let reward = -(x[0] * x[0] + x[1] * x[1] + self.control_cost * u * u);
        let w0: f64 = StandardNormal.sample(rng);
        let w1: f64 = StandardNormal.sample(rng);
        let next = vec![
            (x[0] + self.dt * x[1] + self.noise * w0).clamp(-self.x_max, self.x_max),
            (x[1] + self.dt * u + self.noise * w1).clamp(-self.x_max, self.x_max),
        ];
        Ok((reward, State::Point(next)))
    }
}
