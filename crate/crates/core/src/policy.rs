//! Differentiable stochastic policies.
//!
//! Three families are provided:
//!
//! * `SoftmaxTabular`: one logit per (state, action) pair, `d = |S|·|A|`.
//! * `GaussianLinear`: `a ~ N(θᵀφ(s), σ²)` for a fixed feature map `φ`.
//! * `GaussianMlp`: `a ~ N(f_θ(φ(s)), σ²)` where `f_θ` is a two-hidden-layer
//!   tanh network with a scalar linear head.
//!
//! Each family exposes `log π_θ(a|s)`, its gradient and its Hessian applied to
//! a vector. Hessian-vector products never build the `d×d` matrix; the MLP
//! uses a forward-over-reverse R-operator pass.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{Action, State};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use std::io::{Read, Write};
use crate::vector::{first_non_finite, ParamVector};

/// Maps an environment state to a real feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureMap {
    /// Indicator of a discrete state.
    OneHot { n: usize },
    /// The continuous state itself.
    Raw { dim: usize },
    /// The continuous state with a trailing constant 1.
    RawWithBias { dim: usize },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match *self {
            FeatureMap::OneHot { n } => n,
            FeatureMap::Raw { dim } => dim,
            FeatureMap::RawWithBias { dim } => dim + 1,
        }
    }

    pub fn features(&self, s: &State) -> Result<Vec<f64>> {
        match (self, s) {
            (FeatureMap::OneHot { n }, State::Index(i)) if i < n => {
                let mut f = vec![0.0; *n];
                f[*i] = 1.0;
                Ok(f)
            }
            (FeatureMap::Raw { dim }, State::Point(x)) if x.len() == *dim => Ok(x.clone()),
            (FeatureMap::RawWithBias { dim }, State::Point(x)) if x.len() == *dim => {
                let mut f = x.clone();
                f.push(1.0);
                Ok(f)
            }
            _ => Err(Error::config(format!(
                "state {s:?} is outside the domain of feature map {self:?}"
            ))),
        }
    }
}

pub const MLP_HIDDEN: [usize; 2] = [8, 8];

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyFamily {
    SoftmaxTabular { n_states: usize, n_actions: usize },
    GaussianLinear { features: FeatureMap, sigma: f64 },
    GaussianMlp { features: FeatureMap, hidden: [usize; 2], sigma: f64 },
}

/// A policy architecture. Parameters live outside, in a [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHandle {
    family: PolicyFamily,
    dim: usize,
}

impl PolicyHandle {
    pub fn new(family: PolicyFamily) -> Result<Self> {
        let dim = match &family {
            PolicyFamily::SoftmaxTabular { n_states, n_actions } => {
                if *n_states == 0 || *n_actions < 2 {
                    return Err(Error::config(
                        "softmax policy needs at least one state and two actions",
                    ));
                }
                n_states * n_actions
            }
            PolicyFamily::GaussianLinear { features, sigma } => {
                check_sigma(*sigma)?;
                features.dim()
            }
            PolicyFamily::GaussianMlp {
                features,
                hidden,
                sigma,
            } => {
                check_sigma(*sigma)?;
                if hidden.iter().any(|&w| w == 0) {
                    return Err(Error::config("MLP hidden widths must be positive"));
                }
                MlpLayout::new(features.dim(), *hidden).dim()
            }
        };
        Ok(Self { family, dim })
    }

    pub fn softmax(n_states: usize, n_actions: usize) -> Result<Self> {
        Self::new(PolicyFamily::SoftmaxTabular { n_states, n_actions })
    }

    pub fn gaussian_linear(features: FeatureMap, sigma: f64) -> Result<Self> {
        Self::new(PolicyFamily::GaussianLinear { features, sigma })
    }

    pub fn gaussian_mlp(features: FeatureMap, sigma: f64) -> Result<Self> {
        Self::new(PolicyFamily::GaussianMlp {
            features,
            hidden: MLP_HIDDEN,
            sigma,
        })
    }

    pub fn family(&self) -> &PolicyFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.family, PolicyFamily::SoftmaxTabular { .. })
    }

    /// Uniform in [-0.1, 0.1]^d.
    pub fn init_params(&self, rng: &mut RngStream) -> ParamVector {
        let v = (0..self.dim).map(|_| rng.random_range(-0.1..=0.1)).collect();
        ParamVector::new(v).expect("uniform draws are finite")
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim {
            return Err(Error::config(format!(
                "parameter dimension {} does not match policy dimension {}",
                params.len(),
                self.dim
            )));
        }
        if let Some(i) = first_non_finite(params) {
            return Err(Error::numeric(format!(
                "parameter {i} is not finite ({})",
                params[i]
            )));
        }
        Ok(())
    }

    pub fn sample_action(&self, params: &[f64], s: &State, rng: &mut RngStream) -> Result<Action> {
        match &self.family {
            PolicyFamily::SoftmaxTabular { n_actions, .. } => {
                let probs = self.action_probs(params, s)?;
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(Action::Index(a));
                    }
                }
                Ok(Action::Index(n_actions - 1))
            }
            PolicyFamily::GaussianLinear { sigma, .. } | PolicyFamily::GaussianMlp { sigma, .. } => {
                let mean = self.gaussian_mean(params, s)?;
                let z: f64 = StandardNormal.sample(rng);
                Ok(Action::Real(mean + sigma * z))
            }
        }
    }

    /// Action probabilities of the softmax family at `s`.
    pub fn action_probs(&self, params: &[f64], s: &State) -> Result<Vec<f64>> {
        match &self.family {
            PolicyFamily::SoftmaxTabular { n_states, n_actions } => {
                let i = tabular_state(s, *n_states)?;
                let logits = &params[i * n_actions..(i + 1) * n_actions];
                let probs = softmax(logits);
                if let Some(k) = first_non_finite(&probs) {
                    return Err(Error::numeric(format!(
                        "softmax probability non-finite at parameter {}",
                        i * n_actions + k
                    )));
                }
                Ok(probs)
            }
            _ => Err(Error::config("action probabilities need a discrete policy")),
        }
    }

    fn gaussian_mean(&self, params: &[f64], s: &State) -> Result<f64> {
        let mean = match &self.family {
            PolicyFamily::GaussianLinear { features, .. } => {
                let phi = features.features(s)?;
                crate::vector::dot(params, &phi)
            }
            PolicyFamily::GaussianMlp {
                features, hidden, ..
            } => {
                let phi = features.features(s)?;
                MlpLayout::new(phi.len(), *hidden).forward(params, &phi).mean
            }
            PolicyFamily::SoftmaxTabular { .. } => unreachable!(),
        };
        if !mean.is_finite() {
            return Err(Error::numeric(format!(
                "policy mean is not finite at state {s:?}"
            )));
        }
        Ok(mean)
    }

    pub fn log_prob(&self, params: &[f64], s: &State, a: &Action) -> Result<f64> {
        match &self.family {
            PolicyFamily::SoftmaxTabular { n_states, n_actions } => {
                let i = tabular_state(s, *n_states)?;
                let k = tabular_action(a, *n_actions)?;
                let logits = &params[i * n_actions..(i + 1) * n_actions];
                let lp = logits[k] - log_sum_exp(logits);
                finite_or(lp, "log-probability")
            }
            PolicyFamily::GaussianLinear { sigma, .. } | PolicyFamily::GaussianMlp { sigma, .. } => {
                let x = real_action(a)?;
                let mean = self.gaussian_mean(params, s)?;
                let z = (x - mean) / sigma;
                finite_or(
                    -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - 0.5 * z * z,
                    "log-probability",
                )
            }
        }
    }

    pub fn grad_log_prob(&self, params: &[f64], s: &State, a: &Action) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        self.add_grad_log_prob(params, s, a, 1.0, &mut g)?;
        Ok(g)
    }

    /// `out += scale · ∇ log π_θ(a|s)`.
    pub fn add_grad_log_prob(
        &self,
        params: &[f64],
        s: &State,
        a: &Action,
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        match &self.family {
            PolicyFamily::SoftmaxTabular { n_states, n_actions } => {
                let i = tabular_state(s, *n_states)?;
                let k = tabular_action(a, *n_actions)?;
                let probs = self.action_probs(params, s)?;
                let row = &mut out[i * n_actions..(i + 1) * n_actions];
                for (j, (o, p)) in row.iter_mut().zip(&probs).enumerate() {
                    let onehot = if j == k { 1.0 } else { 0.0 };
                    *o += scale * (onehot - p);
                }
            }
            PolicyFamily::GaussianLinear { features, sigma } => {
                let x = real_action(a)?;
                let phi = features.features(s)?;
                let mean = crate::vector::dot(params, &phi);
                let delta = (x - mean) / (sigma * sigma);
                for (o, f) in out.iter_mut().zip(&phi) {
                    *o += scale * delta * f;
                }
            }
            PolicyFamily::GaussianMlp {
                features,
                hidden,
                sigma,
            } => {
                let x = real_action(a)?;
                let phi = features.features(s)?;
                let layout = MlpLayout::new(phi.len(), *hidden);
                let fwd = layout.forward(params, &phi);
                let delta = (x - fwd.mean) / (sigma * sigma);
                let grad_mean = layout.backward(params, &phi, &fwd);
                for (o, g) in out.iter_mut().zip(&grad_mean) {
                    *o += scale * delta * g;
                }
            }
        }
        if let Some(i) = first_non_finite(out) {
            return Err(Error::numeric(format!(
                "score function non-finite at parameter {i}"
            )));
        }
        Ok(())
    }

    pub fn hvp_log_prob(
        &self,
        params: &[f64],
        s: &State,
        a: &Action,
        vec: &[f64],
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.add_hvp_log_prob(params, s, a, vec, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += scale · ∇² log π_θ(a|s) · vec`.
    pub fn add_hvp_log_prob(
        &self,
        params: &[f64],
        s: &State,
        a: &Action,
        vec: &[f64],
        scale: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::config(format!(
                "HVP direction has dimension {}, expected {}",
                vec.len(),
                self.dim
            )));
        }
        match &self.family {
            PolicyFamily::SoftmaxTabular { n_states, n_actions } => {
                // -(diag(p) - p pᵀ) restricted to the logits of state i
                let i = tabular_state(s, *n_states)?;
                tabular_action(a, *n_actions)?;
                let probs = self.action_probs(params, s)?;
                let w = &vec[i * n_actions..(i + 1) * n_actions];
                let pw = crate::vector::dot(&probs, w);
                let row = &mut out[i * n_actions..(i + 1) * n_actions];
                for ((o, p), wj) in row.iter_mut().zip(&probs).zip(w) {
                    *o += scale * (-p * wj + p * pw);
                }
            }
            PolicyFamily::GaussianLinear { features, sigma } => {
                real_action(a)?;
                let phi = features.features(s)?;
                let c = -crate::vector::dot(&phi, vec) / (sigma * sigma);
                for (o, f) in out.iter_mut().zip(&phi) {
                    *o += scale * c * f;
                }
            }
            PolicyFamily::GaussianMlp {
                features,
                hidden,
                sigma,
            } => {
                // ∇² log π = δ ∇²m − ∇m ∇mᵀ / σ²,  δ = (a − m)/σ²
                let x = real_action(a)?;
                let phi = features.features(s)?;
                let layout = MlpLayout::new(phi.len(), *hidden);
                let fwd = layout.forward(params, &phi);
                let delta = (x - fwd.mean) / (sigma * sigma);
                let (grad_mean, hess_mean_vec) = layout.grad_and_hvp(params, &phi, &fwd, vec);
                let gv = crate::vector::dot(&grad_mean, vec) / (sigma * sigma);
                for ((o, hv), g) in out.iter_mut().zip(&hess_mean_vec).zip(&grad_mean) {
                    *o += scale * (delta * hv - gv * g);
                }
            }
        }
        if let Some(i) = first_non_finite(out) {
            return Err(Error::numeric(format!(
                "log-policy HVP non-finite at parameter {i}"
            )));
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "policy standard deviation must be positive, got {sigma}"
        )))
    }
}

fn finite_or(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::numeric(format!("{what} is not finite")))
    }
}

fn tabular_state(s: &State, n: usize) -> Result<usize> {
    match s {
        State::Index(i) if *i < n => Ok(*i),
        _ => Err(Error::config(format!(
            "state {s:?} is not an index below {n}"
        ))),
    }
}

fn tabular_action(a: &Action, n: usize) -> Result<usize> {
    match a {
        Action::Index(k) if *k < n => Ok(*k),
        _ => Err(Error::config(format!(
            "action {a:?} is not an index below {n}"
        ))),
    }
}

fn real_action(a: &Action) -> Result<f64> {
    match a {
        Action::Real(x) => Ok(*x),
        _ => Err(Error::config(format!(
            "action {a:?} is not continuous"
        ))),
    }
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(x);
    x.iter().map(|v| (v - lse).exp()).collect()
}

/// Parameter layout of the two-hidden-layer network:
/// `[W1 (h1×n0, row-major), b1, W2 (h2×h1), b2, w3 (h2), b3]`.
#[derive(Debug, Clone, Copy)]
struct MlpLayout {
    n0: usize,
    h1: usize,
    h2: usize,
}

struct MlpForward {
    h1: Vec<f64>,
    h2: Vec<f64>,
    mean: f64,
}

impl MlpLayout {
    fn new(n0: usize, hidden: [usize; 2]) -> Self {
        Self {
            n0,
            h1: hidden[0],
            h2: hidden[1],
        }
    }

    fn dim(&self) -> usize {
        self.h1 * self.n0 + self.h1 + self.h2 * self.h1 + self.h2 + self.h2 + 1
    }

    fn offsets(&self) -> [usize; 6] {
        let w1 = 0;
        let b1 = w1 + self.h1 * self.n0;
        let w2 = b1 + self.h1;
        let b2 = w2 + self.h2 * self.h1;
        let w3 = b2 + self.h2;
        let b3 = w3 + self.h2;
        [w1, b1, w2, b2, w3, b3]
    }

    fn forward(&self, p: &[f64], x: &[f64]) -> MlpForward {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let h1: Vec<f64> = (0..self.h1)
            .map(|i| {
                let row = &p[w1 + i * self.n0..w1 + (i + 1) * self.n0];
                (crate::vector::dot(row, x) + p[b1 + i]).tanh()
            })
            .collect();
        let h2: Vec<f64> = (0..self.h2)
            .map(|i| {
                let row = &p[w2 + i * self.h1..w2 + (i + 1) * self.h1];
                (crate::vector::dot(row, &h1) + p[b2 + i]).tanh()
            })
            .collect();
        let mean = crate::vector::dot(&p[w3..w3 + self.h2], &h2) + p[b3];
        MlpForward { h1, h2, mean }
    }

    /// Gradient of the network output with respect to all parameters.
    fn backward(&self, p: &[f64], x: &[f64], fwd: &MlpForward) -> Vec<f64> {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let mut g = vec![0.0; self.dim()];
        g[w3..w3 + self.h2].copy_from_slice(&fwd.h2);
        g[b3] = 1.0;
        let gz2: Vec<f64> = (0..self.h2)
            .map(|i| p[w3 + i] * (1.0 - fwd.h2[i] * fwd.h2[i]))
            .collect();
        for i in 0..self.h2 {
            for j in 0..self.h1 {
                g[w2 + i * self.h1 + j] = gz2[i] * fwd.h1[j];
            }
            g[b2 + i] = gz2[i];
        }
        for j in 0..self.h1 {
            let gh1: f64 = (0..self.h2).map(|i| p[w2 + i * self.h1 + j] * gz2[i]).sum();
            let gz1 = gh1 * (1.0 - fwd.h1[j] * fwd.h1[j]);
            for k in 0..self.n0 {
                g[w1 + j * self.n0 + k] = gz1 * x[k];
            }
            g[b1 + j] = gz1;
        }
        g
    }

    /// Returns `(∇m, ∇²m · v)` via a forward R-pass followed by the
    /// differentiated backward pass.
    fn grad_and_hvp(
        &self,
        p: &[f64],
        x: &[f64],
        fwd: &MlpForward,
        v: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let (n0, nh1, nh2) = (self.n0, self.h1, self.h2);
        let d = self.dim();

        // forward R-pass
        let d1: Vec<f64> = fwd.h1.iter().map(|h| 1.0 - h * h).collect();
        let d2: Vec<f64> = fwd.h2.iter().map(|h| 1.0 - h * h).collect();
        let r_h1: Vec<f64> = (0..nh1)
            .map(|i| {
                let rz = crate::vector::dot(&v[w1 + i * n0..w1 + (i + 1) * n0], x) + v[b1 + i];
                d1[i] * rz
            })
            .collect();
        let r_h2: Vec<f64> = (0..nh2)
            .map(|i| {
                let rz = crate::vector::dot(&v[w2 + i * nh1..w2 + (i + 1) * nh1], &fwd.h1)
                    + crate::vector::dot(&p[w2 + i * nh1..w2 + (i + 1) * nh1], &r_h1)
                    + v[b2 + i];
                d2[i] * rz
            })
            .collect();

        let mut g = vec![0.0; d];
        let mut rg = vec![0.0; d];

        // output layer
        g[w3..w3 + nh2].copy_from_slice(&fwd.h2);
        rg[w3..w3 + nh2].copy_from_slice(&r_h2);
        g[b3] = 1.0;

        // second hidden layer
        let gz2: Vec<f64> = (0..nh2).map(|i| p[w3 + i] * d2[i]).collect();
        let r_gz2: Vec<f64> = (0..nh2)
            .map(|i| v[w3 + i] * d2[i] - 2.0 * p[w3 + i] * fwd.h2[i] * r_h2[i])
            .collect();
        for i in 0..nh2 {
            for j in 0..nh1 {
                g[w2 + i * nh1 + j] = gz2[i] * fwd.h1[j];
                rg[w2 + i * nh1 + j] = r_gz2[i] * fwd.h1[j] + gz2[i] * r_h1[j];
            }
            g[b2 + i] = gz2[i];
            rg[b2 + i] = r_gz2[i];
        }

        // first hidden layer
        for j in 0..nh1 {
            let mut gh1 = 0.0;
            let mut r_gh1 = 0.0;
            for i in 0..nh2 {
                gh1 += p[w2 + i * nh1 + j] * gz2[i];
                r_gh1 += v[w2 + i * nh1 + j] * gz2[i] + p[w2 + i * nh1 + j] * r_gz2[i];
            }
            let gz1 = gh1 * d1[j];
            let r_gz1 = r_gh1 * d1[j] - 2.0 * gh1 * fwd.h1[j] * r_h1[j];
            for k in 0..n0 {
                g[w1 + j * n0 + k] = gz1 * x[k];
                rg[w1 + j * n0 + k] = r_gz1 * x[k];
            }
            g[b1 + j] = gz1;
            rg[b1 + j] = r_gz1;
        }
        (g, rg)
    }
}

const PARAMS_MAGIC: &[u8; 4] = b"VRSP";
const PARAMS_VERSION: u32 = 1;

/// Parameter checkpoint: a 16-byte header (4-byte magic, `u32` format
/// version, `u64` length) followed by the values as little-endian `f64`.
pub fn write_params<W: Write>(mut w: W, params: &[f64]) -> Result<()> {
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(Error::Format("not a parameter checkpoint".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != PARAMS_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let mut long = [0u8; 8];
    r.read_exact(&mut long)?;
    let n = u64::from_le_bytes(long) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * n {
        return Err(Error::Format(format!(
            "checkpoint declares {n} values but holds {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn point(x: &[f64]) -> State {
        State::Point(x.to_vec())
    }

    #[test]
    fn softmax_uniform_at_zero() {
        let pol = PolicyHandle::softmax(1, 2).unwrap();
        let s = State::Index(0);
        for a in 0..2 {
            let lp = pol.log_prob(&[0.0, 0.0], &s, &Action::Index(a)).unwrap();
            assert_relative_eq!(lp, 0.5f64.ln(), epsilon = 1e-15);
        }
        let g = pol
            .grad_log_prob(&[0.0, 0.0], &s, &Action::Index(0))
            .unwrap();
        assert_eq!(g, vec![0.5, -0.5]);
        let hv = pol
            .hvp_log_prob(&[0.0, 0.0], &s, &Action::Index(0), &[1.0, -1.0])
            .unwrap();
        assert_relative_eq!(hv[0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(hv[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn softmax_hvp_matches_hand_value_from_spec_fixture() {
        // -(diag(p) - ppᵀ)(1, -1) with p = (1/2, 1/2) is (-1/2, 1/2); a
        // finite-difference of the score gives the same.
        let pol = PolicyHandle::softmax(1, 2).unwrap();
        let s = State::Index(0);
        let a = Action::Index(0);
        let v = [1.0, -1.0];
        let h = 1e-6;
        let gp = pol.grad_log_prob(&[h, -h], &s, &a).unwrap();
        let gm = pol.grad_log_prob(&[-h, h], &s, &a).unwrap();
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        let hv = pol.hvp_log_prob(&[0.0, 0.0], &s, &a, &v).unwrap();
        for (x, y) in hv.iter().zip(&fd) {
            assert_relative_eq!(x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        let pol = PolicyHandle::softmax(3, 4).unwrap();
        let mut rng = stream(1, Purpose::Custom(0), 0, 0);
        let theta: Vec<f64> = (0..12).map(|_| rng.random_range(-30.0..30.0)).collect();
        for s in 0..3 {
            let logp: Vec<f64> = (0..4)
                .map(|a| pol.log_prob(&theta, &State::Index(s), &Action::Index(a)).unwrap())
                .collect();
            assert!(log_sum_exp(&logp).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_linear_closed_forms() {
        let pol = PolicyHandle::gaussian_linear(FeatureMap::Raw { dim: 2 }, 1.0).unwrap();
        let s = point(&[1.0, 0.0]);
        let lp = pol.log_prob(&[0.0, 0.0], &s, &Action::Real(0.0)).unwrap();
        assert_relative_eq!(lp, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
        let g = pol.grad_log_prob(&[0.0, 0.0], &s, &Action::Real(0.5)).unwrap();
        assert_eq!(g, vec![0.5, 0.0]);
        let hv = pol
            .hvp_log_prob(&[0.0, 0.0], &s, &Action::Real(0.5), &[1.0, 0.0])
            .unwrap();
        assert_eq!(hv, vec![-1.0, 0.0]);
        let zero = pol
            .hvp_log_prob(&[0.3, 0.1], &s, &Action::Real(0.5), &[0.0, 0.0])
            .unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_mlp_is_a_zero_mean_gaussian() {
        let mlp = PolicyHandle::gaussian_mlp(FeatureMap::Raw { dim: 2 }, 1.0).unwrap();
        let lin = PolicyHandle::gaussian_linear(FeatureMap::Raw { dim: 2 }, 1.0).unwrap();
        let s = point(&[1.0, 0.0]);
        let a = Action::Real(0.0);
        let zeros = vec![0.0; mlp.dim()];
        assert_eq!(
            mlp.log_prob(&zeros, &s, &a).unwrap(),
            lin.log_prob(&[0.0, 0.0], &s, &a).unwrap()
        );
    }

    #[test]
    fn mlp_dimension() {
        let mlp = PolicyHandle::gaussian_mlp(FeatureMap::RawWithBias { dim: 2 }, 1.0).unwrap();
        assert_eq!(mlp.dim(), 8 * 3 + 8 + 8 * 8 + 8 + 8 + 1);
    }

    #[test]
    fn mismatched_domain_is_a_config_error() {
        let pol = PolicyHandle::softmax(2, 2).unwrap();
        let err = pol
            .log_prob(&[0.0; 4], &State::Index(5), &Action::Index(0))
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = pol
            .hvp_log_prob(&[0.0; 4], &State::Index(0), &Action::Index(0), &[0.0; 3])
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn non_positive_sigma_rejected() {
        assert!(PolicyHandle::gaussian_linear(FeatureMap::Raw { dim: 1 }, 0.0).is_err());
    }

    #[test]
    fn params_round_trip_through_the_checkpoint_format() {
        let params = vec![0.1, -2.5e-300, f64::MAX, 0.0, -0.0];
        let mut buf = Vec::new();
        write_params(&mut buf, &params).unwrap();
        assert_eq!(buf.len(), 16 + 8 * params.len());
        assert_eq!(&buf[..4], b"VRSP");
        let back = read_params(buf.as_slice()).unwrap();
        assert_eq!(
            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            params.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(read_params(&buf[..buf.len() - 1]).is_err());
        assert!(read_params(&b"NOTPARAMS..........."[..]).is_err());
    }
}
