//! Noisy derivative oracles of analytic functions.
//!
//! These stand in for an MDP when the optimizer itself is under test. Each
//! sample carries the function value, a gradient and a Hessian evaluated at
//! the draw point:
//!
//! * gradient noise is multiplicative, `∇f(θ) + σ‖∇f(θ)‖ξ` with
//!   `ξ ~ N(0, I)`, so the oracle is exact wherever `∇f = 0`;
//! * Hessian noise is additive, `∇²f(θ) + σZ` with `Z` symmetric and
//!   i.i.d. standard normal entries on and above the diagonal.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::ExactDerivatives;
use crate::error::{Error, Result};
use crate::objective::StochasticObjective;
use crate::rng::RngStream;
use crate::vector::{first_non_finite, norm};

/// Analytic test functions (to be maximised).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyntheticFunction {
    /// `f(θ) = −θ₁² + θ₂² − ½θ₂⁴`: strict saddle at the origin
    /// (Hessian `diag(−2, 2)`), global maxima at `(0, ±1)` with value ½.
    Saddle,
    /// `f(θ) = ⟨g, θ⟩ + ½θᵀHθ` for symmetric `H` given row-major.
    Quadratic { g: Vec<f64>, h: Vec<f64> },
}

impl SyntheticFunction {
    pub fn dim(&self) -> usize {
        match self {
            SyntheticFunction::Saddle => 2,
            SyntheticFunction::Quadratic { g, .. } => g.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let SyntheticFunction::Quadratic { g, h } = self {
            let d = g.len();
            if d == 0 || h.len() != d * d {
                return Err(Error::config("quadratic needs g of length d and h of length d²"));
            }
            for i in 0..d {
                for j in 0..d {
                    if h[i * d + j] != h[j * d + i] {
                        return Err(Error::config("quadratic Hessian must be symmetric"));
                    }
                }
            }
            if g.iter().chain(h).any(|x| !x.is_finite()) {
                return Err(Error::config("quadratic coefficients must be finite"));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticFunction::Saddle => -x[0] * x[0] + x[1] * x[1] - 0.5 * x[1].powi(4),
            SyntheticFunction::Quadratic { g, h } => {
                let d = g.len();
                let mut v = 0.0;
                for i in 0..d {
                    v += g[i] * x[i];
                    for j in 0..d {
                        v += 0.5 * x[i] * h[i * d + j] * x[j];
                    }
                }
                v
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SyntheticFunction::Saddle => vec![-2.0 * x[0], 2.0 * x[1] - 2.0 * x[1].powi(3)],
            SyntheticFunction::Quadratic { g, h } => {
                let d = g.len();
                (0..d)
                    .map(|i| g[i] + (0..d).map(|j| h[i * d + j] * x[j]).sum::<f64>())
                    .collect()
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            SyntheticFunction::Saddle => {
                DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 2.0 - 6.0 * x[1] * x[1]])
            }
            SyntheticFunction::Quadratic { g, h } => DMatrix::from_row_slice(g.len(), g.len(), h),
        }
    }
}

/// Derivatives drawn at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracle {
    pub function: SyntheticFunction,
    /// Noise scale `σ` for both gradient and Hessian samples.
    pub noise: f64,
    /// Starting point returned by `init_params`.
    pub init: Vec<f64>,
}

impl SyntheticOracle {
    pub fn new(function: SyntheticFunction, noise: f64, init: Vec<f64>) -> Result<Self> {
        function.validate()?;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::config(format!("noise must be non-negative, got {noise}")));
        }
        if init.len() != function.dim() {
            return Err(Error::config(format!(
                "initial point has dimension {}, function {}",
                init.len(),
                function.dim()
            )));
        }
        Ok(Self {
            function,
            noise,
            init,
        })
    }

    /// Strict-saddle oracle started exactly at the saddle.
    pub fn saddle(noise: f64) -> Self {
        Self::new(SyntheticFunction::Saddle, noise, vec![0.0, 0.0]).expect("valid saddle oracle")
    }
}

impl StochasticObjective for SyntheticOracle {
    type Sample = SyntheticSample;
    type Prepared = DMatrix<f64>;

    fn dim(&self) -> usize {
        self.function.dim()
    }

    fn probes_per_sample(&self) -> u64 {
        1
    }

    fn init_params(&self, _rng: &mut RngStream) -> Vec<f64> {
        self.init.clone()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim() {
            return Err(Error::config(format!(
                "parameter vector has dimension {}, expected {}",
                params.len(),
                self.dim()
            )));
        }
        if let Some(i) = first_non_finite(params) {
            return Err(Error::numeric(format!("parameter {i} is non-finite")));
        }
        Ok(())
    }

    fn draw(&self, params: &[f64], rng: &mut RngStream) -> Result<SyntheticSample> {
        self.check_params(params)?;
        let d = self.dim();
        let mut gradient = self.function.gradient(params);
        let scale = self.noise * norm(&gradient);
        for g in gradient.iter_mut() {
            let xi: f64 = StandardNormal.sample(rng);
            *g += scale * xi;
        }
        let mut hessian = self.function.hessian(params);
        for i in 0..d {
            for j in i..d {
                let z: f64 = StandardNormal.sample(rng);
                hessian[(i, j)] += self.noise * z;
                if i != j {
                    hessian[(j, i)] += self.noise * z;
                }
            }
        }
        Ok(SyntheticSample {
            value: self.function.value(params),
            gradient,
            hessian,
        })
    }

    fn sample_value(&self, sample: &SyntheticSample) -> f64 {
        sample.value
    }

    fn batch_mean_grad(&self, samples: &[SyntheticSample], _params: &[f64]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::config("gradient batch is empty"));
        }
        let mut sum = vec![0.0; self.dim()];
        for s in samples {
            for (a, g) in sum.iter_mut().zip(&s.gradient) {
                *a += g;
            }
        }
        let n = samples.len() as f64;
        Ok(sum.into_iter().map(|x| x / n).collect())
    }

    fn prepare(&self, sample: SyntheticSample, _params: &[f64]) -> Result<DMatrix<f64>> {
        Ok(sample.hessian)
    }

    fn apply(&self, prepared: &DMatrix<f64>, vec: &[f64]) -> Result<Vec<f64>> {
        if vec.len() != self.dim() {
            return Err(Error::config("HVP direction has the wrong dimension"));
        }
        Ok(crate::cubic::HessianOp::apply(prepared, vec))
    }

    fn exact(&self, params: &[f64], with_hessian: bool) -> Option<Result<ExactDerivatives>> {
        Some(self.check_params(params).map(|_| ExactDerivatives {
            value: self.function.value(params),
            gradient: self.function.gradient(params),
            hessian: with_hessian.then(|| self.function.hessian(params)),
        }))
    }
}
