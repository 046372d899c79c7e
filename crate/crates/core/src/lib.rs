//! Variance-reduced stochastic cubic-regularized Newton policy optimization.
//!
//! The crate is organised around the pieces a policy-optimization run needs:
//!
//! * [`env`]: finite-horizon MDPs, trajectory sampling and exact oracles for
//!   tabular instances.
//! * [`policy`]: differentiable stochastic policies (log-probability, score and
//!   Hessian-vector products of the log-policy).
//! * [`estimators`]: per-trajectory gradient and Hessian-vector-product
//!   estimators of the discounted objective.
//! * [`cubic`]: the cubic-regularized model, its sub-solvers and a global
//!   maximizer used as a test oracle.
//! * [`vrscp`]: the variance-reduced cubic Newton driver.
//! * [`baselines`]: REINFORCE and sub-sampled cubic Newton without variance
//!   reduction.
//! * [`eval`]: multi-seed aggregation, lower confidence curves and the
//!   performance-robustness score.

pub mod baselines;
pub mod cubic;
pub mod env;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod objective;
pub mod oracle_suites;
pub mod policy;
pub mod record;
pub mod rng;
pub mod synthetic;
pub mod vector;
pub mod vrscp;

pub use error::{Error, Result};
