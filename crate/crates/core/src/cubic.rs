//! Cubic-regularized second-order model and its solvers.
//!
//! The model maximised at every outer iteration is
//!
//! ```text
//! m(h) = ⟨v, h⟩ + ½⟨U[h], h⟩ − (M/6)‖h‖³
//! ```
//!
//! where `v` is a gradient estimate and `U[·]` a Hessian-vector-product
//! operator. [`cubic_subsolver`] returns a step with sufficient model
//! increase (Cauchy point or perturbed gradient ascent),
//! [`cubic_finalsolver`] drives `‖∇m‖` below `ε/2`, and
//! [`oracle_global_max`] solves small dense instances exactly for testing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::vector::{axpy, dot, first_non_finite, norm};

/// A linear operator `x ↦ U x`.
pub trait HessianOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl HessianOp for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self * DVector::from_column_slice(x)).as_slice().to_vec()
    }
}

/// Wraps a closure as a [`HessianOp`].
pub struct FnOp<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnOp<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> HessianOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

pub struct CubicModel<'a> {
    pub v: Vec<f64>,
    pub hvp: &'a dyn HessianOp,
    pub m: f64,
}

impl<'a> CubicModel<'a> {
    pub fn new(v: Vec<f64>, hvp: &'a dyn HessianOp, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::config(format!("cubic penalty must be positive, got {m}")));
        }
        if v.len() != hvp.dim() {
            return Err(Error::config(format!(
                "gradient has dimension {}, HVP operator {}",
                v.len(),
                hvp.dim()
            )));
        }
        Ok(Self { v, hvp, m })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn value(&self, h: &[f64]) -> f64 {
        let uh = self.hvp.apply(h);
        let r = norm(h);
        dot(&self.v, h) + 0.5 * dot(&uh, h) - self.m / 6.0 * r * r * r
    }

    /// `v + U[h] − (M/2)‖h‖h`
    pub fn grad(&self, h: &[f64]) -> Vec<f64> {
        let mut g = self.hvp.apply(h);
        let r = norm(h);
        for ((gi, vi), hi) in g.iter_mut().zip(&self.v).zip(h) {
            *gi += vi - 0.5 * self.m * r * hi;
        }
        g
    }
}

pub fn model_value(model: &CubicModel, h: &[f64]) -> f64 {
    model.value(h)
}

pub fn model_grad(model: &CubicModel, h: &[f64]) -> Vec<f64> {
    model.grad(h)
}

/// Maximiser of the model along the direction of `v`: `(v/‖v‖)·R_c` with
/// `R_c = c + √(c² + 2‖v‖/M)` and `c = vᵀU[v]/(M‖v‖²)`, the positive root of
/// `d/dα m(αv/‖v‖) = 0`. Returns zero when `v = 0`.
pub fn cauchy_point(model: &CubicModel) -> Vec<f64> {
    let vn = norm(&model.v);
    if vn == 0.0 {
        return vec![0.0; model.dim()];
    }
    let uv = model.hvp.apply(&model.v);
    let c = dot(&model.v, &uv) / (model.m * vn * vn);
    let rc = c + (c * c + 2.0 * vn / model.m).sqrt();
    model.v.iter().map(|x| x / vn * rc).collect()
}

/// Constants for both sub-solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    /// Gradient-Lipschitz bound `L`.
    pub l: f64,
    /// Target accuracy `ε`.
    pub eps: f64,
    /// Hessian-Lipschitz constant `ρ`.
    pub rho: f64,
    /// `C_s` in the subsolver iteration count.
    pub c_s: f64,
    /// `C_F` in the finalsolver iteration cap.
    pub c_f: f64,
    /// `c′` in the perturbation radius.
    pub c_prime: f64,
}

impl SolverParams {
    pub fn new(l: f64, eps: f64, rho: f64) -> Self {
        Self {
            l,
            eps,
            rho,
            c_s: 10.0,
            c_f: 10.0,
            c_prime: 1.0,
        }
    }

    pub fn validate(&self, m: f64) -> Result<()> {
        for (name, v) in [
            ("L", self.l),
            ("epsilon", self.eps),
            ("rho", self.rho),
            ("C_s", self.c_s),
            ("C_F", self.c_f),
            ("c'", self.c_prime),
            ("M", m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let limit = 4.0 * self.l * self.l * self.rho / m;
        if self.eps > limit {
            return Err(Error::config(format!(
                "epsilon {} exceeds 4 L² rho / M = {limit}",
                self.eps
            )));
        }
        Ok(())
    }

    /// Step size `1/(20L)` shared by both solvers.
    pub fn step_size(&self) -> f64 {
        1.0 / (20.0 * self.l)
    }

    /// `⌈C_s L / (M √(ε/ρ))⌉`
    pub fn subsolver_iterations(&self, m: f64) -> usize {
        (self.c_s * self.l / (m * (self.eps / self.rho).sqrt())).ceil() as usize
    }

    /// `c′ √(Mε) / L`
    pub fn perturbation(&self, m: f64) -> f64 {
        self.c_prime * (m * self.eps).sqrt() / self.l
    }

    /// `⌈C_F L / √(ρε)⌉`
    pub fn finalsolver_cap(&self) -> usize {
        (self.c_f * self.l / (self.rho * self.eps).sqrt()).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsolverBranch {
    Cauchy,
    GradientAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsolverOutput {
    pub delta: Vec<f64>,
    /// `m(Δ)`, recomputed from the returned step.
    pub model_increase: f64,
    pub branch: SubsolverBranch,
    pub iterations: usize,
}

/// One row of a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub step_norm: f64,
    pub model_value: f64,
    pub grad_norm: f64,
}

/// Collects per-iteration solver diagnostics when attached to a solver call.
#[derive(Debug, Default, Clone)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
}

impl SolverTrace {
    fn record(&mut self, model: &CubicModel, iteration: usize, delta: &[f64]) {
        self.rows.push(TraceRow {
            iteration,
            step_norm: norm(delta),
            model_value: model.value(delta),
            grad_norm: norm(&model.grad(delta)),
        });
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,step_norm,model_value,grad_norm")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:?},{:?},{:?}",
                r.iteration, r.step_norm, r.model_value, r.grad_norm
            )?;
        }
        Ok(())
    }
}

fn check_iterate(delta: &[f64], iteration: usize, solver: &str) -> Result<()> {
    if let Some(i) = first_non_finite(delta) {
        return Err(Error::numeric(format!(
            "{solver}: iterate component {i} non-finite at iteration {iteration}"
        )));
    }
    Ok(())
}

fn random_unit_vector(d: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&u);
        if n > 0.0 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Approximate model maximiser with sufficient increase.
///
/// If `‖v‖ ≥ L²/M` the Cauchy point is returned. Otherwise runs
/// `T_sub` steps of gradient ascent from the origin on the model with `v`
/// replaced by `v + σu`, `u` uniform on the unit sphere.
pub fn cubic_subsolver(
    model: &CubicModel,
    params: &SolverParams,
    rng: &mut RngStream,
    mut trace: Option<&mut SolverTrace>,
) -> Result<SubsolverOutput> {
    params.validate(model.m)?;
    let vn = norm(&model.v);
    let (delta, branch, iterations) = if vn >= params.l * params.l / model.m {
        (cauchy_point(model), SubsolverBranch::Cauchy, 0)
    } else {
        let d = model.dim();
        let sigma = params.perturbation(model.m);
        let eta = params.step_size();
        let u = random_unit_vector(d, rng);
        let v_tilde: Vec<f64> = model.v.iter().zip(&u).map(|(v, u)| v + sigma * u).collect();
        let iters = params.subsolver_iterations(model.m);
        let mut delta = vec![0.0; d];
        for it in 0..iters {
            let mut g = model.hvp.apply(&delta);
            let r = norm(&delta);
            for ((gi, vt), di) in g.iter_mut().zip(&v_tilde).zip(&delta) {
                *gi += vt - 0.5 * model.m * r * di;
            }
            axpy(eta, &g, &mut delta);
            check_iterate(&delta, it, "cubic subsolver")?;
            if let Some(t) = trace.as_deref_mut() {
                t.record(model, it + 1, &delta);
            }
        }
        (delta, SubsolverBranch::GradientAscent, iters)
    };
    check_iterate(&delta, iterations, "cubic subsolver")?;
    let model_increase = model.value(&delta);
    Ok(SubsolverOutput {
        delta,
        model_increase,
        branch,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalsolverOutput {
    pub delta: Vec<f64>,
    /// `‖∇m(Δ)‖` at the returned step.
    pub grad_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap stopped the loop before `‖∇m‖ < ε/2`.
    pub converged: bool,
}

/// Gradient ascent on the model from the origin until `‖∇m(Δ)‖ < ε/2`, or
/// until `⌈C_F L/√(ρε)⌉` iterations have run.
pub fn cubic_finalsolver(
    model: &CubicModel,
    params: &SolverParams,
    mut trace: Option<&mut SolverTrace>,
) -> Result<FinalsolverOutput> {
    params.validate(model.m)?;
    let eta = params.step_size();
    let cap = params.finalsolver_cap();
    let mut delta = vec![0.0; model.dim()];
    let mut g = model.v.clone();
    let mut iterations = 0;
    let mut g_norm = norm(&g);
    while g_norm >= params.eps / 2.0 {
        if iterations == cap {
            return Ok(FinalsolverOutput {
                delta,
                grad_norm: g_norm,
                iterations,
                converged: false,
            });
        }
        axpy(eta, &g, &mut delta);
        check_iterate(&delta, iterations, "cubic finalsolver")?;
        g = model.grad(&delta);
        g_norm = norm(&g);
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.record(model, iterations, &delta);
        }
    }
    Ok(FinalsolverOutput {
        delta,
        grad_norm: g_norm,
        iterations,
        converged: true,
    })
}

/// Exact global maximiser of a dense cubic model.
#[derive(Debug, Clone)]
pub struct GlobalMax {
    pub h: Vec<f64>,
    pub value: f64,
    /// `‖∇m(h*)‖`
    pub stationarity: f64,
    /// `λ_min((M/2)‖h*‖ I − U)`, non-negative at the global maximiser.
    pub curvature_margin: f64,
    pub hard_case: bool,
}

const ORACLE_MAX_DIM: usize = 16;
const ORACLE_TOL: f64 = 1e-8;

/// Solves `max_h m(h)` for symmetric dense `U` by eigendecomposition and the
/// secular equation `r = ‖((M/2) r I − U)^{-1} v‖`.
///
/// The global maximiser is the unique `h*` with `∇m(h*) = 0` and
/// `(M/2)‖h*‖ I − U ⪰ 0`; both conditions are certified before returning.
pub fn oracle_global_max(v: &[f64], u: &DMatrix<f64>, m: f64) -> Result<GlobalMax> {
    let d = v.len();
    if d == 0 || d > ORACLE_MAX_DIM {
        return Err(Error::Oracle(format!("dimension {d} outside 1..={ORACLE_MAX_DIM}")));
    }
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::Oracle("matrix and vector dimensions differ".into()));
    }
    if (u - u.transpose()).amax() > 1e-10 {
        return Err(Error::Oracle("matrix is not symmetric".into()));
    }
    if !(m > 0.0) {
        return Err(Error::Oracle("cubic penalty must be positive".into()));
    }
    let eig = SymmetricEigen::new(u.clone());
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let q = &eig.eigenvectors;
    let vq: Vec<f64> = (0..d).map(|i| q.column(i).dot(&DVector::from_column_slice(v))).collect();
    let lmax = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let r_min = (2.0 * lmax / m).max(0.0);
    let scale = lambda.iter().fold(1.0f64, |a, l| a.max(l.abs())) + norm(v);

    // ‖h(r)‖ with h_i(r) = vq_i / (M r/2 − λ_i); components with vanishing
    // denominator are dropped (they are zero in the hard case).
    let top = |i: usize| lmax - lambda[i] <= 1e-12 * scale;
    let h_norm = |r: f64| -> f64 {
        (0..d)
            .map(|i| {
                let den = 0.5 * m * r - lambda[i];
                if den <= 0.0 {
                    if vq[i] == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (vq[i] / den).powi(2)
                }
            })
            .sum::<f64>()
            .sqrt()
    };

    // Hard case: v has (numerically) no weight on the top eigenspace and the
    // interior solution at r_min is too short.
    let top_weight: f64 = (0..d).filter(|&i| top(i)).map(|i| vq[i] * vq[i]).sum::<f64>().sqrt();
    let partial_norm = |r: f64| -> f64 {
        (0..d)
            .filter(|&i| !top(i))
            .map(|i| (vq[i] / (0.5 * m * r - lambda[i])).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let hard_case = lmax > 0.0 && top_weight <= 1e-14 * scale && partial_norm(r_min) <= r_min;

    let mut hq = vec![0.0; d];
    if hard_case {
        let r = r_min;
        for i in 0..d {
            if !top(i) {
                hq[i] = vq[i] / (0.5 * m * r - lambda[i]);
            }
        }
        let rest = partial_norm(r);
        let tau = (r * r - rest * rest).max(0.0).sqrt();
        let i_top = (0..d).find(|&i| top(i)).expect("top eigenvalue exists");
        hq[i_top] = tau;
    } else if norm(v) == 0.0 {
        // λ_max ≤ 0 and v = 0: the model is concave with maximum at 0
    } else {
        // φ(r) = ‖h(r)‖ − r is strictly decreasing on (r_min, ∞)
        let mut lo = r_min;
        let mut hi = r_min.max(1e-300) * 2.0 + (2.0 * norm(v) / m).sqrt() + 1.0;
        while h_norm(hi) > hi {
            hi *= 2.0;
        }
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h_norm(mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = if h_norm(hi).is_finite() { hi } else { lo };
        for i in 0..d {
            hq[i] = vq[i] / (0.5 * m * r - lambda[i]);
        }
    }

    let h_vec = q * DVector::from_vec(hq);
    let h: Vec<f64> = h_vec.as_slice().to_vec();
    let model = CubicModel::new(v.to_vec(), u, m)?;
    let value = model.value(&h);
    let stationarity = norm(&model.grad(&h));
    let curvature_margin = 0.5 * m * norm(&h) - lmax;
    if stationarity > ORACLE_TOL * (1.0 + scale) || curvature_margin < -ORACLE_TOL {
        return Err(Error::Oracle(format!(
            "certificate failed: ‖∇m(h*)‖ = {stationarity:e}, curvature margin = {curvature_margin:e}"
        )));
    }
    Ok(GlobalMax {
        h,
        value,
        stationarity,
        curvature_margin,
        hard_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_relative_eq;

    fn scalar(u: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, u)
    }

    #[test]
    fn scalar_model_values() {
        let u = scalar(0.0);
        let model = CubicModel::new(vec![1.0], &u, 2.0).unwrap();
        assert_eq!(model.value(&[0.0]), 0.0);
        assert_relative_eq!(model.value(&[1.0]), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(model.grad(&[0.0]), vec![1.0]);
        assert_eq!(model.grad(&[1.0]), vec![0.0]);
        assert_eq!(cauchy_point(&model), vec![1.0]);
    }

    #[test]
    fn cauchy_point_without_curvature() {
        let u = DMatrix::zeros(2, 2);
        let model = CubicModel::new(vec![1.2, 1.6], &u, 1.0).unwrap();
        // ‖v‖ = 2, R_c = √(2‖v‖/M) = 2
        let c = cauchy_point(&model);
        assert_relative_eq!(c[0], 1.2, epsilon = 1e-15);
        assert_relative_eq!(c[1], 1.6, epsilon = 1e-15);
        let zero = CubicModel::new(vec![0.0, 0.0], &u, 1.0).unwrap();
        assert_eq!(cauchy_point(&zero), vec![0.0, 0.0]);
    }

    #[test]
    fn subsolver_takes_cauchy_branch_for_large_gradient() {
        let u = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, -0.3]);
        let model = CubicModel::new(vec![3.0, -4.0], &u, 2.0).unwrap();
        let params = SolverParams::new(1.0, 0.01, 1.0);
        // ‖v‖ = 5 ≥ L²/M = 0.5
        let out = cubic_subsolver(&model, &params, &mut stream(1, Purpose::Subsolver, 0, 0), None)
            .unwrap();
        assert_eq!(out.branch, SubsolverBranch::Cauchy);
        assert_eq!(out.delta, cauchy_point(&model));
        assert_eq!(out.model_increase, model.value(&out.delta));
    }

    #[test]
    fn subsolver_ascent_branch_reports_model_value() {
        let u = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, -0.2, 0.0, 0.0, 0.0, 0.3]);
        let model = CubicModel::new(vec![0.01, 0.0, -0.02], &u, 4.0).unwrap();
        let params = SolverParams::new(1.0, 0.01, 1.0);
        let out = cubic_subsolver(&model, &params, &mut stream(2, Purpose::Subsolver, 0, 0), None)
            .unwrap();
        assert_eq!(out.branch, SubsolverBranch::GradientAscent);
        assert_eq!(out.model_increase, model.value(&out.delta));
        assert_eq!(out.iterations, params.subsolver_iterations(4.0));
    }

    #[test]
    fn subsolver_is_deterministic() {
        let u = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, -0.5]);
        let model = CubicModel::new(vec![0.01, 0.02], &u, 4.0).unwrap();
        let params = SolverParams::new(1.0, 0.01, 1.0);
        let a = cubic_subsolver(&model, &params, &mut stream(5, Purpose::Subsolver, 3, 0), None)
            .unwrap();
        let b = cubic_subsolver(&model, &params, &mut stream(5, Purpose::Subsolver, 3, 0), None)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finalsolver_early_exit_and_scalar_solution() {
        let u = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, -2.0]);
        let model = CubicModel::new(vec![1e-4, 0.0], &u, 2.0).unwrap();
        let params = SolverParams::new(1.0, 1e-3, 1.0);
        let out = cubic_finalsolver(&model, &params, None).unwrap();
        assert_eq!(out.delta, vec![0.0, 0.0]);
        assert_eq!(out.iterations, 0);
        assert!(out.converged);

        let u = scalar(0.0);
        let model = CubicModel::new(vec![1.0], &u, 2.0).unwrap();
        let params = SolverParams {
            c_f: 100.0,
            ..SolverParams::new(1.0, 1e-3, 1.0)
        };
        let out = cubic_finalsolver(&model, &params, None).unwrap();
        assert!(out.converged, "{out:?}");
        assert!((out.delta[0] - 1.0).abs() < 1e-3);
        assert!(out.grad_norm < 5e-4);
    }

    #[test]
    fn finalsolver_flags_the_cap() {
        let u = scalar(0.0);
        let model = CubicModel::new(vec![1.0], &u, 2.0).unwrap();
        let params = SolverParams {
            c_f: 1e-3,
            ..SolverParams::new(1.0, 1e-3, 1.0)
        };
        let out = cubic_finalsolver(&model, &params, None).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, params.finalsolver_cap());
        assert!(out.grad_norm >= 5e-4);
    }

    #[test]
    fn trace_records_every_iteration() {
        let u = scalar(-1.0);
        let model = CubicModel::new(vec![0.5], &u, 2.0).unwrap();
        let params = SolverParams::new(1.0, 1e-2, 1.0);
        let mut trace = SolverTrace::default();
        let out = cubic_finalsolver(&model, &params, Some(&mut trace)).unwrap();
        assert_eq!(trace.rows.len(), out.iterations);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().lines().count(),
            out.iterations + 1
        );
    }

    #[test]
    fn oracle_small_cases() {
        let g = oracle_global_max(&[1.0], &scalar(0.0), 2.0).unwrap();
        assert_relative_eq!(g.h[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.value, 2.0 / 3.0, epsilon = 1e-12);

        let u = DMatrix::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -3.0]);
        let g = oracle_global_max(&[0.0, 0.0], &u, 5.0).unwrap();
        assert_eq!(g.h, vec![0.0, 0.0]);
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn oracle_hard_case() {
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let g = oracle_global_max(&[0.0, 0.0], &u, 2.0).unwrap();
        assert!(g.hard_case);
        assert_relative_eq!(g.h[0].abs(), 1.0, epsilon = 1e-12);
        assert!(g.h[1].abs() < 1e-12);
        assert_relative_eq!(g.value, 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_rejects_asymmetric_and_large() {
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(oracle_global_max(&[1.0, 0.0], &u, 1.0), Err(Error::Oracle(_))));
        let big = DMatrix::zeros(17, 17);
        assert!(oracle_global_max(&[0.0; 17], &big, 1.0).is_err());
    }

    #[test]
    fn admissibility_is_validated() {
        // ε ≤ 4 L² ρ / M
        let p = SolverParams::new(1.0, 2.0, 1.0);
        assert!(p.validate(4.0).is_err());
        assert!(p.validate(2.0).is_ok());
    }
}
