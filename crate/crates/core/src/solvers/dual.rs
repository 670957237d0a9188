//! Dual methods for problems coupled by a linear constraint `Ax + By = c`.
//!
//! All four methods iterate on the same state — the primal pair `(x, y)` and
//! the multipliers λ — and differ in how much of the Lagrangian each step
//! minimizes: dual ascent solves the two primal argmins of the ordinary
//! Lagrangian, the method of multipliers solves one joint argmin of the
//! augmented Lagrangian, ADMM alternates single-variable augmented argmins,
//! and dual forward-backward splits the dual problem into a gradient step
//! through `f` and a proximal step through `g`.
//!
//! Inner argmins pick the strongest available oracle: an exact linear solve
//! for quadratics, the proximal operator when the subproblem is a prox in
//! disguise, and a damped Newton or gradient inner solve otherwise.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use std::sync::Arc;

use super::{
    check_iterate, InnerSolve, LinearConstraint, Problem, SolverConfig, SolverError,
    DIVERGENCE_LIMIT,
};
use crate::costs::{Cost, CostError};
use crate::linalg;
use crate::minimize::{backtracking_gradient, damped_newton};
use crate::sets::SetError;
use crate::tensor::{self, Tensor};

/// Which dual method [`dual_solve`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualMethod {
    DualAscent,
    MethodOfMultipliers,
    Admm,
    DualForwardBackward,
}

/// Full iteration state of a dual method. Feeding a returned state back in
/// resumes the run exactly, so budgets compose.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub x: Tensor,
    pub y: Tensor,
    pub duals: Array1<f64>,
}

impl DualState {
    pub fn new(x: Tensor, y: Tensor, duals: Array1<f64>) -> Self {
        DualState { x, y, duals }
    }

    /// The all-zeros start for a constrained problem.
    pub fn cold(problem: &Problem) -> Result<Self, SolverError> {
        let f = problem.require_f()?;
        let g = problem.require_g()?;
        let con = problem.require_constraint()?;
        Ok(DualState {
            x: Tensor::zeros(f.domain().shape().dims()),
            y: Tensor::zeros(g.domain().shape().dims()),
            duals: Array1::zeros(con.c().len()),
        })
    }
}

fn check_flat(v: &Array1<f64>) -> Result<(), SolverError> {
    let n = v.dot(v).sqrt();
    if n.is_finite() && n <= DIVERGENCE_LIMIT {
        Ok(())
    } else {
        Err(SolverError::Diverged { limit: DIVERGENCE_LIMIT })
    }
}

fn residual(con: &LinearConstraint, x: &Tensor, y: &Tensor) -> Array1<f64> {
    con.a().dot(&tensor::flatten(x)) + con.b().dot(&tensor::flatten(y)) - con.c()
}

/// `Some(λ)` when the matrix is exactly `λI`.
fn isotropic_weight(m: &Array2<f64>) -> Option<f64> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return None;
    }
    let lambda = m[[0, 0]];
    for ((i, j), v) in m.indexed_iter() {
        let expected = if i == j { lambda } else { 0.0 };
        if *v != expected {
            return None;
        }
    }
    Some(lambda)
}

/// `argmin_v cost(v) + wᵀv + ½vᵀPv` over the flattened variable, warm-started
/// at `start`. `P` is optional (dual-ascent subproblems have none).
pub(crate) fn argmin_augmented(
    cost: &Arc<dyn Cost>,
    penalty: Option<&Array2<f64>>,
    linear: &Array1<f64>,
    start: &Tensor,
    inner: &InnerSolve,
) -> Result<Tensor, SolverError> {
    // Exact linear solve whenever the whole subproblem is quadratic.
    if let Some(form) = cost.as_quadratic() {
        let mut q = form.q.clone();
        if let Some(p) = penalty {
            q = q + p;
        }
        let rhs = -(&form.b + linear);
        let sol = linalg::solve(q, rhs).map_err(CostError::from)?;
        let out = tensor::from_flat(&sol, start.shape());
        check_iterate(&out)?;
        return Ok(out);
    }
    // An isotropic penalty turns the subproblem into a proximal evaluation:
    // argmin cost(v) + wᵀv + λ/2‖v‖² = prox_{cost/λ}(−w/λ).
    if let Some(p) = penalty {
        if cost.has_closed_form_prox() {
            if let Some(lambda) = isotropic_weight(p) {
                if lambda > 0.0 {
                    let target = tensor::from_flat(&(-linear / lambda), start.shape());
                    let out = cost.proximal(&target, 1.0 / lambda)?;
                    check_iterate(&out)?;
                    return Ok(out);
                }
            }
        }
    }
    if !cost.has_gradient() {
        return Err(SolverError::Cost(CostError::NotImplemented {
            operation: "inner minimization (no usable closed form and no gradient)",
            cost: cost.name(),
        }));
    }
    let value = |v: &Tensor| -> Result<f64, SolverError> {
        let flat = tensor::flatten(v);
        let mut val = cost.value(v)? + linear.dot(&flat);
        if let Some(p) = penalty {
            val += 0.5 * flat.dot(&p.dot(&flat));
        }
        Ok(val)
    };
    let gradient = |v: &Tensor| -> Result<Tensor, SolverError> {
        let flat = tensor::flatten(v);
        let mut extra = linear.clone();
        if let Some(p) = penalty {
            extra = extra + p.dot(&flat);
        }
        Ok(cost.gradient(v)? + &tensor::from_flat(&extra, v.shape()))
    };
    let result = if cost.has_hessian() {
        let hessian = |v: &Tensor| -> Result<Array2<f64>, SolverError> {
            let mut h = cost.hessian(v)?;
            if let Some(p) = penalty {
                h = h + p;
            }
            Ok(h)
        };
        damped_newton(value, gradient, hessian, start.clone(), inner.tol, inner.tol, inner.max_iter)?
    } else {
        backtracking_gradient(value, gradient, start.clone(), 1.0, inner.tol, inner.max_iter)?
    };
    // An unbounded subproblem (e.g. a dual-infeasible multiplier) shows up as
    // runaway iterates rather than an algebraic error.
    check_iterate(&result.x)?;
    if !result.converged {
        return Err(SolverError::InnerSolveFailed { iterations: inner.max_iter });
    }
    Ok(result.x)
}

/// One joint argmin of the augmented Lagrangian over the stacked `(x, y)`.
#[allow(clippy::too_many_arguments)]
fn joint_augmented_argmin(
    f: &Arc<dyn Cost>,
    g: &Arc<dyn Cost>,
    con: &LinearConstraint,
    lambda: &Array1<f64>,
    rho: f64,
    x: &Tensor,
    y: &Tensor,
    inner: &InnerSolve,
) -> Result<(Tensor, Tensor), SolverError> {
    let n = x.len();
    let m = y.len();
    let (a, b, c) = (con.a(), con.b(), con.c());
    let ata = a.t().dot(a) * rho;
    let atb = a.t().dot(b) * rho;
    let btb = b.t().dot(b) * rho;

    // Exact block solve when both parts are quadratic.
    if let (Some(qf), Some(qg)) = (f.as_quadratic(), g.as_quadratic()) {
        let mut big = Array2::zeros((n + m, n + m));
        big.slice_mut(s![..n, ..n]).assign(&(&qf.q + &ata));
        big.slice_mut(s![..n, n..]).assign(&atb);
        big.slice_mut(s![n.., ..n]).assign(&atb.t());
        big.slice_mut(s![n.., n..]).assign(&(&qg.q + &btb));
        let mut rhs = Array1::zeros(n + m);
        let lam_c = lambda - &(c * rho);
        rhs.slice_mut(s![..n]).assign(&(-(&qf.b + &a.t().dot(&lam_c))));
        rhs.slice_mut(s![n..]).assign(&(-(&qg.b + &b.t().dot(&lam_c))));
        let sol = linalg::solve(big, rhs).map_err(CostError::from)?;
        let xs = tensor::from_flat(&sol.slice(s![..n]).to_owned(), x.shape());
        let ys = tensor::from_flat(&sol.slice(s![n..]).to_owned(), y.shape());
        check_iterate(&xs)?;
        check_iterate(&ys)?;
        return Ok((xs, ys));
    }

    if !f.has_gradient() || !g.has_gradient() {
        return Err(SolverError::Cost(CostError::NotImplemented {
            operation: "joint augmented minimization (a part has no gradient)",
            cost: if f.has_gradient() { g.name() } else { f.name() },
        }));
    }

    let x_shape = x.shape().to_vec();
    let y_shape = y.shape().to_vec();
    let split = |stacked: &Tensor| -> (Tensor, Tensor) {
        let flat = tensor::flatten(stacked);
        (
            tensor::from_flat(&flat.slice(s![..n]).to_owned(), &x_shape),
            tensor::from_flat(&flat.slice(s![n..]).to_owned(), &y_shape),
        )
    };
    let value = |stacked: &Tensor| -> Result<f64, SolverError> {
        let (xs, ys) = split(stacked);
        let r = residual(con, &xs, &ys);
        Ok(f.value(&xs)? + g.value(&ys)? + lambda.dot(&r) + 0.5 * rho * r.dot(&r))
    };
    let gradient = |stacked: &Tensor| -> Result<Tensor, SolverError> {
        let (xs, ys) = split(stacked);
        let shifted = lambda + &(residual(con, &xs, &ys) * rho);
        let gx = tensor::flatten(&f.gradient(&xs)?) + a.t().dot(&shifted);
        let gy = tensor::flatten(&g.gradient(&ys)?) + b.t().dot(&shifted);
        let mut out = Array1::zeros(n + m);
        out.slice_mut(s![..n]).assign(&gx);
        out.slice_mut(s![n..]).assign(&gy);
        Ok(out.into_dyn())
    };
    let mut start = Array1::zeros(n + m);
    start.slice_mut(s![..n]).assign(&tensor::flatten(x));
    start.slice_mut(s![n..]).assign(&tensor::flatten(y));
    let start = start.into_dyn();

    let result = if f.has_hessian() && g.has_hessian() {
        let hessian = |stacked: &Tensor| -> Result<Array2<f64>, SolverError> {
            let (xs, ys) = split(stacked);
            let mut big = Array2::zeros((n + m, n + m));
            big.slice_mut(s![..n, ..n]).assign(&(&f.hessian(&xs)? + &ata));
            big.slice_mut(s![..n, n..]).assign(&atb);
            big.slice_mut(s![n.., ..n]).assign(&atb.t());
            big.slice_mut(s![n.., n..]).assign(&(&g.hessian(&ys)? + &btb));
            Ok(big)
        };
        damped_newton(value, gradient, hessian, start, inner.tol, inner.tol, inner.max_iter)?
    } else {
        backtracking_gradient(value, gradient, start, 1.0, inner.tol, inner.max_iter)?
    };
    check_iterate(&result.x)?;
    if !result.converged {
        return Err(SolverError::InnerSolveFailed { iterations: inner.max_iter });
    }
    let (xs, ys) = split(&result.x);
    Ok((xs, ys))
}

/// Runs `cfg.num_iter` iterations of the chosen dual method on
/// `min f(x) + g(y)` s.t. `Ax + By = c`, from (and returning) full state.
///
/// With a zero budget the state is returned unchanged. Dual forward-backward
/// additionally requires `BᵀB` to be a positive multiple of the identity, so
/// that the dual of `g` is proximable in closed form.
pub fn dual_solve(
    method: DualMethod,
    problem: &Problem,
    state: DualState,
    cfg: &SolverConfig,
) -> Result<DualState, SolverError> {
    cfg.validate()?;
    let f = problem.require_f()?;
    let g = problem.require_g()?;
    let con = problem.require_constraint()?;
    if state.duals.len() != con.c().len() {
        return Err(SolverError::InvalidConfig(format!(
            "got {} multipliers for {} constraint rows",
            state.duals.len(),
            con.c().len()
        )));
    }
    if cfg.num_iter == 0 {
        return Ok(state);
    }
    let mut x = f.domain().check_input(&state.x).map_err(SetError::from)?;
    let mut y = g.domain().check_input(&state.y).map_err(SetError::from)?;
    let mut lambda = state.duals;
    let step = cfg.step;
    let inner = &cfg.inner;
    let (a, b) = (con.a(), con.b());

    match method {
        DualMethod::DualAscent => {
            for _ in 0..cfg.num_iter {
                x = argmin_augmented(f, None, &a.t().dot(&lambda), &x, inner)?;
                y = argmin_augmented(g, None, &b.t().dot(&lambda), &y, inner)?;
                lambda = lambda + &(residual(con, &x, &y) * step);
                check_flat(&lambda)?;
            }
        }
        DualMethod::MethodOfMultipliers => {
            for _ in 0..cfg.num_iter {
                let (xs, ys) = joint_augmented_argmin(f, g, con, &lambda, step, &x, &y, inner)?;
                x = xs;
                y = ys;
                lambda = lambda + &(residual(con, &x, &y) * step);
                check_flat(&lambda)?;
            }
        }
        DualMethod::Admm => {
            let ata = a.t().dot(a) * step;
            let btb = b.t().dot(b) * step;
            for _ in 0..cfg.num_iter {
                let by_c = b.dot(&tensor::flatten(&y)) - con.c();
                let wx = a.t().dot(&(&lambda + &(by_c * step)));
                x = argmin_augmented(f, Some(&ata), &wx, &x, inner)?;
                let ax_c = a.dot(&tensor::flatten(&x)) - con.c();
                let wy = b.t().dot(&(&lambda + &(ax_c * step)));
                y = argmin_augmented(g, Some(&btb), &wy, &y, inner)?;
                lambda = lambda + &(residual(con, &x, &y) * step);
                check_flat(&lambda)?;
            }
        }
        DualMethod::DualForwardBackward => {
            let btb = b.t().dot(b);
            let nu = btb[[0, 0]];
            let iso = isotropic_weight(&btb);
            if iso.is_none() || !(nu > 0.0) {
                return Err(SolverError::DualGeometry(format!(
                    "dual forward-backward needs BᵀB to be a positive multiple of the \
                     identity, got BᵀB with leading entry {nu}"
                )));
            }
            let prox_penalty = 1.0 / (nu * step);
            for _ in 0..cfg.num_iter {
                x = argmin_augmented(f, None, &a.t().dot(&lambda), &x, inner)?;
                let shifted = &lambda + &((a.dot(&tensor::flatten(&x)) - con.c()) * step);
                let target =
                    tensor::from_flat(&(-b.t().dot(&shifted) / (nu * step)), y.shape());
                y = g.proximal(&target, prox_penalty)?;
                lambda = shifted + b.dot(&tensor::flatten(&y)) * step;
                check_flat(&lambda)?;
            }
        }
    }
    check_iterate(&x)?;
    check_iterate(&y)?;
    Ok(DualState { x, y, duals: lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{Huber, Indicator, Norm1, Quadratic};
    use crate::sets::{ConstraintSet, Shape};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const METHODS: [DualMethod; 4] = [
        DualMethod::DualAscent,
        DualMethod::MethodOfMultipliers,
        DualMethod::Admm,
        DualMethod::DualForwardBackward,
    ];

    /// ½(v−a)² as a univariate quadratic.
    fn centered(a: f64) -> Arc<dyn Cost> {
        Arc::new(Quadratic::univariate(1.0, -a, 0.5 * a * a))
    }

    /// min ½(x−1)² + ½(y−3)² s.t. x − y = c₀.
    fn consensus_problem(c0: f64) -> Problem {
        let con = LinearConstraint::new(array![[1.0]], array![[-1.0]], array![c0]).unwrap();
        Problem::constrained(centered(1.0), centered(3.0), con).unwrap()
    }

    fn solve(method: DualMethod, problem: &Problem, cfg: &SolverConfig) -> DualState {
        let state = DualState::cold(problem).unwrap();
        dual_solve(method, problem, state, cfg).unwrap()
    }

    fn config_for(method: DualMethod) -> SolverConfig {
        match method {
            // Dual-function gradient steps contract at |1 − 2α|.
            DualMethod::DualAscent => SolverConfig::new(0.4, 80),
            DualMethod::MethodOfMultipliers => SolverConfig::new(1.0, 60),
            DualMethod::Admm => SolverConfig::new(1.0, 200),
            DualMethod::DualForwardBackward => SolverConfig::new(0.5, 100),
        }
    }

    #[test]
    fn all_methods_reach_the_consensus_kkt_point() {
        // KKT by hand: x−1+λ = 0, y−3−λ = 0, x = y → (x, y, λ) = (2, 2, −1).
        let p = consensus_problem(0.0);
        for method in METHODS {
            let out = solve(method, &p, &config_for(method));
            assert!((out.x[[0]] - 2.0).abs() < 1e-8, "{method:?}: x = {}", out.x[[0]]);
            assert!((out.y[[0]] - 2.0).abs() < 1e-8, "{method:?}: y = {}", out.y[[0]]);
            assert!((out.duals[0] + 1.0).abs() < 1e-8, "{method:?}: λ = {}", out.duals[0]);
        }
    }

    #[test]
    fn shifted_constraint_moves_the_solution() {
        // x − y = 2 → x = 3, y = 1, λ = −2.
        let p = consensus_problem(2.0);
        for method in METHODS {
            let out = solve(method, &p, &config_for(method));
            assert!((out.x[[0]] - 3.0).abs() < 1e-8, "{method:?}");
            assert!((out.y[[0]] - 1.0).abs() < 1e-8, "{method:?}");
            assert!((out.duals[0] + 2.0).abs() < 1e-8, "{method:?}");
        }
    }

    #[test]
    fn zero_budget_returns_the_state_unchanged() {
        let p = consensus_problem(0.0);
        let state = DualState::new(
            tensor::scalar(0.3),
            tensor::scalar(-0.7),
            array![0.9],
        );
        for method in METHODS {
            let out = dual_solve(method, &p, state.clone(), &SolverConfig::new(1.0, 0)).unwrap();
            assert_eq!(out, state, "{method:?}");
        }
    }

    #[test]
    fn budgets_compose_through_the_full_state() {
        let p = consensus_problem(0.0);
        for method in METHODS {
            let mut cfg = config_for(method);
            cfg.num_iter = 3;
            let mid = dual_solve(method, &p, DualState::cold(&p).unwrap(), &cfg).unwrap();
            cfg.num_iter = 4;
            let composed = dual_solve(method, &p, mid, &cfg).unwrap();
            cfg.num_iter = 7;
            let full = dual_solve(method, &p, DualState::cold(&p).unwrap(), &cfg).unwrap();
            assert_eq!(
                composed.x[[0]].to_bits(),
                full.x[[0]].to_bits(),
                "{method:?} x"
            );
            assert_eq!(
                composed.y[[0]].to_bits(),
                full.y[[0]].to_bits(),
                "{method:?} y"
            );
            assert_eq!(
                composed.duals[0].to_bits(),
                full.duals[0].to_bits(),
                "{method:?} duals"
            );
        }
    }

    #[test]
    fn admm_residual_drops_below_tolerance_on_random_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let n = 2;
            let mut qf = Array2::eye(n);
            let mut qg = Array2::eye(n);
            let off = rng.random_range(-0.3..0.3);
            qf[[0, 1]] = off;
            qf[[1, 0]] = off;
            qf[[0, 0]] += rng.random_range(0.0..2.0);
            qg[[1, 1]] += rng.random_range(0.0..2.0);
            let bf = Array1::from_iter((0..n).map(|_| rng.random_range(-2.0..2.0_f64)));
            let bg = Array1::from_iter((0..n).map(|_| rng.random_range(-2.0..2.0_f64)));
            let f: Arc<dyn Cost> = Arc::new(Quadratic::new(qf.clone(), bf.clone(), 0.0).unwrap());
            let g: Arc<dyn Cost> = Arc::new(Quadratic::new(qg.clone(), bg.clone(), 0.0).unwrap());
            let con =
                LinearConstraint::new(Array2::eye(n), Array2::eye(n) * -1.0, Array1::zeros(n))
                    .unwrap();
            let p = Problem::constrained(f, g, con).unwrap();
            let out = solve(DualMethod::Admm, &p, &SolverConfig::new(1.0, 500));

            let r = residual(p.constraint().unwrap(), &out.x, &out.y);
            assert!(r.dot(&r).sqrt() < 1e-6, "primal residual too large");

            // Independent oracle: the dense KKT system
            // [Qf 0 Aᵀ; 0 Qg Bᵀ; A B 0] (x, y, λ) = (−bf, −bg, c).
            let mut kkt = Array2::zeros((3 * n, 3 * n));
            kkt.slice_mut(s![..n, ..n]).assign(&qf);
            kkt.slice_mut(s![n..2 * n, n..2 * n]).assign(&qg);
            for i in 0..n {
                kkt[[i, 2 * n + i]] = 1.0;
                kkt[[n + i, 2 * n + i]] = -1.0;
                kkt[[2 * n + i, i]] = 1.0;
                kkt[[2 * n + i, n + i]] = -1.0;
            }
            let mut rhs = Array1::zeros(3 * n);
            rhs.slice_mut(s![..n]).assign(&(-&bf));
            rhs.slice_mut(s![n..2 * n]).assign(&(-&bg));
            let sol = linalg::solve(kkt, rhs).unwrap();
            for i in 0..n {
                assert!((out.x[[i]] - sol[i]).abs() < 1e-5);
                assert!((out.y[[i]] - sol[n + i]).abs() < 1e-5);
                assert!((out.duals[i] - sol[2 * n + i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn admm_soft_thresholds_a_nonsmooth_part() {
        // min ½(x−3)² + |y| s.t. x = y → x* = 2 with λ* = 1; the y-update
        // exercises the proximal inner path.
        let g: Arc<dyn Cost> = Arc::new(Norm1::new(1.0, Shape::new(vec![1]).unwrap()).unwrap());
        let con = LinearConstraint::new(array![[1.0]], array![[-1.0]], array![0.0]).unwrap();
        let p = Problem::constrained(centered(3.0), g, con).unwrap();
        let out = solve(DualMethod::Admm, &p, &SolverConfig::new(1.0, 300));
        assert!((out.x[[0]] - 2.0).abs() < 1e-6);
        assert!((out.y[[0]] - 2.0).abs() < 1e-6);
        assert!((out.duals[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dual_fb_handles_a_nonsmooth_part_through_its_dual_prox() {
        // Same composite optimum through the dual forward-backward path.
        let g: Arc<dyn Cost> = Arc::new(Norm1::new(1.0, Shape::new(vec![1]).unwrap()).unwrap());
        let con = LinearConstraint::new(array![[1.0]], array![[-1.0]], array![0.0]).unwrap();
        let p = Problem::constrained(centered(3.0), g, con).unwrap();
        let out = solve(DualMethod::DualForwardBackward, &p, &SolverConfig::new(0.5, 200));
        assert!((out.x[[0]] - 2.0).abs() < 1e-6, "x = {}", out.x[[0]]);
        assert!((out.y[[0]] - 2.0).abs() < 1e-6, "y = {}", out.y[[0]]);
        assert!((out.duals[0] - 1.0).abs() < 1e-6, "λ = {}", out.duals[0]);
    }

    #[test]
    fn dual_fb_rejects_anisotropic_coupling() {
        let f: Arc<dyn Cost> = Arc::new(
            Quadratic::new(Array2::eye(2), Array1::zeros(2), 0.0).unwrap(),
        );
        let g: Arc<dyn Cost> = Arc::new(
            Quadratic::new(Array2::eye(2), Array1::zeros(2), 0.0).unwrap(),
        );
        let con = LinearConstraint::new(
            Array2::eye(2),
            array![[1.0, 0.0], [0.0, 2.0]],
            Array1::zeros(2),
        )
        .unwrap();
        let p = Problem::constrained(f, g, con).unwrap();
        let err = dual_solve(
            DualMethod::DualForwardBackward,
            &p,
            DualState::cold(&p).unwrap(),
            &SolverConfig::new(0.5, 10),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::DualGeometry(_)));
    }

    #[test]
    fn dual_ascent_needs_minimizable_subproblems() {
        // An indicator has neither a gradient nor a plain-Lagrangian argmin.
        let unit_box = ConstraintSet::box_bounds(tensor::vector(&[0.0]), tensor::vector(&[1.0]))
            .unwrap();
        let f: Arc<dyn Cost> = Arc::new(Indicator::new(unit_box));
        let con = LinearConstraint::new(array![[1.0]], array![[-1.0]], array![0.0]).unwrap();
        let p = Problem::constrained(f, centered(0.0), con).unwrap();
        let err = dual_solve(
            DualMethod::DualAscent,
            &p,
            DualState::cold(&p).unwrap(),
            &SolverConfig::new(0.1, 5),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::Cost(CostError::NotImplemented { .. })));
    }

    #[test]
    fn multipliers_handle_smooth_nonquadratic_parts() {
        // Huber pieces force the joint Newton path; the optimum still has to
        // satisfy stationarity and feasibility.
        let delta = 10.0; // quadratic branch everywhere we land
        let f: Arc<dyn Cost> = Arc::new(
            Huber::new(delta, Shape::new(vec![1]).unwrap()).unwrap(),
        );
        let p = {
            let con = LinearConstraint::new(array![[1.0]], array![[-1.0]], array![0.0]).unwrap();
            Problem::constrained(f, centered(3.0), con).unwrap()
        };
        let out = solve(DualMethod::MethodOfMultipliers, &p, &SolverConfig::new(1.0, 80));
        // min ½x² + ½(y−3)² with x=y → x = 1.5.
        assert!((out.x[[0]] - 1.5).abs() < 1e-7, "x = {}", out.x[[0]]);
        assert!((out.y[[0]] - 1.5).abs() < 1e-7);
        let r = residual(p.constraint().unwrap(), &out.x, &out.y);
        assert!(r[0].abs() < 1e-7);
    }

    #[test]
    fn method_names_round_trip_through_serde() {
        for (method, name) in [
            (DualMethod::DualAscent, "\"dual-ascent\""),
            (DualMethod::MethodOfMultipliers, "\"method-of-multipliers\""),
            (DualMethod::Admm, "\"admm\""),
            (DualMethod::DualForwardBackward, "\"dual-forward-backward\""),
        ] {
            assert_eq!(serde_json::to_string(&method).unwrap(), name);
            assert_eq!(serde_json::from_str::<DualMethod>(name).unwrap(), method);
        }
    }

    #[test]
    fn mismatched_dual_length_is_rejected() {
        let p = consensus_problem(0.0);
        let state = DualState::new(tensor::scalar(0.0), tensor::scalar(0.0), array![0.0, 0.0]);
        assert!(matches!(
            dual_solve(DualMethod::Admm, &p, state, &SolverConfig::new(1.0, 1)),
            Err(SolverError::InvalidConfig(_))
        ));
    }
}
