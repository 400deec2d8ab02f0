//! Reference saddle points for small instances: a dense linear solve for
//! unconstrained quadratic games and a safeguarded extragradient method for
//! everything else. Both certify their output with the natural residual.

use nalgebra::{DMatrix, DVector};

use crate::bregman::{bregman_prox_into, GeometryKind};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm};
use crate::problem::{QuadraticGameSpec, SaddleProblem};

/// Smallest extragradient step before the safeguard gives up shrinking.
pub const STEP_FLOOR: f64 = 1e-12;

/// Step used when no Lipschitz estimate is available.
pub const DEFAULT_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    LinearSolve,
    Extragradient,
}

impl OracleMethod {
    pub fn name(self) -> &'static str {
        match self {
            OracleMethod::LinearSolve => "linear-solve",
            OracleMethod::Extragradient => "extragradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleCertificate {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub kkt_residual: f64,
    pub method: OracleMethod,
    /// Requested tolerance.
    pub tolerance: f64,
    /// `kkt_residual <= tolerance`.
    pub certified: bool,
    pub iterations: usize,
}

/// Solves `[P, C'; C, -Q] (x; y) = (-p; q)`.
pub fn solve_quadratic_game_exact(spec: &QuadraticGameSpec) -> Result<SaddleCertificate> {
    spec.validate()?;
    let n = spec.p_mat.nrows();
    let d = spec.q_mat.nrows();
    let mut k = DMatrix::zeros(n + d, n + d);
    k.view_mut((0, 0), (n, n)).copy_from(&spec.p_mat);
    k.view_mut((0, n), (n, d)).copy_from(&spec.c_mat.transpose());
    k.view_mut((n, 0), (d, n)).copy_from(&spec.c_mat);
    k.view_mut((n, n), (d, d)).copy_from(&(-&spec.q_mat));
    let mut rhs = DVector::zeros(n + d);
    rhs.rows_mut(0, n).copy_from(&(-&spec.p_vec));
    rhs.rows_mut(n, d).copy_from(&spec.q_vec);
    let sol = k.clone().lu().solve(&rhs).ok_or_else(|| {
        Error::Singular("stationarity system is singular; use the extragradient oracle".into())
    })?;
    let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
    let y: Vec<f64> = sol.rows(n, d).iter().copied().collect();
    let xv = DVector::from_column_slice(&x);
    let yv = DVector::from_column_slice(&y);
    let gx = &spec.p_mat * &xv + &spec.p_vec + spec.c_mat.transpose() * &yv;
    let gy = &spec.c_mat * &xv - &spec.q_mat * &yv - &spec.q_vec;
    let residual = gx.norm() + gy.norm();
    let scale = 1.0 + k.amax() * sol.amax() + rhs.amax();
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::Singular(format!(
            "stationarity system is numerically singular (residual {residual:.3e})"
        )));
    }
    Ok(SaddleCertificate {
        x_star: x,
        y_star: y,
        kkt_residual: residual,
        method: OracleMethod::LinearSolve,
        tolerance: residual,
        certified: true,
        iterations: 0,
    })
}

// Euclidean prox steps on every primal block / dual segment, whatever
// geometry the solver itself uses.
fn primal_prox_euclid(problem: &SaddleProblem, gamma: f64, x: &[f64], g: &[f64], out: &mut [f64]) {
    for (i, term) in problem.f().iter().enumerate() {
        let r = problem.partition().range(i);
        bregman_prox_into(
            GeometryKind::Euclidean,
            &term.func,
            gamma,
            &g[r.clone()],
            &x[r.clone()],
            &mut out[r],
        )
        .expect("euclidean prox on validated terms");
    }
}

fn dual_prox_euclid(problem: &SaddleProblem, gamma: f64, y: &[f64], g: &[f64], out: &mut [f64]) {
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    problem
        .h()
        .prox_euclidean_into(gamma, &neg, y, out)
        .expect("euclidean prox on validated terms");
}

fn residual_from_grads(problem: &SaddleProblem, x: &[f64], y: &[f64], gx: &[f64], gy: &[f64]) -> f64 {
    let mut px = vec![0.0; x.len()];
    let mut py = vec![0.0; y.len()];
    primal_prox_euclid(problem, 1.0, x, gx, &mut px);
    dual_prox_euclid(problem, 1.0, y, gy, &mut py);
    dist_sq(x, &px).sqrt() + dist_sq(y, &py).sqrt()
}

/// `||x - prox_f(x - grad_x Phi)|| + ||y - prox_h(y + grad_y Phi)||` with unit
/// steps and Euclidean proxes.
pub fn kkt_residual(problem: &SaddleProblem, x: &[f64], y: &[f64]) -> f64 {
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; y.len()];
    problem.grad_x(x, y, &mut gx);
    problem.grad_y(x, y, &mut gy);
    residual_from_grads(problem, x, y, &gx, &gy)
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Known Lipschitz constant of the monotone operator; estimated by power
    /// iteration at the start point when `None` and `estimate_lipschitz`.
    pub lipschitz: Option<f64>,
    pub estimate_lipschitz: bool,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
}

impl OracleOptions {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self {
            tol,
            max_iters,
            lipschitz: None,
            estimate_lipschitz: true,
            x0: None,
            y0: None,
        }
    }
}

/// Deterministic Euclidean extragradient with a shrinking step:
/// `z^ = P(z - g F(z))`, `z+ = P(z - g F(z^))`, where `g` is halved whenever
/// `g ||F(z^) - F(z)|| > 0.9 ||z^ - z||`. Stops once the natural residual is
/// at most `tol`; otherwise returns the best point seen, not certified.
pub fn solve_high_accuracy(problem: &SaddleProblem, opts: &OracleOptions) -> Result<SaddleCertificate> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let n = problem.primal_dim();
    let d = problem.dual_dim();
    let mut x = opts.x0.clone().unwrap_or_else(|| problem.default_primal_start());
    let mut y = opts.y0.clone().unwrap_or_else(|| problem.default_dual_start());
    problem.project_primal(&mut x);
    problem.h().project_domain(&mut y);

    let lipschitz = opts.lipschitz.or_else(|| {
        opts.estimate_lipschitz
            .then(|| problem.operator_norm_estimate(&x, &y, 200))
            .filter(|l| *l > 0.0 && l.is_finite())
    });
    let mut gamma = lipschitz.map_or(DEFAULT_STEP, |l| 1.0 / l);

    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; d]);
    let (mut hx, mut hy) = (vec![0.0; n], vec![0.0; d]);
    let (mut xh, mut yh) = (vec![0.0; n], vec![0.0; d]);
    let (mut xn, mut yn) = (vec![0.0; n], vec![0.0; d]);
    let mut best = (f64::INFINITY, x.clone(), y.clone());

    for iter in 0..=opts.max_iters {
        problem.grad_x(&x, &y, &mut gx);
        problem.grad_y(&x, &y, &mut gy);
        let res = residual_from_grads(problem, &x, &y, &gx, &gy);
        if !res.is_finite() {
            return Err(Error::Divergence {
                iteration: iter,
                norm: norm(&x).max(norm(&y)),
            });
        }
        if res < best.0 {
            best = (res, x.clone(), y.clone());
        }
        if res <= opts.tol || iter == opts.max_iters {
            let (r, bx, by) = best;
            return Ok(SaddleCertificate {
                x_star: bx,
                y_star: by,
                kkt_residual: r,
                method: OracleMethod::Extragradient,
                tolerance: opts.tol,
                certified: r <= opts.tol,
                iterations: iter,
            });
        }
        loop {
            primal_prox_euclid(problem, gamma, &x, &gx, &mut xh);
            dual_prox_euclid(problem, gamma, &y, &gy, &mut yh);
            problem.grad_x(&xh, &yh, &mut hx);
            problem.grad_y(&xh, &yh, &mut hy);
            let dz = (dist_sq(&xh, &x) + dist_sq(&yh, &y)).sqrt();
            let df = (dist_sq(&hx, &gx) + dist_sq(&hy, &gy)).sqrt();
            if gamma * df <= 0.9 * dz || gamma <= STEP_FLOOR {
                break;
            }
            gamma = (gamma * 0.5).max(STEP_FLOOR);
        }
        primal_prox_euclid(problem, gamma, &x, &hx, &mut xn);
        dual_prox_euclid(problem, gamma, &y, &hy, &mut yn);
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut y, &mut yn);
    }
    unreachable!("loop returns at max_iters")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockcore::BlockPartition;
    use crate::bregman::{Cone, ProxFunction, ProxTerm, SegmentedProx};
    use crate::problem::{build_constrained, build_quadratic_game, ConstrainedSpec, ConstraintFn};
    use std::sync::Arc;

    fn scalar_spec(pv: f64, qv: f64) -> QuadraticGameSpec {
        QuadraticGameSpec {
            p_mat: DMatrix::identity(1, 1),
            q_mat: DMatrix::identity(1, 1),
            c_mat: DMatrix::from_element(1, 1, 2.0),
            p_vec: DVector::from_element(1, pv),
            q_vec: DVector::from_element(1, qv),
        }
    }

    fn free_game(spec: QuadraticGameSpec) -> SaddleProblem {
        let n = spec.p_mat.nrows();
        let d = spec.q_mat.nrows();
        build_quadratic_game(
            spec,
            Arc::new(BlockPartition::single(n).unwrap()),
            vec![ProxTerm::euclidean(n, ProxFunction::Zero).unwrap()],
            SegmentedProx::single(ProxTerm::euclidean(d, ProxFunction::Zero).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn exact_scalar_game() {
        let c = solve_quadratic_game_exact(&scalar_spec(-1.0, 1.0)).unwrap();
        assert!((c.x_star[0] - 0.6).abs() < 1e-14);
        assert!((c.y_star[0] - 0.2).abs() < 1e-14);
        assert!(c.kkt_residual <= 1e-10);
        let c = solve_quadratic_game_exact(&scalar_spec(0.0, 0.0)).unwrap();
        assert_eq!((c.x_star[0], c.y_star[0]), (0.0, 0.0));
    }

    #[test]
    fn singular_system_is_reported() {
        let spec = QuadraticGameSpec {
            p_mat: DMatrix::zeros(2, 2),
            q_mat: DMatrix::zeros(1, 1),
            c_mat: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            p_vec: DVector::zeros(2),
            q_vec: DVector::zeros(1),
        };
        assert!(matches!(solve_quadratic_game_exact(&spec), Err(Error::Singular(_))));
    }

    #[test]
    fn residual_vanishes_at_saddle_and_grows_linearly() {
        let spec = scalar_spec(-1.0, 1.0);
        let prob = free_game(spec);
        assert!(kkt_residual(&prob, &[0.6], &[0.2]) <= 1e-12);
        let r1 = kkt_residual(&prob, &[0.6 + 1e-3], &[0.2]);
        let r2 = kkt_residual(&prob, &[0.6 + 2e-3], &[0.2]);
        assert!(r1 > 0.0 && (r2 / r1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn extragradient_matches_linear_solve() {
        let spec = scalar_spec(-1.0, 1.0);
        let prob = free_game(spec);
        let c = solve_high_accuracy(&prob, &OracleOptions::new(1e-12, 100_000)).unwrap();
        assert!(c.certified);
        assert!((c.x_star[0] - 0.6).abs() < 1e-11 && (c.y_star[0] - 0.2).abs() < 1e-11);
    }

    #[test]
    fn constrained_scalar_oracle() {
        let spec = ConstrainedSpec {
            g_hess: DMatrix::identity(1, 1),
            g_lin: DVector::zeros(1),
            constraints: vec![ConstraintFn::affine(DVector::from_element(1, 1.0), 1.0)],
            cone: Cone::NonnegOrthant,
            dual_bound: 10.0,
            primal_radius: None,
        };
        let prob = build_constrained(
            spec,
            Arc::new(BlockPartition::single(1).unwrap()),
            vec![ProxTerm::euclidean(1, ProxFunction::Zero).unwrap()],
        )
        .unwrap();
        let mut o = OracleOptions::new(1e-10, 10_000);
        o.x0 = Some(vec![3.0]);
        o.y0 = Some(vec![2.0]);
        let start = kkt_residual(&prob, &[3.0], &[2.0]);
        let c = solve_high_accuracy(&prob, &o).unwrap();
        assert!(c.certified && c.kkt_residual <= start);
        assert!(c.x_star[0].abs() <= 1e-9 && c.y_star[0].abs() <= 1e-9);
    }

    #[test]
    fn uncertified_when_budget_is_too_small() {
        let prob = free_game(scalar_spec(-1.0, 1.0));
        let c = solve_high_accuracy(&prob, &OracleOptions::new(1e-14, 2)).unwrap();
        assert!(!c.certified);
        assert_eq!(c.iterations, 2);
    }
}
