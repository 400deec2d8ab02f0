//! Deterministic reference methods: the extrapolated primal-dual iteration
//! (full primal updates, the single-block case of RAPD on bilinear
//! couplings) and composite mirror-prox.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::metrics::lagrangian_gap;
use crate::linalg::{dist_sq, norm};
use crate::problem::SaddleProblem;
use crate::rapd::{ergodic_average, RunOptions, TraceRecord, DIVERGENCE_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Pdhg,
    MirrorProx,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Pdhg => "pdhg",
            BaselineMethod::MirrorProx => "mirror_prox",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    pub records: Vec<TraceRecord>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Ergodic averages (of the iterates for PDHG, of the half points for
    /// mirror-prox).
    pub x_bar: Vec<f64>,
    pub y_bar: Vec<f64>,
    pub iterations: usize,
    pub iterates: Vec<(Vec<f64>, Vec<f64>)>,
    /// Step actually used by mirror-prox (`1/L`); `tau` for PDHG.
    pub step: f64,
}

fn check_step(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn starts(problem: &SaddleProblem, opts: &RunOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    if opts.iterations == 0 {
        return Err(Error::InvalidParameter("iteration count must be positive".into()));
    }
    let x = opts.x0.clone().unwrap_or_else(|| problem.default_primal_start());
    let y = opts.y0.clone().unwrap_or_else(|| problem.default_dual_start());
    crate::error::ensure_len(problem.primal_dim(), x.len())?;
    crate::error::ensure_len(problem.dual_dim(), y.len())?;
    Ok((x, y))
}

fn primal_prox_all(problem: &SaddleProblem, t: f64, g: &[f64], center: &[f64], out: &mut [f64]) -> Result<()> {
    for i in 0..problem.num_blocks() {
        let r = problem.partition().range(i);
        problem.primal_prox(i, t, &g[r.clone()], &center[r.clone()], &mut out[r])?;
    }
    Ok(())
}

fn dual_ascent(problem: &SaddleProblem, t: f64, g: &[f64], center: &[f64], out: &mut [f64]) -> Result<()> {
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    problem.dual_prox(t, &neg, center, out)
}

fn guard(k: usize, x: &[f64], y: &[f64]) -> Result<()> {
    let (nx, ny) = (norm(x), norm(y));
    if !(nx.is_finite() && ny.is_finite()) || nx > DIVERGENCE_NORM || ny > DIVERGENCE_NORM {
        return Err(Error::Divergence {
            iteration: k,
            norm: nx.max(ny),
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn record(
    problem: &SaddleProblem,
    opts: &RunOptions,
    k: usize,
    start: &Instant,
    step: (f64, f64),
    x: &[f64],
    y: &[f64],
    sums: (&[f64], &[f64]),
) -> Result<Option<TraceRecord>> {
    let last = k + 1 == opts.iterations;
    let keep = last || k % opts.record_every.max(1) == 0;
    let metrics = opts.reference.is_some() && opts.metrics.wants(k, last);
    if !(keep || metrics) {
        return Ok(None);
    }
    let mut rec = TraceRecord {
        k,
        wall_s: start.elapsed().as_secs_f64(),
        i_k: 0,
        sigma: step.1,
        theta: 1.0,
        tau_min: step.0,
        tau_max: step.0,
        t: 1.0,
        tau_tilde: 0.0,
        gap: None,
        dist_sq: None,
        dy: None,
        weighted_dist: None,
    };
    if metrics {
        let cert = opts.reference.as_ref().unwrap();
        let (xb, yb) = ergodic_average(sums.0, sums.1, k + 1)?;
        rec.gap = Some(lagrangian_gap(problem, &xb, &yb, cert));
        rec.dist_sq = Some(dist_sq(x, &cert.x_star));
        rec.dy = problem.h().distance(&cert.y_star, y).ok();
    }
    Ok(Some(rec))
}

/// Extrapolated primal-dual iteration with `theta = 1`:
/// `y+ = prox_h(y + sigma grad_y Phi(2x - x_prev, y))`,
/// `x+ = prox_f(x - tau grad_x Phi(x, y+))`, with `x_prev = x0` initially.
pub fn pdhg_run(problem: &SaddleProblem, tau: f64, sigma: f64, opts: &RunOptions) -> Result<BaselineResult> {
    check_step("tau", tau)?;
    check_step("sigma", sigma)?;
    let (mut x, mut y) = starts(problem, opts)?;
    let (n, d) = (problem.primal_dim(), problem.dual_dim());
    let mut x_prev = x.clone();
    let mut x_ext = vec![0.0; n];
    let mut gy = vec![0.0; d];
    let mut gx = vec![0.0; n];
    let mut y_next = vec![0.0; d];
    let mut x_next = vec![0.0; n];
    let (mut xs, mut ys) = (vec![0.0; n], vec![0.0; d]);
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let start = Instant::now();
    for k in 0..opts.iterations {
        for j in 0..n {
            x_ext[j] = 2.0 * x[j] - x_prev[j];
        }
        problem.grad_y(&x_ext, &y, &mut gy);
        dual_ascent(problem, sigma, &gy, &y, &mut y_next)?;
        problem.grad_x(&x, &y_next, &mut gx);
        primal_prox_all(problem, tau, &gx, &x, &mut x_next)?;
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut y, &mut y_next);
        guard(k, &x, &y)?;
        xs.iter_mut().zip(&x).for_each(|(a, b)| *a += b);
        ys.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
        if opts.keep_iterates {
            iterates.push((x.clone(), y.clone()));
        }
        if let Some(r) = record(problem, opts, k, &start, (tau, sigma), &x, &y, (&xs, &ys))? {
            records.push(r);
        }
    }
    let (x_bar, y_bar) = ergodic_average(&xs, &ys, opts.iterations)?;
    Ok(BaselineResult {
        method: BaselineMethod::Pdhg,
        records,
        x,
        y,
        x_bar,
        y_bar,
        iterations: opts.iterations,
        iterates,
        step: tau,
    })
}

/// Composite mirror-prox with step `1/L`, using the problem's own prox
/// geometries. `L` is estimated by power iteration on the linearized
/// monotone operator at the start point when not given.
pub fn mirror_prox_run(
    problem: &SaddleProblem,
    lipschitz: Option<f64>,
    opts: &RunOptions,
) -> Result<BaselineResult> {
    let (mut x, mut y) = starts(problem, opts)?;
    let l = match lipschitz {
        Some(l) => l,
        None => problem.operator_norm_estimate(&x, &y, 500),
    };
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mirror-prox needs a positive Lipschitz constant, got {l}"
        )));
    }
    let gamma = 1.0 / l;
    let (n, d) = (problem.primal_dim(), problem.dual_dim());
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; d]);
    let (mut xh, mut yh) = (vec![0.0; n], vec![0.0; d]);
    let (mut xn, mut yn) = (vec![0.0; n], vec![0.0; d]);
    let (mut xs, mut ys) = (vec![0.0; n], vec![0.0; d]);
    let mut records = Vec::new();
    let mut iterates = Vec::new();
    let start = Instant::now();
    for k in 0..opts.iterations {
        problem.grad_x(&x, &y, &mut gx);
        problem.grad_y(&x, &y, &mut gy);
        primal_prox_all(problem, gamma, &gx, &x, &mut xh)?;
        dual_ascent(problem, gamma, &gy, &y, &mut yh)?;
        problem.grad_x(&xh, &yh, &mut gx);
        problem.grad_y(&xh, &yh, &mut gy);
        primal_prox_all(problem, gamma, &gx, &x, &mut xn)?;
        dual_ascent(problem, gamma, &gy, &y, &mut yn)?;
        std::mem::swap(&mut x, &mut xn);
        std::mem::swap(&mut y, &mut yn);
        guard(k, &x, &y)?;
        xs.iter_mut().zip(&xh).for_each(|(a, b)| *a += b);
        ys.iter_mut().zip(&yh).for_each(|(a, b)| *a += b);
        if opts.keep_iterates {
            iterates.push((x.clone(), y.clone()));
        }
        if let Some(r) = record(problem, opts, k, &start, (gamma, gamma), &x, &y, (&xs, &ys))? {
            records.push(r);
        }
    }
    let (x_bar, y_bar) = ergodic_average(&xs, &ys, opts.iterations)?;
    Ok(BaselineResult {
        method: BaselineMethod::MirrorProx,
        records,
        x,
        y,
        x_bar,
        y_bar,
        iterations: opts.iterations,
        iterates,
        step: gamma,
    })
}
