//! Error metrics against a reference saddle point and the theoretical
//! bounds they are compared with.

use crate::blockcore::weighted_dist_sq;
use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::oracle::SaddleCertificate;
use crate::problem::SaddleProblem;
use crate::stepsize::{Regime, StepSchedule};

/// Returned by [`lagrangian_gap`] for points clearly outside the domains.
pub const GAP_SENTINEL: f64 = 1e300;

/// Infeasibility up to this distance is treated as rounding drift and
/// projected away before evaluating the gap.
pub const DRIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEval {
    pub gap: f64,
    /// A point had to be projected onto its domain first.
    pub projected: bool,
}

fn repair(v: &[f64], contains: impl Fn(&[f64]) -> bool, project: impl Fn(&mut [f64])) -> Option<(Vec<f64>, bool)> {
    if contains(v) {
        return Some((v.to_vec(), false));
    }
    let mut p = v.to_vec();
    project(&mut p);
    (dist_sq(&p, v).sqrt() <= DRIFT_TOL * (1.0 + v.iter().map(|e| e.abs()).fold(0.0, f64::max)))
        .then_some((p, true))
}

/// `L(x_bar, y*) - L(x*, y_bar)` with drift projection.
pub fn lagrangian_gap_eval(
    problem: &SaddleProblem,
    x_bar: &[f64],
    y_bar: &[f64],
    cert: &SaddleCertificate,
) -> GapEval {
    let xs = repair(x_bar, |v| problem.primal_contains(v), |v| problem.project_primal(v));
    let ys = repair(y_bar, |v| problem.h().contains(v), |v| problem.h().project_domain(v));
    match (xs, ys) {
        (Some((x, px)), Some((y, py))) => GapEval {
            gap: problem.lagrangian(&x, &cert.y_star) - problem.lagrangian(&cert.x_star, &y),
            projected: px || py,
        },
        _ => GapEval {
            gap: GAP_SENTINEL,
            projected: true,
        },
    }
}

pub fn lagrangian_gap(
    problem: &SaddleProblem,
    x_bar: &[f64],
    y_bar: &[f64],
    cert: &SaddleCertificate,
) -> f64 {
    lagrangian_gap_eval(problem, x_bar, y_bar, cert).gap
}

fn half_weighted(problem: &SaddleProblem, w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    0.5 * weighted_dist_sq(problem.partition(), a, b, w)
}

/// `L(x0, y*) - L(x*, y*)`, nonnegative at a saddle point.
fn primal_excess(problem: &SaddleProblem, x0: &[f64], cert: &SaddleCertificate) -> f64 {
    problem.lagrangian(x0, &cert.y_star) - problem.lagrangian(&cert.x_star, &cert.y_star)
}

/// `1/2 ||x* - x0||^2_{T0} + (1/(m sigma0) + (1 - 1/m) L_yy) D_Y(y*, y0)
///  + (1 - 1/m)(L(x0, y*) - L(x*, y*))`.
pub fn rate_bound_delta1(
    problem: &SaddleProblem,
    schedule: &StepSchedule,
    x0: &[f64],
    y0: &[f64],
    cert: &SaddleCertificate,
) -> Result<f64> {
    if schedule.regime != Regime::Part1 {
        return Err(Error::RegimeViolation("delta1 needs a constant schedule".into()));
    }
    let m = schedule.m as f64;
    let shrink = 1.0 - 1.0 / m;
    let w = schedule.t_weights();
    let dy = problem.h().distance(&cert.y_star, y0)?;
    Ok(half_weighted(problem, w.as_slice(), &cert.x_star, x0)
        + (1.0 / (m * schedule.sigma) + shrink * problem.constants().l_yy) * dy
        + shrink * primal_excess(problem, x0, cert))
}

/// Block weights `1/tau_i + (1 - 1/m) mu_i` of the accelerated bound.
pub fn delta2_weights(schedule: &StepSchedule) -> Vec<f64> {
    let shrink = 1.0 - 1.0 / schedule.m as f64;
    (0..schedule.m)
        .map(|i| 1.0 / schedule.tau.get(i) + shrink * schedule.mu()[i])
        .collect()
}

/// `1/2 ||x* - x0||^2_{T0 + (1 - 1/m) M} + D_Y(y*, y0)/(m sigma0)
///  + (1 - 1/m)(L(x0, y*) - L(x*, y*))`.
pub fn rate_bound_delta2(
    problem: &SaddleProblem,
    schedule: &StepSchedule,
    x0: &[f64],
    y0: &[f64],
    cert: &SaddleCertificate,
) -> Result<f64> {
    if schedule.regime != Regime::Part2 {
        return Err(Error::RegimeViolation("delta2 needs an accelerated schedule".into()));
    }
    let m = schedule.m as f64;
    let dy = problem.h().distance(&cert.y_star, y0)?;
    Ok(half_weighted(problem, &delta2_weights(schedule), &cert.x_star, x0)
        + dy / (m * schedule.sigma)
        + (1.0 - 1.0 / m) * primal_excess(problem, x0, cert))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub const MIN_FIT_POINTS: usize = 10;
pub const MIN_FIT_DECADES: f64 = 2.0;

/// Least-squares line through `(log k, log value)`.
pub fn slope_fit(ks: &[f64], values: &[f64]) -> Result<SlopeFit> {
    if ks.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            found: values.len(),
        });
    }
    if ks.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs at least {MIN_FIT_POINTS} points, got {}",
            ks.len()
        )));
    }
    if ks.iter().chain(values).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("slope fit needs positive finite data".into()));
    }
    let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ks.iter().copied().fold(0.0, f64::max);
    if (hi / lo).log10() < MIN_FIT_DECADES - 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs {MIN_FIT_DECADES} decades, data spans {:.2}",
            (hi / lo).log10()
        )));
    }
    let lx: Vec<f64> = ks.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept, r2 })
}

/// `n` points spread log-uniformly over `[lo, hi]`, rounded and deduplicated.
pub fn log_grid(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..n)
        .map(|j| (a + (b - a) * j as f64 / (n - 1).max(1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}
