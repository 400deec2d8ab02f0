//! The randomized accelerated primal-dual iteration.
//!
//! Each iteration takes one dual Bregman-prox ascent step along a momentum
//! direction built from two consecutive dual gradients, then updates a single
//! randomly chosen primal block by a Bregman-prox descent step.

use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockcore::weighted_dist_sq;
use crate::error::{ensure_len, Error, Result};
use crate::harness::metrics::lagrangian_gap;
use crate::linalg::{dist_sq, norm};
use crate::oracle::SaddleCertificate;
use crate::problem::SaddleProblem;
use crate::stepsize::{check_probabilities, Regime, StepSchedule};

/// Iterates whose norm exceeds this abort the run.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Default period of full dual-gradient refreshes between incremental updates.
pub const DEFAULT_REFRESH: usize = 1000;

/// Draws block indices from a fixed distribution with a seeded ChaCha8
/// stream. Uniform draws use the scaled-integer map `(u * m) >> 64`;
/// non-uniform draws invert the cumulative distribution at a 53-bit uniform.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    rng: ChaCha8Rng,
    m: usize,
    cdf: Option<Vec<f64>>,
}

impl BlockSampler {
    pub fn uniform(seed: u64, m: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            m,
            cdf: None,
        }
    }

    pub fn new(seed: u64, probs: &[f64]) -> Result<Self> {
        let m = probs.len();
        check_probabilities(probs, m)?;
        let uniform = probs.iter().all(|&p| p == 1.0 / m as f64);
        let cdf = (!uniform).then(|| {
            let mut acc = 0.0;
            probs
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect()
        });
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            m,
            cdf,
        })
    }

    pub fn sample(&mut self) -> usize {
        let u = self.rng.next_u64();
        match &self.cdf {
            None => ((u as u128 * self.m as u128) >> 64) as usize,
            Some(cdf) => {
                let r = (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                cdf.iter().position(|&c| r < c).unwrap_or(self.m - 1)
            }
        }
    }
}

/// `s = (1 + m theta) g_k - m theta g_prev`.
pub fn momentum_direction(g_k: &[f64], g_prev: &[f64], m: usize, theta: f64, out: &mut [f64]) {
    let w = m as f64 * theta;
    for ((o, a), b) in out.iter_mut().zip(g_k).zip(g_prev) {
        *o = (1.0 + w) * a - w * b;
    }
}

/// `y+ = argmin h(y) - <s, y> + D(y, y_k) / sigma`.
pub fn dual_step(
    problem: &SaddleProblem,
    y_k: &[f64],
    s_k: &[f64],
    sigma: f64,
    out: &mut [f64],
) -> Result<()> {
    let neg: Vec<f64> = s_k.iter().map(|v| -v).collect();
    problem.dual_prox(sigma, &neg, y_k, out)
}

/// Returns `x^{k+1}`: block `i` updated by a prox step with step `tau_i`
/// using `grad_{x_i} Phi(x_k, y_next)`, every other block copied.
pub fn primal_block_step(
    problem: &SaddleProblem,
    x_k: &[f64],
    y_next: &[f64],
    i: usize,
    tau_i: f64,
) -> Result<Vec<f64>> {
    let r = problem.partition().checked_range(i)?;
    let mut grad = vec![0.0; r.len()];
    let mut out = x_k.to_vec();
    problem.grad_x_block(i, x_k, y_next, &mut grad);
    problem.primal_prox(i, tau_i, &grad, &x_k[r.clone()], &mut out[r])?;
    Ok(out)
}

/// Every block updated from `x_k` at once; the auxiliary point whose
/// `i`-th block is what iteration `k` writes when block `i` is drawn.
pub fn full_primal_update(
    problem: &SaddleProblem,
    x_k: &[f64],
    y_next: &[f64],
    taus: &[f64],
) -> Result<Vec<f64>> {
    ensure_len(problem.num_blocks(), taus.len())?;
    let mut out = x_k.to_vec();
    for (i, &tau) in taus.iter().enumerate() {
        let r = problem.partition().range(i);
        let mut grad = vec![0.0; r.len()];
        problem.grad_x_block(i, x_k, y_next, &mut grad);
        problem.primal_prox(i, tau, &grad, &x_k[r.clone()], &mut out[r])?;
    }
    Ok(out)
}

/// Which trace records receive reference metrics.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MetricPlan {
    #[default]
    None,
    /// Every `n`-th record (and the last).
    Every(usize),
    /// Listed record indices `k`.
    At(Vec<usize>),
}

impl MetricPlan {
    pub(crate) fn wants(&self, k: usize, last: bool) -> bool {
        match self {
            MetricPlan::None => false,
            MetricPlan::Every(n) => last || (k + 1) % n.max(&1) == 0,
            MetricPlan::At(ks) => ks.contains(&k),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Block sampling distribution; uniform when `None`.
    pub probs: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub reference: Option<Arc<SaddleCertificate>>,
    pub metrics: MetricPlan,
    /// Keep every `record_every`-th trace record (always the last).
    pub record_every: usize,
    /// Compare the cached dual gradient with a fresh one every `n` iterations.
    pub verify_cache_every: Option<usize>,
    /// Recompute the cached dual gradient from scratch every `n` iterations.
    pub refresh_every: usize,
    /// Keep a copy of every iterate `(x^{k+1}, y^{k+1})`.
    pub keep_iterates: bool,
    /// Wall-clock budget in seconds; the run stops early once exceeded.
    pub time_budget: Option<f64>,
    /// Stop at the first metric record with `||x - x*|| <= target ||x*||`.
    pub target_rel_dist: Option<f64>,
}

impl RunOptions {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            probs: None,
            x0: None,
            y0: None,
            reference: None,
            metrics: MetricPlan::None,
            record_every: 1,
            verify_cache_every: None,
            refresh_every: DEFAULT_REFRESH,
            keep_iterates: false,
            time_budget: None,
            target_rel_dist: None,
        }
    }

    pub fn with_reference(mut self, cert: Arc<SaddleCertificate>, plan: MetricPlan) -> Self {
        self.reference = Some(cert);
        self.metrics = plan;
        self
    }
}

/// One iteration `k`: the parameters it used and metrics of what it produced
/// (`x^{k+1}`, `y^{k+1}` and the running averages).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub wall_s: f64,
    pub i_k: usize,
    pub sigma: f64,
    pub theta: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub t: f64,
    pub tau_tilde: f64,
    /// Lagrangian gap of the reported point (ergodic for constant steps,
    /// last iterate for accelerated steps).
    pub gap: Option<f64>,
    /// `||x^{k+1} - x*||^2`
    pub dist_sq: Option<f64>,
    /// `D_Y(y*, y^{k+1})`
    pub dy: Option<f64>,
    /// `||x^{k+1} - x*||^2` weighted by `T^k + (1 - 1/m) M`, halved.
    pub weighted_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub regime: Regime,
    pub m: usize,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Iterations,
    TimeBudget,
    Target,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Iterations => "iterations",
            StopReason::TimeBudget => "time_budget",
            StopReason::Target => "target",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: RunTrace,
    pub stop: StopReason,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_sum: Vec<f64>,
    pub y_sum: Vec<f64>,
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub max_cache_error: f64,
    pub cache_checks: usize,
    /// Filled when [`RunOptions::keep_iterates`] is set.
    pub iterates: Vec<(Vec<f64>, Vec<f64>)>,
}

impl RunResult {
    /// Uniform averages of `x^1..x^K` and `y^1..y^K`.
    pub fn ergodic_average(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        ergodic_average(&self.x_sum, &self.y_sum, self.iterations)
    }

    /// The point the run reports: ergodic average for constant steps, last
    /// iterate for accelerated steps.
    pub fn output(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.trace.regime {
            Regime::Part1 => self.ergodic_average(),
            Regime::Part2 => Ok((self.x.clone(), self.y.clone())),
        }
    }
}

pub fn ergodic_average(x_sum: &[f64], y_sum: &[f64], count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if count == 0 {
        return Err(Error::InvalidParameter("ergodic average of an empty run".into()));
    }
    let c = count as f64;
    Ok((
        x_sum.iter().map(|v| v / c).collect(),
        y_sum.iter().map(|v| v / c).collect(),
    ))
}

fn check_regime(problem: &SaddleProblem, schedule: &StepSchedule) -> Result<()> {
    ensure_len(problem.num_blocks(), schedule.m)?;
    if schedule.regime == Regime::Part2 {
        let c = problem.constants();
        if c.mu.as_slice().iter().any(|&u| u <= 0.0) {
            return Err(Error::RegimeViolation(
                "accelerated steps on a problem with mu_i = 0".into(),
            ));
        }
        if c.l_yy > 0.0 {
            return Err(Error::RegimeViolation(
                "accelerated steps on a coupling with L_yy > 0".into(),
            ));
        }
    }
    Ok(())
}

fn start_point(given: &Option<Vec<f64>>, default: Vec<f64>) -> Result<Vec<f64>> {
    match given {
        Some(v) => {
            ensure_len(default.len(), v.len())?;
            if v.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidParameter("non-finite starting point".into()));
            }
            Ok(v.clone())
        }
        None => Ok(default),
    }
}

/// Runs `options.iterations` iterations from `schedule`.
pub fn run(problem: &SaddleProblem, schedule: &StepSchedule, options: &RunOptions) -> Result<RunResult> {
    if options.iterations == 0 {
        return Err(Error::InvalidParameter("iteration count must be positive".into()));
    }
    check_regime(problem, schedule)?;
    let m = problem.num_blocks();
    let n = problem.primal_dim();
    let d = problem.dual_dim();
    let mut sampler = match &options.probs {
        Some(p) => BlockSampler::new(options.seed, p)?,
        None => BlockSampler::uniform(options.seed, m),
    };
    let mut x = start_point(&options.x0, problem.default_primal_start())?;
    let mut y = start_point(&options.y0, problem.default_dual_start())?;
    if !problem.primal_contains(&x) || !problem.h().contains(&y) {
        return Err(Error::Domain("starting point outside the domains of f and h".into()));
    }
    if let Some(cert) = &options.reference {
        ensure_len(n, cert.x_star.len())?;
        ensure_len(d, cert.y_star.len())?;
    }

    let mut g_cur = vec![0.0; d];
    problem.grad_y(&x, &y, &mut g_cur);
    let mut g_prev = g_cur.clone();
    let mut g_next = vec![0.0; d];
    let mut s = vec![0.0; d];
    let mut y_next = vec![0.0; d];
    let mut old_block = Vec::new();
    let mut grad = Vec::new();
    let mut x_sum = vec![0.0; n];
    let mut y_sum = vec![0.0; d];
    let mut sched = schedule.clone();
    let mut records = Vec::with_capacity(options.iterations / options.record_every.max(1) + 1);
    let mut max_cache_error: f64 = 0.0;
    let mut cache_checks = 0;
    let mut iterates = Vec::new();
    let start = Instant::now();
    let mu = problem.constants().mu.as_slice().to_vec();
    let mut stop = StopReason::Iterations;
    let mut done = 0;

    for k in 0..options.iterations {
        momentum_direction(&g_cur, &g_prev, m, sched.theta, &mut s);
        dual_step(problem, &y, &s, sched.sigma, &mut y_next)?;

        let i = sampler.sample();
        let r = problem.partition().range(i);
        grad.resize(r.len(), 0.0);
        problem.grad_x_block(i, &x, &y_next, &mut grad);
        old_block.clear();
        old_block.extend_from_slice(&x[r.clone()]);
        problem.primal_prox(i, sched.tau.get(i), &grad, &old_block, &mut x[r.clone()])?;

        let refresh = options.refresh_every > 0 && (k + 1) % options.refresh_every == 0;
        if refresh
            || !problem.coupling().grad_y_incremental(
                &g_cur,
                &x,
                r.clone(),
                &old_block,
                &y,
                &y_next,
                &mut g_next,
            )
        {
            problem.grad_y(&x, &y_next, &mut g_next);
        }
        std::mem::swap(&mut y, &mut y_next);
        std::mem::swap(&mut g_prev, &mut g_cur);
        std::mem::swap(&mut g_cur, &mut g_next);

        if let Some(every) = options.verify_cache_every {
            if every > 0 && (k + 1) % every == 0 {
                let mut fresh = vec![0.0; d];
                problem.grad_y(&x, &y, &mut fresh);
                let err = fresh
                    .iter()
                    .zip(&g_cur)
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                max_cache_error = max_cache_error.max(err);
                cache_checks += 1;
            }
        }

        let (nx, ny) = (norm(&x), norm(&y));
        if !(nx.is_finite() && ny.is_finite()) || nx > DIVERGENCE_NORM || ny > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                iteration: k,
                norm: nx.max(ny),
            });
        }
        x_sum.iter_mut().zip(&x).for_each(|(a, b)| *a += b);
        y_sum.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
        if options.keep_iterates {
            iterates.push((x.clone(), y.clone()));
        }

        let over_time = k % 64 == 63
            && options
                .time_budget
                .is_some_and(|b| start.elapsed().as_secs_f64() > b);
        if over_time {
            stop = StopReason::TimeBudget;
        }
        let mut last = over_time || k + 1 == options.iterations;
        let keep = last || k % options.record_every.max(1) == 0;
        let with_metrics = options.reference.is_some() && options.metrics.wants(k, last);
        if keep || with_metrics {
            let mut rec = TraceRecord {
                k,
                wall_s: start.elapsed().as_secs_f64(),
                i_k: i,
                sigma: sched.sigma,
                theta: sched.theta,
                tau_min: sched.tau.min(),
                tau_max: sched.tau.max(),
                t: sched.t,
                tau_tilde: sched.tau_tilde,
                gap: None,
                dist_sq: None,
                dy: None,
                weighted_dist: None,
            };
            if with_metrics {
                let cert = options.reference.as_ref().unwrap();
                let gap = match sched.regime {
                    Regime::Part1 => {
                        let (xb, yb) = ergodic_average(&x_sum, &y_sum, k + 1)?;
                        lagrangian_gap(problem, &xb, &yb, cert)
                    }
                    Regime::Part2 => lagrangian_gap(problem, &x, &y, cert),
                };
                rec.gap = Some(gap);
                let dx = dist_sq(&x, &cert.x_star);
                rec.dist_sq = Some(dx);
                if let Some(target) = options.target_rel_dist {
                    if dx.sqrt() <= target * norm(&cert.x_star) {
                        stop = StopReason::Target;
                        last = true;
                    }
                }
                rec.dy = Some(problem.h().distance_lenient(&cert.y_star, &y));
                let w: Vec<f64> = (0..m)
                    .map(|b| 1.0 / sched.tau.get(b) + (1.0 - 1.0 / m as f64) * mu[b])
                    .collect();
                rec.weighted_dist =
                    Some(0.5 * weighted_dist_sq(problem.partition(), &x, &cert.x_star, &w));
            }
            records.push(rec);
        }
        done = k + 1;
        if last {
            break;
        }
        if sched.regime == Regime::Part2 {
            sched = sched.advance();
        }
    }

    Ok(RunResult {
        trace: RunTrace {
            regime: schedule.regime,
            m,
            seed: options.seed,
            records,
        },
        stop,
        x,
        y,
        x_sum,
        y_sum,
        iterations: done,
        schedule: sched,
        max_cache_error,
        cache_checks,
        iterates,
    })
}
