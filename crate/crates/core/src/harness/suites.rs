//! Multi-seed benchmark suites and their rate reports.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::mirror_prox_run;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MethodKind, ProblemKind};
use crate::harness::experiment::{in_pool, schedule_for};
use crate::harness::instances::{build_instance, certify};
use crate::harness::metrics::{log_grid, rate_bound_delta1, rate_bound_delta2, slope_fit, SlopeFit};
use crate::harness::output::summary_text;
use crate::oracle::SaddleCertificate;
use crate::problem::{grad_check, SaddleProblem};
use crate::rapd::{run, MetricPlan, RunOptions, RunResult, StopReason};
use crate::stepsize::StepSchedule;

/// Checkpoints at which the expectation bounds are tested.
pub const CHECKPOINTS: [usize; 4] = [10, 100, 1000, 10_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Constant steps on a quadratic game with l1 blocks and a dual ball.
    Quadratic,
    /// Accelerated steps on a strongly convex game without dual curvature.
    StronglyConvex,
    /// Constant-step RAPD against mirror-prox on a bilinear game.
    Bilinear,
    /// Time to a relative accuracy on the multiple-kernel SVM.
    Kernel,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Quadratic, Suite::StronglyConvex, Suite::Bilinear, Suite::Kernel];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Quadratic => "quadratic",
            Suite::StronglyConvex => "strongly-convex",
            Suite::Bilinear => "bilinear",
            Suite::Kernel => "kernel",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown suite '{s}', expected quadratic, strongly-convex, bilinear or kernel"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seeds: usize,
    pub base_seed: u64,
    /// Worker threads; rayon's default when `None`.
    pub jobs: Option<usize>,
    pub oracle_tol: f64,
    pub oracle_max_iters: usize,
    /// Largest iteration count for the rate suites.
    pub k_max: usize,
    /// Kernel suite: accuracy target and per-run time budget in seconds.
    pub target_rel_dist: f64,
    pub time_budget: f64,
}

impl SuiteOptions {
    pub fn for_suite(suite: Suite) -> Self {
        Self {
            seeds: match suite {
                Suite::Quadratic | Suite::StronglyConvex => 50,
                Suite::Bilinear => 20,
                Suite::Kernel => 3,
            },
            base_seed: 0,
            jobs: None,
            oracle_tol: 1e-10,
            oracle_max_iters: 2_000_000,
            k_max: 10_000,
            target_rel_dist: 1e-3,
            time_budget: 60.0,
        }
    }

    /// Problem section used by the suite.
    pub fn config(&self, suite: Suite) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.run.oracle_tol = self.oracle_tol;
        cfg.run.oracle_max_iters = self.oracle_max_iters;
        match suite {
            Suite::Quadratic => {}
            Suite::StronglyConvex => {
                cfg.problem.kind = ProblemKind::StronglyConvex;
                cfg.method.kind = MethodKind::Rapd2;
            }
            Suite::Bilinear => cfg.problem.kind = ProblemKind::Bilinear,
            Suite::Kernel => {
                cfg.problem.kind = ProblemKind::Kernel;
                cfg.problem.blocks = 20;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub k: usize,
    /// Seed mean of the report's metric at iteration count `k`.
    pub mean_metric: f64,
    pub mean_dist_sq: f64,
    /// Theoretical bound with statistical slack, when one applies.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub suite: String,
    pub method: String,
    pub seeds: usize,
    pub metric: String,
    pub points: Vec<RatePoint>,
    /// `Delta_1` or `Delta_2` of the run's start point.
    pub delta: Option<f64>,
    /// Multiplier `1 + 3/sqrt(S)` applied to the bound.
    pub slack: f64,
    pub slope: Option<SlopeFit>,
    /// Which mean the slope is fitted to.
    pub slope_of: String,
    pub slope_range: (usize, usize),
    pub slope_threshold: Option<f64>,
    pub bound_ok: bool,
    pub slope_ok: bool,
    pub passed: bool,
    pub extras: Vec<(String, String)>,
}

impl RateReport {
    fn new(suite: Suite, method: &str, seeds: usize, metric: &str) -> Self {
        Self {
            suite: suite.name().into(),
            method: method.into(),
            seeds,
            metric: metric.into(),
            points: Vec::new(),
            delta: None,
            slack: 1.0 + 3.0 / (seeds as f64).sqrt(),
            slope: None,
            slope_of: String::new(),
            slope_range: (0, 0),
            slope_threshold: None,
            bound_ok: true,
            slope_ok: true,
            passed: true,
            extras: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut kv: Vec<(String, String)> = vec![
            ("suite".into(), self.suite.clone()),
            ("method".into(), self.method.clone()),
            ("seeds".into(), self.seeds.to_string()),
            ("metric".into(), self.metric.clone()),
        ];
        if let Some(d) = self.delta {
            kv.push(("delta".into(), d.to_string()));
            kv.push(("slack".into(), self.slack.to_string()));
        }
        for p in &self.points {
            let mut v = format!("mean={} mean_dist_sq={}", p.mean_metric, p.mean_dist_sq);
            if let Some(b) = p.bound {
                v.push_str(&format!(" bound={b}"));
            }
            kv.push((format!("k.{}", p.k), v));
        }
        if let Some(s) = &self.slope {
            kv.push(("slope_of".into(), self.slope_of.clone()));
            kv.push(("slope_range".into(), format!("{}..{}", self.slope_range.0, self.slope_range.1)));
            kv.push(("slope".into(), s.slope.to_string()));
            kv.push(("intercept".into(), s.intercept.to_string()));
            kv.push(("r2".into(), s.r2.to_string()));
        }
        if let Some(t) = self.slope_threshold {
            kv.push(("slope_threshold".into(), t.to_string()));
        }
        kv.extend(self.extras.iter().cloned());
        kv.push(("bound_ok".into(), self.bound_ok.to_string()));
        kv.push(("slope_ok".into(), self.slope_ok.to_string()));
        kv.push(("passed".into(), self.passed.to_string()));
        summary_text(&kv)
    }
}

/// Iteration counts with recorded metrics: the checkpoints plus a log grid
/// over the slope range.
fn metric_counts(k_max: usize, fit: (usize, usize)) -> Vec<usize> {
    let mut ks: Vec<usize> = CHECKPOINTS.iter().copied().filter(|&k| k <= k_max).collect();
    ks.extend(log_grid(fit.0, fit.1, 13));
    ks.retain(|&k| k <= k_max);
    ks.sort_unstable();
    ks.dedup();
    ks
}

fn seeds(opts: &SuiteOptions) -> Vec<u64> {
    (0..opts.seeds as u64).map(|s| opts.base_seed + s).collect()
}

fn ensemble(
    problem: &SaddleProblem,
    sched: &StepSchedule,
    cert: &Arc<SaddleCertificate>,
    ks: &[usize],
    opts: &SuiteOptions,
) -> Result<Vec<RunResult>> {
    let plan = MetricPlan::At(ks.iter().map(|k| k - 1).collect());
    let seeds = seeds(opts);
    in_pool(opts.jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut o = RunOptions::new(*ks.last().unwrap(), seed).with_reference(cert.clone(), plan.clone());
                o.record_every = usize::MAX;
                run(problem, sched, &o)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Seed means of a record field at each `k` (as iteration counts).
fn means(runs: &[RunResult], ks: &[usize], field: impl Fn(&crate::rapd::TraceRecord) -> Option<f64>) -> Vec<f64> {
    ks.iter()
        .map(|&k| {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.trace.records.iter().find(|rec| rec.k + 1 == k).and_then(&field))
                .collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        })
        .collect()
}

fn fit_over(ks: &[usize], vals: &[f64], range: (usize, usize)) -> Result<SlopeFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = ks
        .iter()
        .zip(vals)
        .filter(|(k, _)| (range.0..=range.1).contains(*k))
        .map(|(&k, &v)| (k as f64, v))
        .unzip();
    slope_fit(&xs, &ys)
}

fn prepare(suite: Suite, opts: &SuiteOptions) -> Result<(ExperimentConfig, SaddleProblem, Arc<SaddleCertificate>, StepSchedule)> {
    let cfg = opts.config(suite);
    let inst = build_instance(&cfg.problem, cfg.method.lipschitz_scale)?;
    let cert = Arc::new(certify(&inst.problem, &cfg.run)?);
    let sched = schedule_for(&cfg.method, &inst.problem)?.expect("suite methods are RAPD variants");
    Ok((cfg, inst.problem, cert, sched))
}

fn rate_report(
    suite: Suite,
    problem: &SaddleProblem,
    cert: &Arc<SaddleCertificate>,
    sched: &StepSchedule,
    opts: &SuiteOptions,
) -> Result<RateReport> {
    let fit = (100.min(opts.k_max), opts.k_max);
    let ks = metric_counts(opts.k_max, fit);
    let started = Instant::now();
    let runs = ensemble(problem, sched, cert, &ks, opts)?;
    let elapsed = started.elapsed().as_secs_f64();
    let (x0, y0) = (problem.default_primal_start(), problem.default_dual_start());
    let m = sched.m as f64;
    let dist = means(&runs, &ks, |r| r.dist_sq);
    let accelerated = sched.regime == crate::stepsize::Regime::Part2;
    let mut rep = RateReport::new(
        suite,
        if accelerated { "rapd2" } else { "rapd1" },
        opts.seeds,
        if accelerated { "weighted_dist" } else { "gap" },
    );
    let (metric, delta) = if accelerated {
        (means(&runs, &ks, |r| r.weighted_dist), rate_bound_delta2(problem, sched, &x0, &y0, cert)?)
    } else {
        (means(&runs, &ks, |r| r.gap), rate_bound_delta1(problem, sched, &x0, &y0, cert)?)
    };
    rep.delta = Some(delta);
    // t^K of the schedule that produced x^{K+1}; the same for every seed
    let t_at = |k: usize| {
        runs[0]
            .trace
            .records
            .iter()
            .find(|r| r.k + 1 == k)
            .map_or(1.0, |r| r.t)
    };
    for (i, &k) in ks.iter().enumerate() {
        let bound = if accelerated {
            m / t_at(k) * delta * rep.slack
        } else {
            m / k as f64 * delta * rep.slack
        };
        let check = CHECKPOINTS.contains(&k);
        if check && metric[i] > bound {
            rep.bound_ok = false;
        }
        rep.points.push(RatePoint {
            k,
            mean_metric: metric[i],
            mean_dist_sq: dist[i],
            bound: check.then_some(bound),
        });
    }
    let (series, name, threshold) = if accelerated {
        (&dist, "dist_sq", -1.7)
    } else {
        (&metric, "gap", -0.8)
    };
    rep.slope_of = name.into();
    rep.slope_range = fit;
    rep.slope_threshold = Some(threshold);
    match fit_over(&ks, series, fit) {
        Ok(s) => {
            rep.slope_ok = s.slope <= threshold;
            rep.slope = Some(s);
        }
        Err(e) => {
            rep.slope_ok = false;
            rep.extras.push(("slope_error".into(), e.to_string()));
        }
    }
    rep.passed = rep.bound_ok && rep.slope_ok;
    rep.extras.push(("reference_residual".into(), cert.kkt_residual.to_string()));
    rep.extras.push((
        "wall_s_per_iteration".into(),
        (elapsed / (opts.seeds * opts.k_max) as f64).to_string(),
    ));
    Ok(rep)
}

fn bilinear_reports(opts: &SuiteOptions) -> Result<Vec<RateReport>> {
    let (_, problem, cert, sched) = prepare(Suite::Bilinear, opts)?;
    let rapd = rate_report(Suite::Bilinear, &problem, &cert, &sched, opts)?;
    let ks = metric_counts(opts.k_max, (100.min(opts.k_max), opts.k_max));
    let plan = MetricPlan::At(ks.iter().map(|k| k - 1).collect());
    let mut o = RunOptions::new(opts.k_max, 0).with_reference(cert.clone(), plan);
    o.record_every = usize::MAX;
    let started = Instant::now();
    let mp = mirror_prox_run(&problem, None, &o)?;
    let elapsed = started.elapsed().as_secs_f64();
    let mut rep = RateReport::new(Suite::Bilinear, "mirror_prox", 1, "gap");
    for &k in &ks {
        if let Some(r) = mp.records.iter().find(|r| r.k + 1 == k) {
            rep.points.push(RatePoint {
                k,
                mean_metric: r.gap.unwrap_or(f64::NAN),
                mean_dist_sq: r.dist_sq.unwrap_or(f64::NAN),
                bound: None,
            });
        }
    }
    rep.extras.push(("step".into(), mp.step.to_string()));
    rep.extras.push(("wall_s_per_iteration".into(), (elapsed / opts.k_max as f64).to_string()));
    rep.passed = rep.points.iter().all(|p| p.mean_metric.is_finite());
    Ok(vec![rapd, rep])
}

fn kernel_reports(opts: &SuiteOptions) -> Result<Vec<RateReport>> {
    let mut cfg = opts.config(Suite::Kernel);
    let inst = build_instance(&cfg.problem, cfg.method.lipschitz_scale)?;
    let problem = &inst.problem;
    let started = Instant::now();
    let cert = Arc::new(certify(problem, &cfg.run)?);
    let oracle_s = started.elapsed().as_secs_f64();
    let gc = grad_check(problem, 5, 1e-5, opts.base_seed)?;
    let mut reports = Vec::new();
    for method in [MethodKind::Rapd1, MethodKind::Rapd2] {
        cfg.method.kind = method;
        let sched = schedule_for(&cfg.method, problem)?.unwrap();
        let outcomes = seeds(opts)
            .into_iter()
            .map(|seed| {
                let mut o = RunOptions::new(usize::MAX, seed).with_reference(cert.clone(), MetricPlan::Every(1000));
                o.record_every = usize::MAX;
                o.time_budget = Some(opts.time_budget);
                o.target_rel_dist = Some(opts.target_rel_dist);
                let t = Instant::now();
                let r = run(problem, &sched, &o)?;
                Ok((r.stop, r.iterations, t.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rep = RateReport::new(Suite::Kernel, method.name(), opts.seeds, "time_to_target");
        let reached = outcomes.iter().filter(|o| o.0 == StopReason::Target).count();
        let times: Vec<f64> = outcomes.iter().map(|o| o.2).collect();
        let mean_t = times.iter().sum::<f64>() / times.len().max(1) as f64;
        let max_t = times.iter().copied().fold(0.0, f64::max);
        let mean_it = outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / outcomes.len().max(1) as f64;
        rep.extras = vec![
            ("target_rel_dist".into(), opts.target_rel_dist.to_string()),
            ("time_budget_s".into(), opts.time_budget.to_string()),
            ("reached".into(), format!("{reached}/{}", opts.seeds)),
            ("mean_time_s".into(), mean_t.to_string()),
            ("max_time_s".into(), max_t.to_string()),
            ("mean_iterations".into(), mean_it.to_string()),
            ("oracle_time_s".into(), oracle_s.to_string()),
            ("oracle_iterations".into(), cert.iterations.to_string()),
            ("reference_residual".into(), cert.kkt_residual.to_string()),
            ("grad_check".into(), gc.to_string()),
        ];
        rep.bound_ok = reached == opts.seeds;
        rep.passed = rep.bound_ok && gc <= 1e-6;
        reports.push(rep);
    }
    Ok(reports)
}

/// Runs a suite across `opts.seeds` seeds and reports per method.
pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<RateReport>> {
    if opts.seeds == 0 || opts.k_max < 10 {
        return Err(Error::InvalidParameter("suites need at least one seed and k_max >= 10".into()));
    }
    match suite {
        Suite::Quadratic | Suite::StronglyConvex => {
            let (_, problem, cert, sched) = prepare(suite, opts)?;
            Ok(vec![rate_report(suite, &problem, &cert, &sched, opts)?])
        }
        Suite::Bilinear => bilinear_reports(opts),
        Suite::Kernel => kernel_reports(opts),
    }
}
