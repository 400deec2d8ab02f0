//! Executes one configured method on one instance for one seed.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{mirror_prox_run, pdhg_run};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MethodKind, MethodSection, RunSection};
use crate::harness::metrics::lagrangian_gap;
use crate::linalg::{dist_sq, norm};
use crate::oracle::SaddleCertificate;
use crate::problem::SaddleProblem;
use crate::rapd::{run, MetricPlan, RunOptions, StopReason, TraceRecord};
use crate::stepsize::{default_alpha, nonuniform_weights, uniform_probabilities, Regime, StepSchedule};

/// Step schedule for the RAPD variants; `None` for the baselines.
pub fn schedule_for(method: &MethodSection, problem: &SaddleProblem) -> Result<Option<StepSchedule>> {
    let regime = match method.kind {
        MethodKind::Rapd1 => Regime::Part1,
        MethodKind::Rapd2 => Regime::Part2,
        _ => return Ok(None),
    };
    let c = problem.constants();
    let probs = method
        .probs
        .clone()
        .unwrap_or_else(|| uniform_probabilities(problem.num_blocks()));
    let alpha = method.alpha.unwrap_or_else(|| default_alpha(c));
    nonuniform_weights(c, alpha, &probs, regime, method.c_tau, method.c_sigma).map(Some)
}

/// PDHG steps: configured values, or `c_tau / (max L_xx + L)` and
/// `c_sigma / L` with `L` a power-iteration estimate of the operator norm.
pub fn pdhg_steps(method: &MethodSection, problem: &SaddleProblem) -> (f64, f64) {
    let l = || {
        problem.operator_norm_estimate(&problem.default_primal_start(), &problem.default_dual_start(), 200)
    };
    let tau = method
        .tau
        .unwrap_or_else(|| method.c_tau / (problem.constants().l_xx.max() + l()));
    let sigma = method.sigma.unwrap_or_else(|| method.c_sigma / l());
    (tau, sigma)
}

pub fn run_options(run_cfg: &RunSection, method: &MethodSection, seed: u64, cert: Option<Arc<SaddleCertificate>>) -> RunOptions {
    let mut o = RunOptions::new(run_cfg.iterations, seed);
    o.record_every = run_cfg.record_every;
    o.time_budget = run_cfg.time_budget;
    o.probs = method.probs.clone();
    if let (Some(c), Some(every)) = (cert, run_cfg.metric_every) {
        o = o.with_reference(c, MetricPlan::Every(every));
        o.target_rel_dist = run_cfg.target_rel_dist;
    }
    o
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub method: MethodKind,
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Point the method reports (ergodic or last iterate).
    pub x_out: Vec<f64>,
    pub y_out: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub elapsed_s: f64,
}

impl ExperimentOutcome {
    pub fn summary(
        &self,
        cfg: &ExperimentConfig,
        problem: &SaddleProblem,
        cert: Option<&SaddleCertificate>,
    ) -> Vec<(String, String)> {
        let mut s: Vec<(String, String)> = vec![
            ("problem".into(), cfg.problem.kind.name().into()),
            ("method".into(), self.method.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("blocks".into(), problem.num_blocks().to_string()),
            ("primal_dim".into(), problem.primal_dim().to_string()),
            ("dual_dim".into(), problem.dual_dim().to_string()),
            ("iterations".into(), self.iterations.to_string()),
            ("stop".into(), self.stop.name().into()),
            ("x_norm".into(), norm(&self.x_out).to_string()),
        ];
        if cfg.output.wall_clock {
            s.push(("elapsed_s".into(), self.elapsed_s.to_string()));
        }
        if let Some(c) = cert {
            let gap = lagrangian_gap(problem, &self.x_out, &self.y_out, c);
            let d = dist_sq(&self.x, &c.x_star);
            s.push(("final_gap".into(), gap.to_string()));
            s.push(("final_dist_sq".into(), d.to_string()));
            s.push((
                "final_rel_dist".into(),
                (d.sqrt() / norm(&c.x_star).max(f64::MIN_POSITIVE)).to_string(),
            ));
            s.push(("reference_residual".into(), c.kkt_residual.to_string()));
        }
        s
    }
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    problem: &SaddleProblem,
    cert: Option<Arc<SaddleCertificate>>,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let opts = run_options(&cfg.run, &cfg.method, seed, cert);
    let start = Instant::now();
    let kind = cfg.method.kind;
    let outcome = match kind {
        MethodKind::Rapd1 | MethodKind::Rapd2 => {
            let sched = schedule_for(&cfg.method, problem)?.unwrap();
            let r = run(problem, &sched, &opts)?;
            let (x_out, y_out) = r.output()?;
            ExperimentOutcome {
                method: kind,
                seed,
                records: r.trace.records,
                x: r.x,
                y: r.y,
                x_out,
                y_out,
                iterations: r.iterations,
                stop: r.stop,
                elapsed_s: 0.0,
            }
        }
        MethodKind::Pdhg | MethodKind::MirrorProx => {
            if opts.time_budget.is_some() || opts.target_rel_dist.is_some() {
                return Err(Error::Unsupported(format!(
                    "{} does not support run.time_budget or run.target_rel_dist",
                    kind.name()
                )));
            }
            let r = if kind == MethodKind::Pdhg {
                let (tau, sigma) = pdhg_steps(&cfg.method, problem);
                pdhg_run(problem, tau, sigma, &opts)?
            } else {
                mirror_prox_run(problem, cfg.method.lipschitz, &opts)?
            };
            ExperimentOutcome {
                method: kind,
                seed,
                records: r.records,
                x: r.x,
                y: r.y,
                x_out: r.x_bar,
                y_out: r.y_bar,
                iterations: r.iterations,
                stop: StopReason::Iterations,
                elapsed_s: 0.0,
            }
        }
    };
    Ok(ExperimentOutcome {
        elapsed_s: start.elapsed().as_secs_f64(),
        ..outcome
    })
}

/// Runs `f` on a pool of `jobs` workers, or on rayon's global pool.
pub fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// [`run_experiment`] for each seed in parallel; results keep seed order.
pub fn run_seeds(
    cfg: &ExperimentConfig,
    problem: &SaddleProblem,
    cert: Option<Arc<SaddleCertificate>>,
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<ExperimentOutcome>> {
    in_pool(jobs, || {
        seeds
            .par_iter()
            .map(|&s| run_experiment(cfg, problem, cert.clone(), s))
            .collect::<Result<Vec<_>>>()
    })?
}
