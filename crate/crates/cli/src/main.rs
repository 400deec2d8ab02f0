use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rapd_core::harness::config::ExperimentConfig;
use rapd_core::harness::experiment::{run_seeds, schedule_for};
use rapd_core::harness::instances::{build_instance, certify};
use rapd_core::harness::output::{read_certificate, write_certificate, write_summary, write_trace_csv};
use rapd_core::harness::suites::{run_suite, Suite, SuiteOptions};
use rapd_core::oracle::{solve_high_accuracy, OracleOptions};
use rapd_core::problem::{grad_check, lipschitz_spot_check};
use rapd_core::stepsize::{check_assumption2, Inequality};
use rapd_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_REGIME: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

/// Steps of a schedule verified by `check`.
const CHECK_STEPS: usize = 1000;

#[derive(Parser)]
#[command(name = "rapd", version, about = "Randomized accelerated primal-dual solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configured experiment and write traces and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a named suite across seeds and print its rate reports.
    Bench {
        #[arg(long)]
        suite: String,
        /// First seed of the ensemble.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reference solver tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Number of seeds in the ensemble.
        #[arg(long)]
        seeds: Option<usize>,
        /// Largest iteration count of the rate suites.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Verify the step-size conditions, gradients and Lipschitz constants.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute a reference saddle point and save it.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        /// Certificate file (defaults to <output.dir>/certificate.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::RegimeViolation(_)) => EXIT_REGIME,
            Some(Error::Divergence { .. }) => EXIT_DIVERGENCE,
            _ => EXIT_CONFIG,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn fail(code: u8, msg: String) -> Failure {
    Failure { code, err: anyhow!(msg) }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?)
}

fn cmd_run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, jobs: Option<usize>) -> Result<(), Failure> {
    let cfg = load(config)?;
    let seeds = seed.map_or_else(|| cfg.run.seeds.clone(), |s| vec![s]);
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let inst = build_instance(&cfg.problem, cfg.method.lipschitz_scale)?;
    let problem = &inst.problem;
    let cert = match &cfg.run.reference {
        Some(p) => Some(read_certificate(p).with_context(|| format!("reading {}", p.display()))?),
        None if cfg.run.metric_every.is_some() => Some(certify(problem, &cfg.run)?),
        None => None,
    }
    .map(Arc::new);
    let outcomes = run_seeds(&cfg, problem, cert.clone(), &seeds, jobs)?;
    for o in &outcomes {
        let header = vec![
            format!("config = {}", config.display()),
            format!("problem = {}", cfg.problem.kind.name()),
            format!("method = {}", o.method.name()),
            format!("seed = {}", o.seed),
        ];
        if cfg.output.csv {
            let path = dir.join(format!("trace_seed{}.csv", o.seed));
            write_trace_csv(&path, &header, &o.records, cfg.output.wall_clock)?;
        }
        let summary = o.summary(&cfg, problem, cert.as_deref());
        if cfg.output.summary {
            write_summary(&dir.join(format!("summary_seed{}.txt", o.seed)), &summary)?;
        }
        let line: Vec<String> = summary
            .iter()
            .filter(|(k, _)| ["seed", "iterations", "stop", "final_gap", "final_rel_dist"].contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!("{}", line.join(" "));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    suite: &str,
    seed: Option<u64>,
    out: Option<PathBuf>,
    tol: Option<f64>,
    jobs: Option<usize>,
    seeds: Option<usize>,
    iterations: Option<usize>,
) -> Result<(), Failure> {
    let suite: Suite = suite.parse()?;
    let mut opts = SuiteOptions::for_suite(suite);
    opts.base_seed = seed.unwrap_or(0);
    opts.jobs = jobs;
    if let Some(t) = tol {
        opts.oracle_tol = t;
    }
    if let Some(s) = seeds {
        opts.seeds = s;
    }
    if let Some(k) = iterations {
        opts.k_max = k;
    }
    let reports = run_suite(suite, &opts)?;
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut all_passed = true;
    for r in &reports {
        let text = r.to_text();
        println!("{text}");
        if let Some(dir) = &out {
            let path = dir.join(format!("report_{}_{}.txt", r.suite, r.method));
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        }
        all_passed &= r.passed;
    }
    if all_passed {
        Ok(())
    } else {
        Err(fail(EXIT_ACCEPTANCE, format!("suite {} did not meet its targets", suite.name())))
    }
}

fn cmd_check(config: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load(config)?;
    let seed = seed.unwrap_or(cfg.run.seeds[0]);
    let inst = build_instance(&cfg.problem, cfg.method.lipschitz_scale)?;
    let problem = &inst.problem;
    let mut regime_ok = true;
    match schedule_for(&cfg.method, problem)? {
        Some(s) => {
            let rep = check_assumption2(&s.prefix(CHECK_STEPS), problem.constants());
            for q in Inequality::ALL {
                println!("step_condition.{}={:e}", q.name(), rep.slack(q));
            }
            println!("step_condition.steps={}", rep.checked_steps);
            println!("step_condition.satisfied={}", rep.satisfied);
            if let Some((k, q)) = rep.first_violation {
                println!("step_condition.first_violation=k{k}:{}", q.name());
            }
            regime_ok = rep.satisfied;
        }
        None => println!("step_condition=not applicable to {}", cfg.method.kind.name()),
    }
    let gc = grad_check(problem, 5, 1e-5, seed)?;
    let lip = lipschitz_spot_check(problem, 500, seed);
    println!("grad_check={gc:e}");
    println!("lipschitz.xx_slack={:e}", lip.xx_slack);
    println!("lipschitz.yx_slack={:e}", lip.yx_slack);
    println!("lipschitz.worst_xx_ratio={}", lip.worst_xx_ratio);
    println!("lipschitz.worst_yx_ratio={}", lip.worst_yx_ratio);
    println!("lipschitz.passed={}", lip.passed(1e-9));
    if !regime_ok {
        return Err(fail(EXIT_REGIME, "step sizes violate the step-size condition".into()));
    }
    if gc > 1e-6 || !lip.passed(1e-9) {
        return Err(fail(EXIT_ACCEPTANCE, "gradient or Lipschitz check failed".into()));
    }
    Ok(())
}

fn cmd_oracle(config: &Path, tol: Option<f64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(config)?;
    let inst = build_instance(&cfg.problem, cfg.method.lipschitz_scale)?;
    let opts = OracleOptions::new(tol.unwrap_or(cfg.run.oracle_tol), cfg.run.oracle_max_iters);
    let cert = solve_high_accuracy(&inst.problem, &opts)?;
    let path = match out {
        Some(p) => p,
        None => {
            std::fs::create_dir_all(&cfg.output.dir)
                .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
            cfg.output.dir.join("certificate.txt")
        }
    };
    write_certificate(&path, &cert)?;
    println!(
        "certified={} kkt_residual={:e} iterations={} file={}",
        cert.certified,
        cert.kkt_residual,
        cert.iterations,
        path.display()
    );
    if cert.certified {
        Ok(())
    } else {
        Err(fail(EXIT_ACCEPTANCE, format!("residual {:e} above tolerance {:e}", cert.kkt_residual, opts.tol)))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run { config, seed, out, jobs } => cmd_run(&config, seed, out, jobs),
        Cmd::Bench {
            suite,
            seed,
            out,
            tol,
            jobs,
            seeds,
            iterations,
        } => cmd_bench(&suite, seed, out, tol, jobs, seeds, iterations),
        Cmd::Check { config, seed } => cmd_check(&config, seed),
        Cmd::Oracle { config, tol, out } => cmd_oracle(&config, tol, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
