//! Configuration, instances, metrics, suites and trace output.

pub mod config;
pub mod experiment;
pub mod instances;
pub mod metrics;
pub mod output;
pub mod suites;

pub use config::{ExperimentConfig, MethodKind, ProblemKind};
pub use experiment::{run_experiment, run_seeds, ExperimentOutcome};
pub use metrics::{lagrangian_gap, rate_bound_delta1, rate_bound_delta2, slope_fit, SlopeFit};
pub use suites::{run_suite, RatePoint, RateReport, Suite, SuiteOptions};
