//! Randomized accelerated primal-dual (RAPD) solver for convex-concave
//! saddle-point problems whose primal variable splits into blocks.

pub mod baselines;
pub mod blockcore;
pub mod bregman;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod rapd;
pub mod stepsize;

pub use blockcore::{weighted_norm_sq, BlockPartition, BlockVector, DiagWeights};
pub use bregman::{
    bregman_dist, bregman_prox, three_point_check, BregmanGeometry, Cone, GeometryKind,
    ProxFunction, ProxTerm, SegmentedProx,
};
pub use error::{Error, Result};
pub use kernel::{KernelKind, KernelParams, KernelProblem};
pub use oracle::{solve_high_accuracy, OracleOptions, SaddleCertificate};
pub use problem::{Coupling, LipschitzConstants, SaddleProblem};
pub use rapd::{run, MetricPlan, RunOptions, RunResult, RunTrace, StopReason, TraceRecord};
pub use stepsize::{Regime, StepSchedule};
