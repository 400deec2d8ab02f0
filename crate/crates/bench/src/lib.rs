//! Fixtures shared by the benchmarks.

use rapd_core::harness::config::{ExperimentConfig, ProblemKind};
use rapd_core::harness::instances::build_instance;
use rapd_core::stepsize::{part1_schedule, part2_init};
use rapd_core::{SaddleProblem, StepSchedule};

/// A synthetic instance of `kind` with `n` primal coordinates in `blocks` blocks.
pub fn instance(kind: ProblemKind, n: usize, blocks: usize) -> SaddleProblem {
    let mut p = ExperimentConfig::default().problem;
    p.kind = kind;
    p.n = n;
    p.blocks = blocks;
    if kind == ProblemKind::Kernel {
        p.n_tr = n;
    }
    build_instance(&p, 1.0).expect("benchmark instance").problem
}

/// Default schedule for the regime the instance supports.
pub fn schedule(problem: &SaddleProblem) -> StepSchedule {
    let c = problem.constants();
    let alpha = c.l_yx.max();
    if c.mu.min() > 0.0 && c.l_yy == 0.0 {
        part2_init(c, alpha, 0.99).expect("accelerated schedule")
    } else {
        part1_schedule(c, alpha, 0.99, 0.99).expect("constant schedule")
    }
}
