//! Problem instances described by a [`ProblemSection`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockcore::BlockPartition;
use crate::bregman::{ProxFunction, ProxTerm, SegmentedProx};
use crate::error::{Error, Result};
use crate::harness::config::{ProblemKind, ProblemSection, RunSection};
use crate::kernel::{build_from_grams, build_kernel_problem, read_gram, synth_dataset, write_gram, KernelParams, KernelProblem};
use crate::oracle::{solve_high_accuracy, OracleOptions, SaddleCertificate};
use crate::problem::{build_quadratic_game, QuadraticGameSpec, SaddleProblem};

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// `P = B'B/n`, `Q = B'B/d` (or zero), `C` Gaussian scaled by `1/sqrt(n)`,
/// constant linear terms.
pub fn random_quadratic_spec(seed: u64, n: usize, d: usize, q_zero: bool) -> QuadraticGameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bp = gaussian(&mut rng, n, n);
    let bq = gaussian(&mut rng, d, d);
    let c = gaussian(&mut rng, d, n);
    QuadraticGameSpec {
        p_mat: bp.transpose() * &bp / n as f64,
        q_mat: if q_zero {
            DMatrix::zeros(d, d)
        } else {
            bq.transpose() * &bq / d as f64
        },
        c_mat: c / (n as f64).sqrt(),
        p_vec: DVector::from_element(n, 0.3),
        q_vec: DVector::from_element(d, -0.2),
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: SaddleProblem,
    pub kernel: Option<KernelProblem>,
}

fn blocks_of(part: &BlockPartition, func: ProxFunction) -> Result<Vec<ProxTerm>> {
    part.sizes().into_iter().map(|s| ProxTerm::euclidean(s, func)).collect()
}

fn kernel_instance(p: &ProblemSection, lipschitz_scale: f64) -> Result<KernelProblem> {
    let params = KernelParams {
        lambda: p.lambda,
        c: p.c,
        dual_bound: p.dual_bound,
        blocks: p.blocks,
        fold_quadratic_into_f: p.fold_quadratic_into_f,
        lipschitz_scale,
        simplex_geometry: p.simplex_geometry,
        kernels: p.kernels.clone(),
    };
    let data = synth_dataset(p.n_tr, p.features, p.seed, p.separation)?;
    match &p.gram_file {
        Some(path) if path.exists() => {
            let grams = read_gram(path)?;
            if grams.len() != p.kernels.len() {
                return Err(Error::Validation(format!(
                    "{} holds {} Gram matrices, config lists {} kernels",
                    path.display(),
                    grams.len(),
                    p.kernels.len()
                )));
            }
            build_from_grams(grams, &data.labels, &params)
        }
        Some(path) => {
            let kp = build_kernel_problem(&data, &params)?;
            write_gram(path, &kp.grams)?;
            Ok(kp)
        }
        None => build_kernel_problem(&data, &params),
    }
}

pub fn build_instance(p: &ProblemSection, lipschitz_scale: f64) -> Result<Instance> {
    if p.kind == ProblemKind::Kernel {
        let kp = kernel_instance(p, lipschitz_scale)?;
        return Ok(Instance {
            problem: kp.problem.clone(),
            kernel: Some(kp),
        });
    }
    let part = Arc::new(BlockPartition::uniform(p.n, p.blocks)?);
    let ball = SegmentedProx::single(ProxTerm::euclidean(p.d, ProxFunction::Ball { radius: p.radius })?);
    let l1 = ProxFunction::L1 { lambda: p.l1 };
    let problem = match p.kind {
        ProblemKind::Quadratic => build_quadratic_game(
            random_quadratic_spec(p.seed, p.n, p.d, false),
            part.clone(),
            blocks_of(&part, l1)?,
            ball,
        )?,
        ProblemKind::StronglyConvex => build_quadratic_game(
            random_quadratic_spec(p.seed, p.n, p.d, true),
            part.clone(),
            blocks_of(&part, ProxFunction::SquaredL2 { lambda: 0.5 * p.mu })?,
            ball,
        )?,
        ProblemKind::Bilinear => {
            // affine-bilinear: |p_j| <= l1/2 keeps f + p'x coercive
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let c = gaussian(&mut rng, p.d, p.n) / (p.n as f64).sqrt();
            let p_vec = DVector::from_fn(p.n, |_, _| p.l1 * (rng.random::<f64>() - 0.5));
            let spec = QuadraticGameSpec {
                p_mat: DMatrix::zeros(p.n, p.n),
                q_mat: DMatrix::zeros(p.d, p.d),
                c_mat: c,
                p_vec,
                q_vec: DVector::from_element(p.d, -0.2),
            };
            build_quadratic_game(spec, part.clone(), blocks_of(&part, l1)?, ball)?
        }
        ProblemKind::Kernel => unreachable!(),
    };
    let scaled = problem.constants().scaled(lipschitz_scale)?;
    Ok(Instance {
        problem: problem.with_constants(scaled)?,
        kernel: None,
    })
}

/// Solves for a reference saddle point and insists on a certified result.
pub fn certify(problem: &SaddleProblem, run: &RunSection) -> Result<SaddleCertificate> {
    let cert = solve_high_accuracy(problem, &OracleOptions::new(run.oracle_tol, run.oracle_max_iters))?;
    if !cert.certified {
        return Err(Error::Validation(format!(
            "reference solver stopped at residual {:e} after {} iterations (tolerance {:e})",
            cert.kkt_residual, cert.iterations, run.oracle_tol
        )));
    }
    Ok(cert)
}
