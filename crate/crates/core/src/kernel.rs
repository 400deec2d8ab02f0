//! Multiple-kernel learning for an l2 soft-margin SVM, cast as a saddle
//! problem whose primal variable is the SVM dual vector `x >= 0` and whose
//! dual variable is `(y, z)`: kernel weights on the unit simplex and the
//! multiplier of `b'x = 0`.
//!
//! `Phi(x, y, z) = -2 e'x + sum_l w_l y_l x'G_l x + lam ||x||^2 + z b'x` with
//! `G_l = diag(b) K_l diag(b)` and `w_l = c / r_l`, `r_l = trace(K_l)`.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockcore::BlockPartition;
use crate::bregman::{GeometryKind, ProxFunction, ProxTerm, SegmentedProx};
use crate::error::{ensure_len, Error, Result};
use crate::linalg::{dot, spectral_norm};
use crate::problem::{Coupling, SaddleProblem};

pub const GRAM_MAGIC: &[u8; 6] = b"RAPDK1";
pub const DEFAULT_BANDWIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `(1 + a'b)^2`
    Poly2,
    /// `exp(-0.5 ||a - b||^2 / bw)`
    Gauss { bw: f64 },
    /// `a'b`
    Linear,
}

impl KernelKind {
    /// The three kernels of the standard experiment.
    pub fn standard() -> [KernelKind; 3] {
        [
            KernelKind::Poly2,
            KernelKind::Gauss {
                bw: DEFAULT_BANDWIDTH,
            },
            KernelKind::Linear,
        ]
    }
}

pub fn kernel_eval(kind: KernelKind, a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len(a.len(), b.len())?;
    Ok(match kind {
        KernelKind::Poly2 => (1.0 + dot(a, b)).powi(2),
        KernelKind::Gauss { bw } => {
            let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
            (-0.5 * d2 / bw).exp()
        }
        KernelKind::Linear => dot(a, b),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDataset {
    /// One training point per row.
    pub points: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub seed: u64,
    pub separation: f64,
}

impl KernelDataset {
    pub fn validate(&self) -> Result<()> {
        ensure_len(self.points.nrows(), self.labels.len())?;
        if self.labels.iter().any(|&b| b != 1.0 && b != -1.0) {
            return Err(Error::Validation("labels must be +1 or -1".into()));
        }
        if self.labels.len() < 2
            || !self.labels.contains(&1.0)
            || !self.labels.contains(&-1.0)
        {
            return Err(Error::Validation("both classes must be present".into()));
        }
        Ok(())
    }
}

/// Two unit-covariance Gaussian clusters at `+-separation e_1`, labels
/// alternating `+1, -1`.
pub fn synth_dataset(n_tr: usize, d: usize, seed: u64, separation: f64) -> Result<KernelDataset> {
    if n_tr < 10 || d < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs n_tr >= 10 and d >= 2, got {n_tr}, {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<f64> = (0..n_tr).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let mut points = DMatrix::zeros(n_tr, d);
    for i in 0..n_tr {
        for j in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            points[(i, j)] = g + if j == 0 { separation * labels[i] } else { 0.0 };
        }
    }
    Ok(KernelDataset {
        points,
        labels,
        seed,
        separation,
    })
}

/// `K_ij / sqrt(K_ii K_jj)`.
pub fn normalize_gram(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    let diag: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Validation(format!(
            "kernel diagonal entry {i} is {}, cannot normalize",
            diag[i]
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (diag[i] * diag[j]).sqrt()))
}

pub fn gram_matrix(kind: KernelKind, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| points.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(kind, &rows[i], &rows[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `diag(b) K diag(b)`.
pub fn label_gram(k: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| b[i] * k[(i, j)] * b[j])
}

pub fn write_gram(path: &Path, grams: &[DMatrix<f64>]) -> Result<()> {
    let n = grams.first().map_or(0, |g| g.nrows());
    let mut buf = Vec::with_capacity(14 + grams.len() * n * n * 8);
    buf.extend_from_slice(GRAM_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(grams.len() as u32).to_le_bytes());
    for g in grams {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.nrows(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                buf.extend_from_slice(&g[(i, j)].to_le_bytes());
            }
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_gram(path: &Path) -> Result<Vec<DMatrix<f64>>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 14 || &bytes[..6] != GRAM_MAGIC {
        return Err(Error::Io(format!("{} is not a Gram matrix file", path.display())));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if bytes.len() != 14 + count * n * n * 8 {
        return Err(Error::Io(format!(
            "{}: expected {} bytes of matrix data, found {}",
            path.display(),
            count * n * n * 8,
            bytes.len() - 14
        )));
    }
    let mut vals = bytes[14..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Ok((0..count)
        .map(|_| DMatrix::from_row_iterator(n, n, vals.by_ref().take(n * n)))
        .collect())
}

#[derive(Debug, Clone)]
pub struct KernelCoupling {
    g: Vec<DMatrix<f64>>,
    w: Vec<f64>,
    b: Vec<f64>,
    lambda: f64,
}

impl KernelCoupling {
    fn quad(&self, l: usize, x: &[f64]) -> f64 {
        let g = &self.g[l];
        x.iter()
            .enumerate()
            .map(|(j, &xj)| if xj == 0.0 { 0.0 } else { xj * dot(g.column(j).as_slice(), x) })
            .sum()
    }
}

impl Coupling for KernelCoupling {
    fn primal_dim(&self) -> usize {
        self.b.len()
    }

    fn dual_dim(&self) -> usize {
        self.g.len() + 1
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let m = self.g.len();
        let mut v = -2.0 * x.iter().sum::<f64>() + self.lambda * dot(x, x) + y[m] * dot(&self.b, x);
        for l in 0..m {
            v += self.w[l] * y[l] * self.quad(l, x);
        }
        v
    }

    fn grad_x_block(&self, block: Range<usize>, x: &[f64], y: &[f64], out: &mut [f64]) {
        let m = self.g.len();
        for (o, j) in out.iter_mut().zip(block) {
            let mut v = -2.0 + 2.0 * self.lambda * x[j] + y[m] * self.b[j];
            for l in 0..m {
                let c = 2.0 * self.w[l] * y[l];
                if c != 0.0 {
                    v += c * dot(self.g[l].column(j).as_slice(), x);
                }
            }
            *o = v;
        }
    }

    fn grad_y(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        let m = self.g.len();
        for l in 0..m {
            out[l] = self.w[l] * self.quad(l, x);
        }
        out[m] = dot(&self.b, x);
    }

    // x_new'Gx_new - x_old'Gx_old = sum_{j in R} d_j (2 (G x_new)_j - (G_RR d)_j)
    fn grad_y_incremental(
        &self,
        prev: &[f64],
        x_new: &[f64],
        block: Range<usize>,
        old_block: &[f64],
        _y_old: &[f64],
        _y_new: &[f64],
        out: &mut [f64],
    ) -> bool {
        let m = self.g.len();
        let delta: Vec<f64> = block.clone().zip(old_block).map(|(j, o)| x_new[j] - o).collect();
        out.copy_from_slice(prev);
        for l in 0..m {
            let g = &self.g[l];
            let mut change = 0.0;
            for (a, j) in block.clone().enumerate() {
                if delta[a] == 0.0 {
                    continue;
                }
                let col = g.column(j);
                let gx = dot(col.as_slice(), x_new);
                let grr: f64 = block.clone().zip(&delta).map(|(r, dr)| col[r] * dr).sum();
                change += delta[a] * (2.0 * gx - grr);
            }
            out[l] += self.w[l] * change;
        }
        out[m] += block.zip(&delta).map(|(j, dj)| self.b[j] * dj).sum::<f64>();
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub lambda: f64,
    /// Trace budget `c`; defaults to `sum_l r_l`.
    pub c: Option<f64>,
    /// Bound `B` on `||x*||`; defaults to `2 sqrt(n_tr) / lambda`.
    pub dual_bound: Option<f64>,
    pub blocks: usize,
    /// Move `lambda ||x||^2` from `Phi` into `f_i`, giving `mu_i = 2 lambda`.
    pub fold_quadratic_into_f: bool,
    /// Global factor on every Lipschitz constant.
    pub lipschitz_scale: f64,
    pub simplex_geometry: GeometryKind,
    pub kernels: Vec<KernelKind>,
}

impl KernelParams {
    pub fn new(lambda: f64, blocks: usize) -> Self {
        Self {
            lambda,
            c: None,
            dual_bound: None,
            blocks,
            fold_quadratic_into_f: true,
            lipschitz_scale: 1.0,
            simplex_geometry: GeometryKind::Euclidean,
            kernels: KernelKind::standard().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelProblem {
    /// Normalized Gram matrices `K_l`.
    pub grams: Vec<DMatrix<f64>>,
    pub labels: Vec<f64>,
    pub traces: Vec<f64>,
    pub c: f64,
    pub lambda: f64,
    pub dual_bound: f64,
    pub problem: SaddleProblem,
}

impl KernelProblem {
    /// Kernel weights `eta_l = c y_l / r_l` of the original formulation.
    pub fn eta(&self, y: &[f64]) -> Vec<f64> {
        self.traces.iter().zip(y).map(|(r, yl)| self.c * yl / r).collect()
    }
}

pub fn build_kernel_problem(data: &KernelDataset, params: &KernelParams) -> Result<KernelProblem> {
    data.validate()?;
    let grams = params
        .kernels
        .iter()
        .map(|&k| normalize_gram(&gram_matrix(k, &data.points)?))
        .collect::<Result<Vec<_>>>()?;
    build_from_grams(grams, &data.labels, params)
}

/// Builds the saddle problem from precomputed (normalized) Gram matrices.
pub fn build_from_grams(
    grams: Vec<DMatrix<f64>>,
    labels: &[f64],
    params: &KernelParams,
) -> Result<KernelProblem> {
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {}",
            params.lambda
        )));
    }
    if grams.is_empty() {
        return Err(Error::InvalidParameter("at least one kernel is required".into()));
    }
    let n = labels.len();
    for k in &grams {
        ensure_len(n, k.nrows())?;
        crate::linalg::check_symmetric(k, "kernel matrix")?;
    }
    KernelDataset {
        points: DMatrix::zeros(n, 0),
        labels: labels.to_vec(),
        seed: 0,
        separation: 0.0,
    }
    .validate()?;
    let traces: Vec<f64> = grams.iter().map(|k| k.trace()).collect();
    let c = params.c.unwrap_or_else(|| traces.iter().sum());
    let bound = params.dual_bound.unwrap_or(2.0 * (n as f64).sqrt() / params.lambda);
    if !(c > 0.0 && bound > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c and B must be positive, got {c}, {bound}"
        )));
    }
    let g: Vec<DMatrix<f64>> = grams.iter().map(|k| label_gram(k, labels)).collect();
    let partition = Arc::new(BlockPartition::uniform(n, params.blocks)?);
    let m = partition.num_blocks();
    let mut l_xx = Vec::with_capacity(m);
    let mut l_yx = Vec::with_capacity(m);
    for i in 0..m {
        let (off, len) = (partition.offsets()[i], partition.size(i));
        let mut gu_max: f64 = 0.0;
        let mut yx_max: f64 = 0.0;
        for gl in &g {
            let gu = spectral_norm(gl.columns(off, len));
            let ugu = spectral_norm(gl.view((off, off), (len, len)));
            gu_max = gu_max.max(gu);
            yx_max = yx_max.max(gu + ugu / m as f64);
        }
        l_xx.push(6.0 * gu_max);
        l_yx.push(6.0 * 3f64.sqrt() * bound * yx_max);
    }
    let f_func = if params.fold_quadratic_into_f {
        ProxFunction::NonnegSquaredL2 {
            lambda: params.lambda,
        }
    } else {
        ProxFunction::Nonneg
    };
    let f = partition
        .sizes()
        .into_iter()
        .map(|s| ProxTerm::euclidean(s, f_func))
        .collect::<Result<Vec<_>>>()?;
    let h = SegmentedProx::new(vec![
        ProxTerm::new(
            grams.len(),
            ProxFunction::Simplex { scale: 1.0 },
            params.simplex_geometry,
        )?,
        ProxTerm::euclidean(1, ProxFunction::Zero)?,
    ])?;
    let coupling = KernelCoupling {
        w: traces.iter().map(|r| c / r).collect(),
        g,
        b: labels.to_vec(),
        lambda: if params.fold_quadratic_into_f { 0.0 } else { params.lambda },
    };
    let problem = SaddleProblem::new(partition, f, h, Arc::new(coupling), l_xx, l_yx, 0.0)?
        .with_sample_radii(0.5 * bound, 1.0);
    let scaled = problem.constants().scaled(params.lipschitz_scale)?;
    let problem = problem.with_constants(scaled)?;
    Ok(KernelProblem {
        grams,
        labels: labels.to_vec(),
        traces,
        c,
        lambda: params.lambda,
        dual_bound: bound,
        problem,
    })
}
