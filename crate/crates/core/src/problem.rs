//! Saddle-point problems `min_x max_y f(x) + Phi(x, y) - h(y)` with a
//! block-separable `f = sum_i f_i(x_i)`.
//!
//! A [`SaddleProblem`] bundles the prox-friendly terms `f_i`, `h`, the smooth
//! coupling `Phi` (behind the [`Coupling`] trait) and the Lipschitz constants
//! that drive the step-size rules. Builders cover bilinear ERM, quadratic
//! games and constrained programs written in saddle form with a dual ball.

use std::fmt::Debug;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockcore::{BlockPartition, BlockVector, DiagWeights};
use crate::bregman::{Cone, GeometryKind, ProxFunction, ProxTerm, SegmentedProx};
use crate::error::{ensure_len, Error, Result};
use crate::linalg::{check_psd, dot, norm, spectral_norm};

/// Substitute for a structurally zero coupling constant `L_{yx_i}`.
pub const COUPLING_FLOOR: f64 = 1e-12;

/// The smooth convex-concave coupling `Phi(x, y)`.
pub trait Coupling: Send + Sync + Debug {
    fn primal_dim(&self) -> usize;
    fn dual_dim(&self) -> usize;
    fn value(&self, x: &[f64], y: &[f64]) -> f64;

    /// Partial gradient `grad_{x_R} Phi(x, y)` for the coordinate range `R`.
    fn grad_x_block(&self, block: Range<usize>, x: &[f64], y: &[f64], out: &mut [f64]);

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.grad_x_block(0..self.primal_dim(), x, y, out);
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    /// Updates `prev = grad_y Phi(x_old, y_old)` to `grad_y Phi(x_new, y_new)`
    /// where `x_new` differs from `x_old` only on `block` (whose old values
    /// are `old_block`). Returns `false` if no fast path exists, in which case
    /// `out` is left untouched.
    #[allow(clippy::too_many_arguments)]
    fn grad_y_incremental(
        &self,
        _prev: &[f64],
        _x_new: &[f64],
        _block: Range<usize>,
        _old_block: &[f64],
        _y_old: &[f64],
        _y_new: &[f64],
        _out: &mut [f64],
    ) -> bool {
        false
    }
}

/// Lipschitz and strong-convexity constants, one scalar per primal block.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConstants {
    pub l_xx: DiagWeights,
    pub l_yx: DiagWeights,
    pub l_yy: f64,
    pub mu: DiagWeights,
}

impl LipschitzConstants {
    pub fn new(l_xx: Vec<f64>, l_yx: Vec<f64>, l_yy: f64, mu: Vec<f64>) -> Result<Self> {
        ensure_len(l_xx.len(), l_yx.len())?;
        ensure_len(l_xx.len(), mu.len())?;
        if !(l_yy.is_finite() && l_yy >= 0.0) {
            return Err(Error::InvalidParameter(format!("L_yy = {l_yy}")));
        }
        let l_yx: Vec<f64> = l_yx.into_iter().map(|v| v.max(COUPLING_FLOOR)).collect();
        Ok(Self {
            l_xx: DiagWeights::new(l_xx)?,
            l_yx: DiagWeights::new(l_yx)?,
            l_yy,
            mu: DiagWeights::new(mu)?,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.l_xx.len()
    }

    /// Multiplies every Lipschitz constant (not the moduli) by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lipschitz scale must be positive, got {factor}"
            )));
        }
        let s = |d: &DiagWeights| d.as_slice().iter().map(|v| v * factor).collect::<Vec<_>>();
        Self::new(
            s(&self.l_xx),
            s(&self.l_yx),
            self.l_yy * factor,
            self.mu.as_slice().to_vec(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SaddleProblem {
    partition: Arc<BlockPartition>,
    f: Vec<ProxTerm>,
    h: SegmentedProx,
    coupling: Arc<dyn Coupling>,
    constants: LipschitzConstants,
    floored_blocks: Vec<usize>,
    primal_radius: f64,
    dual_radius: f64,
}

impl SaddleProblem {
    pub fn new(
        partition: Arc<BlockPartition>,
        f: Vec<ProxTerm>,
        h: SegmentedProx,
        coupling: Arc<dyn Coupling>,
        l_xx: Vec<f64>,
        l_yx: Vec<f64>,
        l_yy: f64,
    ) -> Result<Self> {
        let m = partition.num_blocks();
        ensure_len(m, f.len())?;
        ensure_len(partition.dim(), coupling.primal_dim())?;
        ensure_len(h.dim(), coupling.dual_dim())?;
        for (i, term) in f.iter().enumerate() {
            if term.len != partition.size(i) {
                return Err(Error::DimensionMismatch {
                    expected: partition.size(i),
                    found: term.len,
                });
            }
        }
        let floored_blocks = l_yx
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < COUPLING_FLOOR)
            .map(|(i, _)| i)
            .collect();
        let mu = f.iter().map(|t| t.func.modulus()).collect();
        let constants = LipschitzConstants::new(l_xx, l_yx, l_yy, mu)?;
        Ok(Self {
            partition,
            f,
            h,
            coupling,
            constants,
            floored_blocks,
            primal_radius: 1.0,
            dual_radius: 1.0,
        })
    }

    /// Radii of the boxes used to draw random points in spot checks.
    pub fn with_sample_radii(mut self, primal: f64, dual: f64) -> Self {
        self.primal_radius = primal;
        self.dual_radius = dual;
        self
    }

    pub fn with_constants(mut self, constants: LipschitzConstants) -> Result<Self> {
        ensure_len(self.num_blocks(), constants.num_blocks())?;
        self.constants = constants;
        Ok(self)
    }

    /// Same problem with a different coupling; used for fault injection.
    pub fn with_coupling(mut self, coupling: Arc<dyn Coupling>) -> Result<Self> {
        ensure_len(self.primal_dim(), coupling.primal_dim())?;
        ensure_len(self.dual_dim(), coupling.dual_dim())?;
        self.coupling = coupling;
        Ok(self)
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn primal_dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.h.dim()
    }

    pub fn f(&self) -> &[ProxTerm] {
        &self.f
    }

    pub fn h(&self) -> &SegmentedProx {
        &self.h
    }

    pub fn coupling(&self) -> &Arc<dyn Coupling> {
        &self.coupling
    }

    pub fn constants(&self) -> &LipschitzConstants {
        &self.constants
    }

    /// Blocks whose coupling constant was zero and replaced by the floor.
    pub fn floored_blocks(&self) -> &[usize] {
        &self.floored_blocks
    }

    pub fn primal_geometry(&self, i: usize) -> GeometryKind {
        self.f[i].geometry
    }

    pub fn phi(&self, x: &[f64], y: &[f64]) -> f64 {
        self.coupling.value(x, y)
    }

    pub fn grad_x_block(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.coupling.grad_x_block(self.partition.range(i), x, y, out);
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.coupling.grad_x(x, y, out);
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.coupling.grad_y(x, y, out);
    }

    pub fn f_value(&self, x: &[f64]) -> f64 {
        (0..self.num_blocks())
            .map(|i| self.f[i].func.value(&x[self.partition.range(i)]))
            .sum()
    }

    /// `L(x, y) = f(x) + Phi(x, y) - h(y)`.
    pub fn lagrangian(&self, x: &[f64], y: &[f64]) -> f64 {
        self.f_value(x) + self.phi(x, y) - self.h.value(y)
    }

    pub fn primal_contains(&self, x: &[f64]) -> bool {
        (0..self.num_blocks()).all(|i| self.f[i].func.contains(&x[self.partition.range(i)]))
    }

    pub fn project_primal(&self, x: &mut [f64]) {
        for i in 0..self.num_blocks() {
            self.f[i].func.project_domain(&mut x[self.partition.range(i)]);
        }
    }

    /// Generalized prox of `f_i`: `argmin f_i + <s, .> + D_i(., center) / t`.
    pub fn primal_prox(
        &self,
        i: usize,
        t: f64,
        s: &[f64],
        center: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.f[i].prox_into(t, s, center, out)
    }

    pub fn dual_prox(&self, t: f64, s: &[f64], center: &[f64], out: &mut [f64]) -> Result<()> {
        self.h.prox_into(t, s, center, out)
    }

    /// Random point in `dom f`, scaled to the primal sampling radius.
    pub fn sample_primal(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.primal_dim() as f64;
        let mut x = Vec::with_capacity(self.primal_dim());
        for term in &self.f {
            x.extend(sample_term(term, self.primal_radius / n.sqrt(), rng));
        }
        x
    }

    pub fn sample_dual(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.dual_dim() as f64;
        let mut y = Vec::with_capacity(self.dual_dim());
        for term in self.h.parts() {
            y.extend(sample_term(term, self.dual_radius / d.sqrt(), rng));
        }
        y
    }

    pub fn zero_primal(&self) -> BlockVector {
        BlockVector::zeros(self.partition.clone())
    }

    /// Feasible primal start: zero projected onto `dom f`, with entropy
    /// blocks at their barycenter.
    pub fn default_primal_start(&self) -> Vec<f64> {
        self.f.iter().flat_map(term_start).collect()
    }

    /// Feasible dual start, built like [`Self::default_primal_start`].
    pub fn default_dual_start(&self) -> Vec<f64> {
        self.h.parts().iter().flat_map(term_start).collect()
    }

    /// Norm of the linearized monotone operator `F(z) = (grad_x Phi, -grad_y Phi)`
    /// at `(x, y)`, by power iteration on `J^T J` with `J^T = S J S`,
    /// `S = diag(I, -I)`. Directional derivatives are central differences,
    /// which are exact when `F` is affine or quadratic.
    pub fn operator_norm_estimate(&self, x: &[f64], y: &[f64], iters: usize) -> f64 {
        let n = self.primal_dim();
        let d = self.dual_dim();
        let scale = 1.0 + norm(x).max(norm(y));
        let h = 1e-3 * scale;
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            for j in 0..n {
                xp[j] += h * v[j];
                xm[j] -= h * v[j];
            }
            for j in 0..d {
                yp[j] += h * v[n + j];
                ym[j] -= h * v[n + j];
            }
            let mut gp = vec![0.0; n + d];
            let mut gm = vec![0.0; n + d];
            self.grad_x(&xp, &yp, &mut gp[..n]);
            self.grad_y(&xp, &yp, &mut gp[n..]);
            self.grad_x(&xm, &ym, &mut gm[..n]);
            self.grad_y(&xm, &ym, &mut gm[n..]);
            (0..n + d)
                .map(|j| {
                    let s = if j < n { 1.0 } else { -1.0 };
                    s * (gp[j] - gm[j]) / (2.0 * h)
                })
                .collect()
        };
        let flip = |v: &mut Vec<f64>| v[n..].iter_mut().for_each(|e| *e = -*e);
        let mut v = vec![1.0 / ((n + d) as f64).sqrt(); n + d];
        let mut est = 0.0;
        for _ in 0..iters {
            let mut u = apply(&v);
            flip(&mut u);
            let mut w = apply(&u);
            flip(&mut w);
            let nw = norm(&w);
            if nw == 0.0 {
                break;
            }
            let next = nw.sqrt();
            v = w.iter().map(|e| e / nw).collect();
            let done = (next - est).abs() <= 1e-10 * next;
            est = next;
            if done {
                break;
            }
        }
        est
    }
}

fn term_start(term: &ProxTerm) -> Vec<f64> {
    match (term.func, term.geometry) {
        (ProxFunction::Simplex { scale }, _) => vec![scale / term.len as f64; term.len],
        (_, GeometryKind::Entropy) => vec![1.0; term.len],
        (func, _) => {
            let mut z = vec![0.0; term.len];
            func.project_domain(&mut z);
            z
        }
    }
}

fn sample_term(term: &ProxTerm, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = term.len;
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let mut z: Vec<f64> = match term.func {
        ProxFunction::Simplex { scale: s } => {
            let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
            let tot: f64 = w.iter().sum();
            return w.into_iter().map(|v| s * v / tot).collect();
        }
        ProxFunction::Box { lo, hi } => {
            return (0..len).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        }
        ProxFunction::Ball { radius } | ProxFunction::ConeDualBall { bound: radius, .. } => {
            let z: Vec<f64> = (0..len).map(|_| gauss(rng)).collect();
            let nz = norm(&z).max(1e-300);
            let r = radius * rng.random::<f64>().powf(1.0 / len as f64);
            z.into_iter().map(|v| v * r / nz).collect()
        }
        _ => (0..len).map(|_| scale * gauss(rng)).collect(),
    };
    if matches!(
        term.func,
        ProxFunction::Nonneg | ProxFunction::NonnegSquaredL2 { .. } | ProxFunction::ConeDualBall { .. }
    ) || term.geometry == GeometryKind::Entropy
    {
        z.iter_mut().for_each(|v| *v = v.abs() + 1e-3 * scale);
    }
    term.func.project_domain(&mut z);
    z
}

// ---------------------------------------------------------------------------
// Bilinear coupling

/// `Phi(x, y) = <A x, y>` with `A = [A_1, ..., A_m]`.
#[derive(Debug, Clone)]
pub struct BilinearCoupling {
    a: DMatrix<f64>,
}

impl BilinearCoupling {
    pub fn new(a: DMatrix<f64>) -> Self {
        Self { a }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl Coupling for BilinearCoupling {
    fn primal_dim(&self) -> usize {
        self.a.ncols()
    }

    fn dual_dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.a.nrows()];
        self.grad_y(x, y, &mut ax);
        dot(&ax, y)
    }

    fn grad_x_block(&self, block: Range<usize>, _x: &[f64], y: &[f64], out: &mut [f64]) {
        for (o, j) in out.iter_mut().zip(block) {
            *o = dot(self.a.column(j).as_slice(), y);
        }
    }

    fn grad_y(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.a.column(j).iter()) {
                    *o += a * xj;
                }
            }
        }
    }

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
        out.copy_from_slice(prev);
        for (j, old) in block.zip(old_block) {
            let delta = x_new[j] - old;
            if delta != 0.0 {
                for (o, a) in out.iter_mut().zip(self.a.column(j).iter()) {
                    *o += a * delta;
                }
            }
        }
        true
    }
}

/// Regularized ERM in saddle form: `Phi(x, y) = sum_i <A_i x_i, y>`.
///
/// Constants: `L_{x_i x_i} = 0`, `L_yy = 0`, `L_{y x_i} = ||A_i||_2`.
pub fn build_bilinear_erm(
    a_blocks: Vec<DMatrix<f64>>,
    f: Vec<ProxTerm>,
    h: SegmentedProx,
) -> Result<SaddleProblem> {
    if a_blocks.is_empty() {
        return Err(Error::InvalidParameter("no coupling blocks given".into()));
    }
    let d = a_blocks[0].nrows();
    for a in &a_blocks {
        ensure_len(d, a.nrows())?;
    }
    let sizes: Vec<usize> = a_blocks.iter().map(|a| a.ncols()).collect();
    let partition = Arc::new(BlockPartition::new(&sizes)?);
    let l_yx: Vec<f64> = a_blocks.iter().map(|a| spectral_norm(a.as_view())).collect();
    let n = partition.dim();
    let mut a = DMatrix::zeros(d, n);
    for (i, blk) in a_blocks.iter().enumerate() {
        a.columns_mut(partition.offsets()[i], blk.ncols()).copy_from(blk);
    }
    let m = a_blocks.len();
    SaddleProblem::new(
        partition,
        f,
        h,
        Arc::new(BilinearCoupling::new(a)),
        vec![0.0; m],
        l_yx,
        0.0,
    )
}

// ---------------------------------------------------------------------------
// Quadratic game

/// Data of `Phi(x, y) = x'Px/2 + p'x + y'Cx - y'Qy/2 - q'y`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGameSpec {
    pub p_mat: DMatrix<f64>,
    pub q_mat: DMatrix<f64>,
    pub c_mat: DMatrix<f64>,
    pub p_vec: DVector<f64>,
    pub q_vec: DVector<f64>,
}

impl QuadraticGameSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.p_mat.nrows();
        let d = self.q_mat.nrows();
        check_psd(&self.p_mat, "P")?;
        check_psd(&self.q_mat, "Q")?;
        ensure_len(d, self.c_mat.nrows())?;
        ensure_len(n, self.c_mat.ncols())?;
        ensure_len(n, self.p_vec.len())?;
        ensure_len(d, self.q_vec.len())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticCoupling {
    spec: QuadraticGameSpec,
}

impl QuadraticCoupling {
    pub fn spec(&self) -> &QuadraticGameSpec {
        &self.spec
    }
}

impl Coupling for QuadraticCoupling {
    fn primal_dim(&self) -> usize {
        self.spec.p_mat.nrows()
    }

    fn dual_dim(&self) -> usize {
        self.spec.q_mat.nrows()
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let s = &self.spec;
        let xv = DVector::from_column_slice(x);
        let yv = DVector::from_column_slice(y);
        0.5 * xv.dot(&(&s.p_mat * &xv)) + s.p_vec.dot(&xv) + yv.dot(&(&s.c_mat * &xv))
            - 0.5 * yv.dot(&(&s.q_mat * &yv))
            - s.q_vec.dot(&yv)
    }

    fn grad_x_block(&self, block: Range<usize>, x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = &self.spec;
        for (o, j) in out.iter_mut().zip(block) {
            // P symmetric: row j of P is column j
            *o = dot(s.p_mat.column(j).as_slice(), x)
                + s.p_vec[j]
                + dot(s.c_mat.column(j).as_slice(), y);
        }
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = &self.spec;
        for (i, o) in out.iter_mut().enumerate() {
            *o = -s.q_vec[i];
        }
        for (j, &xj) in x.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(s.c_mat.column(j).iter()) {
                *o += c * xj;
            }
        }
        for (j, &yj) in y.iter().enumerate() {
            for (o, q) in out.iter_mut().zip(s.q_mat.column(j).iter()) {
                *o -= q * yj;
            }
        }
    }

    fn grad_y_incremental(
        &self,
        prev: &[f64],
        x_new: &[f64],
        block: Range<usize>,
        old_block: &[f64],
        y_old: &[f64],
        y_new: &[f64],
        out: &mut [f64],
    ) -> bool {
        let s = &self.spec;
        out.copy_from_slice(prev);
        for (j, old) in block.zip(old_block) {
            let delta = x_new[j] - old;
            if delta != 0.0 {
                for (o, c) in out.iter_mut().zip(s.c_mat.column(j).iter()) {
                    *o += c * delta;
                }
            }
        }
        for (j, (yn, yo)) in y_new.iter().zip(y_old).enumerate() {
            let delta = yn - yo;
            if delta != 0.0 {
                for (o, q) in out.iter_mut().zip(s.q_mat.column(j).iter()) {
                    *o -= q * delta;
                }
            }
        }
        true
    }
}

/// Quadratic convex-concave game on the given partition.
///
/// Constants: `L_{x_i x_i} = ||P[:, R_i]||`, `L_{y x_i} = ||C[:, R_i]||`,
/// `L_yy = ||Q||`.
pub fn build_quadratic_game(
    spec: QuadraticGameSpec,
    partition: Arc<BlockPartition>,
    f: Vec<ProxTerm>,
    h: SegmentedProx,
) -> Result<SaddleProblem> {
    spec.validate()?;
    ensure_len(partition.dim(), spec.p_mat.nrows())?;
    let m = partition.num_blocks();
    let mut l_xx = Vec::with_capacity(m);
    let mut l_yx = Vec::with_capacity(m);
    for i in 0..m {
        let (off, len) = (partition.offsets()[i], partition.size(i));
        l_xx.push(spectral_norm(spec.p_mat.columns(off, len)));
        l_yx.push(spectral_norm(spec.c_mat.columns(off, len)));
    }
    let l_yy = spectral_norm(spec.q_mat.as_view());
    SaddleProblem::new(
        partition,
        f,
        h,
        Arc::new(QuadraticCoupling { spec }),
        l_xx,
        l_yx,
        l_yy,
    )
}

// ---------------------------------------------------------------------------
// Constrained programs

/// `G_j(x) = x' H_j x / 2 + a_j' x - b_j` (affine when `hess` is `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFn {
    pub hess: Option<DMatrix<f64>>,
    pub lin: DVector<f64>,
    pub offset: f64,
}

impl ConstraintFn {
    pub fn affine(lin: DVector<f64>, offset: f64) -> Self {
        Self {
            hess: None,
            lin,
            offset,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = dot(self.lin.as_slice(), x) - self.offset;
        if let Some(hm) = &self.hess {
            let xv = DVector::from_column_slice(x);
            v += 0.5 * xv.dot(&(hm * &xv));
        }
        v
    }
}

/// `min g(x) + f(x)  s.t.  G(x) in -K` with `g(x) = x' H x / 2 + c' x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSpec {
    pub g_hess: DMatrix<f64>,
    pub g_lin: DVector<f64>,
    pub constraints: Vec<ConstraintFn>,
    pub cone: Cone,
    /// Bound `B` on the norm of a dual optimal solution.
    pub dual_bound: f64,
    /// Radius of the primal region on which constants of quadratic
    /// constraints are valid; required when any constraint is quadratic.
    pub primal_radius: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConstrainedCoupling {
    spec: ConstrainedSpec,
}

impl Coupling for ConstrainedCoupling {
    fn primal_dim(&self) -> usize {
        self.spec.g_hess.nrows()
    }

    fn dual_dim(&self) -> usize {
        self.spec.constraints.len()
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let s = &self.spec;
        let xv = DVector::from_column_slice(x);
        let g = 0.5 * xv.dot(&(&s.g_hess * &xv)) + s.g_lin.dot(&xv);
        g + s
            .constraints
            .iter()
            .zip(y)
            .map(|(c, yj)| yj * c.eval(x))
            .sum::<f64>()
    }

    fn grad_x_block(&self, block: Range<usize>, x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = &self.spec;
        for (o, r) in out.iter_mut().zip(block) {
            let mut v = dot(s.g_hess.column(r).as_slice(), x) + s.g_lin[r];
            for (c, &yj) in s.constraints.iter().zip(y) {
                let mut gr = c.lin[r];
                if let Some(hm) = &c.hess {
                    gr += dot(hm.column(r).as_slice(), x);
                }
                v += yj * gr;
            }
            *o = v;
        }
    }

    fn grad_y(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.spec.constraints) {
            *o = c.eval(x);
        }
    }

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
        if self.spec.constraints.iter().any(|c| c.hess.is_some()) {
            return false;
        }
        out.copy_from_slice(prev);
        for (o, c) in out.iter_mut().zip(&self.spec.constraints) {
            *o += block
                .clone()
                .zip(old_block)
                .map(|(j, old)| c.lin[j] * (x_new[j] - old))
                .sum::<f64>();
        }
        true
    }
}

/// Saddle form of a conic-constrained program with
/// `Phi(x, y) = g(x) + <G(x), y>` and `h = indicator(K* ∩ {||y|| <= B})`.
///
/// Constants: `L_yy = 0`, `L_{y x_i} = C_i(G)`, `L_{x_i x_i} = L_i(g) + B L_i(G)`.
pub fn build_constrained(
    spec: ConstrainedSpec,
    partition: Arc<BlockPartition>,
    f: Vec<ProxTerm>,
) -> Result<SaddleProblem> {
    if !(spec.dual_bound > 0.0 && spec.dual_bound.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dual bound B must be positive, got {}",
            spec.dual_bound
        )));
    }
    if spec.constraints.is_empty() {
        return Err(Error::InvalidParameter("no constraints given".into()));
    }
    let n = partition.dim();
    ensure_len(n, spec.g_hess.nrows())?;
    ensure_len(n, spec.g_lin.len())?;
    check_psd(&spec.g_hess, "g Hessian")?;
    let quadratic = spec.constraints.iter().any(|c| c.hess.is_some());
    let radius = match (quadratic, spec.primal_radius) {
        (true, Some(r)) if r > 0.0 => r,
        (true, _) => {
            return Err(Error::InvalidParameter(
                "quadratic constraints need a positive primal radius".into(),
            ))
        }
        (false, r) => r.unwrap_or(1.0),
    };
    for (j, c) in spec.constraints.iter().enumerate() {
        ensure_len(n, c.lin.len())?;
        if let Some(hm) = &c.hess {
            check_psd(hm, &format!("Hessian of constraint {j}"))?;
            ensure_len(n, hm.nrows())?;
        }
    }
    let affine_rows: Vec<&ConstraintFn> =
        spec.constraints.iter().filter(|c| c.hess.is_none()).collect();
    let a_aff = DMatrix::from_fn(affine_rows.len(), n, |r, j| affine_rows[r].lin[j]);

    let m = partition.num_blocks();
    let mut l_xx = Vec::with_capacity(m);
    let mut l_yx = Vec::with_capacity(m);
    for i in 0..m {
        let (off, len) = (partition.offsets()[i], partition.size(i));
        let l_g = spectral_norm(spec.g_hess.columns(off, len));
        let mut l_gg_sq = 0.0;
        let mut c_sq = if affine_rows.is_empty() {
            0.0
        } else {
            spectral_norm(a_aff.columns(off, len)).powi(2)
        };
        for c in &spec.constraints {
            if let Some(hm) = &c.hess {
                let hn = spectral_norm(hm.columns(off, len));
                l_gg_sq += hn * hn;
                let lin_norm = c.lin.rows(off, len).norm();
                c_sq += (hn * radius + lin_norm).powi(2);
            }
        }
        l_xx.push(l_g + spec.dual_bound * l_gg_sq.sqrt());
        l_yx.push(c_sq.sqrt());
    }
    let h = SegmentedProx::single(ProxTerm::euclidean(
        spec.constraints.len(),
        ProxFunction::ConeDualBall {
            cone: spec.cone,
            bound: spec.dual_bound,
        },
    )?);
    let dual_radius = spec.dual_bound;
    Ok(SaddleProblem::new(
        partition,
        f,
        h,
        Arc::new(ConstrainedCoupling { spec }),
        l_xx,
        l_yx,
        0.0,
    )?
    .with_sample_radii(radius, dual_radius))
}

// ---------------------------------------------------------------------------
// Numerical checks

/// Worst relative error `|fd - g| / max(1, |g|)` between central finite
/// differences of `Phi` and the analytic gradients, over `num_points`
/// random points.
pub fn grad_check(problem: &SaddleProblem, num_points: usize, epsilon: f64, seed: u64) -> Result<f64> {
    if !(epsilon > 1e-8 && epsilon < 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {epsilon} outside (1e-8, 1e-3)"
        )));
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.primal_dim();
    let d = problem.dual_dim();
    let mut worst: f64 = 0.0;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; d];
    for _ in 0..num_points {
        let mut x = problem.sample_primal(&mut rng);
        let mut y = problem.sample_dual(&mut rng);
        for i in 0..problem.num_blocks() {
            let r = problem.partition().range(i);
            problem.grad_x_block(i, &x, &y, &mut gx[r]);
        }
        problem.grad_y(&x, &y, &mut gy);
        for j in 0..n {
            let orig = x[j];
            x[j] = orig + epsilon;
            let fp = problem.phi(&x, &y);
            x[j] = orig - epsilon;
            let fm = problem.phi(&x, &y);
            x[j] = orig;
            let fd = (fp - fm) / (2.0 * epsilon);
            worst = worst.max((fd - gx[j]).abs() / gx[j].abs().max(1.0));
        }
        for j in 0..d {
            let orig = y[j];
            y[j] = orig + epsilon;
            let fp = problem.phi(&x, &y);
            y[j] = orig - epsilon;
            let fm = problem.phi(&x, &y);
            y[j] = orig;
            let fd = (fp - fm) / (2.0 * epsilon);
            worst = worst.max((fd - gy[j]).abs() / gy[j].abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Worst normalized slacks of the Lipschitz and curvature bounds over random
/// draws. Every field is `>= 0` when the bound holds (up to `tol`).
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    /// `min (L_xx ||v|| - ||grad_{x_i} change||) / max(1, ||v||)`
    pub xx_slack: f64,
    /// `min (L_yy ||dy|| + L_yx ||v|| - ||grad_y change||) / scale`
    pub yx_slack: f64,
    /// lower side of the block curvature sandwich (convexity in `x_i`)
    pub convexity_slack: f64,
    /// upper side of the block curvature sandwich
    pub smoothness_slack: f64,
    /// concavity in `y`
    pub concavity_slack: f64,
    /// lower curvature bound in `y` (`-L_yy/2 ||dy||^2`)
    pub y_curvature_slack: f64,
    /// largest sampled ratio of gradient change to the stated constant
    pub worst_xx_ratio: f64,
    pub worst_yx_ratio: f64,
    pub draws: usize,
}

impl LipschitzReport {
    pub fn passed(&self, tol: f64) -> bool {
        [
            self.xx_slack,
            self.yx_slack,
            self.convexity_slack,
            self.smoothness_slack,
            self.concavity_slack,
            self.y_curvature_slack,
        ]
        .iter()
        .all(|&s| s >= -tol)
    }
}

pub fn lipschitz_spot_check(problem: &SaddleProblem, draws: usize, seed: u64) -> LipschitzReport {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consts = problem.constants();
    let m = problem.num_blocks();
    let d = problem.dual_dim();
    let mut rep = LipschitzReport {
        xx_slack: f64::INFINITY,
        yx_slack: f64::INFINITY,
        convexity_slack: f64::INFINITY,
        smoothness_slack: f64::INFINITY,
        concavity_slack: f64::INFINITY,
        y_curvature_slack: f64::INFINITY,
        worst_xx_ratio: 0.0,
        worst_yx_ratio: 0.0,
        draws,
    };
    let mut gy_a = vec![0.0; d];
    let mut gy_b = vec![0.0; d];
    for draw in 0..draws {
        let i = draw % m;
        let r = problem.partition().range(i);
        let xbar = problem.sample_primal(&mut rng);
        let other = problem.sample_primal(&mut rng);
        let y = problem.sample_dual(&mut rng);
        let ybar = problem.sample_dual(&mut rng);
        let mut xv = xbar.clone();
        xv[r.clone()].copy_from_slice(&other[r.clone()]);
        let v: Vec<f64> = r.clone().map(|j| xv[j] - xbar[j]).collect();
        let nv = norm(&v);

        let mut g0 = vec![0.0; r.len()];
        let mut g1 = vec![0.0; r.len()];
        problem.grad_x_block(i, &xbar, &y, &mut g0);
        problem.grad_x_block(i, &xv, &y, &mut g1);
        let dg = g0.iter().zip(&g1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let l = consts.l_xx.get(i);
        rep.xx_slack = rep.xx_slack.min((l * nv - dg) / nv.max(1.0));
        if nv > 0.0 && l > 0.0 {
            rep.worst_xx_ratio = rep.worst_xx_ratio.max(dg / (l * nv));
        }

        let phi0 = problem.phi(&xbar, &y);
        let phi1 = problem.phi(&xv, &y);
        let lin = dot(&g0, &v);
        let gap = phi1 - phi0 - lin;
        let scale = phi0.abs().max(phi1.abs()).max(1.0);
        rep.convexity_slack = rep.convexity_slack.min(gap / scale);
        rep.smoothness_slack = rep.smoothness_slack.min((0.5 * l * nv * nv - gap) / scale);

        problem.grad_y(&xv, &ybar, &mut gy_a);
        problem.grad_y(&xbar, &y, &mut gy_b);
        let dgy = gy_a
            .iter()
            .zip(&gy_b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let dy: f64 = y.iter().zip(&ybar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let bound = consts.l_yy * dy + consts.l_yx.get(i) * nv;
        rep.yx_slack = rep.yx_slack.min((bound - dgy) / bound.max(1.0));
        if bound > 0.0 {
            rep.worst_yx_ratio = rep.worst_yx_ratio.max(dgy / bound);
        }

        // curvature in y at fixed x
        let p_y = problem.phi(&xbar, &y);
        let p_ybar = problem.phi(&xbar, &ybar);
        problem.grad_y(&xbar, &ybar, &mut gy_a);
        let diff: Vec<f64> = y.iter().zip(&ybar).map(|(a, b)| a - b).collect();
        let gap_y = p_y - p_ybar - dot(&gy_a, &diff);
        let scale_y = p_y.abs().max(p_ybar.abs()).max(1.0);
        rep.concavity_slack = rep.concavity_slack.min(-gap_y / scale_y);
        rep.y_curvature_slack = rep
            .y_curvature_slack
            .min((gap_y + 0.5 * consts.l_yy * dy * dy) / scale_y);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn free(len: usize) -> ProxTerm {
        ProxTerm::euclidean(len, ProxFunction::Zero).unwrap()
    }

    fn scalar_game(p: f64, q: f64, c: f64, pv: f64, qv: f64) -> SaddleProblem {
        let spec = QuadraticGameSpec {
            p_mat: DMatrix::from_element(1, 1, p),
            q_mat: DMatrix::from_element(1, 1, q),
            c_mat: DMatrix::from_element(1, 1, c),
            p_vec: DVector::from_element(1, pv),
            q_vec: DVector::from_element(1, qv),
        };
        build_quadratic_game(
            spec,
            Arc::new(BlockPartition::single(1).unwrap()),
            vec![free(1)],
            SegmentedProx::single(free(1)),
        )
        .unwrap()
    }

    #[test]
    fn scalar_bilinear_oracle_calls() {
        let prob = build_bilinear_erm(
            vec![DMatrix::from_element(1, 1, 1.0)],
            vec![free(1)],
            SegmentedProx::single(free(1)),
        )
        .unwrap();
        let (x, y) = ([2.0], [3.0]);
        assert_eq!(prob.phi(&x, &y), 6.0);
        let mut g = [0.0];
        prob.grad_x_block(0, &x, &y, &mut g);
        assert_eq!(g, [3.0]);
        prob.grad_y(&x, &y, &mut g);
        assert_eq!(g, [2.0]);
        assert_eq!(prob.constants().l_yy, 0.0);
        assert_eq!(prob.constants().l_xx.get(0), 0.0);
    }

    #[test]
    fn zero_coupling_block_is_floored() {
        let prob = build_bilinear_erm(
            vec![DMatrix::zeros(2, 1), DMatrix::from_element(2, 1, 1.0)],
            vec![free(1), free(1)],
            SegmentedProx::single(free(2)),
        )
        .unwrap();
        assert_eq!(prob.constants().l_yx.get(0), COUPLING_FLOOR);
        assert_eq!(prob.floored_blocks(), &[0]);
        let mut g = [0.0];
        prob.grad_x_block(0, &[1.0, 1.0], &[4.0, 5.0], &mut g);
        assert_eq!(g, [0.0]);
    }

    #[test]
    fn bilinear_column_constants_match_svd() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let blocks = vec![a.columns(0, 1).into_owned(), a.columns(1, 1).into_owned()];
        // SVD oracle per block
        let oracle: Vec<f64> = blocks
            .iter()
            .map(|b| b.clone().svd(false, false).singular_values.max())
            .collect();
        let prob = build_bilinear_erm(blocks, vec![free(1), free(1)], SegmentedProx::single(free(2)))
            .unwrap();
        for i in 0..2 {
            assert!((prob.constants().l_yx.get(i) - oracle[i]).abs() < 1e-10);
        }
        assert_eq!(oracle, vec![1.0, 2.0]);
    }

    #[test]
    fn quadratic_game_constants_and_validation() {
        let prob = scalar_game(0.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(prob.constants().l_yy, 0.0);
        assert_eq!(prob.phi(&[0.0], &[0.0]), 0.0);
        let prob = scalar_game(1.0, 1.0, 2.0, -1.0, 1.0);
        // stationarity at (3/5, 1/5)
        let (x, y) = ([0.6], [0.2]);
        let mut g = [0.0];
        prob.grad_x_block(0, &x, &y, &mut g);
        assert!(g[0].abs() < 1e-15);
        prob.grad_y(&x, &y, &mut g);
        assert!(g[0].abs() < 1e-15);
        assert_eq!(prob.constants().l_yy, 1.0);

        let bad = QuadraticGameSpec {
            p_mat: DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]),
            q_mat: DMatrix::zeros(1, 1),
            c_mat: DMatrix::zeros(1, 2),
            p_vec: DVector::zeros(2),
            q_vec: DVector::zeros(1),
        };
        let res = build_quadratic_game(
            bad,
            Arc::new(BlockPartition::single(2).unwrap()),
            vec![free(2)],
            SegmentedProx::single(free(1)),
        );
        assert!(matches!(res, Err(Error::Validation(_))));
    }

    #[test]
    fn constrained_scalar_example() {
        let spec = ConstrainedSpec {
            g_hess: DMatrix::from_element(1, 1, 1.0),
            g_lin: DVector::zeros(1),
            constraints: vec![ConstraintFn::affine(DVector::from_element(1, 1.0), 1.0)],
            cone: Cone::NonnegOrthant,
            dual_bound: 10.0,
            primal_radius: None,
        };
        let prob = build_constrained(
            spec,
            Arc::new(BlockPartition::single(1).unwrap()),
            vec![free(1)],
        )
        .unwrap();
        // affine constraints: L_xx = L(g) independent of B
        assert!((prob.constants().l_xx.get(0) - 1.0).abs() < 1e-14);
        assert!((prob.constants().l_yx.get(0) - 1.0).abs() < 1e-14);
        assert_eq!(prob.constants().l_yy, 0.0);
        // KKT at (0, 0): x + y = 0, y >= 0, x <= 1, complementary
        let mut g = [0.0];
        prob.grad_x_block(0, &[0.0], &[0.0], &mut g);
        assert_eq!(g, [0.0]);
        prob.grad_y(&[0.0], &[0.0], &mut g);
        assert_eq!(g, [-1.0]);
        let mut y = [0.0];
        prob.dual_prox(1.0, &[-g[0]], &[0.0], &mut y).unwrap();
        assert_eq!(y, [0.0]);

        let bad = ConstrainedSpec {
            g_hess: DMatrix::from_element(1, 1, 1.0),
            g_lin: DVector::zeros(1),
            constraints: vec![ConstraintFn::affine(DVector::from_element(1, 1.0), 1.0)],
            cone: Cone::NonnegOrthant,
            dual_bound: 0.0,
            primal_radius: None,
        };
        assert!(build_constrained(bad, Arc::new(BlockPartition::single(1).unwrap()), vec![free(1)])
            .is_err());
    }

    #[test]
    fn cone_dual_ball_prox_orthant_then_ball() {
        let spec = ConstrainedSpec {
            g_hess: DMatrix::identity(2, 2),
            g_lin: DVector::zeros(2),
            constraints: vec![
                ConstraintFn::affine(DVector::from_vec(vec![1.0, 0.0]), 0.0),
                ConstraintFn::affine(DVector::from_vec(vec![0.0, 1.0]), 0.0),
            ],
            cone: Cone::NonnegOrthant,
            dual_bound: 1.0,
            primal_radius: None,
        };
        let prob = build_constrained(spec, Arc::new(BlockPartition::single(2).unwrap()), vec![free(2)])
            .unwrap();
        let mut y = [0.0; 2];
        prob.dual_prox(1.0, &[0.0, 0.0], &[-2.0, 3.0], &mut y).unwrap();
        assert_eq!(y, [0.0, 1.0]);
    }

    fn random_game(seed: u64, n: usize, d: usize, m: usize, q_zero: bool) -> SaddleProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |r: usize, c: usize| {
            DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
        };
        let bp = g(n, n);
        let bq = g(d, d);
        let c = g(d, n);
        let spec = QuadraticGameSpec {
            p_mat: bp.transpose() * &bp / n as f64,
            q_mat: if q_zero {
                DMatrix::zeros(d, d)
            } else {
                bq.transpose() * &bq / d as f64
            },
            c_mat: c / (n as f64).sqrt(),
            p_vec: DVector::from_element(n, 0.3),
            q_vec: DVector::from_element(d, -0.2),
        };
        let part = Arc::new(BlockPartition::uniform(n, m).unwrap());
        let f = part
            .sizes()
            .into_iter()
            .map(|s| ProxTerm::euclidean(s, ProxFunction::L1 { lambda: 0.1 }).unwrap())
            .collect();
        build_quadratic_game(
            spec,
            part,
            f,
            SegmentedProx::single(ProxTerm::euclidean(d, ProxFunction::Ball { radius: 2.0 }).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn grad_check_accuracy() {
        let bil = build_bilinear_erm(
            vec![
                DMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5),
                DMatrix::from_fn(3, 1, |i, _| i as f64 * 0.7),
            ],
            vec![free(2), free(1)],
            SegmentedProx::single(free(3)),
        )
        .unwrap();
        assert!(grad_check(&bil, 5, 1e-5, 1).unwrap() <= 1e-8);
        let game = random_game(2, 12, 5, 3, false);
        assert!(grad_check(&game, 5, 1e-5, 2).unwrap() <= 1e-6);
        assert!(grad_check(&game, 5, 1e-2, 2).is_err());
    }

    #[derive(Debug)]
    struct Corrupted(Arc<dyn Coupling>);

    impl Coupling for Corrupted {
        fn primal_dim(&self) -> usize {
            self.0.primal_dim()
        }
        fn dual_dim(&self) -> usize {
            self.0.dual_dim()
        }
        fn value(&self, x: &[f64], y: &[f64]) -> f64 {
            self.0.value(x, y)
        }
        fn grad_x_block(&self, block: Range<usize>, x: &[f64], y: &[f64], out: &mut [f64]) {
            let start = block.start;
            self.0.grad_x_block(block, x, y, out);
            if start == 0 {
                out[0] += 1.0;
            }
        }
        fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
            self.0.grad_y(x, y, out)
        }
    }

    #[test]
    fn grad_check_detects_corruption() {
        let game = random_game(3, 8, 4, 2, false);
        let bad = Arc::new(Corrupted(game.coupling().clone()));
        let game = game.with_coupling(bad).unwrap();
        assert!(grad_check(&game, 3, 1e-5, 9).unwrap() >= 0.1);
    }

    #[test]
    fn lipschitz_and_curvature_spot_checks() {
        for (seed, q_zero) in [(4, false), (5, true)] {
            let game = random_game(seed, 16, 6, 4, q_zero);
            let rep = lipschitz_spot_check(&game, 1000, seed);
            assert!(rep.passed(1e-8), "{rep:?}");
            assert!(rep.worst_xx_ratio <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn incremental_dual_gradient_matches_full() {
        use rand::Rng;
        let game = random_game(6, 12, 5, 4, false);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut full = vec![0.0; 5];
        let mut inc = vec![0.0; 5];
        for _ in 0..1000 {
            let x_old = game.sample_primal(&mut rng);
            let y_old = game.sample_dual(&mut rng);
            let y_new = game.sample_dual(&mut rng);
            let i = rng.random_range(0..4);
            let r = game.partition().range(i);
            let mut x_new = x_old.clone();
            for j in r.clone() {
                x_new[j] += rng.random_range(-1.0..1.0);
            }
            let mut prev = vec![0.0; 5];
            game.grad_y(&x_old, &y_old, &mut prev);
            assert!(game.coupling().grad_y_incremental(
                &prev,
                &x_new,
                r.clone(),
                &x_old[r],
                &y_old,
                &y_new,
                &mut inc
            ));
            game.grad_y(&x_new, &y_new, &mut full);
            for (a, b) in inc.iter().zip(&full) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn operator_norm_of_scalar_bilinear_game() {
        let prob = build_bilinear_erm(
            vec![DMatrix::from_element(1, 1, 3.0)],
            vec![free(1)],
            SegmentedProx::single(free(1)),
        )
        .unwrap();
        let l = prob.operator_norm_estimate(&[0.5], &[-1.0], 100);
        assert!((l - 3.0).abs() < 1e-8);
    }
}
