//! Dense linear-algebra helpers shared by the problem builders.

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};

use crate::error::{Error, Result};

const POWER_MAX_ITERS: usize = 1000;
const POWER_REL_TOL: f64 = 1e-12;

/// Largest singular value by power iteration on `M^T M` from the normalized
/// all-ones vector. Deterministic.
pub fn spectral_norm(m: DMatrixView<'_, f64>) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut mv = vec![0.0; rows];
    let mut w = vec![0.0; cols];
    let mut estimate = 0.0;
    for iter in 0..POWER_MAX_ITERS {
        // mv = M v, w = M^T mv
        mv.iter_mut().for_each(|x| *x = 0.0);
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for (i, x) in mv.iter_mut().enumerate() {
                    *x += m[(i, j)] * vj;
                }
            }
        }
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = (0..rows).map(|i| m[(i, j)] * mv[i]).sum();
        }
        let norm_w = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm_w == 0.0 {
            if iter == 0 {
                return fallback_max_column(m);
            }
            break;
        }
        let next = norm_w.sqrt();
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / norm_w);
        let done = (next - estimate).abs() <= POWER_REL_TOL * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

// All-ones start orthogonal to the row space: fall back to the largest
// column norm as a start, then iterate again.
fn fallback_max_column(m: DMatrixView<'_, f64>) -> f64 {
    let cols = m.ncols();
    let (best, norm) = (0..cols)
        .map(|j| (j, m.column(j).norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if norm == 0.0 {
        return 0.0;
    }
    let mut v = nalgebra::DVector::zeros(cols);
    v[best] = 1.0;
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.transpose() * (m * &v);
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        let next = nw.sqrt();
        v = w / nw;
        let done = (next - estimate).abs() <= POWER_REL_TOL * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

pub fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Validation(format!("{name} must be square")));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Validation(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

pub fn check_psd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    check_symmetric(m, name)?;
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    let scale = m.amax().max(1.0);
    if min < -1e-10 * scale {
        return Err(Error::Validation(format!(
            "{name} is indefinite (smallest eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
