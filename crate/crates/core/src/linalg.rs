//! Dense linear-algebra helpers over nalgebra.

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Scalar};
use nalgebra::{DMatrix, DVector};

pub(crate) type CMatrix = DMatrix<Scalar>;

/// Rank-2 tensor as a complex matrix, rows along the first axis.
pub(crate) fn to_cmatrix(t: &DenseTensor) -> Result<CMatrix> {
    if t.rank() != 2 {
        return Err(Error::ShapeMismatch(format!("expected a matrix, got rank {}", t.rank())));
    }
    let d = t.dims();
    Ok(DMatrix::from_row_slice(d[0], d[1], t.data()))
}

pub(crate) fn to_rmatrix(t: &DenseTensor) -> Result<DMatrix<f64>> {
    let c = to_cmatrix(t)?;
    if c.iter().any(|z| z.im != 0.0) {
        return Err(Error::InvalidParameter("matrix has non-real entries".into()));
    }
    Ok(c.map(|z| z.re))
}

pub(crate) fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub(crate) fn lstsq_complex(a: &CMatrix, b: &DVector<Scalar>) -> Result<DVector<Scalar>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let eps = smax * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).map_err(|e| Error::Solve(e.to_string()))
}

pub(crate) fn lstsq_real(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let eps = smax * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).map_err(|e| Error::Solve(e.to_string()))
}

/// Lawson–Hanson active-set solver for `min ‖a x − b‖` subject to `x ≥ 0`.
///
/// Terminates when the dual vector `aᵀ(b − a x)` is at most `kkt_tol` (scaled
/// by `max(1, ‖aᵀb‖∞)`) on every inactive coordinate.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, kkt_tol: f64) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let scale = (a.transpose() * b).amax().max(1.0);
    let tol = kkt_tol * scale;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        for _ in 0..(3 * n + 10) {
            let cols: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = a.select_columns(cols.iter());
            let s_sub = lstsq_real(&sub, b)?;
            let mut s = DVector::<f64>::zeros(n);
            for (k, &c) in cols.iter().enumerate() {
                s[c] = s_sub[k];
            }
            if cols.iter().all(|&c| s[c] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &c in &cols {
                if s[c] <= 0.0 {
                    let denom = x[c] - s[c];
                    if denom > 0.0 {
                        alpha = alpha.min(x[c] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            x = &x + (&s - &x) * alpha;
            for &c in &cols {
                if x[c] <= 1e-15 * (1.0 + x.amax()) {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("nnls solution".into()));
    }
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(x)
}

/// Largest eigenvalue of a Hermitian matrix.
pub(crate) fn hermitian_max_eigenvalue(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let h = (m + m.adjoint()) * Scalar::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
