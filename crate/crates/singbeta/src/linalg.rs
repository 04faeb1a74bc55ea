//! Small dense symmetric-matrix helpers shared across the crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn check_square(x: &DMatrix<f64>, what: &str) -> Result<usize> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected square",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(x.nrows())
}

pub(crate) fn is_symmetric(x: &DMatrix<f64>, tol: f64) -> bool {
    let n = x.nrows();
    if n != x.ncols() {
        return false;
    }
    let scale = x.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (x[(i, j)] - x[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub(crate) fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Eigenvalues (descending) and matching eigenvector columns of a symmetric
/// matrix. Each eigenvector is sign-fixed so its largest-magnitude entry is
/// positive.
pub(crate) fn sym_eigen_desc(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let se = symmetrize(x).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(se.eigenvalues[src]);
        let mut col = se.eigenvectors.column(src).clone_owned();
        let mut imax = 0;
        for i in 1..n {
            if col[i].abs() > col[imax].abs() {
                imax = i;
            }
        }
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

/// Symmetric PSD square root.
pub(crate) fn psd_sqrt(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(x, "psd_sqrt input")?;
    let (vals, vecs) = sym_eigen_desc(x);
    let floor = -1e-10 * vals[0].abs().max(1.0);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        if vals[i] < floor {
            return Err(Error::Domain(format!(
                "matrix not positive semidefinite: eigenvalue {} = {:.3e}",
                i, vals[i]
            )));
        }
        d[(i, i)] = vals[i].max(0.0).sqrt();
    }
    Ok(&vecs * d * vecs.transpose())
}

/// Symmetric inverse square root, guarded by a condition-number cap.
pub(crate) fn psd_inv_sqrt(x: &DMatrix<f64>, cond_cap: f64) -> Result<DMatrix<f64>> {
    let n = check_square(x, "psd_inv_sqrt input")?;
    let (vals, vecs) = sym_eigen_desc(x);
    let vmax = vals[0];
    let vmin = vals[n - 1];
    if vmin <= 0.0 || vmax / vmin > cond_cap {
        return Err(Error::NearSingular { cond: vmax / vmin.max(f64::MIN_POSITIVE), cap: cond_cap });
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = 1.0 / vals[i].sqrt();
    }
    Ok(&vecs * d * vecs.transpose())
}

/// Eigenvalues of a symmetric matrix, descending.
pub(crate) fn sym_eigenvalues_desc(x: &DMatrix<f64>) -> Vec<f64> {
    sym_eigen_desc(x).0
}

/// Check symmetric PSD up to a relative tolerance.
pub(crate) fn check_psd(x: &DMatrix<f64>, what: &str) -> Result<()> {
    if !is_symmetric(x, 1e-10) {
        return Err(Error::InvalidParams(format!("{what} must be symmetric")));
    }
    let vals = sym_eigenvalues_desc(x);
    let floor = -1e-10 * vals[0].abs().max(1.0);
    if vals.iter().any(|&v| v < floor) {
        return Err(Error::InvalidParams(format!("{what} must be positive semidefinite")));
    }
    Ok(())
}
