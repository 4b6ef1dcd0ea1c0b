//! Dense linear-algebra kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Minimum eigenvalue below which a matrix is not treated as positive definite.
pub const PD_TOL: f64 = 1e-10;

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    check_square(m)?;
    let asymmetry = max_asymmetry(m);
    if asymmetry > tol {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// `(m + mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m, SYMMETRY_TOL)?;
    let mut ev: Vec<f64> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .first()
        .copied()
        .unwrap_or(f64::NAN))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigenvalues(m)?
        .last()
        .copied()
        .unwrap_or(f64::NAN))
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> Result<bool> {
    Ok(min_eigenvalue(m)? > PD_TOL)
}

/// Largest real part over the spectrum of a general square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a)?;
    Ok(a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Hurwitz test: every eigenvalue has real part below `-1e-9`.
pub fn check_hurwitz(a: &DMatrix<f64>) -> Result<()> {
    let max_real = spectral_abscissa(a)?;
    if max_real < -1e-9 {
        Ok(())
    } else {
        Err(Error::NotHurwitz { max_real })
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Solves `AᵀP + PA = −Q` for symmetric `P` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    crate::error::check_dim(n, q.nrows())?;
    let mut k = DMatrix::zeros(n * n, n * n);
    // vec(AᵀP) = (I ⊗ Aᵀ) vec P, vec(PA) = (Aᵀ ⊗ I) vec P (column-major vec).
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            for l in 0..n {
                k[(row, l + j * n)] += a[(l, i)];
                k[(row, i + l * n)] += a[(l, j)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, (0..n * n).map(|idx| -q[(idx % n, idx / n)]));
    let sol = k.lu().solve(&rhs).ok_or(Error::Singular)?;
    let p = DMatrix::from_iterator(n, n, sol.iter().copied());
    Ok(symmetrize(&p))
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn nullspace(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_tol * smax.max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= cutoff)
        .collect();
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    basis
}

/// Least-squares particular solution of `m x = b` via SVD.
pub fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.solve(b, rel_tol * smax.max(1e-300))
        .unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

pub fn to_dmatrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    for row in rows {
        crate::error::check_dim(c, row.len())?;
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
