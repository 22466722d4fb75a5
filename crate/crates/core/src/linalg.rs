//! Small dense linear-algebra helpers shared by the dynamics and analysis
//! modules.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{CoreError, Result};

/// Eigenvalues of a general real square matrix.
///
/// The plain QR iteration can fail to converge on symmetric matrices whose
/// spectrum pairs up around zero (bipartite adjacency structures do exactly
/// that), so symmetric inputs go through the tridiagonal symmetric solver
/// and the general path runs a capped Schur iteration with a deterministic
/// jitter retry before giving up.
pub fn all_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n != m.ncols() || n == 0 {
        return Err(CoreError::DimensionMismatch(
            "eigenvalues need a nonempty square matrix".into(),
        ));
    }
    if m == &m.transpose() {
        if let Some(se) = SymmetricEigen::try_new(m.clone(), 1e-14, 100_000) {
            return Ok(se.eigenvalues.iter().map(|&r| Complex::new(r, 0.0)).collect());
        }
    }
    if let Some(schur) = Schur::try_new(m.clone(), 1e-13, 200_000) {
        return Ok(schur.complex_eigenvalues().iter().copied().collect());
    }
    // nearly symmetric inputs (finite-difference Jacobians of symmetric
    // problems): symmetrize and use the robust solver
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym <= 1e-9 * scale {
        let sym = (m + m.transpose()) * 0.5;
        if let Some(se) = SymmetricEigen::try_new(sym, 1e-14, 100_000) {
            return Ok(se.eigenvalues.iter().map(|&r| Complex::new(r, 0.0)).collect());
        }
    }
    // deterministic jitter: breaks the pairing that stalls the QR sweep;
    // perturbs eigenvalues by at most ~n * jitter, far below the tolerances
    // used anywhere downstream
    let mut jitter = 1e-12 * scale;
    for _ in 0..3 {
        let perturbed = DMatrix::from_fn(n, n, |i, k| {
            m[(i, k)] + jitter * ((7 * i + 13 * k + 3) as f64).sin()
        });
        if let Some(schur) = Schur::try_new(perturbed, 1e-13, 200_000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
        jitter *= 100.0;
    }
    Err(CoreError::Numerical(
        "eigenvalue iteration failed to converge".into(),
    ))
}

/// Orthonormal basis of the zero-sum subspace of R^no, returned as the
/// columns of an `no x (no-1)` matrix.
pub fn zero_sum_basis(no: usize) -> DMatrix<f64> {
    // Gram-Schmidt on the difference vectors e_j - e_{j+1}
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(no - 1);
    for j in 0..no - 1 {
        let mut v = DVector::zeros(no);
        v[j] = 1.0;
        v[j + 1] = -1.0;
        for c in &cols {
            let proj = c.dot(&v);
            v -= c * proj;
        }
        v /= v.norm();
        cols.push(v);
    }
    DMatrix::from_columns(&cols)
}

/// Central-difference Jacobian of a vector map.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for col in 0..n {
        xp[col] = x[col] + h;
        xm[col] = x[col] - h;
        let fp = f(&xp);
        let fm = f(&xm);
        for row in 0..m {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
        xp[col] = x[col];
        xm[col] = x[col];
    }
    jac
}

/// Eigenvalues of a square matrix restricted to the column space of an
/// orthonormal basis `q`: the spectrum of `q^T m q`.
pub fn eigenvalues_restricted(m: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let reduced = q.transpose() * m * q;
    all_eigenvalues(&reduced)
}

pub fn max_real_part(eigs: &[Complex<f64>]) -> f64 {
    eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Minimum-norm least-squares solve via SVD with singular values below
/// `rcond * smax` truncated. Suited to Newton steps on fields that are
/// singular along projected-out directions.
pub fn svd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return None;
    }
    svd.solve(b, rcond * smax).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_sum_basis_is_orthonormal_and_spans() {
        for no in 2..6 {
            let q = zero_sum_basis(no);
            let gram = q.transpose() * &q;
            assert!((gram - DMatrix::identity(no - 1, no - 1)).amax() < 1e-12);
            let ones = DVector::from_element(no, 1.0);
            assert!((q.transpose() * ones).amax() < 1e-12);
        }
    }

    #[test]
    fn fd_jacobian_on_quadratic() {
        let f = |x: &DVector<f64>| {
            DVector::from_row_slice(&[x[0] * x[0], x[0] * x[1], x[1].powi(2)])
        };
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let j = fd_jacobian(f, &x, 1e-6);
        assert_abs_diff_eq!(j[(0, 0)], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(1, 0)], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(1, 1)], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(2, 1)], 4.0, epsilon = 1e-8);
    }

    #[test]
    fn svd_solve_handles_singular_systems() {
        // rank-1 matrix, rhs in range
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0, 2.0]);
        let x = svd_solve(&a, &b, 1e-12).unwrap();
        assert_abs_diff_eq!((a * x - b).norm(), 0.0, epsilon = 1e-10);
    }
}
