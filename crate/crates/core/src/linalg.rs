//! Small dense solvers used by the node model.

use nalgebra::{DMatrix, DVector};

use crate::error::{numeric, Result};

/// Solves `A X + X Aᵀ = -Q` through the Kronecker form
/// `(I ⊗ A + A ⊗ I) vec X = -vec Q`, followed by one step of iterative
/// refinement. Meant for the 6–8 dimensional drift matrices here.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(numeric("Lyapunov operands must be square and equal-sized"));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let op = id.kronecker(a) + a.kronecker(&id);
    let lu = op.lu();
    let rhs = -DVector::from_column_slice(q.as_slice());
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| numeric("Lyapunov operator is singular"))?;
    let apply = |x: &DVector<f64>| {
        let xm = DMatrix::from_column_slice(n, n, x.as_slice());
        let r = a * &xm + &xm * a.transpose();
        DVector::from_column_slice(r.as_slice())
    };
    let resid = &rhs - apply(&x);
    if let Some(dx) = lu.solve(&resid) {
        x += dx;
    }
    let xm = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&xm + xm.transpose()) * 0.5)
}

/// `‖A X + X Aᵀ + Q‖_max / ‖Q‖_max`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let r = a * x + x * a.transpose() + q;
    r.amax() / q.amax().max(f64::MIN_POSITIVE)
}

/// Eigenvalues of a real square matrix (real and imaginary parts).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<num_complex::Complex64>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(numeric("matrix has non-finite entries"));
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 100_000)
        .ok_or_else(|| numeric("eigenvalue iteration did not converge"))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| num_complex::Complex64::new(z.re, z.im))
        .collect())
}
