use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` for symmetric positive semi-definite `a`.
///
/// Cholesky when `a` is positive definite, otherwise the minimum-norm
/// least-squares solution from an SVD.
pub(crate) fn solve_psd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let scale = a
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let svd = a.svd(true, true);
    let x = svd
        .solve(b, scale * 1e-12)
        .map_err(|e| Error::Singular(e.to_string()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("non-finite solution".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_and_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_psd(a.clone(), &b).unwrap();
        assert!((&a * &x - &b).norm() < 1e-12);

        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve_psd(s, &DVector::from_vec(vec![2.0, 2.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }
}
