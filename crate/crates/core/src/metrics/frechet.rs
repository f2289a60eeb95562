use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Symmetry tolerance, relative to the largest absolute entry.
const SYMMETRY_TOL: f64 = 1e-9;

/// Gaussian fit of a sample set: mean and unbiased (N−1) covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct FrechetStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl FrechetStats {
    pub fn from_samples(x: &Tensor) -> Result<Self> {
        if x.rank() != 2 {
            return Err(Error::shape("frechet", format!("samples must be [N, d], got {:?}", x.shape())));
        }
        if !x.all_finite() {
            return Err(Error::Format("non-finite sample values".into()));
        }
        let (n, d) = x.rows_cols();
        if n < 2 {
            return Err(Error::Contract("need at least two samples for a covariance".into()));
        }
        if n < d + 1 {
            log::warn!("Fréchet statistics from {n} samples in {d} dimensions are rank deficient");
        }
        let m = DMatrix::from_row_slice(n, d, x.values());
        let mean = DVector::from_iterator(d, m.column_iter().map(|c| c.sum() / n as f64));
        let mut centered = m;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let covariance = centered.transpose() * &centered / (n as f64 - 1.0);
        Ok(Self { mean, covariance })
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::shape("matrix_sqrt_psd", format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Contract(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// Principal square root of a symmetric PSD matrix via eigendecomposition;
/// slightly negative eigenvalues from round-off are clamped to zero.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// `‖μ_A − μ_B‖² + Tr(Σ_A + Σ_B − 2(Σ_A Σ_B)^{1/2})`.
///
/// The trace of the non-symmetric product's root is taken as
/// `Tr((√Σ_A Σ_B √Σ_A)^{1/2})`, which has the same eigenvalues.
pub fn frechet_from_stats(a: &FrechetStats, b: &FrechetStats) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::shape("frechet", format!("dimensions {} vs {}", a.mean.len(), b.mean.len())));
    }
    let diff = &a.mean - &b.mean;
    let sa = matrix_sqrt_psd(&a.covariance)?;
    let inner = &sa * &b.covariance * &sa;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = SymmetricEigen::new(inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum::<f64>();
    let value = diff.norm_squared() + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// Fréchet distance between the Gaussian fits of two `[N, d]` sample sets.
pub fn frechet_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    frechet_from_stats(&FrechetStats::from_samples(a)?, &FrechetStats::from_samples(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((matrix_sqrt_psd(&i).unwrap() - &i).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let s = matrix_sqrt_psd(&d).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((s - expected).amax() < 1e-14);
    }

    #[test]
    fn sqrt_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matrix_sqrt_psd(&m).is_err());
    }

    #[test]
    fn sqrt_reconstructs_gram_matrix() {
        let a = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let m = a.transpose() * &a;
        let s = matrix_sqrt_psd(&m).unwrap();
        assert!((&s * &s - &m).norm() < 1e-8 * m.norm());
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let x = Tensor::matrix(6, 2, vec![0.1, 0.2, 0.5, 0.1, 0.9, 0.4, 0.3, 0.3, 0.2, 0.8, 0.7, 0.6]).unwrap();
        assert!(frechet_distance(&x, &x).unwrap() < 1e-6);
    }

    #[test]
    fn non_finite_rejected_at_tensor_boundary() {
        assert!(Tensor::matrix(2, 1, vec![0.0, f64::NAN]).is_err());
    }
}
