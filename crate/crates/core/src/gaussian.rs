//! Multivariate Gaussians with possibly singular covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Gaussian with mean, positive semidefinite covariance and a list of
/// coordinates pinned to exact values.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    pinned: Vec<(usize, f64)>,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::with_pinned(mean, covariance, Vec::new())
    }

    /// Pinned coordinates must have zero rows and columns in the covariance.
    pub fn with_pinned(mean: DVector<f64>, covariance: DMatrix<f64>, pinned: Vec<(usize, f64)>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(Error::InvalidParameter(format!(
                "covariance shape {:?} does not match mean length {n}",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mean or covariance".into()));
        }
        let scale = covariance.amax();
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!(
                "covariance not symmetric (deviation {asym:.3e})"
            )));
        }
        if n > 0 {
            let min = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
            if min < -1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "covariance not positive semidefinite (eigenvalue {min:.3e})"
                )));
            }
        }
        let mut mean = mean;
        for &(i, v) in &pinned {
            if i >= n {
                return Err(Error::InvalidParameter(format!("pinned index {i} out of range")));
            }
            if covariance.row(i).amax() > 0.0 || covariance.column(i).amax() > 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "pinned coordinate {i} has non-zero variance"
                )));
            }
            mean[i] = v;
        }
        Ok(Self {
            mean,
            covariance,
            pinned,
        })
    }

    /// One-dimensional Gaussian; zero variance pins the value.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        let pinned = if variance == 0.0 { vec![(0, mean)] } else { Vec::new() };
        Self::with_pinned(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
            pinned,
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    pub fn pinned(&self) -> &[(usize, f64)] {
        &self.pinned
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned.iter().any(|(j, _)| *j == i)
    }

    /// Marginal over the listed coordinates, in the given order.
    pub fn marginal(&self, idx: &[usize]) -> Result<GaussianDist> {
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.covariance[(idx[a], idx[b])]);
        let pinned = idx
            .iter()
            .enumerate()
            .filter(|(_, &i)| self.is_pinned(i))
            .map(|(a, &i)| (a, self.mean[i]))
            .collect();
        GaussianDist::with_pinned(mean, cov, pinned)
    }

    /// Log density over the free coordinates. Requires a non-singular
    /// covariance on them and pinned coordinates at their values.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::InvalidParameter("point dimension mismatch".into()));
        }
        for &(i, v) in &self.pinned {
            if x[i] != v {
                return Ok(f64::NEG_INFINITY);
            }
        }
        let free: Vec<usize> = (0..self.dim()).filter(|i| !self.is_pinned(*i)).collect();
        let k = free.len();
        if k == 0 {
            return Ok(0.0);
        }
        let cov = DMatrix::from_fn(k, k, |a, b| self.covariance[(free[a], free[b])]);
        let d = DVector::from_iterator(k, free.iter().map(|&i| x[i] - self.mean[i]));
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Degenerate("covariance singular on free coordinates".into()))?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let q = d.dot(&chol.solve(&d));
        Ok(-0.5 * (q + log_det + k as f64 * (2.0 * std::f64::consts::PI).ln()))
    }

    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Draws one sample through the eigendecomposition, so singular
    /// covariances are fine.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let eig = SymmetricEigen::new(self.covariance.clone());
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let scaled = DVector::from_fn(self.dim(), |i, _| eig.eigenvalues[i].max(0.0).sqrt() * z[i]);
        &self.mean + eig.eigenvectors * scaled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn scalar_density_is_normalised() {
        let g = GaussianDist::scalar(0.3, 0.04).unwrap();
        let h = 1e-3;
        let total: f64 = (-2000..2000)
            .map(|k| g.density(&DVector::from_element(1, 0.3 + k as f64 * h)).unwrap() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_variance_pins() {
        let g = GaussianDist::scalar(2.0, 0.0).unwrap();
        assert_eq!(g.pinned(), &[(0, 2.0)]);
        assert_eq!(
            g.log_density(&DVector::from_element(1, 1.0)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianDist::new(DVector::zeros(2), c).is_err());
    }

    #[test]
    fn samples_reproduce_covariance() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let g = GaussianDist::new(DVector::from_vec(vec![1.0, -1.0]), c.clone()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 40_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let d = g.sample(&mut rng) - g.mean();
            acc += &d * d.transpose();
        }
        acc /= n as f64;
        assert!((acc - c).amax() < 0.05);
    }
}
