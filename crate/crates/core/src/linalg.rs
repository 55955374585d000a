//! Small dense helpers on top of nalgebra: sample moments and a Cholesky
//! factor with Mahalanobis / log-density evaluation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::draws::DrawSet;
use crate::error::{Error, Result};

pub fn sample_mean(draws: &DrawSet) -> DVector<f64> {
    let d = draws.dim();
    let mut m = DVector::zeros(d);
    for row in draws.rows() {
        for (a, v) in m.iter_mut().zip(row) {
            *a += v;
        }
    }
    m / draws.len() as f64
}

/// Unbiased (N − 1) sample covariance.
pub fn sample_covariance(draws: &DrawSet, mean: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = draws.len();
    let d = draws.dim();
    if n < 2 {
        return Err(Error::Size { got: n, min: 2 });
    }
    let mut cov = DMatrix::zeros(d, d);
    let mut diff = DVector::zeros(d);
    for row in draws.rows() {
        for k in 0..d {
            diff[k] = row[k] - mean[k];
        }
        cov.syger(1.0, &diff, &diff, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    Ok(cov / (n - 1) as f64)
}

/// Cholesky factor Σ = L Lᵀ of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl CholeskyFactor {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularCovariance);
        }
        let chol = Cholesky::new(sigma).ok_or(Error::SingularCovariance)?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        for i in 0..l.nrows() {
            let v = l[(i, i)];
            if !(v > 0.0) {
                return Err(Error::SingularCovariance);
            }
            log_det += 2.0 * v.ln();
        }
        if !log_det.is_finite() {
            return Err(Error::SingularCovariance);
        }
        Ok(Self { chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// (x − μ)ᵀ Σ⁻¹ (x − μ) by forward substitution with L.
    pub fn mahalanobis_sq(&self, x: &[f64], mu: &[f64]) -> f64 {
        let l = self.chol.l_dirty();
        let d = mu.len();
        let mut z = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= 16 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..d {
            let mut s = x[i] - mu[i];
            for j in 0..i {
                s -= l[(i, j)] * z[j];
            }
            z[i] = s / l[(i, i)];
            acc += z[i] * z[i];
        }
        acc
    }

    /// log N(x; μ, Σ).
    pub fn log_normal_density(&self, x: &[f64], mu: &[f64]) -> f64 {
        let d = mu.len() as f64;
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det + self.mahalanobis_sq(x, mu))
    }

    /// μ + L z.
    pub fn transform(&self, z: &[f64], mu: &[f64], out: &mut [f64]) {
        let l = self.chol.l_dirty();
        let d = mu.len();
        for i in 0..d {
            let mut s = mu[i];
            for j in 0..=i {
                s += l[(i, j)] * z[j];
            }
            out[i] = s;
        }
    }
}
