use std::f64::consts::PI;

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::rng::{seeded, standard_normal, Stream};

use super::{attach_densities, TargetModel};

/// x_i | μ ~ N_d(μ, I), μ ~ N_d(0, s I).
#[derive(Debug, Clone)]
pub struct GaussianConjugateModel {
    dim: usize,
    n: usize,
    prior_scale: f64,
    data: Vec<f64>,
    mean: Vec<f64>,
    within_ss: f64,
}

impl GaussianConjugateModel {
    /// Row-major `n × d` observations.
    pub fn from_data(dim: usize, data: Vec<f64>, prior_scale: f64) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid("data must be a nonempty n × d matrix"));
        }
        if !(prior_scale > 0.0 && prior_scale.is_finite()) {
            return Err(Error::invalid("prior scale must be positive"));
        }
        let n = data.len() / dim;
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let within_ss = data
            .chunks_exact(dim)
            .flat_map(|row| row.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)))
            .sum();
        Ok(Self { dim, n, prior_scale, data, mean, within_ss })
    }

    /// Simulates `n` observations around `true_mean` with a dedicated data seed.
    pub fn simulate(dim: usize, n: usize, prior_scale: f64, true_mean: &[f64], data_seed: u64) -> Result<Self> {
        if true_mean.len() != dim {
            return Err(Error::Dimension { expected: dim, got: true_mean.len() });
        }
        let mut rng = seeded(data_seed);
        let data = (0..n).flat_map(|_| true_mean.to_vec()).map(|m| m + standard_normal(&mut rng)).collect();
        Self::from_data(dim, data, prior_scale)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }

    pub fn data_mean(&self) -> &[f64] {
        &self.mean
    }

    /// m̂ = n x̄ / (n + 1/s).
    pub fn posterior_mean(&self) -> Vec<f64> {
        let denom = self.n as f64 + 1.0 / self.prior_scale;
        self.mean.iter().map(|m| self.n as f64 * m / denom).collect()
    }

    /// ŝ = 1 / (n + 1/s), the posterior variance of each coordinate.
    pub fn posterior_variance(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0 / self.prior_scale)
    }
}

impl TargetModel for GaussianConjugateModel {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let s = self.prior_scale;
        let sq: f64 = theta.iter().map(|t| t * t).sum();
        -0.5 * self.dim as f64 * (2.0 * PI * s).ln() - 0.5 * sq / s
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let n = self.n as f64;
        let between: f64 = self.mean.iter().zip(theta).map(|(m, t)| (m - t).powi(2)).sum();
        -0.5 * n * self.dim as f64 * (2.0 * PI).ln() - 0.5 * (self.within_ss + n * between)
    }

    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet> {
        let m = self.posterior_mean();
        let sd = self.posterior_variance().sqrt();
        let draws = (0..n).flat_map(|_| m.clone()).map(|mj| mj + sd * standard_normal(rng)).collect();
        attach_densities(self, draws)
    }

    /// Per coordinate, x_{·j} ~ N(0, I + s 11ᵀ); det = 1 + ns and
    /// (I + s 11ᵀ)⁻¹ = I − s/(1 + ns) 11ᵀ.
    fn exact_log_evidence(&self) -> Option<f64> {
        let n = self.n as f64;
        let s = self.prior_scale;
        let mut total = 0.0;
        for j in 0..self.dim {
            let (sum, sumsq) = self
                .data
                .chunks_exact(self.dim)
                .map(|r| r[j])
                .fold((0.0, 0.0), |(a, b), x| (a + x, b + x * x));
            let quad = sumsq - s * sum * sum / (1.0 + n * s);
            total += -0.5 * n * (2.0 * PI).ln() - 0.5 * (1.0 + n * s).ln() - 0.5 * quad;
        }
        Some(total)
    }

    fn dataset(&self) -> Option<(usize, usize, &[f64])> {
        Some((self.n, self.dim, &self.data))
    }
}
