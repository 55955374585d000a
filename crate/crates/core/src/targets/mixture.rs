use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::linalg::CholeskyFactor;
use crate::rng::{fill_standard_normal, seeded, Stream};
use crate::special::log_add_exp;

use super::{attach_densities, TargetModel};

/// x_i | μ ~ N_d(μ, Σ_X) with a two-component prior
/// μ ~ ω N(ξ₁, S₁) + (1 − ω) N(ξ₂, S₂).
///
/// The posterior is again a two-component Gaussian mixture, so the evidence
/// and an exact sampler are available in closed form.
#[derive(Debug, Clone)]
pub struct GaussianMixturePriorModel {
    dim: usize,
    n: usize,
    data: Vec<f64>,
    mean: Vec<f64>,
    omega: f64,
    xi: [Vec<f64>; 2],
    prior_chol: [CholeskyFactor; 2],
    noise_chol: CholeskyFactor,
    /// Σ_X⁻¹-weighted within-sample sum of squares.
    within_quad: f64,
    post_mean: [Vec<f64>; 2],
    post_chol: [CholeskyFactor; 2],
    log_z: [f64; 2],
    post_weight: f64,
}

/// Parameters of [`GaussianMixturePriorModel`].
#[derive(Debug, Clone)]
pub struct MixturePrior {
    pub omega: f64,
    pub xi: [Vec<f64>; 2],
    pub s: [DMatrix<f64>; 2],
    pub sigma_x: DMatrix<f64>,
}

impl MixturePrior {
    /// Two well-separated modes at ∓(1, …, 1): S_k = 0.25 I, Σ_X = 400 I, ω = ½.
    pub fn separated(dim: usize) -> Self {
        Self {
            omega: 0.5,
            xi: [vec![-1.0; dim], vec![1.0; dim]],
            s: [DMatrix::identity(dim, dim) * 0.25, DMatrix::identity(dim, dim) * 0.25],
            sigma_x: DMatrix::identity(dim, dim) * 400.0,
        }
    }
}

impl GaussianMixturePriorModel {
    pub fn from_data(dim: usize, data: Vec<f64>, prior: MixturePrior) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid("data must be a nonempty n × d matrix"));
        }
        if !(prior.omega > 0.0 && prior.omega < 1.0) {
            return Err(Error::invalid("mixture weight must lie in (0, 1)"));
        }
        for v in &prior.xi {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, got: v.len() });
            }
        }
        for m in prior.s.iter().chain([&prior.sigma_x]) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Dimension { expected: dim, got: m.nrows() });
            }
        }
        let n = data.len() / dim;
        let nf = n as f64;
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= nf);

        let noise_chol = CholeskyFactor::new(prior.sigma_x.clone())?;
        let within_quad = data.chunks_exact(dim).map(|r| noise_chol.mahalanobis_sq(r, &mean)).sum();
        let sigma_inv = noise_chol.inverse();
        let xbar = DVector::from_column_slice(&mean);

        let prior_chol = [CholeskyFactor::new(prior.s[0].clone())?, CholeskyFactor::new(prior.s[1].clone())?];
        let mut post_mean: [Vec<f64>; 2] = Default::default();
        let mut post_chol = Vec::with_capacity(2);
        let mut log_z = [0.0; 2];
        for k in 0..2 {
            let s_inv = prior_chol[k].inverse();
            let prec = &sigma_inv * nf + &s_inv;
            let post_cov = symmetrize(prec.try_inverse().ok_or(Error::SingularCovariance)?);
            let xi = DVector::from_column_slice(&prior.xi[k]);
            let m = &post_cov * (&sigma_inv * &xbar * nf + &s_inv * xi);
            post_mean[k] = m.as_slice().to_vec();
            post_chol.push(CholeskyFactor::new(post_cov)?);

            // x̄ ~ N(ξ_k, Σ_X/n + S_k) marginally; the rest is the within term.
            let marg = CholeskyFactor::new(symmetrize(&prior.sigma_x / nf + &prior.s[k]))?;
            log_z[k] = -0.5 * (nf - 1.0) * dim as f64 * (2.0 * PI).ln()
                - 0.5 * (nf - 1.0) * noise_chol.log_det()
                - 0.5 * dim as f64 * nf.ln()
                - 0.5 * within_quad
                + marg.log_normal_density(&mean, &prior.xi[k]);
        }
        let lw1 = prior.omega.ln() + log_z[0];
        let lw2 = (1.0 - prior.omega).ln() + log_z[1];
        let post_weight = (lw1 - log_add_exp(lw1, lw2)).exp();
        let post_chol: [CholeskyFactor; 2] = post_chol.try_into().expect("two components");

        Ok(Self {
            dim,
            n,
            data,
            mean,
            omega: prior.omega,
            xi: prior.xi,
            prior_chol,
            noise_chol,
            within_quad,
            post_mean,
            post_chol,
            log_z,
            post_weight,
        })
    }

    /// Simulates `n` observations from N(`true_mean`, Σ_X).
    pub fn simulate(n: usize, true_mean: &[f64], prior: MixturePrior, data_seed: u64) -> Result<Self> {
        let dim = true_mean.len();
        if n == 0 || dim == 0 {
            return Err(Error::invalid("need at least one observation in at least one dimension"));
        }
        let noise = CholeskyFactor::new(prior.sigma_x.clone())?;
        let mut rng = seeded(data_seed);
        let mut z = vec![0.0; dim];
        let mut data = vec![0.0; n * dim];
        for row in data.chunks_exact_mut(dim) {
            fill_standard_normal(&mut rng, &mut z);
            noise.transform(&z, true_mean, row);
        }
        Self::from_data(dim, data, prior)
    }

    /// Posterior weight of the first component.
    pub fn posterior_weight(&self) -> f64 {
        self.post_weight
    }

    pub fn posterior_means(&self) -> [&[f64]; 2] {
        [&self.post_mean[0], &self.post_mean[1]]
    }

    /// Evidence of each single-component model.
    pub fn component_log_evidence(&self) -> [f64; 2] {
        self.log_z
    }

    pub fn prior_means(&self) -> [&[f64]; 2] {
        [&self.xi[0], &self.xi[1]]
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

impl TargetModel for GaussianMixturePriorModel {
    fn name(&self) -> &str {
        "mixture"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        log_add_exp(
            self.omega.ln() + self.prior_chol[0].log_normal_density(theta, &self.xi[0]),
            (1.0 - self.omega).ln() + self.prior_chol[1].log_normal_density(theta, &self.xi[1]),
        )
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let nf = self.n as f64;
        -0.5 * nf * (self.dim as f64 * (2.0 * PI).ln() + self.noise_chol.log_det())
            - 0.5 * self.within_quad
            - 0.5 * nf * self.noise_chol.mahalanobis_sq(&self.mean, theta)
    }

    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet> {
        let d = self.dim;
        let mut z = vec![0.0; d];
        let mut draws = vec![0.0; n * d];
        for row in draws.chunks_exact_mut(d) {
            let k = if rng.gen::<f64>() < self.post_weight { 0 } else { 1 };
            fill_standard_normal(rng, &mut z);
            self.post_chol[k].transform(&z, &self.post_mean[k], row);
        }
        attach_densities(self, draws)
    }

    /// ω Z₁ + (1 − ω) Z₂.
    fn exact_log_evidence(&self) -> Option<f64> {
        Some(log_add_exp(self.omega.ln() + self.log_z[0], (1.0 - self.omega).ln() + self.log_z[1]))
    }

    fn dataset(&self) -> Option<(usize, usize, &[f64])> {
        Some((self.n, self.dim, &self.data))
    }
}
