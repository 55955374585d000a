use std::f64::consts::PI;

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::rng::{seeded, standard_normal, Stream};

use super::{attach_densities, TargetModel};

/// Ȳ_j | θ ~ N(μ_j(θ), σ²/n) with μ_1 = θ_1 and
/// μ_j = θ_j + b_{j−1}(θ_{j−1}² − a_{j−1}); flat prior on θ.
///
/// The likelihood is a normalized density in Ȳ and the map θ ↦ μ(θ) has unit
/// Jacobian, so the evidence is exactly 1 whatever the data.
#[derive(Debug, Clone)]
pub struct RosenbrockModel {
    dim: usize,
    n: usize,
    sigma: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    data: Vec<f64>,
    ybar: Vec<f64>,
}

pub const DEFAULT_A: f64 = 1.0;
pub const DEFAULT_B: f64 = 10.0;

impl RosenbrockModel {
    /// Builds from row-major `n × d` observations; `a` and `b` have length d − 1.
    pub fn from_data(dim: usize, data: Vec<f64>, a: Vec<f64>, b: Vec<f64>, sigma: f64) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid("data must be a nonempty n × d matrix"));
        }
        if a.len() + 1 != dim || b.len() + 1 != dim {
            return Err(Error::Dimension { expected: dim - 1, got: a.len().max(b.len()) });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("σ must be positive"));
        }
        let n = data.len() / dim;
        let mut ybar = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            ybar.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        ybar.iter_mut().for_each(|m| *m /= n as f64);
        Ok(Self { dim, n, sigma, a, b, data, ybar })
    }

    /// `n` observations y_i ~ N(μ(θ_true), σ² I) with the conventional
    /// constants a = 1, b = 10.
    pub fn simulate(n: usize, theta_true: &[f64], sigma: f64, data_seed: u64) -> Result<Self> {
        let k = theta_true.len().saturating_sub(1);
        Self::simulate_with(n, theta_true, vec![DEFAULT_A; k], vec![DEFAULT_B; k], sigma, data_seed)
    }

    pub fn simulate_with(
        n: usize,
        theta_true: &[f64],
        a: Vec<f64>,
        b: Vec<f64>,
        sigma: f64,
        data_seed: u64,
    ) -> Result<Self> {
        let dim = theta_true.len();
        if dim == 0 || n == 0 {
            return Err(Error::invalid("need at least one observation in at least one dimension"));
        }
        if a.len() + 1 != dim || b.len() + 1 != dim {
            return Err(Error::Dimension { expected: dim - 1, got: a.len().max(b.len()) });
        }
        let mu = mean_map(theta_true, &a, &b);
        let mut rng = seeded(data_seed);
        let data = (0..n).flat_map(|_| mu.clone()).map(|m| m + sigma * standard_normal(&mut rng)).collect();
        Self::from_data(dim, data, a, b, sigma)
    }

    pub fn sample_means(&self) -> &[f64] {
        &self.ybar
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean_map(&self, theta: &[f64]) -> Vec<f64> {
        mean_map(theta, &self.a, &self.b)
    }
}

fn mean_map(theta: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut mu = theta.to_vec();
    for j in 1..theta.len() {
        mu[j] += b[j - 1] * (theta[j - 1] * theta[j - 1] - a[j - 1]);
    }
    mu
}

impl TargetModel for RosenbrockModel {
    fn name(&self) -> &str {
        "rosenbrock"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let v = self.sigma * self.sigma / self.n as f64;
        let mut ss = 0.0;
        for j in 0..self.dim {
            let mut mu = theta[j];
            if j > 0 {
                mu += self.b[j - 1] * (theta[j - 1] * theta[j - 1] - self.a[j - 1]);
            }
            ss += (self.ybar[j] - mu).powi(2);
        }
        -0.5 * self.dim as f64 * (2.0 * PI * v).ln() - 0.5 * ss / v
    }

    /// Sequentially: θ_1 ~ N(Ȳ_1, σ²/n), θ_j | θ_{j−1} ~ N(Ȳ_j − b(θ_{j−1}² − a), σ²/n).
    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet> {
        let sd = self.sigma / (self.n as f64).sqrt();
        let d = self.dim;
        let mut draws = vec![0.0; n * d];
        for row in draws.chunks_exact_mut(d) {
            row[0] = self.ybar[0] + sd * standard_normal(rng);
            for j in 1..d {
                let shift = self.b[j - 1] * (row[j - 1] * row[j - 1] - self.a[j - 1]);
                row[j] = self.ybar[j] - shift + sd * standard_normal(rng);
            }
        }
        attach_densities(self, draws)
    }

    fn exact_log_evidence(&self) -> Option<f64> {
        Some(0.0)
    }

    fn dataset(&self) -> Option<(usize, usize, &[f64])> {
        Some((self.n, self.dim, &self.data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::quadrature::{log_trapezoid_1d, log_trapezoid_2d};
    use crate::targets::{rwm_sampler, RwmConfig};

    #[test]
    fn one_dimensional_evidence_is_one() {
        let m = RosenbrockModel::simulate(20, &[0.4], 1.0, 3).unwrap();
        let q = log_trapezoid_1d(|t| m.log_unnorm_posterior(&[t]), -3.0, 3.0, 20_000, 0.0);
        assert!(q.abs() < 1e-8, "{q}");
    }

    #[test]
    fn two_dimensional_quadrature_gives_zero() {
        let m = RosenbrockModel::simulate(20, &[0.0, 0.0], 1.0, 7).unwrap();
        let y = m.sample_means().to_vec();
        let shift = m.log_unnorm_posterior(&[y[0], y[1] - 10.0 * (y[0] * y[0] - 1.0)]);
        // the banana spans θ_1 ∈ Ȳ_1 ± 1.5 and θ_2 over roughly 25 units
        let q = log_trapezoid_2d(
            |t1, t2| m.log_unnorm_posterior(&[t1, t2]),
            (y[0] - 1.6, y[0] + 1.6),
            (y[1] - 30.0, y[1] + 12.0),
            4000,
            shift,
        );
        assert!(q.abs() < 1e-4, "{q}");
    }

    #[test]
    fn decoupled_chain_has_data_mean() {
        let m = RosenbrockModel::from_data(3, vec![1.0, 2.0, 3.0, 3.0, 2.0, 1.0], vec![1.0; 2], vec![0.0; 2], 1.0).unwrap();
        let n = 40_000;
        let ds = m.sample_posterior(n, &mut seeded(1)).unwrap();
        let se = (0.5 / n as f64).sqrt();
        for j in 0..3 {
            let mean = ds.rows().map(|r| r[j]).sum::<f64>() / n as f64;
            assert!((mean - 2.0).abs() < 4.0 * se);
        }
    }

    #[test]
    fn densities_match_model() {
        let m = RosenbrockModel::simulate(20, &[0.0, 0.0], 1.0, 7).unwrap();
        let ds = m.sample_posterior(100, &mut seeded(2)).unwrap();
        for (row, ld) in ds.rows().zip(ds.log_densities()) {
            assert_eq!(*ld, m.log_unnorm_posterior(row));
        }
    }

    #[test]
    fn exact_sampler_agrees_with_metropolis() {
        let m = RosenbrockModel::simulate(20, &[0.0, 0.0], 1.0, 7).unwrap();
        let n = 200_000;
        let iid = m.sample_posterior(n, &mut seeded(5)).unwrap();
        let y = m.sample_means();
        let init = [y[0], y[1] - 10.0 * (y[0] * y[0] - 1.0)];
        let cfg = RwmConfig { step_scale: 0.25, thin: 5, ..RwmConfig::default() };
        let chain = rwm_sampler(&|t: &[f64]| m.log_unnorm_posterior(t), &init, &cfg, n, &mut seeded(6)).unwrap();
        for j in 0..2 {
            let xs: Vec<f64> = iid.rows().map(|r| r[j]).collect();
            let ys: Vec<f64> = chain.draws.rows().map(|r| r[j]).collect();
            let mx = xs.iter().sum::<f64>() / n as f64;
            let my = ys.iter().sum::<f64>() / n as f64;
            let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n as f64;
            // batch means for the chain's standard error
            let batches = 100;
            let bl = n / batches;
            let bm: Vec<f64> = ys.chunks(bl).map(|c| c.iter().sum::<f64>() / bl as f64).collect();
            let vb = bm.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (batches - 1) as f64;
            let se = (vx / n as f64 + vb / batches as f64).sqrt();
            assert!((mx - my).abs() < 4.0 * se, "coord {j}: {mx} vs {my} (se {se})");
        }
    }
}
