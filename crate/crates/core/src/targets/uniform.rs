use rand::Rng;

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::rng::Stream;

use super::{attach_densities, TargetModel};

/// Constant density on [0, 1]^d, so Z = 1.
#[derive(Debug, Clone)]
pub struct UniformCubeModel {
    dim: usize,
}

impl UniformCubeModel {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self { dim })
    }
}

impl TargetModel for UniformCubeModel {
    fn name(&self) -> &str {
        "uniform"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        if theta.iter().all(|t| (0.0..=1.0).contains(t)) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_likelihood(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet> {
        let draws = (0..n * self.dim).map(|_| rng.gen::<f64>()).collect();
        attach_densities(self, draws)
    }

    fn exact_log_evidence(&self) -> Option<f64> {
        Some(0.0)
    }
}
