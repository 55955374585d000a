//! Benchmark posteriors with exact evidence and exact samplers, behind the
//! [`TargetModel`] interface, plus a random-walk Metropolis fallback.

use std::io::Write;

use crate::draws::{fmt_f64, DrawSet};
use crate::error::Result;
use crate::rng::Stream;

mod gaussian;
mod mixture;
mod rosenbrock;
mod rwm;
mod uniform;

pub use gaussian::GaussianConjugateModel;
pub use mixture::{GaussianMixturePriorModel, MixturePrior};
pub use rosenbrock::RosenbrockModel;
pub use rwm::{rwm_sampler, RwmConfig, RwmRun};
pub use uniform::UniformCubeModel;

/// A posterior known through its prior and likelihood.
pub trait TargetModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn log_prior(&self, theta: &[f64]) -> f64;

    fn log_likelihood(&self, theta: &[f64]) -> f64;

    /// log π(θ) + log L(θ).
    fn log_unnorm_posterior(&self, theta: &[f64]) -> f64 {
        self.log_prior(theta) + self.log_likelihood(theta)
    }

    /// `n` posterior draws with `log_unnorm_posterior` attached.
    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet>;

    fn exact_log_evidence(&self) -> Option<f64>;

    /// Observations behind the model, row-major `(n, d_obs, values)`.
    fn dataset(&self) -> Option<(usize, usize, &[f64])> {
        None
    }

    /// Size of the dataset, when there is one.
    fn n_data(&self) -> usize {
        self.dataset().map(|(n, _, _)| n).unwrap_or(0)
    }
}

/// Dumps a model's dataset as CSV with columns `x_1..x_k`.
pub fn write_dataset_csv<W: Write>(model: &dyn TargetModel, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if let Some((_, k, values)) = model.dataset() {
        let header: Vec<String> = (1..=k).map(|j| format!("x_{j}")).collect();
        wtr.write_record(&header)?;
        for row in values.chunks_exact(k) {
            wtr.write_record(row.iter().map(|v| fmt_f64(*v)))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Fills a draw set from row-major draws using the model's log-posterior.
pub(crate) fn attach_densities(model: &dyn TargetModel, draws: Vec<f64>) -> Result<DrawSet> {
    DrawSet::from_rows(model.dim(), draws, |t| model.log_unnorm_posterior(t))
}

/// `inner` with its likelihood multiplied by `exp(log_scale)`.
pub struct ScaledModel<M> {
    inner: M,
    log_scale: f64,
    name: String,
}

impl<M: TargetModel> ScaledModel<M> {
    pub fn new(inner: M, log_scale: f64) -> Self {
        let name = format!("{}*exp({log_scale})", inner.name());
        Self { inner, log_scale, name }
    }
}

impl<M: TargetModel> TargetModel for ScaledModel<M> {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        self.inner.log_prior(theta)
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.inner.log_likelihood(theta) + self.log_scale
    }

    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet> {
        let base = self.inner.sample_posterior(n, rng)?;
        attach_densities(self, base.flat().to_vec())
    }

    fn exact_log_evidence(&self) -> Option<f64> {
        self.inner.exact_log_evidence().map(|z| z + self.log_scale)
    }

    fn dataset(&self) -> Option<(usize, usize, &[f64])> {
        self.inner.dataset()
    }
}

impl<T: TargetModel + ?Sized> TargetModel for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_prior(&self, theta: &[f64]) -> f64 {
        (**self).log_prior(theta)
    }
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        (**self).log_likelihood(theta)
    }
    fn log_unnorm_posterior(&self, theta: &[f64]) -> f64 {
        (**self).log_unnorm_posterior(theta)
    }
    fn sample_posterior(&self, n: usize, rng: &mut Stream) -> Result<DrawSet> {
        (**self).sample_posterior(n, rng)
    }
    fn exact_log_evidence(&self) -> Option<f64> {
        (**self).exact_log_evidence()
    }
    fn dataset(&self) -> Option<(usize, usize, &[f64])> {
        (**self).dataset()
    }
}
