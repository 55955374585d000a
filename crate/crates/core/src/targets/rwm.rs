use rand::Rng;

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, Stream};
use crate::LogDensity;

/// Random-walk Metropolis settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwmConfig {
    /// Standard deviation of the isotropic Gaussian proposal.
    pub step_scale: f64,
    /// Discarded steps as a fraction of the recorded chain length.
    pub burn_in_fraction: f64,
    /// Keep every `thin`-th state.
    pub thin: usize,
}

impl Default for RwmConfig {
    fn default() -> Self {
        Self { step_scale: 1.0, burn_in_fraction: 0.1, thin: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct RwmRun {
    pub draws: DrawSet,
    /// Accepted proposals over all steps, burn-in included.
    pub acceptance_rate: f64,
}

/// Random-walk Metropolis from `init`, recording `n_draws` states.
pub fn rwm_sampler(
    logdens: &LogDensity<'_>,
    init: &[f64],
    cfg: &RwmConfig,
    n_draws: usize,
    rng: &mut Stream,
) -> Result<RwmRun> {
    if !(cfg.step_scale > 0.0 && cfg.step_scale.is_finite()) {
        return Err(Error::invalid("step scale must be positive"));
    }
    if !(0.0..1e6).contains(&cfg.burn_in_fraction) || cfg.thin == 0 {
        return Err(Error::invalid("burn-in fraction must be nonnegative and thinning positive"));
    }
    if n_draws == 0 {
        return Err(Error::Size { got: 0, min: 1 });
    }
    let d = init.len();
    let mut current = init.to_vec();
    let mut current_ld = logdens(&current);
    if !current_ld.is_finite() {
        return Err(Error::Numerical { point: current });
    }
    let burn = (cfg.burn_in_fraction * n_draws as f64).floor() as usize;
    let total = burn + n_draws * cfg.thin;
    let mut proposal = vec![0.0; d];
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(n_draws * d);
    let mut lds = Vec::with_capacity(n_draws);
    for step in 1..=total {
        for (p, c) in proposal.iter_mut().zip(&current) {
            *p = c + cfg.step_scale * standard_normal(rng);
        }
        let ld = logdens(&proposal);
        if ld.is_nan() || ld == f64::INFINITY {
            return Err(Error::Numerical { point: proposal });
        }
        let u: f64 = rng.gen();
        if u.ln() < ld - current_ld {
            std::mem::swap(&mut current, &mut proposal);
            current_ld = ld;
            accepted += 1;
        }
        if step > burn && (step - burn).is_multiple_of(cfg.thin) {
            draws.extend_from_slice(&current);
            lds.push(current_ld);
        }
    }
    Ok(RwmRun { draws: DrawSet::new(d, draws, lds)?, acceptance_rate: accepted as f64 / total as f64 })
}
