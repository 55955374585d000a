//! Harmonic-mean style evidence estimators.
//!
//! Every estimator here evaluates the Gelfand–Dey identity
//! `1/Z = E_post[φ(θ) / π̃(θ)]` for some normalized instrumental density φ,
//! entirely in log space. Supports and instrumental parameters come from the
//! build half of the draws and the average runs over the evaluation half.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covering::EllipsoidUnion;
use crate::error::{Error, Result};
use crate::special::log_sum_exp;
use crate::LogDensity;

mod ecmle;
mod gelfand_dey;
mod thames;

pub use ecmle::{ecmle, ecmle_pipeline, ecmle_symmetrized, EcmleRun};
pub use gelfand_dey::{gd_gaussian, gd_truncated_gaussian, hme_newton_raftery};
pub use thames::{
    ks_statistic, ks_truncation_level, mix_thames, thames, ThamesRegion, KS_GRID, DEFAULT_ALPHA_TRUNC, DEFAULT_N_VOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Ecmle,
    EcmleSymmetrized,
    Hme,
    GdGaussian,
    GdTruncgauss,
    Thames,
    MixThames,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ecmle,
        Method::EcmleSymmetrized,
        Method::Hme,
        Method::GdGaussian,
        Method::GdTruncgauss,
        Method::Thames,
        Method::MixThames,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ecmle => "ECMLE",
            Method::EcmleSymmetrized => "ECMLE_SYMMETRIZED",
            Method::Hme => "HME",
            Method::GdGaussian => "GD_GAUSSIAN",
            Method::GdTruncgauss => "GD_TRUNCGAUSS",
            Method::Thames => "THAMES",
            Method::MixThames => "MIX_THAMES",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == up)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceEstimate {
    pub log_z: f64,
    /// Delta-method standard error of `log_z` from the spread of the summands.
    pub log_se: f64,
    pub method: Method,
    pub n_eval: usize,
    pub n_inside: usize,
    pub support_volume: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EvidenceEstimate {
    /// log Ẑ⁻¹ averaged over `n_eval` summands of which `log_terms` are the nonzero ones.
    pub(crate) fn from_log_terms(method: Method, log_terms: &[f64], n_eval: usize) -> Result<Self> {
        if log_terms.is_empty() || n_eval == 0 {
            return Err(Error::EmptySupport);
        }
        let (log_inv, log_se) = log_mean_with_se(log_terms, n_eval);
        let log_z = -log_inv;
        if !log_z.is_finite() {
            return Err(Error::Numerical { point: Vec::new() });
        }
        Ok(Self {
            log_z,
            log_se,
            method,
            n_eval,
            n_inside: log_terms.len(),
            support_volume: None,
            diagnostics: BTreeMap::new(),
        })
    }

    pub(crate) fn with_volume(mut self, v: f64) -> Self {
        self.support_volume = Some(v);
        self
    }

    pub(crate) fn with_diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// log of `(1/n) Σ exp(x_i)` with zeros implied for the `n − len` missing
/// terms, and the standard error of that log-mean by the delta method.
pub(crate) fn log_mean_with_se(log_terms: &[f64], n: usize) -> (f64, f64) {
    let nf = n as f64;
    let log_mean = log_sum_exp(log_terms.iter().copied()) - nf.ln();
    if n < 2 {
        return (log_mean, f64::NAN);
    }
    // r_i = w_i / mean(w) has mean 1
    let sum_sq: f64 = log_terms.iter().map(|x| (2.0 * (x - log_mean)).exp()).sum();
    let var = ((sum_sq - nf) / (nf - 1.0)).max(0.0);
    (log_mean, (var / nf).sqrt())
}

/// A bounded region with known volume that can be sampled uniformly.
pub trait Support: Sync {
    fn dim(&self) -> usize;

    fn log_volume(&self) -> f64;

    fn contains(&self, point: &[f64]) -> bool;

    fn sample_uniform(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]);
}

impl Support for EllipsoidUnion {
    fn dim(&self) -> usize {
        EllipsoidUnion::dim(self)
    }

    fn log_volume(&self) -> f64 {
        self.log_total_volume()
    }

    fn contains(&self, point: &[f64]) -> bool {
        self.contains_unchecked(point)
    }

    fn sample_uniform(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]) {
        self.sample_into(rng, out)
    }
}

/// Monte Carlo second-moment proxy `(1/(T V²)) ∫_A 1/π̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceProxy {
    pub log_value: f64,
    pub value: f64,
    /// Monte Carlo standard error of `value`.
    pub se: f64,
}

/// Estimates the proxy from `n_mc` uniform draws on `support`.
pub fn variance_proxy<R: Rng + ?Sized>(
    support: &dyn Support,
    logdens: &LogDensity<'_>,
    t: usize,
    n_mc: usize,
    rng: &mut R,
) -> Result<VarianceProxy> {
    if n_mc < 1000 {
        return Err(Error::Size { got: n_mc, min: 1000 });
    }
    if t == 0 {
        return Err(Error::Size { got: 0, min: 1 });
    }
    let d = support.dim();
    let mut p = vec![0.0; d];
    let mut neg = Vec::with_capacity(n_mc);
    let mut rng = RngAdapter(rng);
    for _ in 0..n_mc {
        support.sample_uniform(&mut rng, &mut p);
        let ld = logdens(&p);
        if !ld.is_finite() {
            return Err(Error::Numerical { point: p });
        }
        neg.push(-ld);
    }
    let (log_mean, rel_se) = log_mean_with_se(&neg, n_mc);
    let log_value = log_mean - (t as f64).ln() - support.log_volume();
    let value = log_value.exp();
    Ok(VarianceProxy { log_value, value, se: value * rel_se })
}

/// Lets a possibly unsized generic RNG be passed as `&mut dyn RngCore`.
struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> rand::RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ellipsoid;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("mix-thames".parse::<Method>().unwrap(), Method::MixThames);
        assert!("bridge".parse::<Method>().is_err());
    }

    #[test]
    fn log_mean_matches_direct() {
        let w = [0.5f64, 2.0, 1.5];
        let logs: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        let (lm, se) = log_mean_with_se(&logs, 5);
        let mean: f64 = 4.0 / 5.0;
        assert_relative_eq!(lm, mean.ln(), max_relative = 1e-14);
        let vals = [0.5, 2.0, 1.5, 0.0, 0.0];
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert_relative_eq!(se, (var / 5.0).sqrt() / mean, max_relative = 1e-12);
    }

    #[test]
    fn proxy_constant_density_and_t_scaling() {
        let e = Ellipsoid::sphere(vec![0.0, 0.0], 1.0).unwrap();
        let u = EllipsoidUnion::new(vec![e], 0.0).unwrap();
        let c0: f64 = 2.5;
        let f = move |_: &[f64]| c0.ln();
        let p = variance_proxy(&u, &f, 100, 2000, &mut seeded(1)).unwrap();
        assert_relative_eq!(p.value, 1.0 / (100.0 * std::f64::consts::PI * c0), max_relative = 1e-12);
        let q = variance_proxy(&u, &f, 50, 2000, &mut seeded(1)).unwrap();
        assert_relative_eq!(q.value, 2.0 * p.value, max_relative = 1e-14);
        let bad = |_: &[f64]| f64::NEG_INFINITY;
        assert!(matches!(variance_proxy(&u, &bad, 10, 1000, &mut seeded(1)), Err(Error::Numerical { .. })));
    }
}
