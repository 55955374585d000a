//! Bayesian evidence (marginal likelihood) estimation with bounded harmonic means.
//!
//! The central estimator covers an empirical highest-posterior-density (HPD)
//! region with a union of disjoint, locally adapted ellipsoids whose total
//! volume is known exactly, then evaluates the Gelfand–Dey identity with a
//! uniform instrumental density on that union:
//!
//! ```text
//! 1/Z ≈ (1/T) Σ_t 1_E(θ_t) / (V(E) · π̃(θ_t))
//! ```
//!
//! where the union `E` is built from one half of the posterior draws and the
//! sum runs over the other half.
//!
//! The pipeline is split into:
//!
//! * [`hpd`]: split draws into build/evaluate halves and classify by an
//!   empirical density threshold.
//! * [`covering`]: greedy construction of the disjoint ellipsoid union.
//! * [`estimators`]: the covering estimator plus baselines (Newton–Raftery,
//!   Gaussian and truncated-Gaussian Gelfand–Dey, THAMES, Mix-THAMES) and a
//!   Monte Carlo second-moment proxy.
//! * [`targets`]: benchmark posteriors with exact evidence and exact samplers.
//! * [`harness`]: replication loops, α-sweeps, CSV output and region export.
//!
//! ```no_run
//! use ecmle::covering::CoveringConfig;
//! use ecmle::estimators::ecmle_pipeline;
//! use ecmle::geometry::UnitInterval;
//! use ecmle::targets::{GaussianConjugateModel, TargetModel};
//! use ecmle::rng::seeded;
//!
//! let model = GaussianConjugateModel::simulate(2, 20, 1.0, &[1.0, 1.0], 42).unwrap();
//! let draws = model.sample_posterior(20_000, &mut seeded(7)).unwrap();
//! let alpha = UnitInterval::new(0.75).unwrap();
//! let cfg = CoveringConfig::new(alpha, 11);
//! let logdens = |theta: &[f64]| model.log_unnorm_posterior(theta);
//! let run = ecmle_pipeline(&draws, &cfg, &logdens).unwrap();
//! println!("log Z ≈ {} (exact {:?})", run.estimate.log_z, model.exact_log_evidence());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod covering;
pub mod draws;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod hpd;
pub mod linalg;
pub mod par;
pub mod rng;
pub mod special;
pub mod targets;

pub use error::{Error, Result};

/// A log-density callback. `-inf` means zero density; NaN and `+inf` are errors.
pub type LogDensity<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;
