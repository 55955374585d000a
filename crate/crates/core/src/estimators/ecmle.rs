use crate::covering::{build_covering, CoveringConfig, EllipsoidUnion};
use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::hpd::{partition, partition_halves, HpdPartition};
use crate::par::Execution;
use crate::special::log_add_exp;
use crate::LogDensity;

use super::{EvidenceEstimate, Method};

/// Uniform-on-union estimator over the evaluation half of `part`.
///
/// `union` must have been built from `part.build_half` alone.
pub fn ecmle(part: &HpdPartition, union: &EllipsoidUnion, exec: Execution) -> Result<EvidenceEstimate> {
    let eval = &part.eval_half;
    if eval.dim() != union.dim() {
        return Err(Error::Dimension { expected: union.dim(), got: eval.dim() });
    }
    let inside = union.contains_rows(eval.flat(), exec);
    let log_v = union.log_total_volume();
    let terms: Vec<f64> = inside
        .iter()
        .zip(eval.log_densities())
        .filter(|(hit, _)| **hit)
        .map(|(_, ld)| -log_v - ld)
        .collect();
    Ok(EvidenceEstimate::from_log_terms(Method::Ecmle, &terms, eval.len())?
        .with_volume(union.total_volume())
        .with_diag("n_ellipsoids", union.len() as f64)
        .with_diag("coverage", union.coverage_fraction(part)?)
        .with_diag("log_threshold", part.log_threshold))
}

/// Everything produced by one pass of the covering estimator.
#[derive(Debug, Clone)]
pub struct EcmleRun {
    pub estimate: EvidenceEstimate,
    pub partition: HpdPartition,
    pub union: EllipsoidUnion,
}

/// Split, threshold, cover and estimate.
pub fn ecmle_pipeline(sample: &DrawSet, cfg: &CoveringConfig, logdens: &LogDensity<'_>) -> Result<EcmleRun> {
    let part = partition(sample, cfg.alpha)?;
    run_on_partition(part, cfg, logdens)
}

fn run_on_partition(part: HpdPartition, cfg: &CoveringConfig, logdens: &LogDensity<'_>) -> Result<EcmleRun> {
    let union = build_covering(&part, cfg, logdens)?;
    let estimate = ecmle(&part, &union, cfg.exec)?;
    Ok(EcmleRun { estimate, partition: part, union })
}

/// Runs the pipeline in both directions (halves swapped) and averages the two
/// inverse-evidence estimates. The second covering uses `cfg.rng_seed + 1`.
pub fn ecmle_symmetrized(sample: &DrawSet, cfg: &CoveringConfig, logdens: &LogDensity<'_>) -> Result<EvidenceEstimate> {
    let forward = ecmle_pipeline(sample, cfg, logdens)?;
    let swapped = partition_halves(
        forward.partition.eval_half.clone(),
        forward.partition.build_half.clone(),
        cfg.alpha,
    )?;
    let cfg2 = CoveringConfig { rng_seed: cfg.rng_seed.wrapping_add(1), ..*cfg };
    let backward = run_on_partition(swapped, &cfg2, logdens)?;

    let (a, b) = (&forward.estimate, &backward.estimate);
    let log_inv = log_add_exp(-a.log_z, -b.log_z) - std::f64::consts::LN_2;
    // SE of the average of two independent-ish means, relative to that average
    let wa = (-a.log_z - log_inv).exp();
    let wb = (-b.log_z - log_inv).exp();
    let log_se = 0.5 * ((wa * a.log_se).powi(2) + (wb * b.log_se).powi(2)).sqrt();
    let mut est = EvidenceEstimate {
        log_z: -log_inv,
        log_se,
        method: Method::EcmleSymmetrized,
        n_eval: a.n_eval + b.n_eval,
        n_inside: a.n_inside + b.n_inside,
        support_volume: None,
        diagnostics: Default::default(),
    };
    est = est
        .with_diag("abs_log_diff", (a.log_z - b.log_z).abs())
        .with_diag("log_z_forward", a.log_z)
        .with_diag("log_z_backward", b.log_z)
        .with_diag("n_ellipsoids", (forward.union.len() + backward.union.len()) as f64);
    Ok(est)
}
