use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, sample_mean, CholeskyFactor};
use crate::special::chi2_cdf;
use crate::LogDensity;

use super::{EvidenceEstimate, Method};

/// Newton–Raftery harmonic mean of the likelihood over every draw in `draws`.
///
/// Its variance can be infinite; the estimate is flagged in the diagnostics.
pub fn hme_newton_raftery(draws: &DrawSet, log_likelihood: &LogDensity<'_>) -> Result<EvidenceEstimate> {
    if draws.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut terms = Vec::with_capacity(draws.len());
    for row in draws.rows() {
        let ll = log_likelihood(row);
        if ll.is_nan() || ll == f64::INFINITY {
            return Err(Error::Numerical { point: row.to_vec() });
        }
        terms.push(-ll);
    }
    Ok(EvidenceEstimate::from_log_terms(Method::Hme, &terms, draws.len())?.with_diag("possibly_infinite_variance", 1.0))
}

/// Mean and Cholesky factor of the build-half covariance.
pub(crate) fn fit_gaussian(build: &DrawSet) -> Result<(Vec<f64>, CholeskyFactor)> {
    if build.len() <= build.dim() {
        return Err(Error::Size { got: build.len(), min: build.dim() + 1 });
    }
    let mean = sample_mean(build);
    let cov = sample_covariance(build, &mean)?;
    Ok((mean.as_slice().to_vec(), CholeskyFactor::new(cov)?))
}

fn check_halves(eval: &DrawSet, build: &DrawSet) -> Result<()> {
    if eval.dim() != build.dim() {
        return Err(Error::Dimension { expected: build.dim(), got: eval.dim() });
    }
    if eval.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// φ = N(θ̂, Σ̂) fitted on `build`, averaged over `eval`.
pub fn gd_gaussian(eval: &DrawSet, build: &DrawSet) -> Result<EvidenceEstimate> {
    check_halves(eval, build)?;
    let (mu, chol) = fit_gaussian(build)?;
    let terms: Vec<f64> = eval
        .rows()
        .zip(eval.log_densities())
        .map(|(row, ld)| chol.log_normal_density(row, &mu) - ld)
        .collect();
    EvidenceEstimate::from_log_terms(Method::GdGaussian, &terms, eval.len())
}

/// φ = N(θ̂, Σ̂) restricted to `(θ − θ̂)ᵀ Σ̂⁻¹ (θ − θ̂) < r²` and renormalized by
/// P(χ²_d ≤ r²).
pub fn gd_truncated_gaussian(eval: &DrawSet, build: &DrawSet, r: f64) -> Result<EvidenceEstimate> {
    check_halves(eval, build)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("truncation radius must be positive"));
    }
    let (mu, chol) = fit_gaussian(build)?;
    let d = build.dim();
    let r2 = r * r;
    let log_mass = chi2_cdf(r2, d).ln();
    let half_log_norm = 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + chol.log_det());
    let mut terms = Vec::new();
    for (row, ld) in eval.rows().zip(eval.log_densities()) {
        let q = chol.mahalanobis_sq(row, &mu);
        if q < r2 {
            terms.push(-half_log_norm - 0.5 * q - log_mass - ld);
        }
    }
    Ok(EvidenceEstimate::from_log_terms(Method::GdTruncgauss, &terms, eval.len())?.with_diag("radius", r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpd::split;
    use crate::rng::seeded;
    use crate::targets::{GaussianConjugateModel, TargetModel};
    use approx::assert_relative_eq;

    #[test]
    fn hme_constant_likelihood_and_single_draw() {
        let ds = DrawSet::new(1, vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        let est = hme_newton_raftery(&ds, &|_: &[f64]| 3.25).unwrap();
        assert_relative_eq!(est.log_z, 3.25, max_relative = 1e-15);
        let one = DrawSet::new(1, vec![0.7], vec![0.0]).unwrap();
        let est = hme_newton_raftery(&one, &|t: &[f64]| -t[0] * t[0]).unwrap();
        assert_relative_eq!(est.log_z, -0.49, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_instrumental_hand_case() {
        // build {−1, 0, 1, 2}: mean 0.5, variance 5/3
        let build = DrawSet::new(1, vec![-1.0, 0.0, 1.0, 2.0], vec![0.0; 4]).unwrap();
        let eval = DrawSet::new(1, vec![0.0, 1.0, 0.5, 3.0], vec![-1.0, -2.0, 0.0, -0.5]).unwrap();
        let v: f64 = 5.0 / 3.0;
        let phi = |x: f64| (-(x - 0.5) * (x - 0.5) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let inv = (phi(0.0) / (-1f64).exp() + phi(1.0) / (-2f64).exp() + phi(0.5) + phi(3.0) / (-0.5f64).exp()) / 4.0;
        let est = gd_gaussian(&eval, &build).unwrap();
        assert_relative_eq!(est.log_z, -inv.ln(), max_relative = 1e-13);
    }

    #[test]
    fn perfect_instrumental_gives_unit_evidence() {
        let mut rng = seeded(2);
        let xs: Vec<f64> = (0..20_000).map(|_| crate::rng::standard_normal(&mut rng)).collect();
        let ds = DrawSet::from_rows(1, xs, |t| -0.5 * t[0] * t[0] - 0.5 * (2.0 * std::f64::consts::PI).ln()).unwrap();
        let (b, e) = split(&ds).unwrap();
        let est = gd_gaussian(&e, &b).unwrap();
        assert!(est.log_z.abs() < 0.01);
    }

    #[test]
    fn wide_truncation_matches_untruncated() {
        let m = GaussianConjugateModel::simulate(2, 20, 1.0, &[1.0, 1.0], 42).unwrap();
        let ds = m.sample_posterior(4000, &mut seeded(5)).unwrap();
        let (b, e) = split(&ds).unwrap();
        let a = gd_gaussian(&e, &b).unwrap();
        let t = gd_truncated_gaussian(&e, &b, 50.0).unwrap();
        assert_relative_eq!(a.log_z, t.log_z, epsilon = 1e-10);
        assert_eq!(t.n_inside, e.len());
    }

    #[test]
    fn gaussian_estimators_near_exact() {
        let m = GaussianConjugateModel::simulate(2, 20, 1.0, &[1.0, 1.0], 42).unwrap();
        let exact = m.exact_log_evidence().unwrap();
        let ds = m.sample_posterior(20_000, &mut seeded(8)).unwrap();
        let (b, e) = split(&ds).unwrap();
        let g = gd_gaussian(&e, &b).unwrap();
        assert!((g.log_z - exact).abs() < 3.0 * g.log_se.max(1e-3), "{} {}", g.log_z, exact);
        let t = gd_truncated_gaussian(&e, &b, 3f64.sqrt()).unwrap();
        assert!((t.log_z - exact).abs() < 3.0 * t.log_se, "{} {} {}", t.log_z, exact, t.log_se);
    }

    #[test]
    fn singular_build_is_reported() {
        let build = DrawSet::new(2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0], vec![0.0; 4]).unwrap();
        assert!(matches!(gd_gaussian(&build, &build), Err(Error::SingularCovariance)));
    }
}
