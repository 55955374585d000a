use rand::Rng;

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::geometry::UnitInterval;
use crate::hpd::{hpd_threshold, quantile_sorted};
use crate::linalg::CholeskyFactor;
use crate::rng::unit_ball_point;
use crate::special::{chi2_cdf, ln_unit_ball_volume};
use crate::LogDensity;

use super::gelfand_dey::fit_gaussian;
use super::{EvidenceEstimate, Method, Support};

pub const DEFAULT_ALPHA_TRUNC: f64 = 0.5;
pub const DEFAULT_N_VOL: usize = 10_000;

/// Candidate truncation levels 0.05, 0.10, …, 0.95.
pub const KS_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
];

/// A = {θ : (θ − θ̂)ᵀ Σ̂⁻¹ (θ − θ̂) < r²}, optionally intersected with
/// {log π̃ > q̂}.
#[derive(Debug, Clone)]
pub struct ThamesRegion {
    center: Vec<f64>,
    chol: CholeskyFactor,
    radius: f64,
    log_volume: f64,
    log_truncation: Option<f64>,
}

impl ThamesRegion {
    /// Fits θ̂ and Σ̂ on `build`; `radius` defaults to √(d + 1).
    pub fn fit(build: &DrawSet, radius: Option<f64>) -> Result<Self> {
        let d = build.dim();
        let radius = radius.unwrap_or(((d + 1) as f64).sqrt());
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("ellipsoid radius must be positive"));
        }
        let (center, chol) = fit_gaussian(build)?;
        let log_volume = ln_unit_ball_volume(d) + d as f64 * radius.ln() + 0.5 * chol.log_det();
        Ok(Self { center, chol, radius, log_volume, log_truncation: None })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn covariance(&self) -> nalgebra::DMatrix<f64> {
        let l = self.chol.l();
        &l * l.transpose()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Volume of the full ellipsoid A.
    pub fn log_volume(&self) -> f64 {
        self.log_volume
    }

    pub fn volume(&self) -> f64 {
        self.log_volume.exp()
    }

    pub fn log_truncation(&self) -> Option<f64> {
        self.log_truncation
    }

    /// Strictly inside A.
    pub fn in_ellipsoid(&self, point: &[f64]) -> bool {
        self.chol.mahalanobis_sq(point, &self.center) < self.radius * self.radius
    }

    /// Uniform on A: θ̂ + r L u with u uniform in the unit ball.
    pub fn sample_ellipsoid<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let mut u = vec![0.0; self.center.len()];
        unit_ball_point(rng, &mut u);
        u.iter_mut().for_each(|x| *x *= self.radius);
        self.chol.transform(&u, &self.center, out);
    }
}

impl Support for ThamesRegion {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn log_volume(&self) -> f64 {
        self.log_volume
    }

    fn contains(&self, point: &[f64]) -> bool {
        self.in_ellipsoid(point)
    }

    fn sample_uniform(&self, rng: &mut dyn rand::RngCore, out: &mut [f64]) {
        self.sample_ellipsoid(rng, out)
    }
}

/// Uniform instrumental on the Σ̂-ellipsoid of radius `r` (default √(d + 1)).
pub fn thames(eval: &DrawSet, build: &DrawSet, r: Option<f64>) -> Result<EvidenceEstimate> {
    if eval.dim() != build.dim() {
        return Err(Error::Dimension { expected: build.dim(), got: eval.dim() });
    }
    let region = ThamesRegion::fit(build, r)?;
    let lv = region.log_volume;
    let terms: Vec<f64> = eval
        .rows()
        .zip(eval.log_densities())
        .filter(|(row, _)| region.in_ellipsoid(row))
        .map(|(_, ld)| -lv - ld)
        .collect();
    Ok(EvidenceEstimate::from_log_terms(Method::Thames, &terms, eval.len())?
        .with_volume(region.volume())
        .with_diag("radius", region.radius))
}

/// Uniform instrumental on A′ = A ∩ {log π̃ > q̂}, q̂ the (1 − α_trunc)
/// quantile of the build log-densities. Vol(A′) is estimated from `n_vol`
/// uniform draws on A using `rng`.
pub fn mix_thames<R: Rng + ?Sized>(
    eval: &DrawSet,
    build: &DrawSet,
    logdens: &LogDensity<'_>,
    r: Option<f64>,
    alpha_trunc: UnitInterval,
    n_vol: usize,
    rng: &mut R,
) -> Result<EvidenceEstimate> {
    if eval.dim() != build.dim() {
        return Err(Error::Dimension { expected: build.dim(), got: eval.dim() });
    }
    if n_vol < 1000 {
        return Err(Error::Size { got: n_vol, min: 1000 });
    }
    let mut region = ThamesRegion::fit(build, r)?;
    let q = hpd_threshold(build.log_densities(), alpha_trunc)?;
    region.log_truncation = Some(q);

    let mut p = vec![0.0; build.dim()];
    let mut hits = 0usize;
    for _ in 0..n_vol {
        region.sample_ellipsoid(rng, &mut p);
        let ld = logdens(&p);
        if ld.is_nan() || ld == f64::INFINITY {
            return Err(Error::Numerical { point: p });
        }
        if ld > q {
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::EmptySupport);
    }
    let frac = hits as f64 / n_vol as f64;
    let log_v = region.log_volume + frac.ln();
    let terms: Vec<f64> = eval
        .rows()
        .zip(eval.log_densities())
        .filter(|(row, ld)| **ld > q && region.in_ellipsoid(row))
        .map(|(_, ld)| -log_v - ld)
        .collect();
    let vol = log_v.exp();
    Ok(EvidenceEstimate::from_log_terms(Method::MixThames, &terms, eval.len())?
        .with_volume(vol)
        .with_diag("radius", region.radius)
        .with_diag("alpha_trunc", alpha_trunc.value())
        .with_diag("log_truncation", q)
        .with_diag("volume_fraction", frac)
        .with_diag("volume_se", region.volume() * (frac * (1.0 - frac) / n_vol as f64).sqrt()))
}

/// Kolmogorov distance between {2(ℓ_max − ℓ_t) : ℓ_t ≥ q̂_α} and the χ²_d law
/// truncated to [0, 2(ℓ_max − q̂_α)].
pub fn ks_statistic(build: &DrawSet, alpha: UnitInterval) -> Result<f64> {
    if build.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = build.dim();
    let lds = build.log_densities();
    let mut sorted = lds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let l_max = sorted[sorted.len() - 1];
    let q = quantile_sorted(&sorted, 1.0 - alpha.value());
    let tau = 2.0 * (l_max - q);
    let mass = chi2_cdf(tau, d);
    // ascending in 2(ℓ_max − ℓ) means descending in ℓ
    let xs: Vec<f64> = sorted.iter().rev().take_while(|&&l| l >= q).map(|l| 2.0 * (l_max - l)).collect();
    let m = xs.len() as f64;
    let mut dist: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let g = if mass > 0.0 { (chi2_cdf(*x, d) / mass).min(1.0) } else { 1.0 };
        dist = dist.max((g - i as f64 / m).abs()).max(((i + 1) as f64 / m - g).abs());
    }
    Ok(dist)
}

/// The grid level with the smallest [`ks_statistic`]; ties go to the smaller level.
pub fn ks_truncation_level(build: &DrawSet) -> Result<UnitInterval> {
    let mut best = (f64::INFINITY, KS_GRID[0]);
    for &a in &KS_GRID {
        let s = ks_statistic(build, UnitInterval::new(a)?)?;
        if s < best.0 {
            best = (s, a);
        }
    }
    UnitInterval::new(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpd::split;
    use crate::rng::seeded;
    use crate::targets::{GaussianConjugateModel, TargetModel, UniformCubeModel};
    use approx::assert_relative_eq;

    #[test]
    fn region_volume_formula() {
        let build = DrawSet::new(2, vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0], vec![0.0; 4]).unwrap();
        let reg = ThamesRegion::fit(&build, None).unwrap();
        // Σ̂ = (4/3) I, r = √3
        assert_relative_eq!(reg.volume(), std::f64::consts::PI * 3.0 * 4.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(reg.radius(), 3f64.sqrt());
    }

    #[test]
    fn region_volume_by_hits() {
        let m = GaussianConjugateModel::simulate(3, 20, 1.0, &[1.0, 1.0, 1.0], 4).unwrap();
        let ds = m.sample_posterior(2000, &mut seeded(1)).unwrap();
        let reg = ThamesRegion::fit(&ds, None).unwrap();
        let mut rng = seeded(2);
        let (c, r) = (reg.center().to_vec(), reg.radius());
        let sd: Vec<f64> = (0..3).map(|i| reg.covariance()[(i, i)].sqrt() * r).collect();
        let n = 200_000;
        let mut hits = 0;
        let mut p = [0.0; 3];
        for _ in 0..n {
            for i in 0..3 {
                p[i] = c[i] + sd[i] * (2.0 * rng.gen::<f64>() - 1.0);
            }
            if reg.in_ellipsoid(&p) {
                hits += 1;
            }
        }
        let boxv: f64 = sd.iter().map(|s| 2.0 * s).product();
        let est = boxv * hits as f64 / n as f64;
        assert!((est / reg.volume() - 1.0).abs() < 0.01, "{est} {}", reg.volume());
    }

    #[test]
    fn cube_constant_density() {
        let m = UniformCubeModel::new(2).unwrap();
        let ds = m.sample_posterior(20_000, &mut seeded(3)).unwrap();
        let (b, e) = split(&ds).unwrap();
        // shrink so A sits inside the cube
        let est = thames(&e, &b, Some(1.0)).unwrap();
        assert!(est.log_z.abs() < 3.0 * est.log_se, "{} {}", est.log_z, est.log_se);
    }

    #[test]
    fn mix_thames_without_bite_matches_thames() {
        let m = GaussianConjugateModel::simulate(2, 20, 1.0, &[1.0, 1.0], 42).unwrap();
        let ds = m.sample_posterior(10_000, &mut seeded(4)).unwrap();
        let (b, e) = split(&ds).unwrap();
        let f = |t: &[f64]| m.log_unnorm_posterior(t);
        let a = UnitInterval::new(0.9999).unwrap();
        let mt = mix_thames(&e, &b, &f, None, a, 10_000, &mut seeded(5)).unwrap();
        let th = thames(&e, &b, None).unwrap();
        // q̂ is near the minimum build density, which sits outside A for r = √3
        assert!(mt.diagnostics["volume_fraction"] > 0.999);
        assert!((mt.log_z - th.log_z).abs() < 0.005);
    }

    #[test]
    fn mix_thames_half_truncation_near_exact() {
        let m = GaussianConjugateModel::simulate(2, 20, 1.0, &[1.0, 1.0], 42).unwrap();
        let ds = m.sample_posterior(20_000, &mut seeded(6)).unwrap();
        let (b, e) = split(&ds).unwrap();
        let f = |t: &[f64]| m.log_unnorm_posterior(t);
        let a = UnitInterval::new(DEFAULT_ALPHA_TRUNC).unwrap();
        let mt = mix_thames(&e, &b, &f, None, a, DEFAULT_N_VOL, &mut seeded(7)).unwrap();
        let exact = m.exact_log_evidence().unwrap();
        let vol_rel = mt.diagnostics["volume_se"] / mt.support_volume.unwrap();
        let se = (mt.log_se.powi(2) + vol_rel.powi(2)).sqrt();
        assert!((mt.log_z - exact).abs() < 4.0 * se, "{} {} {se}", mt.log_z, exact);
    }

    #[test]
    fn ks_level_for_gaussian_draws() {
        let m = GaussianConjugateModel::simulate(2, 20, 1.0, &[1.0, 1.0], 42).unwrap();
        let ds = m.sample_posterior(10_000, &mut seeded(8)).unwrap();
        let a = ks_truncation_level(&ds).unwrap();
        assert!(ks_statistic(&ds, a).unwrap() < 0.05);
        let shifted = ds.shifted(12.5);
        assert_eq!(ks_truncation_level(&shifted).unwrap(), a);
    }

    #[test]
    fn ks_two_point_sample_is_deterministic() {
        let ds = DrawSet::new(1, vec![0.0, 1.0], vec![-1.0, -2.0]).unwrap();
        let a = ks_truncation_level(&ds).unwrap();
        assert_eq!(a, ks_truncation_level(&ds).unwrap());
        assert!(KS_GRID.contains(&a.value()));
    }
}
