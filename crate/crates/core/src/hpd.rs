//! Split posterior draws into build/evaluate halves and classify the build
//! half against an empirical HPD density threshold.

use crate::draws::DrawSet;
use crate::error::{Error, Result};
use crate::geometry::UnitInterval;

/// Build half split into high- and low-density points at `log_threshold`.
#[derive(Debug, Clone)]
pub struct HpdPartition {
    pub build_half: DrawSet,
    pub eval_half: DrawSet,
    pub log_threshold: f64,
    pub alpha: UnitInterval,
    /// Indices into `build_half` with log-density ≥ threshold, ascending.
    pub hpd_indices: Vec<usize>,
    /// The complement within `build_half`, ascending.
    pub lpd_indices: Vec<usize>,
}

impl HpdPartition {
    pub fn hpd_points(&self) -> DrawSet {
        self.build_half.select(&self.hpd_indices)
    }

    pub fn lpd_points(&self) -> DrawSet {
        self.build_half.select(&self.lpd_indices)
    }

    pub fn hpd_fraction(&self) -> f64 {
        self.hpd_indices.len() as f64 / self.build_half.len() as f64
    }
}

/// First half = draws 1..T, second half = T+1..2T, order preserved.
pub fn split(sample: &DrawSet) -> Result<(DrawSet, DrawSet)> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::Size { got: n, min: 4 });
    }
    if !n.is_multiple_of(2) {
        return Err(Error::OddSample(n));
    }
    let t = n / 2;
    Ok((sample.slice(0, t)?, sample.slice(t, n)?))
}

/// Empirical quantile at probability `p`, linear interpolation between order
/// statistics: `h = p·(N−1)`, `v[⌊h⌋] + (h−⌊h⌋)(v[⌊h⌋+1] − v[⌊h⌋])`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, p))
}

pub(crate) fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= v.len() {
        return v[v.len() - 1];
    }
    let frac = h - lo as f64;
    if frac == 0.0 {
        v[lo]
    } else {
        v[lo] + frac * (v[lo + 1] - v[lo])
    }
}

/// log c, the (1 − α)-quantile of the log-densities.
pub fn hpd_threshold(log_densities: &[f64], alpha: UnitInterval) -> Result<f64> {
    let a = alpha.value();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::invalid(format!("HPD level {a} must lie in (0, 1)")));
    }
    quantile(log_densities, 1.0 - a)
}

/// Split, then classify the build half at the empirical threshold (ties go to
/// the HPD side).
pub fn partition(sample: &DrawSet, alpha: UnitInterval) -> Result<HpdPartition> {
    let (build_half, eval_half) = split(sample)?;
    partition_halves(build_half, eval_half, alpha)
}

/// Like [`partition`] for halves that are already separated.
pub fn partition_halves(build_half: DrawSet, eval_half: DrawSet, alpha: UnitInterval) -> Result<HpdPartition> {
    if build_half.len() != eval_half.len() {
        return Err(Error::invalid("build and evaluation halves differ in size"));
    }
    if build_half.dim() != eval_half.dim() {
        return Err(Error::Dimension { expected: build_half.dim(), got: eval_half.dim() });
    }
    let log_threshold = hpd_threshold(build_half.log_densities(), alpha)?;
    let (hpd_indices, lpd_indices): (Vec<usize>, Vec<usize>) =
        (0..build_half.len()).partition(|&i| build_half.log_densities()[i] >= log_threshold);
    Ok(HpdPartition { build_half, eval_half, log_threshold, alpha, hpd_indices, lpd_indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal};

    fn ds_1d(values: &[f64], lds: &[f64]) -> DrawSet {
        DrawSet::new(1, values.to_vec(), lds.to_vec()).unwrap()
    }

    #[test]
    fn split_keeps_order() {
        let v: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ds = ds_1d(&v, &v);
        let (a, b) = split(&ds).unwrap();
        assert_eq!(a.flat(), &[0.0, 1.0, 2.0]);
        assert_eq!(b.flat(), &[3.0, 4.0, 5.0]);
        assert_eq!(a.concat(&b).unwrap(), ds);
    }

    #[test]
    fn split_guards() {
        let ds = ds_1d(&[0.0, 1.0], &[0.0, 0.0]);
        assert!(matches!(split(&ds), Err(Error::Size { got: 2, min: 4 })));
        let ds = ds_1d(&[0.0; 5], &[0.0; 5]);
        assert!(matches!(split(&ds), Err(Error::OddSample(5))));
    }

    #[test]
    fn threshold_examples() {
        let half = UnitInterval::new(0.5).unwrap();
        assert_eq!(hpd_threshold(&[5.0, 1.0, 4.0, 2.0, 3.0], half).unwrap(), 3.0);
        // h = 0.25 · 1
        assert_eq!(hpd_threshold(&[10.0, 0.0], UnitInterval::new(0.75).unwrap()).unwrap(), 2.5);
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let t = hpd_threshold(&v, UnitInterval::new(0.99).unwrap()).unwrap();
        assert!((t - 0.99).abs() < 1e-12);
        assert!(matches!(hpd_threshold(&[], half), Err(Error::EmptyInput)));
        assert!(hpd_threshold(&[1.0], UnitInterval::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn partition_hand_case() {
        // build half log-densities: 3, 1, 4, 1, then eval half
        let lds = [3.0, 1.0, 4.0, 1.5, 0.0, 0.0, 0.0, 0.0];
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let part = partition(&ds_1d(&xs, &lds), UnitInterval::new(0.5).unwrap()).unwrap();
        // sorted {1, 1.5, 3, 4}, h = 1.5 → 1.5 + 0.5·1.5 = 2.25
        assert_eq!(part.log_threshold, 2.25);
        assert_eq!(part.hpd_indices, vec![0, 2]);
        assert_eq!(part.lpd_indices, vec![1, 3]);
        assert_eq!(part.eval_half.flat(), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn ties_go_to_hpd() {
        let ds = ds_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 6]);
        let part = partition(&ds, UnitInterval::new(0.3).unwrap()).unwrap();
        assert_eq!(part.hpd_indices.len(), 3);
        assert!(part.lpd_indices.is_empty());
    }

    #[test]
    fn gaussian_fraction_near_alpha() {
        let mut rng = seeded(4);
        let n = 2000;
        let xs: Vec<f64> = (0..2 * n).map(|_| standard_normal(&mut rng)).collect();
        let ds = DrawSet::from_rows(1, xs, |x| -0.5 * x[0] * x[0]).unwrap();
        let part = partition(&ds, UnitInterval::new(0.75).unwrap()).unwrap();
        assert!((part.hpd_fraction() - 0.75).abs() <= 2.0 / n as f64);
        let hpd = part.hpd_points();
        let lpd = part.lpd_points();
        let max_lpd = lpd.log_densities().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_hpd = hpd.log_densities().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max_lpd < part.log_threshold && part.log_threshold <= min_hpd);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantile_is_monotone_and_bounded(
                v in prop::collection::vec(-1e6f64..1e6, 1..200),
                p in 0.0f64..=1.0,
                q in 0.0f64..=1.0,
            ) {
                let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
                let a = quantile(&v, lo).unwrap();
                let b = quantile(&v, hi).unwrap();
                prop_assert!(a <= b);
                let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(min <= a && b <= max);
                prop_assert_eq!(quantile(&v, 0.0).unwrap(), min);
                prop_assert_eq!(quantile(&v, 1.0).unwrap(), max);
            }

            #[test]
            fn partition_is_a_split_at_the_threshold(
                lds in prop::collection::vec(-50.0f64..50.0, 4..100),
                alpha in 0.01f64..0.99,
            ) {
                let n = lds.len() & !1;
                let lds = &lds[..n];
                let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
                let part = partition(&ds_1d(&xs, lds), UnitInterval::new(alpha).unwrap()).unwrap();
                prop_assert_eq!(part.hpd_indices.len() + part.lpd_indices.len(), n / 2);
                prop_assert!(!part.hpd_indices.is_empty());
                for &i in &part.hpd_indices {
                    prop_assert!(lds[i] >= part.log_threshold);
                }
                for &i in &part.lpd_indices {
                    prop_assert!(lds[i] < part.log_threshold);
                }
            }
        }
    }
}
