//! Greedy covering of an empirical HPD region by disjoint ellipsoids.
//!
//! Candidate centers are a random subsample of the HPD points, visited in
//! decreasing density order. Each candidate gets an ellipsoid whose first
//! axis points at the nearest low-density point and whose semi-axes are
//! fitted by bisection against the density threshold. An ellipsoid is kept
//! only if its bounding sphere is disjoint from every bounding sphere already
//! kept, which makes the union's volume the exact sum of member volumes.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bisect_boundary, gram_schmidt, Ellipsoid, UnitInterval};
use crate::hpd::HpdPartition;
use crate::par::{map_indices, Execution};
use crate::rng::seeded;
use crate::LogDensity;

pub const DEFAULT_SUBSAMPLE_RATE: f64 = 0.075;
pub const DEFAULT_BISECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct CoveringConfig {
    /// Fraction k of HPD points kept as candidate centers.
    pub subsample_rate: UnitInterval,
    pub alpha: UnitInterval,
    /// Bisection tolerance relative to each crossing radius.
    pub bisection_tol: f64,
    pub rng_seed: u64,
    pub exec: Execution,
}

impl CoveringConfig {
    pub fn new(alpha: UnitInterval, rng_seed: u64) -> Self {
        Self {
            subsample_rate: UnitInterval::new(DEFAULT_SUBSAMPLE_RATE).expect("constant in range"),
            alpha,
            bisection_tol: DEFAULT_BISECTION_TOL,
            rng_seed,
            exec: Execution::default(),
        }
    }

    pub fn with_subsample_rate(mut self, k: UnitInterval) -> Result<Self> {
        if k.value() <= 0.0 {
            return Err(Error::invalid("subsample rate must be positive"));
        }
        self.subsample_rate = k;
        Ok(self)
    }
}

/// How a semi-axis length was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisOrigin {
    /// Bisection crossing along `sign · u_i`, resolved to about `tol`.
    Crossing { sign: i8, tol: f64 },
    /// No crossing in the search range; the range limit was used.
    RangeLimit,
}

/// Disjoint union of ellipsoids with its exact total volume.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidUnion {
    ellipsoids: Vec<Ellipsoid>,
    axis_origins: Vec<Vec<AxisOrigin>>,
    volumes: Vec<f64>,
    total_volume: f64,
    log_threshold: f64,
    dim: usize,
}

impl EllipsoidUnion {
    /// Fails if the list is empty or the bounding-sphere certificate does not hold.
    pub fn new(ellipsoids: Vec<Ellipsoid>, log_threshold: f64) -> Result<Self> {
        let origins = ellipsoids.iter().map(|e| vec![AxisOrigin::RangeLimit; e.dim()]).collect();
        Self::with_origins(ellipsoids, origins, log_threshold)
    }

    fn with_origins(ellipsoids: Vec<Ellipsoid>, axis_origins: Vec<Vec<AxisOrigin>>, log_threshold: f64) -> Result<Self> {
        let first = ellipsoids.first().ok_or(Error::DegenerateCovering)?;
        let dim = first.dim();
        if let Some(e) = ellipsoids.iter().find(|e| e.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: e.dim() });
        }
        let volumes: Vec<f64> = ellipsoids.iter().map(Ellipsoid::volume).collect();
        let total_volume = volumes.iter().sum();
        let u = Self { ellipsoids, axis_origins, volumes, total_volume, log_threshold, dim };
        if !u.disjointness_certificate() {
            return Err(Error::invalid("ellipsoid bounding spheres overlap"));
        }
        Ok(u)
    }

    pub fn ellipsoids(&self) -> &[Ellipsoid] {
        &self.ellipsoids
    }

    pub fn axis_origins(&self) -> &[Vec<AxisOrigin>] {
        &self.axis_origins
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.ellipsoids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ellipsoids.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn log_total_volume(&self) -> f64 {
        self.total_volume.ln()
    }

    pub fn log_threshold(&self) -> f64 {
        self.log_threshold
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// ‖μ_i − μ_j‖ ≥ s_max,i + s_max,j for every pair.
    pub fn disjointness_certificate(&self) -> bool {
        let es = &self.ellipsoids;
        (0..es.len()).all(|i| {
            (i + 1..es.len()).all(|j| {
                distance(es[i].center(), es[j].center()) >= es[i].max_semi_axis() + es[j].max_semi_axis()
            })
        })
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        if point.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: point.len() });
        }
        Ok(self.contains_unchecked(point))
    }

    /// Bounding-sphere pre-test, then the exact quadratic form; first hit wins.
    #[inline]
    pub(crate) fn contains_unchecked(&self, point: &[f64]) -> bool {
        self.ellipsoids.iter().any(|e| {
            let r = e.max_semi_axis();
            distance_sq(point, e.center()) <= r * r && e.contains_unchecked(point)
        })
    }

    /// Membership of each row of a row-major point matrix.
    pub fn contains_rows(&self, flat: &[f64], exec: Execution) -> Vec<bool> {
        crate::par::map_chunks(flat, self.dim, exec, |p| self.contains_unchecked(p))
    }

    /// Uniform on the union: pick ellipsoid j with probability V_j / V, then
    /// uniform inside it.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let target = rng.gen::<f64>() * self.total_volume;
        let mut acc = 0.0;
        let mut pick = self.ellipsoids.len() - 1;
        for (j, v) in self.volumes.iter().enumerate() {
            acc += v;
            if target < acc {
                pick = j;
                break;
            }
        }
        self.ellipsoids[pick].sample_into(rng, out);
    }

    pub fn uniform_sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let mut p = vec![0.0; self.dim];
                self.sample_into(rng, &mut p);
                p
            })
            .collect()
    }

    /// Fraction of the partition's HPD points inside the union.
    pub fn coverage_fraction(&self, part: &HpdPartition) -> Result<f64> {
        if part.build_half.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: part.build_half.dim() });
        }
        if part.hpd_indices.is_empty() {
            return Ok(0.0);
        }
        let inside = part
            .hpd_indices
            .iter()
            .filter(|&&i| self.contains_unchecked(part.build_half.draw(i)))
            .count();
        Ok(inside as f64 / part.hpd_indices.len() as f64)
    }

    pub fn to_file(&self) -> UnionFile {
        UnionFile {
            format: UNION_FORMAT.to_string(),
            d: self.dim,
            log_threshold: self.log_threshold,
            total_volume: self.total_volume,
            ellipsoids: self
                .ellipsoids
                .iter()
                .zip(&self.volumes)
                .zip(&self.axis_origins)
                .map(|((e, v), o)| EllipsoidRecord {
                    center: e.center().to_vec(),
                    axes: e.axes().as_slice().to_vec(),
                    semi_axes: e.semi_axes().to_vec(),
                    volume: *v,
                    axis_origin: o.clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: UnionFile) -> Result<Self> {
        if file.format != UNION_FORMAT {
            return Err(Error::Parse { line: 0, msg: format!("unknown format `{}`", file.format) });
        }
        let d = file.d;
        let mut ellipsoids = Vec::with_capacity(file.ellipsoids.len());
        let mut origins = Vec::with_capacity(file.ellipsoids.len());
        for rec in file.ellipsoids {
            if rec.axes.len() != d * d {
                return Err(Error::Dimension { expected: d * d, got: rec.axes.len() });
            }
            let axes = DMatrix::from_column_slice(d, d, &rec.axes);
            ellipsoids.push(Ellipsoid::new(rec.center, axes, rec.semi_axes)?);
            origins.push(rec.axis_origin);
        }
        let mut u = Self::with_origins(ellipsoids, origins, file.log_threshold)?;
        if u.dim != d {
            return Err(Error::Dimension { expected: d, got: u.dim });
        }
        if ((u.total_volume - file.total_volume) / file.total_volume).abs() > 1e-12 {
            return Err(Error::Parse { line: 0, msg: "total_volume disagrees with ellipsoid volumes".into() });
        }
        u.total_volume = file.total_volume;
        Ok(u)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.to_file())?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Self::from_file(serde_json::from_reader(r)?)
    }

    pub fn read_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub const UNION_FORMAT: &str = "ellipsoid-union/v1";

/// On-disk form of an [`EllipsoidUnion`]. `axes` is U flattened column by
/// column (u_1 first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionFile {
    pub format: String,
    pub d: usize,
    pub log_threshold: f64,
    pub total_volume: f64,
    pub ellipsoids: Vec<EllipsoidRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidRecord {
    pub center: Vec<f64>,
    pub axes: Vec<f64>,
    pub semi_axes: Vec<f64>,
    pub volume: f64,
    #[serde(default)]
    pub axis_origin: Vec<AxisOrigin>,
}

/// Builds the covering for `part` against `logdens`, the same unnormalized
/// log-posterior that produced the partition's densities.
pub fn build_covering(part: &HpdPartition, cfg: &CoveringConfig, logdens: &LogDensity<'_>) -> Result<EllipsoidUnion> {
    if part.hpd_indices.is_empty() {
        return Err(Error::EmptyHpd);
    }
    let build = &part.build_half;
    let log_c = part.log_threshold;

    // 1. subsample without replacement
    let n_hpd = part.hpd_indices.len();
    let n_cand = ((cfg.subsample_rate.value() * n_hpd as f64).floor() as usize).clamp(1, n_hpd);
    let mut rng = seeded(cfg.rng_seed);
    let mut candidates: Vec<usize> =
        index::sample(&mut rng, n_hpd, n_cand).into_iter().map(|j| part.hpd_indices[j]).collect();

    // 2. highest density first, ties by original index
    let lds = build.log_densities();
    candidates.sort_by(|&a, &b| lds[b].total_cmp(&lds[a]).then(a.cmp(&b)));

    let points: Vec<&[f64]> = candidates.iter().map(|&i| build.draw(i)).collect();
    let lpd: Vec<&[f64]> = part.lpd_indices.iter().map(|&i| build.draw(i)).collect();

    // 3. search range
    let mut r_max = max_pairwise_distance(&points, cfg.exec);
    if r_max == 0.0 {
        r_max = points
            .iter()
            .flat_map(|p| lpd.iter().map(move |q| distance(p, q)))
            .fold(f64::INFINITY, f64::min);
        if !r_max.is_finite() || r_max == 0.0 {
            return Err(Error::DegenerateCovering);
        }
    }

    // 4–7. greedy placement
    let mut available = vec![true; points.len()];
    let mut accepted: Vec<Ellipsoid> = Vec::new();
    let mut origins: Vec<Vec<AxisOrigin>> = Vec::new();
    for idx in 0..points.len() {
        if !available[idx] {
            continue;
        }
        available[idx] = false;
        let center = points[idx];
        let Some((ellipsoid, origin)) = fit_ellipsoid(center, &lpd, r_max, log_c, cfg.bisection_tol, logdens)? else {
            continue;
        };
        let s_max = ellipsoid.max_semi_axis();
        let overlaps = accepted
            .iter()
            .any(|e| distance(center, e.center()) < s_max + e.max_semi_axis());
        if overlaps {
            continue;
        }
        for (k, avail) in available.iter_mut().enumerate().skip(idx + 1) {
            if *avail && ellipsoid.contains_unchecked(points[k]) {
                *avail = false;
            }
        }
        accepted.push(ellipsoid);
        origins.push(origin);
    }
    debug_assert_eq!(accepted.len(), origins.len());
    if accepted.is_empty() {
        return Err(Error::DegenerateCovering);
    }
    EllipsoidUnion::with_origins(accepted, origins, log_c)
}

/// Shape of the ellipsoid centered at `center`, or `None` when a semi-axis
/// degenerates to zero.
fn fit_ellipsoid(
    center: &[f64],
    lpd: &[&[f64]],
    r_max: f64,
    log_c: f64,
    rel_tol: f64,
    logdens: &LogDensity<'_>,
) -> Result<Option<(Ellipsoid, Vec<AxisOrigin>)>> {
    let d = center.len();
    let search = |dir: &[f64], hi: f64| -> Result<Option<(f64, f64)>> {
        Ok(bisect_boundary(logdens, center, dir, log_c, hi, rel_tol)?.map(|r| (r, rel_tol * r)))
    };
    let both_ways = |dir: &[f64]| -> Result<(f64, AxisOrigin)> {
        let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
        let plus = search(dir, r_max)?;
        let minus = search(&neg, r_max)?;
        Ok(match (plus, minus) {
            (Some((rp, _)), Some((rm, tm))) if rm < rp => (rm, AxisOrigin::Crossing { sign: -1, tol: tm }),
            (Some((rp, tp)), _) => (rp, AxisOrigin::Crossing { sign: 1, tol: tp }),
            (None, Some((rm, tm))) => (rm, AxisOrigin::Crossing { sign: -1, tol: tm }),
            (None, None) => (r_max, AxisOrigin::RangeLimit),
        })
    };

    let nearest = lpd
        .iter()
        .map(|q| (distance(center, q), *q))
        .min_by(|a, b| a.0.total_cmp(&b.0));

    let mut semi = Vec::with_capacity(d);
    let mut origin = Vec::with_capacity(d);
    let basis = match nearest {
        Some((dist, q)) if dist > 0.0 => {
            let u1: Vec<f64> = q.iter().zip(center).map(|(a, b)| (a - b) / dist).collect();
            let hi = r_max.max(dist);
            let found = match search(&u1, hi)? {
                Some(hit) => Some(hit),
                // the widened bracket can end back inside the level set; the
                // known low-density point still brackets a crossing
                None if hi > dist => search(&u1, dist)?,
                None => None,
            };
            match found {
                Some((r, tol)) => {
                    semi.push(r);
                    origin.push(AxisOrigin::Crossing { sign: 1, tol });
                }
                None => {
                    semi.push(r_max);
                    origin.push(AxisOrigin::RangeLimit);
                }
            }
            gram_schmidt(&u1, d)?
        }
        _ => {
            // no low-density reference point: no preferred direction, so the
            // first axis is fitted symmetrically like the others
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            let (s, o) = both_ways(&e1)?;
            semi.push(s);
            origin.push(o);
            gram_schmidt(&e1, d)?
        }
    };
    for i in 1..d {
        let u = basis.column(i);
        let (s, o) = both_ways(u.as_slice())?;
        semi.push(s);
        origin.push(o);
    }
    if semi.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Ok(None);
    }
    Ok(Some((Ellipsoid::new(center.to_vec(), basis, semi)?, origin)))
}

/// Exact diameter of a point cloud. A double farthest-point sweep gives a
/// lower bound; with points sorted by distance from the centroid, a pair
/// (i, j) can only beat it while ρ_i + ρ_j exceeds the bound.
fn max_pairwise_distance(points: &[&[f64]], exec: Execution) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let d = points[0].len();
    let mut centroid = vec![0.0; d];
    for p in points {
        centroid.iter_mut().zip(*p).for_each(|(c, v)| *c += v / n as f64);
    }
    let farthest = |from: &[f64]| {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (distance_sq(from, p), i))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (_, a) = farthest(&centroid);
    let (_, b) = farthest(points[a]);
    let (lower_sq, _) = farthest(points[b]);
    let lower = lower_sq.sqrt();

    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (distance(p, &centroid), i)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let best = map_indices(n, exec, |i| {
        let (ri, pi) = order[i];
        let mut best = 0.0f64;
        for &(rj, pj) in &order[i + 1..] {
            if ri + rj <= lower {
                break;
            }
            best = best.max(distance_sq(points[pi], points[pj]));
        }
        best
    })
    .into_iter()
    .fold(lower_sq, f64::max);
    best.sqrt()
}

#[inline]
pub(crate) fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance_sq(a, b).sqrt()
}
