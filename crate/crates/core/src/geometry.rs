//! Ellipsoids: exact volume, Mahalanobis membership, uniform sampling, plus the
//! Gram–Schmidt basis and one-dimensional boundary bisection used to fit them
//! to a density level set.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::unit_ball_point;
use crate::special::ln_unit_ball_volume;
use crate::LogDensity;

const ORTHONORMAL_TOL: f64 = 1e-10;
const DEPENDENT_SEED_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 100;
/// Grid cells scanned before bisecting in [`bisect_boundary`].
pub const BOUNDARY_SCAN_STEPS: usize = 64;

/// A real number in `[0, 1]` (HPD levels, subsampling rates).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct UnitInterval(f64);

impl UnitInterval {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!("{value} is not in [0, 1]")))
        }
    }

    /// Like [`UnitInterval::new`] but rejects the endpoints.
    pub fn open(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!("{value} is not in (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for UnitInterval {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<UnitInterval> for f64 {
    fn from(u: UnitInterval) -> f64 {
        u.0
    }
}

/// Closed ellipsoid `{x : (x - c)ᵀ U diag(s⁻²) Uᵀ (x - c) ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    center: Vec<f64>,
    axes: DMatrix<f64>,
    semi_axes: Vec<f64>,
    max_semi_axis: f64,
}

impl Ellipsoid {
    /// `axes` holds the orthonormal directions u_1..u_d as columns.
    pub fn new(center: Vec<f64>, axes: DMatrix<f64>, semi_axes: Vec<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        if axes.nrows() != d || axes.ncols() != d {
            return Err(Error::Dimension { expected: d, got: axes.nrows().max(axes.ncols()) });
        }
        if semi_axes.len() != d {
            return Err(Error::Dimension { expected: d, got: semi_axes.len() });
        }
        if let Some(s) = semi_axes.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!("semi-axis {s} must be positive and finite")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("ellipsoid center must be finite"));
        }
        let dev = orthonormality_defect(&axes);
        if dev > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("axes are not orthonormal (‖UᵀU − I‖_F = {dev:e})")));
        }
        let max_semi_axis = semi_axes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { center, axes, semi_axes, max_semi_axis })
    }

    /// Ball of the given radius.
    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        let d = center.len();
        Self::new(center, DMatrix::identity(d, d), vec![radius; d])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn axes(&self) -> &DMatrix<f64> {
        &self.axes
    }

    /// The i-th unit axis u_i.
    pub fn axis(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.axes.as_slice()[i * d..(i + 1) * d]
    }

    pub fn semi_axes(&self) -> &[f64] {
        &self.semi_axes
    }

    pub fn max_semi_axis(&self) -> f64 {
        self.max_semi_axis
    }

    /// Σ = U diag(s²) Uᵀ.
    pub fn shape_matrix(&self) -> DMatrix<f64> {
        let s2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.semi_axes.iter().map(|s| s * s),
        ));
        &self.axes * s2 * self.axes.transpose()
    }

    pub fn log_volume(&self) -> f64 {
        ln_unit_ball_volume(self.dim()) + self.semi_axes.iter().map(|s| s.ln()).sum::<f64>()
    }

    /// π^{d/2} / Γ(d/2 + 1) · ∏ s_i.
    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    /// ‖diag(1/s) Uᵀ (x − c)‖².
    pub fn mahalanobis_sq(&self, point: &[f64]) -> Result<f64> {
        self.check_dim(point)?;
        Ok(self.mahalanobis_sq_unchecked(point))
    }

    #[inline]
    pub(crate) fn mahalanobis_sq_unchecked(&self, point: &[f64]) -> f64 {
        let d = self.dim();
        let cols = self.axes.as_slice();
        let mut acc = 0.0;
        for (i, s) in self.semi_axes.iter().enumerate() {
            let u = &cols[i * d..(i + 1) * d];
            let proj: f64 = u
                .iter()
                .zip(point)
                .zip(&self.center)
                .map(|((u, p), c)| u * (p - c))
                .sum();
            let z = proj / s;
            acc += z * z;
        }
        acc
    }

    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        Ok(self.mahalanobis_sq(point)? <= 1.0)
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, point: &[f64]) -> bool {
        self.mahalanobis_sq_unchecked(point) <= 1.0
    }

    /// Writes one uniform point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let mut z = vec![0.0; d];
        unit_ball_point(rng, &mut z);
        out.copy_from_slice(&self.center);
        let cols = self.axes.as_slice();
        for i in 0..d {
            let scale = self.semi_axes[i] * z[i];
            for (o, u) in out.iter_mut().zip(&cols[i * d..(i + 1) * d]) {
                *o += u * scale;
            }
        }
    }

    /// `n` points uniform on the closed ellipsoid.
    pub fn uniform_sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let mut p = vec![0.0; self.dim()];
                self.sample_into(rng, &mut p);
                p
            })
            .collect()
    }

    fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            Err(Error::Dimension { expected: self.dim(), got: point.len() })
        } else {
            Ok(())
        }
    }
}

/// ‖UᵀU − I‖_F.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    (g - DMatrix::<f64>::identity(u.ncols(), u.ncols())).norm()
}

/// Orthonormal basis whose first column is `first_direction`, completed from
/// the standard basis vectors e_2, e_3, … (then e_1 if needed), skipping any
/// seed that is numerically dependent on the span so far.
pub fn gram_schmidt(first_direction: &[f64], d: usize) -> Result<DMatrix<f64>> {
    if first_direction.len() != d {
        return Err(Error::Dimension { expected: d, got: first_direction.len() });
    }
    let norm = first_direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::DegenerateDirection);
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    basis.push(first_direction.iter().map(|v| v / norm).collect());

    let seeds = (1..d).chain(std::iter::once(0));
    for seed in seeds {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[seed] = 1.0;
        // modified Gram–Schmidt, two passes for stability
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < DEPENDENT_SEED_TOL {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    debug_assert_eq!(basis.len(), d);
    Ok(DMatrix::from_iterator(d, d, basis.into_iter().flatten()))
}

/// Smallest radius `r ∈ [0, bracket_hi]` at which `logdens(origin + r·direction)`
/// drops below `log_c`, i.e. the first sign change of
/// `g(r) = logdens(origin + r·direction) − log_c` with `g(0) ≥ 0`.
///
/// The bracket is first scanned on [`BOUNDARY_SCAN_STEPS`] equal cells so a
/// ray that leaves the level set and re-enters it (another mode) stops at
/// the first exit; bisection then runs on that cell until its width is at
/// most `rel_tol` times its upper end (or after [`BISECTION_MAX_ITER`]
/// halvings) and returns the midpoint. The tolerance is relative to the
/// crossing itself, so thin directions are resolved as finely as wide ones.
///
/// Returns `None` when no scanned point lies below the level.
pub fn bisect_boundary(
    logdens: &LogDensity<'_>,
    origin: &[f64],
    direction: &[f64],
    log_c: f64,
    bracket_hi: f64,
    rel_tol: f64,
) -> Result<Option<f64>> {
    if origin.len() != direction.len() {
        return Err(Error::Dimension { expected: origin.len(), got: direction.len() });
    }
    if !(rel_tol > 0.0) || !(bracket_hi > 0.0) || !bracket_hi.is_finite() {
        return Err(Error::invalid("bisection needs rel_tol > 0 and a positive finite bracket"));
    }
    let mut point = vec![0.0; origin.len()];
    let mut g = |r: f64| -> Result<f64> {
        for ((p, o), u) in point.iter_mut().zip(origin).zip(direction) {
            *p = o + r * u;
        }
        let v = logdens(&point);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Numerical { point: point.clone() });
        }
        Ok(v - log_c)
    };

    if g(0.0)? < 0.0 {
        return Err(Error::invalid("bisection origin lies below the level set"));
    }
    let step = bracket_hi / BOUNDARY_SCAN_STEPS as f64;
    let mut lo = 0.0;
    let mut below = None;
    let mut last = 0.0;
    for j in 1..=BOUNDARY_SCAN_STEPS {
        let r = if j == BOUNDARY_SCAN_STEPS { bracket_hi } else { j as f64 * step };
        last = g(r)?;
        if last < 0.0 {
            below = Some(r);
            break;
        }
        lo = r;
    }
    let Some(mut hi) = below else {
        return Ok((last == 0.0).then_some(bracket_hi));
    };
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= rel_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
