//! Decision sets and the projection operators used by the algorithm and by
//! the offline comparator.

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Componentwise `max(v, 0)`.
pub fn clip_nonneg(v: &Vector) -> Vector {
    v.map(|x| x.max(0.0))
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A closed convex set sandwiched between two centered balls:
/// `r·B ⊆ X ⊆ R·B`.
pub trait BallBounded {
    fn dim(&self) -> usize;
    fn inner_radius(&self) -> f64;
    fn outer_radius(&self) -> f64;
    /// Membership with slack `tol`.
    fn contains(&self, x: &Vector, tol: f64) -> bool;
    /// Euclidean projection onto `(1 - shrink)·X`.
    fn project_scaled(&self, x: &Vector, shrink: f64) -> Result<Vector>;

    fn project(&self, x: &Vector) -> Result<Vector> {
        self.project_scaled(x, 0.0)
    }

    fn contains_scaled(&self, x: &Vector, shrink: f64, tol: f64) -> bool;
}

/// Axis-aligned box `[-h, h]^p`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoxSet {
    pub half_width: f64,
    pub dim: usize,
}

impl BoxSet {
    pub fn new(half_width: f64, dim: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(Self { half_width, dim })
    }
}

impl BallBounded for BoxSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn inner_radius(&self) -> f64 {
        self.half_width
    }

    fn outer_radius(&self) -> f64 {
        self.half_width * (self.dim as f64).sqrt()
    }

    fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.contains_scaled(x, 0.0, tol)
    }

    fn contains_scaled(&self, x: &Vector, shrink: f64, tol: f64) -> bool {
        let h = (1.0 - shrink) * self.half_width;
        x.len() == self.dim && x.iter().all(|c| c.abs() <= h + tol)
    }

    fn project_scaled(&self, x: &Vector, shrink: f64) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        if !(0.0..=1.0).contains(&shrink) {
            return Err(Error::invalid(
                "shrink",
                format!("must lie in [0, 1], got {shrink}"),
            ));
        }
        let h = (1.0 - shrink) * self.half_width;
        Ok(x.map(|c| c.clamp(-h, h)))
    }
}

/// `{x : <a, x> <= beta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    normal: Vector,
    offset: f64,
    norm_sq: f64,
}

impl Halfspace {
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        let norm_sq = normal.norm_squared();
        if !(norm_sq > 0.0) {
            return Err(Error::invalid("normal", "halfspace normal must be nonzero"));
        }
        Ok(Self {
            normal,
            offset,
            norm_sq,
        })
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `max(<a, x> - beta, 0)`.
    pub fn violation(&self, x: &Vector) -> f64 {
        (self.normal.dot(x) - self.offset).max(0.0)
    }

    /// Each row of `rows` with the matching entry of `rhs` as offset.
    /// Zero rows are skipped since they carry no constraint on `x`
    /// (the caller is responsible for `0 <= rhs` in that case).
    pub fn from_rows(rows: &Matrix, rhs: &Vector) -> Vec<Halfspace> {
        (0..rows.nrows())
            .filter_map(|k| Halfspace::new(rows.row(k).transpose(), rhs[k]).ok())
            .collect()
    }
}

pub fn project_halfspace(x: &Vector, hs: &Halfspace) -> Result<Vector> {
    check_dim(hs.normal.len(), x.len())?;
    let excess = hs.normal.dot(x) - hs.offset;
    // Points whose excess is within the rounding error of the dot product are
    // on the boundary already; this keeps the projection idempotent in
    // floating point.
    let scale = hs.offset.abs()
        + hs.normal
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a * b).abs())
            .sum::<f64>();
    if excess <= 4.0 * (x.len() as f64 + 1.0) * f64::EPSILON * scale {
        return Ok(x.clone());
    }
    Ok(x - &hs.normal * (excess / hs.norm_sq))
}

/// Outcome of Dykstra's alternating projections.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionProjection {
    pub point: Vector,
    pub converged: bool,
    pub iterations: usize,
    /// Largest violation over the box and every halfspace at `point`.
    pub max_violation: f64,
}

pub const DYKSTRA_TOL: f64 = 1e-8;
pub const DYKSTRA_MAX_ITER: usize = 10_000;

fn box_violation(set: &BoxSet, x: &Vector) -> f64 {
    x.iter()
        .map(|c| (c.abs() - set.half_width).max(0.0))
        .fold(0.0, f64::max)
}

fn max_violation(set: &BoxSet, halfspaces: &[Halfspace], x: &Vector) -> f64 {
    halfspaces
        .iter()
        .map(|h| h.violation(x))
        .fold(box_violation(set, x), f64::max)
}

/// Projects `x` onto `box ∩ halfspaces` with Dykstra's method.
///
/// One iteration is a full sweep over every set. The sweep stops once the
/// iterate moves by at most `tol` over a sweep and no constraint is violated
/// by more than `tol`. Hitting `max_iter` returns the last iterate with
/// `converged = false`.
pub fn project_intersection(
    x: &Vector,
    set: &BoxSet,
    halfspaces: &[Halfspace],
    tol: f64,
    max_iter: usize,
) -> Result<IntersectionProjection> {
    check_dim(set.dim, x.len())?;
    for h in halfspaces {
        check_dim(set.dim, h.normal.len())?;
    }
    if halfspaces.is_empty() {
        let point = set.project(x)?;
        return Ok(IntersectionProjection {
            point,
            converged: true,
            iterations: 1,
            max_violation: 0.0,
        });
    }

    let p = set.dim;
    let mut current = x.clone();
    let mut box_inc = Vector::zeros(p);
    let mut hs_inc = vec![Vector::zeros(p); halfspaces.len()];
    let mut shifted = Vector::zeros(p);

    for iter in 1..=max_iter {
        let start = current.clone();

        shifted.copy_from(&current);
        shifted += &box_inc;
        let next = set.project(&shifted)?;
        box_inc.copy_from(&shifted);
        box_inc -= &next;
        current = next;

        for (hs, inc) in halfspaces.iter().zip(hs_inc.iter_mut()) {
            shifted.copy_from(&current);
            shifted += &*inc;
            let next = project_halfspace(&shifted, hs)?;
            inc.copy_from(&shifted);
            *inc -= &next;
            current = next;
        }

        let moved = (&current - &start).norm();
        if moved <= tol {
            let viol = max_violation(set, halfspaces, &current);
            if viol <= tol {
                return Ok(IntersectionProjection {
                    point: current,
                    converged: true,
                    iterations: iter,
                    max_violation: viol,
                });
            }
        }
    }

    let viol = max_violation(set, halfspaces, &current);
    Ok(IntersectionProjection {
        point: current,
        converged: false,
        iterations: max_iter,
        max_violation: viol,
    })
}
