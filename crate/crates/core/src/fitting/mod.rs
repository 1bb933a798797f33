//! Least-squares fitting of the eight primitive kinds and the per-cell
//! fitting policy.
//!
//! [`fit_cell`] tries a plane first. If the plane fits within `eps1` the cell
//! may still be a curve, so the best curve is tried and wins when it also
//! fits. Otherwise the best surface over all kinds is taken, and when nothing
//! fits the cell is split by sequential RANSAC.
//!
//! Residuals are point-to-primitive distances; `eps1` bounds their rms.

mod curves;
mod lm;
mod ransac;
mod surfaces;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::geom::{bbox_diagonal, Vec3};
use crate::primitives::{CurveKind, CurvePrimitive, SurfaceKind, SurfacePrimitive};

pub use lm::{MAX_ITERATIONS, STEP_TOLERANCE};
pub use ransac::{ransac_multi, RANSAC_ROUNDS, RANSAC_THRESHOLD_FACTOR};
pub use surfaces::estimate_normals;

/// Largest admissible radius (and apex distance) of a fitted primitive.
pub const MAX_RADIUS: f64 = 10.0;

/// Points used by iterative refinement; larger sets are strided down.
pub const MAX_REFINE_POINTS: usize = 2048;

/// Relative plane rms below which a set counts as coplanar.
const COPLANAR_TOL: f64 = 1e-10;

/// Ties in rms closer than this go to the earlier kind.
pub const RMS_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("{got} points are too few (need {needed})")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("refinement did not converge")]
    NonConvergent,
    #[error("no primitive kind could be fitted")]
    AllKindsFailed,
    #[error("RANSAC found no model with enough inliers")]
    NoModelFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyPrimitive {
    Surface(SurfacePrimitive),
    Curve(CurvePrimitive),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub primitive: AnyPrimitive,
    pub rms_error: f64,
    pub inlier_count: usize,
    /// Set for a plane through collinear points: the normal is arbitrary.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rank_deficient: bool,
}

impl FitResult {
    pub fn surface(&self) -> Option<&SurfacePrimitive> {
        match &self.primitive {
            AnyPrimitive::Surface(s) => Some(s),
            AnyPrimitive::Curve(_) => None,
        }
    }

    pub fn curve(&self) -> Option<&CurvePrimitive> {
        match &self.primitive {
            AnyPrimitive::Curve(c) => Some(c),
            AnyPrimitive::Surface(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cell", content = "fit", rename_all = "snake_case")]
pub enum CellFit {
    Surface(FitResult),
    Curve(FitResult),
    Multi(Vec<FitResult>),
    Degenerate,
}

pub(crate) fn subsample(points: &[Vec3]) -> Cow<'_, [Vec3]> {
    if points.len() <= MAX_REFINE_POINTS {
        Cow::Borrowed(points)
    } else {
        let n = points.len();
        Cow::Owned(
            (0..MAX_REFINE_POINTS)
                .map(|i| points[i * n / MAX_REFINE_POINTS])
                .collect(),
        )
    }
}

fn rms(points: &[Vec3], dist: impl Fn(&Vec3) -> f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    (points.iter().map(|p| dist(p).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
}

fn check_count(points: &[Vec3], needed: usize) -> Result<(), FitError> {
    if points.len() < needed {
        return Err(FitError::TooFewPoints {
            needed,
            got: points.len(),
        });
    }
    Ok(())
}

pub(crate) fn surface_result(
    points: &[Vec3],
    prim: SurfacePrimitive,
    rank_deficient: bool,
) -> Result<FitResult, FitError> {
    let prim = prim.canonicalize();
    prim.validate()
        .map_err(|e| FitError::DegenerateConfiguration(e.0))?;
    let rms_error = rms(points, |p| prim.distance(p));
    if !rms_error.is_finite() {
        return Err(FitError::NonConvergent);
    }
    Ok(FitResult {
        primitive: AnyPrimitive::Surface(prim),
        rms_error,
        inlier_count: points.len(),
        rank_deficient,
    })
}

/// Fits one surface kind. `normals`, when given, must be parallel to
/// `points`; cylinder and cone use them for initialization and otherwise
/// estimate them from neighborhoods.
pub fn fit_surface_with_normals(
    points: &[Vec3],
    kind: SurfaceKind,
    normals: Option<&[Vec3]>,
) -> Result<FitResult, FitError> {
    check_count(points, kind.min_points())?;
    match kind {
        SurfaceKind::Plane => {
            let (prim, rank_deficient) = surfaces::fit_plane(points);
            surface_result(points, prim, rank_deficient)
        }
        SurfaceKind::Sphere => surface_result(points, surfaces::fit_sphere(points)?, false),
        SurfaceKind::Cylinder | SurfaceKind::Cone | SurfaceKind::Torus => {
            let plane = surfaces::fit_plane(points).0;
            if rms(points, |p| plane.distance(p)) <= COPLANAR_TOL * bbox_diagonal(points) {
                // Coplanar sets have no unique axis.
                return Err(FitError::NonConvergent);
            }
            let prim = match kind {
                SurfaceKind::Cylinder => surfaces::fit_cylinder(points, normals)?,
                SurfaceKind::Cone => surfaces::fit_cone(points, normals)?,
                _ => surfaces::fit_torus(points)?,
            };
            surface_result(points, prim, false)
        }
    }
}

pub fn fit_surface(points: &[Vec3], kind: SurfaceKind) -> Result<FitResult, FitError> {
    fit_surface_with_normals(points, kind, None)
}

pub fn fit_curve(points: &[Vec3], kind: CurveKind) -> Result<FitResult, FitError> {
    check_count(points, kind.min_points())?;
    let prim = match kind {
        CurveKind::Line => curves::fit_line(points)?,
        CurveKind::Circle => curves::fit_circle(points)?,
        CurveKind::Ellipse => curves::fit_ellipse(points)?,
    }
    .canonicalize();
    prim.validate()
        .map_err(|e| FitError::DegenerateConfiguration(e.0))?;
    let rms_error = rms(points, |p| prim.distance(p));
    if !rms_error.is_finite() {
        return Err(FitError::NonConvergent);
    }
    Ok(FitResult {
        primitive: AnyPrimitive::Curve(prim),
        rms_error,
        inlier_count: points.len(),
        rank_deficient: false,
    })
}

fn argmin(
    results: impl Iterator<Item = Result<FitResult, FitError>>,
    tie: f64,
) -> Result<FitResult, FitError> {
    let mut best: Option<FitResult> = None;
    for r in results.flatten() {
        if best
            .as_ref()
            .is_none_or(|b| r.rms_error < b.rms_error - tie)
        {
            best = Some(r);
        }
    }
    best.ok_or(FitError::AllKindsFailed)
}

/// Lowest-rms surface over all kinds; near ties keep the earlier kind.
pub fn fit_best_surface(points: &[Vec3]) -> Result<FitResult, FitError> {
    argmin(
        SurfaceKind::ALL.iter().map(|&k| fit_surface(points, k)),
        RMS_TIE,
    )
}

/// Lowest-rms curve over all kinds; near ties keep the earlier kind.
pub fn fit_best_curve(points: &[Vec3]) -> Result<FitResult, FitError> {
    fit_best_curve_within(points, RMS_TIE)
}

/// As [`fit_best_curve`] with a caller-chosen tie width, for samples whose
/// accuracy is known to be coarser than [`RMS_TIE`].
pub fn fit_best_curve_within(points: &[Vec3], tie: f64) -> Result<FitResult, FitError> {
    argmin(CurveKind::ALL.iter().map(|&k| fit_curve(points, k)), tie)
}

/// Per-cell policy. `seed` drives the RANSAC fallback only.
pub fn fit_cell(points: &[Vec3], degenerate: bool, eps1: f64, seed: u64) -> CellFit {
    if degenerate || points.is_empty() {
        return CellFit::Degenerate;
    }
    let multi = || CellFit::Multi(ransac_multi(points, eps1, seed).unwrap_or_default());
    match fit_surface(points, SurfaceKind::Plane) {
        Ok(plane) if plane.rms_error < eps1 => match fit_best_curve(points) {
            Ok(curve) if curve.rms_error < eps1 => CellFit::Curve(curve),
            _ => CellFit::Surface(plane),
        },
        Ok(_) => match fit_best_surface(points) {
            Ok(s) if s.rms_error < eps1 => CellFit::Surface(s),
            _ => multi(),
        },
        Err(_) => multi(),
    }
}

fn dir_error(a: &Vec3, b: &Vec3, signed: bool) -> f64 {
    let d = (a - b).norm();
    if signed {
        d
    } else {
        d.min((a + b).norm())
    }
}

fn max_abs(diffs: &[f64]) -> f64 {
    diffs.iter().fold(0.0, |m, d| m.max(d.abs()))
}

/// Largest absolute difference between the parameters of two primitives of
/// the same kind after canonicalization; axes of symmetric primitives are
/// compared up to sign. `None` when the kinds differ.
pub fn parameter_error(fit: &AnyPrimitive, truth: &AnyPrimitive) -> Option<f64> {
    use CurvePrimitive as C;
    use SurfacePrimitive as S;
    let pos = |a: &Vec3, b: &Vec3| (a - b).norm();
    Some(match (fit, truth) {
        (AnyPrimitive::Surface(a), AnyPrimitive::Surface(b)) => {
            match (a.clone().canonicalize(), b.clone().canonicalize()) {
                (
                    S::Plane {
                        normal: n1,
                        offset: o1,
                    },
                    S::Plane {
                        normal: n2,
                        offset: o2,
                    },
                ) => max_abs(&[pos(&n1, &n2), o1 - o2]),
                (
                    S::Sphere {
                        center: c1,
                        radius: r1,
                    },
                    S::Sphere {
                        center: c2,
                        radius: r2,
                    },
                ) => max_abs(&[pos(&c1, &c2), r1 - r2]),
                (
                    S::Cylinder {
                        axis_point: p1,
                        axis: a1,
                        radius: r1,
                    },
                    S::Cylinder {
                        axis_point: p2,
                        axis: a2,
                        radius: r2,
                    },
                ) => max_abs(&[pos(&p1, &p2), dir_error(&a1, &a2, false), r1 - r2]),
                (
                    S::Cone {
                        apex: p1,
                        axis: a1,
                        half_angle: h1,
                    },
                    S::Cone {
                        apex: p2,
                        axis: a2,
                        half_angle: h2,
                    },
                ) => max_abs(&[pos(&p1, &p2), dir_error(&a1, &a2, true), h1 - h2]),
                (
                    S::Torus {
                        center: c1,
                        axis: a1,
                        major_radius: q1,
                        minor_radius: r1,
                    },
                    S::Torus {
                        center: c2,
                        axis: a2,
                        major_radius: q2,
                        minor_radius: r2,
                    },
                ) => max_abs(&[pos(&c1, &c2), dir_error(&a1, &a2, false), q1 - q2, r1 - r2]),
                _ => return None,
            }
        }
        (AnyPrimitive::Curve(a), AnyPrimitive::Curve(b)) => {
            match (a.clone().canonicalize(), b.clone().canonicalize()) {
                (
                    C::Line {
                        point: p1,
                        direction: d1,
                    },
                    C::Line {
                        point: p2,
                        direction: d2,
                    },
                ) => max_abs(&[pos(&p1, &p2), dir_error(&d1, &d2, false)]),
                (
                    C::Circle {
                        center: c1,
                        normal: n1,
                        radius: r1,
                    },
                    C::Circle {
                        center: c2,
                        normal: n2,
                        radius: r2,
                    },
                ) => max_abs(&[pos(&c1, &c2), dir_error(&n1, &n2, false), r1 - r2]),
                (
                    C::Ellipse {
                        center: c1,
                        normal: n1,
                        major_axis: m1,
                        semi_major: a1,
                        semi_minor: b1,
                    },
                    C::Ellipse {
                        center: c2,
                        normal: n2,
                        major_axis: m2,
                        semi_major: a2,
                        semi_minor: b2,
                    },
                ) => max_abs(&[
                    pos(&c1, &c2),
                    dir_error(&n1, &n2, false),
                    dir_error(&m1, &m2, false),
                    a1 - a2,
                    b1 - b2,
                ]),
                _ => return None,
            }
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests;
