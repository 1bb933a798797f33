//! Analytic surface and curve primitives.
//!
//! Surfaces: plane, sphere, cylinder, cone, torus. Curves: line, circle,
//! ellipse. All direction vectors are unit length. Every primitive exposes an
//! unsigned point distance and a closest-point projection, which is all the
//! fitting, intersection and metric code needs.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geom::{canonical_direction, line_foot_from_origin, orthonormal_basis, Vec3};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Plane,
    Sphere,
    Cylinder,
    Cone,
    Torus,
}

impl SurfaceKind {
    /// Kinds in tie-break order.
    pub const ALL: [SurfaceKind; 5] = [
        SurfaceKind::Plane,
        SurfaceKind::Sphere,
        SurfaceKind::Cylinder,
        SurfaceKind::Cone,
        SurfaceKind::Torus,
    ];

    pub fn min_points(self) -> usize {
        match self {
            SurfaceKind::Plane => 3,
            SurfaceKind::Sphere => 4,
            SurfaceKind::Cylinder => 6,
            SurfaceKind::Cone => 6,
            SurfaceKind::Torus => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Line,
    Circle,
    Ellipse,
}

impl CurveKind {
    pub const ALL: [CurveKind; 3] = [CurveKind::Line, CurveKind::Circle, CurveKind::Ellipse];

    pub fn min_points(self) -> usize {
        match self {
            CurveKind::Line => 2,
            CurveKind::Circle => 3,
            CurveKind::Ellipse => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid primitive: {0}")]
pub struct PrimitiveError(pub String);

fn check_unit(v: &Vec3, what: &str) -> Result<(), PrimitiveError> {
    if (v.norm() - 1.0).abs() > UNIT_TOL || !v.iter().all(|c| c.is_finite()) {
        return Err(PrimitiveError(format!("{what} is not unit length")));
    }
    Ok(())
}

fn check_positive(x: f64, what: &str) -> Result<(), PrimitiveError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(PrimitiveError(format!("{what} must be positive, got {x}")));
    }
    Ok(())
}

/// Bounds of the linear parameters of an otherwise unbounded primitive.
///
/// Plane: `u`, `v` along `orthonormal_basis(normal)` measured from
/// `normal * offset`. Cylinder and cone: `v` is the axial coordinate (from
/// the axis point or apex). Line: `u` is the coordinate along the direction
/// from `point`. Unused ranges are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl Extent {
    fn from_params(params: impl Iterator<Item = (f64, f64)>) -> Option<Self> {
        let mut e: Option<Extent> = None;
        for (u, v) in params {
            match &mut e {
                None => {
                    e = Some(Extent {
                        u: [u, u],
                        v: [v, v],
                    })
                }
                Some(e) => {
                    e.u = [e.u[0].min(u), e.u[1].max(u)];
                    e.v = [e.v[0].min(v), e.v[1].max(v)];
                }
            }
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SurfacePrimitive {
    /// Points `x` with `normal . x = offset`.
    Plane {
        normal: Vec3,
        offset: f64,
    },
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Cylinder {
        axis_point: Vec3,
        axis: Vec3,
        radius: f64,
    },
    /// Single nappe opening from `apex` along `axis`.
    Cone {
        apex: Vec3,
        axis: Vec3,
        half_angle: f64,
    },
    Torus {
        center: Vec3,
        axis: Vec3,
        major_radius: f64,
        minor_radius: f64,
    },
}

/// Radial decomposition of `p` about the axis `(origin, axis)`.
#[inline]
fn radial(p: &Vec3, origin: &Vec3, axis: &Vec3) -> (f64, Vec3, f64) {
    let v = p - origin;
    let h = v.dot(axis);
    let w = v - axis * h;
    let rho = w.norm();
    let dir = if rho > 1e-300 {
        w / rho
    } else {
        orthonormal_basis(axis).0
    };
    (h, dir, rho)
}

impl SurfacePrimitive {
    pub fn kind(&self) -> SurfaceKind {
        match self {
            SurfacePrimitive::Plane { .. } => SurfaceKind::Plane,
            SurfacePrimitive::Sphere { .. } => SurfaceKind::Sphere,
            SurfacePrimitive::Cylinder { .. } => SurfaceKind::Cylinder,
            SurfacePrimitive::Cone { .. } => SurfaceKind::Cone,
            SurfacePrimitive::Torus { .. } => SurfaceKind::Torus,
        }
    }

    pub fn validate(&self) -> Result<(), PrimitiveError> {
        match self {
            SurfacePrimitive::Plane { normal, offset } => {
                check_unit(normal, "plane normal")?;
                if !offset.is_finite() {
                    return Err(PrimitiveError("plane offset not finite".into()));
                }
            }
            SurfacePrimitive::Sphere { radius, .. } => check_positive(*radius, "sphere radius")?,
            SurfacePrimitive::Cylinder { axis, radius, .. } => {
                check_unit(axis, "cylinder axis")?;
                check_positive(*radius, "cylinder radius")?;
            }
            SurfacePrimitive::Cone {
                axis, half_angle, ..
            } => {
                check_unit(axis, "cone axis")?;
                if !(*half_angle > 0.0 && *half_angle < PI / 2.0) {
                    return Err(PrimitiveError(format!(
                        "cone half-angle {half_angle} outside (0, pi/2)"
                    )));
                }
            }
            SurfacePrimitive::Torus {
                axis,
                major_radius,
                minor_radius,
                ..
            } => {
                check_unit(axis, "torus axis")?;
                check_positive(*minor_radius, "torus minor radius")?;
                if major_radius <= minor_radius {
                    return Err(PrimitiveError(format!(
                        "torus major radius {major_radius} must exceed minor radius {minor_radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        match self {
            SurfacePrimitive::Plane { normal, offset } => p - normal * (normal.dot(p) - offset),
            SurfacePrimitive::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                let dir = if n > 1e-300 { d / n } else { Vec3::z() };
                center + dir * *radius
            }
            SurfacePrimitive::Cylinder {
                axis_point,
                axis,
                radius,
            } => {
                let (h, dir, _) = radial(p, axis_point, axis);
                axis_point + axis * h + dir * *radius
            }
            SurfacePrimitive::Cone {
                apex,
                axis,
                half_angle,
            } => {
                let (h, dir, rho) = radial(p, apex, axis);
                let (s, c) = half_angle.sin_cos();
                let t = h * c + rho * s;
                if t <= 0.0 {
                    *apex
                } else {
                    apex + (axis * c + dir * s) * t
                }
            }
            SurfacePrimitive::Torus {
                center,
                axis,
                major_radius,
                minor_radius,
            } => {
                let (_, dir, _) = radial(p, center, axis);
                let q = center + dir * *major_radius;
                let d = p - q;
                let n = d.norm();
                let out = if n > 1e-300 { d / n } else { dir };
                q + out * *minor_radius
            }
        }
    }

    /// Unit normal at the closest point to `p`. Sphere, cylinder and torus
    /// normals point away from the axis or center; cone normals away from
    /// the axis.
    pub fn normal_at(&self, p: &Vec3) -> Vec3 {
        match self {
            SurfacePrimitive::Plane { normal, .. } => *normal,
            SurfacePrimitive::Sphere { center, .. } => {
                let d = p - center;
                let n = d.norm();
                if n > 1e-300 {
                    d / n
                } else {
                    Vec3::z()
                }
            }
            SurfacePrimitive::Cylinder {
                axis_point, axis, ..
            } => radial(p, axis_point, axis).1,
            SurfacePrimitive::Cone {
                apex,
                axis,
                half_angle,
            } => {
                let (_, dir, _) = radial(p, apex, axis);
                let (s, c) = half_angle.sin_cos();
                dir * c - axis * s
            }
            SurfacePrimitive::Torus {
                center,
                axis,
                major_radius,
                ..
            } => {
                let (_, dir, _) = radial(p, center, axis);
                let d = p - (center + dir * *major_radius);
                let n = d.norm();
                if n > 1e-300 {
                    d / n
                } else {
                    dir
                }
            }
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        match self {
            SurfacePrimitive::Plane { normal, offset } => (normal.dot(p) - offset).abs(),
            SurfacePrimitive::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            SurfacePrimitive::Cylinder {
                axis_point,
                axis,
                radius,
            } => {
                let (_, _, rho) = radial(p, axis_point, axis);
                (rho - radius).abs()
            }
            SurfacePrimitive::Cone {
                apex,
                axis,
                half_angle,
            } => {
                let (h, _, rho) = radial(p, apex, axis);
                let (s, c) = half_angle.sin_cos();
                if h * c + rho * s <= 0.0 {
                    (p - apex).norm()
                } else {
                    (rho * c - h * s).abs()
                }
            }
            SurfacePrimitive::Torus {
                center,
                axis,
                major_radius,
                minor_radius,
            } => {
                let (h, _, rho) = radial(p, center, axis);
                ((rho - major_radius).hypot(h) - minor_radius).abs()
            }
        }
    }

    /// Unique representation: plane normals and symmetric axes flipped to
    /// the canonical hemisphere, axis points moved to the foot of the world
    /// origin. Cone axes keep their apex-to-opening sense.
    pub fn canonicalize(self) -> Self {
        match self {
            SurfacePrimitive::Plane { normal, offset } => {
                let n = canonical_direction(normal);
                let offset = if n == normal { offset } else { -offset };
                SurfacePrimitive::Plane { normal: n, offset }
            }
            SurfacePrimitive::Cylinder {
                axis_point,
                axis,
                radius,
            } => {
                let axis = canonical_direction(axis);
                SurfacePrimitive::Cylinder {
                    axis_point: line_foot_from_origin(&axis_point, &axis),
                    axis,
                    radius,
                }
            }
            SurfacePrimitive::Torus {
                center,
                axis,
                major_radius,
                minor_radius,
            } => SurfacePrimitive::Torus {
                center,
                axis: canonical_direction(axis),
                major_radius,
                minor_radius,
            },
            other => other,
        }
    }

    /// Parameter coordinates of `p` (see [`Extent`] for the meaning).
    pub fn params(&self, p: &Vec3) -> (f64, f64) {
        match self {
            SurfacePrimitive::Plane { normal, offset } => {
                let (e1, e2) = orthonormal_basis(normal);
                let o = normal * *offset;
                ((p - o).dot(&e1), (p - o).dot(&e2))
            }
            SurfacePrimitive::Sphere { center, .. } => {
                let d = p - center;
                (d.y.atan2(d.x).rem_euclid(TAU), d.z)
            }
            SurfacePrimitive::Cylinder {
                axis_point: origin,
                axis,
                ..
            }
            | SurfacePrimitive::Cone {
                apex: origin, axis, ..
            }
            | SurfacePrimitive::Torus {
                center: origin,
                axis,
                ..
            } => {
                let (e1, e2) = orthonormal_basis(axis);
                let d = p - origin;
                (d.dot(&e2).atan2(d.dot(&e1)).rem_euclid(TAU), d.dot(axis))
            }
        }
    }

    /// Whether the primitive extends to infinity and needs an [`Extent`].
    pub fn is_unbounded(&self) -> bool {
        matches!(
            self,
            SurfacePrimitive::Plane { .. }
                | SurfacePrimitive::Cylinder { .. }
                | SurfacePrimitive::Cone { .. }
        )
    }

    /// Bounding parameter box of `points`; `None` for closed kinds.
    pub fn extent_of(&self, points: &[Vec3]) -> Option<Extent> {
        if !self.is_unbounded() {
            return None;
        }
        Extent::from_params(points.iter().map(|p| self.params(p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurvePrimitive {
    Line {
        point: Vec3,
        direction: Vec3,
    },
    Circle {
        center: Vec3,
        normal: Vec3,
        radius: f64,
    },
    Ellipse {
        center: Vec3,
        normal: Vec3,
        major_axis: Vec3,
        semi_major: f64,
        semi_minor: f64,
    },
}

impl CurvePrimitive {
    pub fn kind(&self) -> CurveKind {
        match self {
            CurvePrimitive::Line { .. } => CurveKind::Line,
            CurvePrimitive::Circle { .. } => CurveKind::Circle,
            CurvePrimitive::Ellipse { .. } => CurveKind::Ellipse,
        }
    }

    pub fn validate(&self) -> Result<(), PrimitiveError> {
        match self {
            CurvePrimitive::Line { direction, .. } => check_unit(direction, "line direction"),
            CurvePrimitive::Circle { normal, radius, .. } => {
                check_unit(normal, "circle normal")?;
                check_positive(*radius, "circle radius")
            }
            CurvePrimitive::Ellipse {
                normal,
                major_axis,
                semi_major,
                semi_minor,
                ..
            } => {
                check_unit(normal, "ellipse normal")?;
                check_unit(major_axis, "ellipse major axis")?;
                if normal.dot(major_axis).abs() > UNIT_TOL {
                    return Err(PrimitiveError("ellipse major axis not in plane".into()));
                }
                check_positive(*semi_minor, "ellipse semi-minor")?;
                if semi_major < semi_minor {
                    return Err(PrimitiveError("ellipse semi-major < semi-minor".into()));
                }
                Ok(())
            }
        }
    }

    /// Point at parameter `t` (arc coordinate for lines, angle otherwise).
    pub fn point_at(&self, t: f64) -> Vec3 {
        match self {
            CurvePrimitive::Line { point, direction } => point + direction * t,
            CurvePrimitive::Circle {
                center,
                normal,
                radius,
            } => {
                let (e1, e2) = orthonormal_basis(normal);
                center + (e1 * t.cos() + e2 * t.sin()) * *radius
            }
            CurvePrimitive::Ellipse {
                center,
                normal,
                major_axis,
                semi_major,
                semi_minor,
            } => {
                let minor = normal.cross(major_axis);
                center + major_axis * (semi_major * t.cos()) + minor * (semi_minor * t.sin())
            }
        }
    }

    /// Parameter of the closest curve point to `p`.
    pub fn param_of(&self, p: &Vec3) -> f64 {
        match self {
            CurvePrimitive::Line { point, direction } => (p - point).dot(direction),
            CurvePrimitive::Circle { center, normal, .. } => {
                let (e1, e2) = orthonormal_basis(normal);
                let d = p - center;
                d.dot(&e2).atan2(d.dot(&e1)).rem_euclid(TAU)
            }
            CurvePrimitive::Ellipse {
                center,
                normal,
                major_axis,
                semi_major,
                semi_minor,
            } => {
                let minor = normal.cross(major_axis);
                let d = p - center;
                let (x, y) =
                    closest_on_ellipse(*semi_major, *semi_minor, d.dot(major_axis), d.dot(&minor));
                (y / semi_minor).atan2(x / semi_major).rem_euclid(TAU)
            }
        }
    }

    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        match self {
            CurvePrimitive::Line { point, direction } => {
                point + direction * (p - point).dot(direction)
            }
            CurvePrimitive::Circle {
                center,
                normal,
                radius,
            } => {
                let (_, dir, _) = radial(p, center, normal);
                center + dir * *radius
            }
            CurvePrimitive::Ellipse {
                center,
                normal,
                major_axis,
                semi_major,
                semi_minor,
            } => {
                let minor = normal.cross(major_axis);
                let d = p - center;
                let (x, y) =
                    closest_on_ellipse(*semi_major, *semi_minor, d.dot(major_axis), d.dot(&minor));
                center + major_axis * x + minor * y
            }
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        match self {
            CurvePrimitive::Line { point, direction } => {
                let d = p - point;
                (d - direction * d.dot(direction)).norm()
            }
            CurvePrimitive::Circle {
                center,
                normal,
                radius,
            } => {
                let (h, _, rho) = radial(p, center, normal);
                (rho - radius).hypot(h)
            }
            CurvePrimitive::Ellipse { .. } => (p - self.closest_point(p)).norm(),
        }
    }

    pub fn canonicalize(self) -> Self {
        match self {
            CurvePrimitive::Line { point, direction } => {
                let direction = canonical_direction(direction);
                CurvePrimitive::Line {
                    point: line_foot_from_origin(&point, &direction),
                    direction,
                }
            }
            CurvePrimitive::Circle {
                center,
                normal,
                radius,
            } => CurvePrimitive::Circle {
                center,
                normal: canonical_direction(normal),
                radius,
            },
            CurvePrimitive::Ellipse {
                center,
                normal,
                major_axis,
                semi_major,
                semi_minor,
            } => {
                let normal = canonical_direction(normal);
                let (major_axis, semi_major, semi_minor) = if semi_major >= semi_minor {
                    (major_axis, semi_major, semi_minor)
                } else {
                    (normal.cross(&major_axis), semi_minor, semi_major)
                };
                CurvePrimitive::Ellipse {
                    center,
                    normal,
                    major_axis: canonical_direction(major_axis),
                    semi_major,
                    semi_minor,
                }
            }
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, CurvePrimitive::Line { .. })
    }

    /// Parameter range covered by `points` (lines only).
    pub fn extent_of(&self, points: &[Vec3]) -> Option<Extent> {
        if !self.is_unbounded() {
            return None;
        }
        Extent::from_params(points.iter().map(|p| (self.param_of(p), 0.0)))
    }

    /// Arc length of the closed curve, or of the extent for a line.
    pub fn measure(&self, extent: Option<&Extent>) -> f64 {
        match self {
            CurvePrimitive::Line { .. } => extent.map(|e| e.u[1] - e.u[0]).unwrap_or(0.0),
            CurvePrimitive::Circle { radius, .. } => TAU * radius,
            CurvePrimitive::Ellipse {
                semi_major: a,
                semi_minor: b,
                ..
            } => {
                let h = ((a - b) / (a + b)).powi(2);
                PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
            }
        }
    }
}

/// Closest point on the axis-aligned ellipse `(x/a)^2 + (y/b)^2 = 1`,
/// `a >= b > 0`, to `(px, py)`, by bisection on the Lagrange parameter.
pub fn closest_on_ellipse(a: f64, b: f64, px: f64, py: f64) -> (f64, f64) {
    let (y0, y1) = (px.abs(), py.abs());
    let (x0, x1) = if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / a;
            let z1 = y1 / b;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (a / b) * (a / b);
                let s = ellipse_root(r0, z0, z1, g);
                (r0 * y0 / (s + r0), y1 / (s + 1.0))
            } else {
                (y0, y1)
            }
        } else {
            (0.0, b)
        }
    } else {
        let numer = a * y0;
        let denom = a * a - b * b;
        if numer < denom {
            let xd = numer / denom;
            (a * xd, b * (1.0 - xd * xd).max(0.0).sqrt())
        } else {
            (a, 0.0)
        }
    };
    (x0.copysign(px), x1.copysign(py))
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, mut g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..200 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let r0s = n0 / (s + r0);
        let r1s = z1 / (s + 1.0);
        g = r0s * r0s + r1s * r1s - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone() -> SurfacePrimitive {
        SurfacePrimitive::Cone {
            apex: Vec3::new(0.0, 0.0, 1.0),
            axis: Vec3::new(0.0, 0.0, -1.0),
            half_angle: PI / 4.0,
        }
    }

    #[test]
    fn surface_distances() {
        let plane = SurfacePrimitive::Plane {
            normal: Vec3::z(),
            offset: 0.5,
        };
        assert!((plane.distance(&Vec3::new(3.0, 1.0, 0.2)) - 0.3).abs() < 1e-12);
        let cyl = SurfacePrimitive::Cylinder {
            axis_point: Vec3::new(0.5, 0.5, 0.0),
            axis: Vec3::z(),
            radius: 0.2,
        };
        assert!((cyl.distance(&Vec3::new(0.5, 0.9, 7.0)) - 0.2).abs() < 1e-12);
        let torus = SurfacePrimitive::Torus {
            center: Vec3::zeros(),
            axis: Vec3::z(),
            major_radius: 0.3,
            minor_radius: 0.1,
        };
        assert!((torus.distance(&Vec3::new(0.3, 0.0, 0.0)) - 0.1).abs() < 1e-12);
        assert!((torus.distance(&Vec3::new(0.0, 0.5, 0.0)) - 0.1).abs() < 1e-12);
        // (0,0,0) is on the cone axis 1 below the apex: distance sin(45deg).
        assert!((cone().distance(&Vec3::zeros()) - 0.5f64.sqrt()).abs() < 1e-12);
        // Behind the apex the apex itself is closest.
        assert!((cone().distance(&Vec3::new(0.0, 0.0, 2.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_points_lie_on_surface_and_realize_distance() {
        let prims = [
            SurfacePrimitive::Sphere {
                center: Vec3::new(0.5, 0.5, 0.5),
                radius: 0.3,
            },
            cone(),
            SurfacePrimitive::Torus {
                center: Vec3::new(0.1, 0.2, 0.3),
                axis: Vec3::new(1.0, 1.0, 0.0).normalize(),
                major_radius: 0.3,
                minor_radius: 0.1,
            },
        ];
        let probes = [
            Vec3::new(0.9, 0.1, 0.4),
            Vec3::new(-0.3, 0.2, 0.7),
            Vec3::new(0.05, 0.6, -0.2),
        ];
        for s in &prims {
            for p in &probes {
                let q = s.closest_point(p);
                assert!(s.distance(&q) < 1e-12, "{s:?} {p:?}");
                assert!(((p - q).norm() - s.distance(p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normals_are_parallel_to_the_offset_direction() {
        let prims = [
            SurfacePrimitive::Sphere {
                center: Vec3::new(0.5, 0.5, 0.5),
                radius: 0.3,
            },
            SurfacePrimitive::Cylinder {
                axis_point: Vec3::new(0.5, 0.5, 0.0),
                axis: Vec3::new(0.0, 0.6, 0.8),
                radius: 0.2,
            },
            cone(),
            SurfacePrimitive::Torus {
                center: Vec3::new(0.1, 0.2, 0.3),
                axis: Vec3::new(1.0, 1.0, 0.0).normalize(),
                major_radius: 0.3,
                minor_radius: 0.1,
            },
        ];
        let probes = [Vec3::new(0.9, 0.1, 0.4), Vec3::new(-0.3, 0.2, 0.7)];
        for s in &prims {
            for p in &probes {
                let n = s.normal_at(p);
                assert!((n.norm() - 1.0).abs() < 1e-12);
                assert!(
                    (p - s.closest_point(p)).cross(&n).norm() < 1e-12,
                    "{s:?} {p:?}"
                );
            }
        }
    }

    #[test]
    fn ellipse_closest_point_matches_dense_search() {
        let (a, b) = (0.3, 0.15);
        for &(px, py) in &[
            (0.5, 0.1),
            (0.05, 0.02),
            (-0.2, 0.4),
            (0.0, 0.0),
            (0.31, 0.0),
            (0.1, -0.0),
        ] {
            let (x, y) = closest_on_ellipse(a, b, px, py);
            assert!(((x / a).powi(2) + (y / b).powi(2) - 1.0).abs() < 1e-9);
            let d = (x - px).hypot(y - py);
            let brute = (0..200_000)
                .map(|i| {
                    let t = i as f64 / 200_000.0 * TAU;
                    (a * t.cos() - px).hypot(b * t.sin() - py)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(d <= brute + 1e-9, "({px},{py}): {d} vs {brute}");
        }
    }

    #[test]
    fn curve_points_round_trip_through_params() {
        let curves = [
            CurvePrimitive::Circle {
                center: Vec3::new(0.5, 0.5, 0.5),
                normal: Vec3::new(0.0, 0.6, 0.8),
                radius: 0.25,
            },
            CurvePrimitive::Ellipse {
                center: Vec3::new(0.5, 0.5, 0.5),
                normal: Vec3::z(),
                major_axis: Vec3::x(),
                semi_major: 0.3,
                semi_minor: 0.15,
            },
        ];
        for c in &curves {
            for i in 0..16 {
                let t = i as f64 * 0.39;
                let p = c.point_at(t);
                assert!(c.distance(&p) < 1e-12);
                assert!((c.point_at(c.param_of(&p)) - p).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn canonical_plane_flips_offset() {
        let p = SurfacePrimitive::Plane {
            normal: -Vec3::z(),
            offset: -0.5,
        }
        .canonicalize();
        assert_eq!(
            p,
            SurfacePrimitive::Plane {
                normal: Vec3::z(),
                offset: 0.5
            }
        );
    }

    #[test]
    fn validation() {
        assert!(SurfacePrimitive::Torus {
            center: Vec3::zeros(),
            axis: Vec3::z(),
            major_radius: 0.1,
            minor_radius: 0.2
        }
        .validate()
        .is_err());
        assert!(CurvePrimitive::Ellipse {
            center: Vec3::zeros(),
            normal: Vec3::z(),
            major_axis: Vec3::new(0.0, 0.6, 0.8),
            semi_major: 0.3,
            semi_minor: 0.1
        }
        .validate()
        .is_err());
        assert!(cone().validate().is_ok());
    }

    #[test]
    fn primitives_serialize_as_tagged_records() {
        let s = SurfacePrimitive::Sphere {
            center: Vec3::new(0.5, 0.25, 0.0),
            radius: 0.3,
        };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"type":"sphere","center":[0.5,0.25,0.0],"radius":0.3}"#
        );
        let back: SurfacePrimitive = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
