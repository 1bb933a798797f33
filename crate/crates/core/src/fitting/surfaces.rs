//! Surface fits. Plane and the sphere initializer are closed-form; cylinder,
//! cone and torus start from normal-based estimates and are refined by
//! Levenberg-Marquardt on signed orthogonal distances.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rayon::prelude::*;

use super::lm::{refine, Model, Outcome};
use super::{subsample, FitError, MAX_RADIUS};
use crate::geom::{centroid, covariance, orthonormal_basis, sorted_eigen, Vec3};
use crate::kdtree::KdTree;
use crate::primitives::SurfacePrimitive;

const NORMAL_NEIGHBORS: usize = 16;

/// Unit normals from PCA over each point's `k` nearest neighbors (sign
/// arbitrary). `None` when there are too few points for a neighborhood.
pub fn estimate_normals(points: &[Vec3], k: usize) -> Option<Vec<Vec3>> {
    if points.len() < 4 {
        return None;
    }
    let k = k.min(points.len());
    let tree = KdTree::from_vecs(points);
    Some(
        points
            .par_iter()
            .map(|p| {
                let nb: Vec<Vec3> = tree
                    .k_nearest(&[p.x, p.y, p.z], k)
                    .into_iter()
                    .map(|(i, _)| points[i])
                    .collect();
                let c = centroid(&nb);
                sorted_eigen(covariance(&nb, &c)).1[0]
            })
            .collect(),
    )
}

/// Least-squares plane and whether the points are (nearly) collinear.
pub fn fit_plane(points: &[Vec3]) -> (SurfacePrimitive, bool) {
    let c = centroid(points);
    let (vals, vecs) = sorted_eigen(covariance(points, &c));
    let n = vecs[0];
    let rank_deficient = vals[1] <= 1e-12 * vals[2].max(1e-300);
    (
        SurfacePrimitive::Plane {
            normal: n,
            offset: n.dot(&c),
        },
        rank_deficient,
    )
}

/// Algebraic sphere: minimizes `sum (|p|^2 - 2 c.p - k)^2` in centered,
/// scaled coordinates.
pub fn algebraic_sphere(points: &[Vec3]) -> Result<(Vec3, f64), FitError> {
    let c0 = centroid(points);
    let scale = points
        .iter()
        .map(|p| (p - c0).norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut ata = Matrix4::<f64>::zeros();
    let mut atb = Vector4::<f64>::zeros();
    for p in points {
        let q = (p - c0) / scale;
        let row = Vector4::new(2.0 * q.x, 2.0 * q.y, 2.0 * q.z, 1.0);
        ata += row * row.transpose();
        atb += row * q.norm_squared();
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or_else(|| FitError::DegenerateConfiguration("coplanar points for sphere".into()))?;
    let c = Vec3::new(sol[0], sol[1], sol[2]);
    let r2 = sol[3] + c.norm_squared();
    if r2 <= 0.0 {
        return Err(FitError::DegenerateConfiguration("imaginary sphere".into()));
    }
    Ok((c0 + c * scale, r2.sqrt() * scale))
}

/// Kasa circle fit in 2D on the `(x, y)` of each point.
pub fn kasa_circle(points: &[(f64, f64)]) -> Option<((f64, f64), f64)> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let scale = points
        .iter()
        .map(|p| (p.0 - mx).hypot(p.1 - my))
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for p in points {
        let (x, y) = ((p.0 - mx) / scale, (p.1 - my) / scale);
        let row = Vector3::new(2.0 * x, 2.0 * y, 1.0);
        ata += row * row.transpose();
        atb += row * (x * x + y * y);
    }
    let s = ata.lu().solve(&atb)?;
    let r2 = s[2] + s[0] * s[0] + s[1] * s[1];
    if !(r2 > 0.0 && r2.is_finite()) {
        return None;
    }
    Some(((mx + s[0] * scale, my + s[1] * scale), r2.sqrt() * scale))
}

/// Moves a unit axis within its tangent plane.
pub(crate) fn tilt(axis: &Vec3, d0: f64, d1: f64) -> Vec3 {
    let (e1, e2) = orthonormal_basis(axis);
    (axis + e1 * d0 + e2 * d1).normalize()
}

#[derive(Clone)]
pub(crate) struct SphereModel {
    pub c: Vec3,
    pub r: f64,
}

impl Model for SphereModel {
    fn n_params(&self) -> usize {
        4
    }
    fn residuals(&self, pts: &[Vec3], out: &mut Vec<f64>) {
        out.extend(pts.iter().map(|p| (p - self.c).norm() - self.r));
    }
    fn step(&self, d: &[f64]) -> Self {
        SphereModel {
            c: self.c + Vec3::new(d[0], d[1], d[2]),
            r: self.r + d[3],
        }
    }
    fn is_valid(&self) -> bool {
        self.r > 0.0 && self.r <= MAX_RADIUS
    }
}

#[derive(Clone)]
pub(crate) struct CylinderModel {
    pub p0: Vec3,
    pub a: Vec3,
    pub r: f64,
}

impl Model for CylinderModel {
    fn n_params(&self) -> usize {
        5
    }
    fn residuals(&self, pts: &[Vec3], out: &mut Vec<f64>) {
        out.extend(pts.iter().map(|p| {
            let v = p - self.p0;
            (v - self.a * v.dot(&self.a)).norm() - self.r
        }));
    }
    fn step(&self, d: &[f64]) -> Self {
        let (e1, e2) = orthonormal_basis(&self.a);
        CylinderModel {
            p0: self.p0 + e1 * d[2] + e2 * d[3],
            a: tilt(&self.a, d[0], d[1]),
            r: self.r + d[4],
        }
    }
    fn is_valid(&self) -> bool {
        self.r > 0.0 && self.r <= MAX_RADIUS
    }
}

#[derive(Clone)]
pub(crate) struct ConeModel {
    pub apex: Vec3,
    pub a: Vec3,
    pub alpha: f64,
}

impl Model for ConeModel {
    fn n_params(&self) -> usize {
        6
    }
    fn residuals(&self, pts: &[Vec3], out: &mut Vec<f64>) {
        let (s, c) = self.alpha.sin_cos();
        out.extend(pts.iter().map(|p| {
            let v = p - self.apex;
            let t = v.dot(&self.a);
            let rho = (v - self.a * t).norm();
            rho * c - t * s
        }));
    }
    fn step(&self, d: &[f64]) -> Self {
        ConeModel {
            apex: self.apex + Vec3::new(d[2], d[3], d[4]),
            a: tilt(&self.a, d[0], d[1]),
            alpha: self.alpha + d[5],
        }
    }
    fn is_valid(&self) -> bool {
        self.alpha > 0.0 && self.alpha < std::f64::consts::FRAC_PI_2
    }
}

#[derive(Clone)]
pub(crate) struct TorusModel {
    pub c: Vec3,
    pub a: Vec3,
    pub big: f64,
    pub small: f64,
}

impl Model for TorusModel {
    fn n_params(&self) -> usize {
        7
    }
    fn residuals(&self, pts: &[Vec3], out: &mut Vec<f64>) {
        out.extend(pts.iter().map(|p| {
            let v = p - self.c;
            let t = v.dot(&self.a);
            let rho = (v - self.a * t).norm();
            (rho - self.big).hypot(t) - self.small
        }));
    }
    fn step(&self, d: &[f64]) -> Self {
        TorusModel {
            c: self.c + Vec3::new(d[2], d[3], d[4]),
            a: tilt(&self.a, d[0], d[1]),
            big: self.big + d[5],
            small: self.small + d[6],
        }
    }
    fn is_valid(&self) -> bool {
        self.big > 0.0 && self.small > 0.0 && self.big <= MAX_RADIUS && self.small <= MAX_RADIUS
    }
}

fn converged<M>(res: (M, Outcome)) -> Result<M, FitError> {
    match res {
        (m, Outcome::Converged) => Ok(m),
        (_, Outcome::NonConvergent) => Err(FitError::NonConvergent),
    }
}

pub fn fit_sphere(points: &[Vec3]) -> Result<SurfacePrimitive, FitError> {
    let (c, r) = algebraic_sphere(points)?;
    let m = converged(refine(SphereModel { c, r }, &subsample(points)))?;
    Ok(SurfacePrimitive::Sphere {
        center: m.c,
        radius: m.r,
    })
}

/// Circle through the projections of `points` onto the plane orthogonal to
/// `axis`: returns a point on the axis and the radius.
fn axis_circle(points: &[Vec3], axis: &Vec3) -> Option<(Vec3, f64)> {
    let (e1, e2) = orthonormal_basis(axis);
    let proj: Vec<(f64, f64)> = points.iter().map(|p| (p.dot(&e1), p.dot(&e2))).collect();
    let ((x, y), r) = kasa_circle(&proj)?;
    let t = centroid(points).dot(axis);
    Some((e1 * x + e2 * y + axis * t, r))
}

fn normal_moment(normals: &[Vec3]) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for n in normals {
        m += n * n.transpose();
    }
    m / normals.len().max(1) as f64
}

pub fn fit_cylinder(
    points: &[Vec3],
    normals: Option<&[Vec3]>,
) -> Result<SurfacePrimitive, FitError> {
    let estimated;
    let normals = match normals {
        Some(n) => Some(n),
        None => {
            estimated = estimate_normals(points, NORMAL_NEIGHBORS);
            estimated.as_deref()
        }
    };
    // Cylinder normals are orthogonal to the axis; without normals the
    // longest extent of the points stands in for it.
    let axis = match normals {
        Some(n) => sorted_eigen(normal_moment(n)).1[0],
        None => sorted_eigen(covariance(points, &centroid(points))).1[2],
    };
    let (p0, r) = axis_circle(points, &axis)
        .ok_or_else(|| FitError::DegenerateConfiguration("no circle in cylinder section".into()))?;
    let m = converged(refine(CylinderModel { p0, a: axis, r }, &subsample(points)))?;
    Ok(SurfacePrimitive::Cylinder {
        axis_point: m.p0,
        axis: m.a,
        radius: m.r,
    })
}

/// Cone initializer: every tangent plane passes through the apex, and the
/// unit directions from the apex to the points make a constant angle with
/// the axis.
fn cone_init(points: &[Vec3], normals: &[Vec3]) -> Result<ConeModel, FitError> {
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for (p, n) in points.iter().zip(normals) {
        let nn = n * n.transpose();
        a += nn;
        b += nn * p;
    }
    let (vals, _) = sorted_eigen(a);
    if vals[0] <= 1e-6 * vals[2] {
        return Err(FitError::DegenerateConfiguration(
            "normals do not span 3D".into(),
        ));
    }
    let apex = a
        .lu()
        .solve(&b)
        .ok_or_else(|| FitError::DegenerateConfiguration("singular apex system".into()))?;
    let dirs: Vec<Vec3> = points
        .iter()
        .filter_map(|p| {
            let v = p - apex;
            let n = v.norm();
            (n > 1e-12).then(|| v / n)
        })
        .collect();
    if dirs.len() < 3 {
        return Err(FitError::DegenerateConfiguration(
            "points at the apex".into(),
        ));
    }
    let mean = centroid(&dirs);
    let mut axis = sorted_eigen(covariance(&dirs, &mean)).1[0];
    if axis.dot(&mean) < 0.0 {
        axis = -axis;
    }
    let cos = dirs.iter().map(|d| d.dot(&axis)).sum::<f64>() / dirs.len() as f64;
    let alpha = cos.clamp(-1.0, 1.0).acos();
    let m = ConeModel {
        apex,
        a: axis,
        alpha,
    };
    if !m.is_valid() {
        return Err(FitError::DegenerateConfiguration(
            "cone angle out of range".into(),
        ));
    }
    Ok(m)
}

pub fn fit_cone(points: &[Vec3], normals: Option<&[Vec3]>) -> Result<SurfacePrimitive, FitError> {
    let estimated;
    let normals = match normals {
        Some(n) => n,
        None => {
            estimated = estimate_normals(points, NORMAL_NEIGHBORS).ok_or_else(|| {
                FitError::DegenerateConfiguration("too few points for normals".into())
            })?;
            &estimated
        }
    };
    let init = cone_init(points, normals)?;
    let m = converged(refine(init, &subsample(points)))?;
    if (m.apex - centroid(points)).norm() > MAX_RADIUS {
        return Err(FitError::DegenerateConfiguration(
            "apex too far from points".into(),
        ));
    }
    Ok(SurfacePrimitive::Cone {
        apex: m.apex,
        axis: m.a,
        half_angle: m.alpha,
    })
}

fn torus_init(points: &[Vec3], axis: Vec3) -> Option<TorusModel> {
    let (p0, big) = axis_circle(points, &axis)?;
    let small = (points
        .iter()
        .map(|p| {
            let v = p - p0;
            let t = v.dot(&axis);
            let rho = (v - axis * t).norm();
            (rho - big).powi(2) + t * t
        })
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();
    let m = TorusModel {
        c: p0,
        a: axis,
        big,
        small,
    };
    m.is_valid().then_some(m)
}

/// Each principal direction of the points is tried as the initial axis;
/// the refined model with the lowest cost wins.
pub fn fit_torus(points: &[Vec3]) -> Result<SurfacePrimitive, FitError> {
    let sub = subsample(points);
    let (_, axes) = sorted_eigen(covariance(points, &centroid(points)));
    let mut best: Option<(f64, TorusModel)> = None;
    let mut buf = Vec::new();
    for axis in axes {
        let Some(init) = torus_init(points, axis) else {
            continue;
        };
        let (m, out) = refine(init, &sub);
        if out != Outcome::Converged || !m.is_valid() {
            continue;
        }
        buf.clear();
        m.residuals(&sub, &mut buf);
        let cost: f64 = buf.iter().map(|r| r * r).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, m));
        }
    }
    let (_, m) = best.ok_or(FitError::NonConvergent)?;
    Ok(SurfacePrimitive::Torus {
        center: m.c,
        axis: m.a,
        major_radius: m.big,
        minor_radius: m.small,
    })
}
