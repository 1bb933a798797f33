//! Curve fits: line by PCA; circle and ellipse by a best plane, an in-plane
//! algebraic fit and geometric refinement (orthogonal distance for circles,
//! first-order distance for ellipses).

use nalgebra::{Matrix2, Rotation3, SMatrix};

use super::lm::{refine, Model, Outcome};
use super::surfaces::{kasa_circle, tilt};
use super::{subsample, FitError, MAX_RADIUS};
use crate::geom::{centroid, covariance, orthonormal_basis, sorted_eigen, Vec3};
use crate::primitives::CurvePrimitive;

pub fn fit_line(points: &[Vec3]) -> Result<CurvePrimitive, FitError> {
    let c = centroid(points);
    let (vals, vecs) = sorted_eigen(covariance(points, &c));
    if vals[2] <= 0.0 {
        return Err(FitError::DegenerateConfiguration(
            "coincident points".into(),
        ));
    }
    Ok(CurvePrimitive::Line {
        point: c,
        direction: vecs[2],
    })
}

/// Best plane through the points as `(centroid, u, v, normal)`.
fn plane_frame(points: &[Vec3]) -> Result<(Vec3, Vec3, Vec3, Vec3), FitError> {
    let c = centroid(points);
    let (vals, vecs) = sorted_eigen(covariance(points, &c));
    if vals[1] <= 1e-12 * vals[2].max(1e-300) {
        return Err(FitError::DegenerateConfiguration("collinear points".into()));
    }
    let n = vecs[0];
    let (u, v) = orthonormal_basis(&n);
    Ok((c, u, v, n))
}

#[derive(Clone)]
struct CircleModel {
    c: Vec3,
    n: Vec3,
    r: f64,
}

impl Model for CircleModel {
    fn n_params(&self) -> usize {
        6
    }
    fn residuals(&self, pts: &[Vec3], out: &mut Vec<f64>) {
        for p in pts {
            let v = p - self.c;
            let h = v.dot(&self.n);
            out.push((v - self.n * h).norm() - self.r);
            out.push(h);
        }
    }
    fn step(&self, d: &[f64]) -> Self {
        CircleModel {
            n: tilt(&self.n, d[0], d[1]),
            c: self.c + Vec3::new(d[2], d[3], d[4]),
            r: self.r + d[5],
        }
    }
    fn is_valid(&self) -> bool {
        self.r > 0.0 && self.r <= MAX_RADIUS
    }
}

fn circle_init(points: &[Vec3]) -> Result<CircleModel, FitError> {
    let (c0, u, v, n) = plane_frame(points)?;
    let proj: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p - c0).dot(&u), (p - c0).dot(&v)))
        .collect();
    let ((x, y), r) = kasa_circle(&proj)
        .ok_or_else(|| FitError::DegenerateConfiguration("no circle in plane".into()))?;
    Ok(CircleModel {
        c: c0 + u * x + v * y,
        n,
        r,
    })
}

pub fn fit_circle(points: &[Vec3]) -> Result<CurvePrimitive, FitError> {
    let init = circle_init(points)?;
    match refine(init, &subsample(points)) {
        (m, Outcome::Converged) => Ok(CurvePrimitive::Circle {
            center: m.c,
            normal: m.n,
            radius: m.r,
        }),
        _ => Err(FitError::NonConvergent),
    }
}

/// Ellipse with orthonormal frame `u` (first semi-axis `a`), `v` (`b`) and
/// normal `n`. Semi-axes may swap order during refinement.
#[derive(Clone)]
struct EllipseModel {
    c: Vec3,
    u: Vec3,
    v: Vec3,
    n: Vec3,
    a: f64,
    b: f64,
}

impl EllipseModel {
    /// First-order (Sampson) distance to the ellipse in its plane; exact on
    /// the curve and much cheaper than the orthogonal foot point.
    fn in_plane_residual(&self, x: f64, y: f64) -> f64 {
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        let f = x * x / a2 + y * y / b2 - 1.0;
        let g = (2.0 * x / a2).hypot(2.0 * y / b2);
        if g > 1e-12 {
            f / g
        } else {
            -self.a.min(self.b)
        }
    }
}

impl Model for EllipseModel {
    fn n_params(&self) -> usize {
        8
    }
    fn residuals(&self, pts: &[Vec3], out: &mut Vec<f64>) {
        for p in pts {
            let w = p - self.c;
            out.push(self.in_plane_residual(w.dot(&self.u), w.dot(&self.v)));
            out.push(w.dot(&self.n));
        }
    }
    fn step(&self, d: &[f64]) -> Self {
        let rot = Rotation3::new(nalgebra::Vector3::new(d[0], d[1], d[2]));
        EllipseModel {
            c: self.c + Vec3::new(d[3], d[4], d[5]),
            u: rot * self.u,
            v: rot * self.v,
            n: rot * self.n,
            a: self.a + d[6],
            b: self.b + d[7],
        }
    }
    fn is_valid(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.a <= MAX_RADIUS && self.b <= MAX_RADIUS
    }
}

/// General conic through the in-plane coordinates (smallest eigenvector of
/// the scatter matrix in centered, scaled coordinates), converted to center,
/// semi-axes and first-axis angle. `None` unless the conic is a real ellipse.
fn conic_ellipse(pts: &[(f64, f64)]) -> Option<((f64, f64), f64, f64, f64)> {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let s = pts
        .iter()
        .map(|p| (p.0 - mx).hypot(p.1 - my))
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut scatter = SMatrix::<f64, 6, 6>::zeros();
    for p in pts {
        let (x, y) = ((p.0 - mx) / s, (p.1 - my) / s);
        let row = SMatrix::<f64, 6, 1>::from_column_slice(&[x * x, x * y, y * y, x, y, 1.0]);
        scatter += row * row.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let k = (0..6)
        .min_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
        .unwrap_or(0);
    let q = eig.eigenvectors.column(k);
    let (ca, cb, cc, cd, ce, cf) = (q[0], q[1], q[2], q[3], q[4], q[5]);
    if cb * cb - 4.0 * ca * cc >= 0.0 {
        return None;
    }
    let m = Matrix2::new(2.0 * ca, cb, cb, 2.0 * cc);
    let center = m.lu().solve(&nalgebra::Vector2::new(-cd, -ce))?;
    let (x0, y0) = (center[0], center[1]);
    let f0 = ca * x0 * x0 + cb * x0 * y0 + cc * y0 * y0 + cd * x0 + ce * y0 + cf;
    let quad = Matrix2::new(ca, cb / 2.0, cb / 2.0, cc).symmetric_eigen();
    let (l1, l2) = (quad.eigenvalues[0], quad.eigenvalues[1]);
    let (a2, b2) = (-f0 / l1, -f0 / l2);
    if !(a2 > 0.0 && b2 > 0.0) {
        return None;
    }
    let dir = quad.eigenvectors.column(0);
    Some((
        (mx + x0 * s, my + y0 * s),
        a2.sqrt() * s,
        b2.sqrt() * s,
        dir[1].atan2(dir[0]),
    ))
}

fn ellipse_init(points: &[Vec3]) -> Result<EllipseModel, FitError> {
    let (c0, u, v, n) = plane_frame(points)?;
    let proj: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p - c0).dot(&u), (p - c0).dot(&v)))
        .collect();
    if let Some(((x, y), a, b, theta)) = conic_ellipse(&proj) {
        let (st, ct) = theta.sin_cos();
        let eu = u * ct + v * st;
        let m = EllipseModel {
            c: c0 + u * x + v * y,
            u: eu,
            v: n.cross(&eu),
            n,
            a,
            b,
        };
        if m.is_valid() {
            return Ok(m);
        }
    }
    let circle = circle_init(points)?;
    let (eu, ev) = orthonormal_basis(&circle.n);
    Ok(EllipseModel {
        c: circle.c,
        u: eu,
        v: ev,
        n: circle.n,
        a: circle.r,
        b: circle.r,
    })
}

pub fn fit_ellipse(points: &[Vec3]) -> Result<CurvePrimitive, FitError> {
    let init = ellipse_init(points)?;
    match refine(init, &subsample(points)) {
        (m, Outcome::Converged) => {
            let (major_axis, semi_major, semi_minor) = if m.a >= m.b {
                (m.u, m.a, m.b)
            } else {
                (m.v, m.b, m.a)
            };
            Ok(CurvePrimitive::Ellipse {
                center: m.c,
                normal: m.n,
                major_axis: major_axis.normalize(),
                semi_major,
                semi_minor,
            })
        }
        _ => Err(FitError::NonConvergent),
    }
}
