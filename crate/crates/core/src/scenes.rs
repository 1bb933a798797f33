//! Synthetic test scenes: dense per-primitive sample sets plus the matching
//! hand-built B-Rep.
//!
//! Samples are stratified at cell centers of each parameter domain, so face
//! samples never touch their bounding edges and edge samples never touch
//! their endpoints.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::brep::{BRepModel, BoolMatrix, Edge, Face};
use crate::fitting::AnyPrimitive;
use crate::geom::{orthonormal_basis, Vec3};
use crate::primitives::{CurvePrimitive, SurfacePrimitive};

/// Which B-Rep element a sample set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Surface(usize),
    Curve(usize),
    Vertex(usize),
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub name: &'static str,
    pub sample_sets: Vec<Vec<Vec3>>,
    pub elements: Vec<Element>,
    pub gt: BRepModel,
}

pub const SCENE_NAMES: [&str; 5] = [
    "two_planes",
    "cube",
    "capped_cylinder",
    "sphere_plane",
    "cone_plane",
];

pub fn by_name(name: &str, step: f64) -> Option<Scene> {
    Some(match name {
        "two_planes" => two_planes(step),
        "cube" => cube(step),
        "capped_cylinder" => capped_cylinder(step),
        "sphere_plane" => sphere_plane(step),
        "cone_plane" => cone_plane(step),
        _ => return None,
    })
}

/// Sample step used for a grid of resolution `r`: three samples per voxel.
pub fn default_step(resolution: usize) -> f64 {
    1.0 / (3.0 * resolution as f64)
}

fn count(len: f64, step: f64) -> usize {
    ((len / step).ceil() as usize).max(1)
}

pub fn sample_rect(origin: Vec3, e1: Vec3, e2: Vec3, l1: f64, l2: f64, step: f64) -> Vec<Vec3> {
    let (n1, n2) = (count(l1, step), count(l2, step));
    let mut out = Vec::with_capacity(n1 * n2);
    for j in 0..n2 {
        for i in 0..n1 {
            let s = (i as f64 + 0.5) / n1 as f64 * l1;
            let t = (j as f64 + 0.5) / n2 as f64 * l2;
            out.push(origin + e1 * s + e2 * t);
        }
    }
    out
}

pub fn sample_segment(a: Vec3, b: Vec3, step: f64) -> Vec<Vec3> {
    let n = count((b - a).norm(), step);
    (0..n)
        .map(|i| a + (b - a) * ((i as f64 + 0.5) / n as f64))
        .collect()
}

pub fn sample_circle(center: Vec3, normal: Vec3, radius: f64, step: f64) -> Vec<Vec3> {
    let (e1, e2) = orthonormal_basis(&normal);
    let m = count(TAU * radius, step).max(3);
    (0..m)
        .map(|j| {
            let a = (j as f64 + 0.5) / m as f64 * TAU;
            center + (e1 * a.cos() + e2 * a.sin()) * radius
        })
        .collect()
}

/// Concentric rings strictly inside the rim.
pub fn sample_disc(center: Vec3, normal: Vec3, radius: f64, step: f64) -> Vec<Vec3> {
    let nr = count(radius, step);
    let mut out = Vec::new();
    for k in 0..nr {
        let rk = (k as f64 + 0.5) / nr as f64 * radius;
        out.extend(sample_circle(center, normal, rk, step));
    }
    out
}

pub fn sample_cylinder(base: Vec3, axis: Vec3, radius: f64, height: f64, step: f64) -> Vec<Vec3> {
    let nz = count(height, step);
    let mut out = Vec::new();
    for k in 0..nz {
        let z = (k as f64 + 0.5) / nz as f64 * height;
        out.extend(sample_circle(base + axis * z, axis, radius, step));
    }
    out
}

/// Lateral cone surface from the apex to slant length `slant`.
pub fn sample_cone(apex: Vec3, axis: Vec3, half_angle: f64, slant: f64, step: f64) -> Vec<Vec3> {
    let ns = count(slant, step);
    let mut out = Vec::new();
    for k in 0..ns {
        let s = (k as f64 + 0.5) / ns as f64 * slant;
        let c = apex + axis * (s * half_angle.cos());
        out.extend(sample_circle(c, axis, s * half_angle.sin(), step));
    }
    out
}

/// Fibonacci lattice with roughly one sample per `step^2` of area.
pub fn sample_sphere(center: Vec3, radius: f64, step: f64) -> Vec<Vec3> {
    let n = count(4.0 * PI * radius * radius, step * step).max(16);
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            center + Vec3::new(rho * a.cos(), rho * a.sin(), z) * radius
        })
        .collect()
}

/// Topology given by parent lists: each curve names its faces, each vertex
/// its curves. Every other matrix is derived.
fn assemble(
    surfaces: Vec<Face>,
    curves: Vec<(Edge, Vec<usize>)>,
    vertices: Vec<(Vec3, Vec<usize>)>,
) -> BRepModel {
    let (nf, ne, nv) = (surfaces.len(), curves.len(), vertices.len());
    let mut fe = BoolMatrix::new(nf, ne);
    for (e, (_, faces)) in curves.iter().enumerate() {
        for &f in faces {
            fe.set(f, e, true);
        }
    }
    let mut ev = BoolMatrix::new(ne, nv);
    for (v, (_, edges)) in vertices.iter().enumerate() {
        for &e in edges {
            ev.set(e, v, true);
        }
    }
    let mut ff = BoolMatrix::new(nf, nf);
    let mut ee = BoolMatrix::new(ne, ne);
    let mut fv = BoolMatrix::new(nf, nv);
    for e in 0..ne {
        for a in 0..nf {
            for b in 0..nf {
                if a != b && fe.get(a, e) && fe.get(b, e) {
                    ff.set(a, b, true);
                }
            }
        }
    }
    for v in 0..nv {
        for a in 0..ne {
            for b in 0..ne {
                if a != b && ev.get(a, v) && ev.get(b, v) {
                    ee.set(a, b, true);
                }
            }
            if ev.get(a, v) {
                for f in 0..nf {
                    if fe.get(f, a) {
                        fv.set(f, v, true);
                    }
                }
            }
        }
    }
    BRepModel {
        vertices: vertices.into_iter().map(|(p, _)| p).collect(),
        curves: curves.into_iter().map(|(e, _)| e).collect(),
        surfaces,
        ff,
        fe,
        ee,
        ev,
        fv,
    }
}

fn plane(normal: Vec3, through: Vec3) -> SurfacePrimitive {
    SurfacePrimitive::Plane {
        normal,
        offset: normal.dot(&through),
    }
    .canonicalize()
}

/// Planes `z = 0.25` and `z = 0.75` spanning the unit square.
pub fn two_planes(step: f64) -> Scene {
    let (ex, ey) = (Vec3::x(), Vec3::y());
    let mut sets = Vec::new();
    let mut faces = Vec::new();
    for z in [0.25, 0.75] {
        let s = sample_rect(Vec3::new(0.0, 0.0, z), ex, ey, 1.0, 1.0, step);
        faces.push(Face::bounded(plane(Vec3::z(), Vec3::new(0.0, 0.0, z)), &s));
        sets.push(s);
    }
    Scene {
        name: "two_planes",
        sample_sets: sets,
        elements: vec![Element::Surface(0), Element::Surface(1)],
        gt: assemble(faces, vec![], vec![]),
    }
}

/// Axis-aligned cube `[0.25, 0.75]^3`: 6 faces, 12 edges, 8 corners.
pub fn cube(step: f64) -> Scene {
    let (lo, hi) = (0.25, 0.75);
    let side = hi - lo;
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let mut sets = Vec::new();
    let mut elements = Vec::new();
    let mut faces = Vec::new();
    // Face f = 2 * axis + side.
    for a in 0..3 {
        for s in 0..2 {
            let c = if s == 0 { lo } else { hi };
            let (b1, b2) = (axes[(a + 1) % 3], axes[(a + 2) % 3]);
            let origin = axes[a] * c + (b1 + b2) * lo;
            let pts = sample_rect(origin, b1, b2, side, side, step);
            faces.push(Face::bounded(plane(axes[a], origin), &pts));
            elements.push(Element::Surface(faces.len() - 1));
            sets.push(pts);
        }
    }
    // Edge along axis a at the two fixed coordinates of the other axes.
    let mut curves = Vec::new();
    for a in 0..3 {
        let (a1, a2) = ((a + 1) % 3, (a + 2) % 3);
        for s2 in 0..2 {
            for s1 in 0..2 {
                let c1 = if s1 == 0 { lo } else { hi };
                let c2 = if s2 == 0 { lo } else { hi };
                let start = axes[a] * lo + axes[a1] * c1 + axes[a2] * c2;
                let end = start + axes[a] * side;
                let pts = sample_segment(start, end, step);
                let line = CurvePrimitive::Line {
                    point: start,
                    direction: axes[a],
                }
                .canonicalize();
                curves.push((Edge::bounded(line, &pts), vec![2 * a1 + s1, 2 * a2 + s2]));
                elements.push(Element::Curve(curves.len() - 1));
                sets.push(pts);
            }
        }
    }
    let mut vertices = Vec::new();
    for sz in 0..2 {
        for sy in 0..2 {
            for sx in 0..2 {
                let p = Vec3::new(
                    if sx == 0 { lo } else { hi },
                    if sy == 0 { lo } else { hi },
                    if sz == 0 { lo } else { hi },
                );
                let side_of = [sx, sy, sz];
                let edges: Vec<usize> = (0..curves.len())
                    .filter(|&e| {
                        let a = e / 4;
                        let (a1, a2) = ((a + 1) % 3, (a + 2) % 3);
                        let (s1, s2) = (e % 2, (e / 2) % 2);
                        side_of[a1] == s1 && side_of[a2] == s2
                    })
                    .collect();
                vertices.push((p, edges));
                elements.push(Element::Vertex(vertices.len() - 1));
                sets.push(vec![p]);
            }
        }
    }
    Scene {
        name: "cube",
        sample_sets: sets,
        elements,
        gt: assemble(faces, curves, vertices),
    }
}

pub const CYL_CENTER: [f64; 2] = [0.5, 0.5];
pub const CYL_RADIUS: f64 = 0.2;
pub const CYL_Z: [f64; 2] = [0.2, 0.8];

/// Cylinder of radius 0.2 about the vertical axis through (0.5, 0.5),
/// closed by discs at z = 0.2 and z = 0.8.
pub fn capped_cylinder(step: f64) -> Scene {
    let axis = Vec3::z();
    let base = Vec3::new(CYL_CENTER[0], CYL_CENTER[1], CYL_Z[0]);
    let top = Vec3::new(CYL_CENTER[0], CYL_CENTER[1], CYL_Z[1]);
    let height = CYL_Z[1] - CYL_Z[0];
    let side = sample_cylinder(base, axis, CYL_RADIUS, height, step);
    let cyl = SurfacePrimitive::Cylinder {
        axis_point: base,
        axis,
        radius: CYL_RADIUS,
    }
    .canonicalize();
    let bottom = sample_disc(base, axis, CYL_RADIUS, step);
    let upper = sample_disc(top, axis, CYL_RADIUS, step);
    let faces = vec![
        Face::bounded(cyl, &side),
        Face::bounded(plane(axis, base), &bottom),
        Face::bounded(plane(axis, top), &upper),
    ];
    let rim_lo = sample_circle(base, axis, CYL_RADIUS, step);
    let rim_hi = sample_circle(top, axis, CYL_RADIUS, step);
    let circle = |c: Vec3| CurvePrimitive::Circle {
        center: c,
        normal: axis,
        radius: CYL_RADIUS,
    };
    let curves = vec![
        (Edge::new(circle(base)), vec![0, 1]),
        (Edge::new(circle(top)), vec![0, 2]),
    ];
    Scene {
        name: "capped_cylinder",
        sample_sets: vec![side, bottom, upper, rim_lo, rim_hi],
        elements: vec![
            Element::Surface(0),
            Element::Surface(1),
            Element::Surface(2),
            Element::Curve(0),
            Element::Curve(1),
        ],
        gt: assemble(faces, curves, vec![]),
    }
}

/// Plane `z = 0.5` over the unit square and a sphere of radius 0.15 below it.
pub fn sphere_plane(step: f64) -> Scene {
    let ground = sample_rect(
        Vec3::new(0.0, 0.0, 0.5),
        Vec3::x(),
        Vec3::y(),
        1.0,
        1.0,
        step,
    );
    let c = Vec3::new(0.5, 0.5, 0.2);
    let ball = sample_sphere(c, 0.15, step);
    let faces = vec![
        Face::bounded(plane(Vec3::z(), Vec3::new(0.0, 0.0, 0.5)), &ground),
        Face::new(SurfacePrimitive::Sphere {
            center: c,
            radius: 0.15,
        }),
    ];
    Scene {
        name: "sphere_plane",
        sample_sets: vec![ground, ball],
        elements: vec![Element::Surface(0), Element::Surface(1)],
        gt: assemble(faces, vec![], vec![]),
    }
}

pub const CONE_APEX: [f64; 3] = [0.5, 0.5, 0.75];
pub const CONE_HALF_ANGLE: f64 = PI / 6.0;
pub const CONE_BASE_Z: f64 = 0.25;

/// Downward cone with apex (0.5, 0.5, 0.75) and half-angle 30 degrees,
/// closed by a disc at z = 0.25.
pub fn cone_plane(step: f64) -> Scene {
    let apex = Vec3::from(CONE_APEX);
    let axis = -Vec3::z();
    let height = CONE_APEX[2] - CONE_BASE_Z;
    let slant = height / CONE_HALF_ANGLE.cos();
    let rim_r = height * CONE_HALF_ANGLE.tan();
    let base = apex + axis * height;
    let lateral = sample_cone(apex, axis, CONE_HALF_ANGLE, slant, step);
    let disc = sample_disc(base, axis, rim_r, step);
    let rim = sample_circle(base, axis, rim_r, step);
    let cone = SurfacePrimitive::Cone {
        apex,
        axis,
        half_angle: CONE_HALF_ANGLE,
    };
    let faces = vec![
        Face::bounded(cone, &lateral),
        Face::bounded(plane(axis, base), &disc),
    ];
    let curves = vec![(
        Edge::new(
            CurvePrimitive::Circle {
                center: base,
                normal: axis,
                radius: rim_r,
            }
            .canonicalize(),
        ),
        vec![0, 1],
    )];
    Scene {
        name: "cone_plane",
        sample_sets: vec![lateral, disc, rim, vec![apex]],
        elements: vec![
            Element::Surface(0),
            Element::Surface(1),
            Element::Curve(0),
            Element::Vertex(0),
        ],
        gt: assemble(faces, curves, vec![(apex, vec![])]),
    }
}

impl Scene {
    /// Copy with isotropic Gaussian noise of standard deviation `sigma`
    /// added to every sample.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for set in &mut out.sample_sets {
            add_noise(set, sigma, &mut rng);
        }
        out
    }

    pub fn all_points(&self) -> Vec<Vec3> {
        self.sample_sets.iter().flatten().copied().collect()
    }
}

/// Adds isotropic Gaussian noise of standard deviation `sigma`.
pub fn add_noise(points: &mut [Vec3], sigma: f64, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for p in points.iter_mut() {
        *p += Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    }
}

/// A primitive with `n` samples on it, for fitting-recovery checks.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub truth: AnyPrimitive,
    pub points: Vec<Vec3>,
}

impl Fixture {
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Fixture {
        let mut out = self.clone();
        add_noise(&mut out.points, sigma, &mut ChaCha8Rng::seed_from_u64(seed));
        out
    }
}

/// `n = rows * cols` parameter pairs at cell centers of `[0,1]^2`.
fn grid_params(n: usize) -> Vec<(f64, f64)> {
    let cols = (1..=n)
        .rev()
        .find(|c| n.is_multiple_of(*c) && c * c <= n * 4)
        .unwrap_or(n);
    let rows = n / cols;
    (0..n)
        .map(|i| {
            (
                (((i % cols) as f64) + 0.5) / cols as f64,
                (((i / cols) as f64) + 0.5) / rows as f64,
            )
        })
        .collect()
}

/// One fixture per primitive kind (surfaces in kind order, then curves),
/// each with exactly `n` samples. Axes are tilted off the coordinate axes.
pub fn primitive_fixtures(n: usize) -> Vec<Fixture> {
    let c = Vec3::new(0.5, 0.5, 0.5);
    let axis = Vec3::new(0.2, -0.3, 1.0).normalize();
    let (e1, e2) = orthonormal_basis(&axis);
    let ring = |t: f64| e1 * (TAU * t).cos() + e2 * (TAU * t).sin();
    let grid = grid_params(n);
    let line: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let alpha = PI / 6.0;
    let (ea, eb) = (e1 * 0.6 + e2 * 0.8, e1 * -0.8 + e2 * 0.6);
    let surf = |s: SurfacePrimitive, pts: Vec<Vec3>| Fixture {
        truth: AnyPrimitive::Surface(s),
        points: pts,
    };
    let curve = |s: CurvePrimitive, pts: Vec<Vec3>| Fixture {
        truth: AnyPrimitive::Curve(s),
        points: pts,
    };
    vec![
        surf(
            SurfacePrimitive::Plane {
                normal: axis,
                offset: axis.dot(&c),
            },
            grid.iter()
                .map(|(u, v)| c + e1 * (0.4 * u - 0.2) + e2 * (0.4 * v - 0.2))
                .collect(),
        ),
        surf(
            SurfacePrimitive::Sphere {
                center: c,
                radius: 0.3,
            },
            grid.iter()
                .map(|(u, v)| {
                    let z = 1.0 - 2.0 * v;
                    c + (ring(*u) * (1.0 - z * z).sqrt() + axis * z) * 0.3
                })
                .collect(),
        ),
        surf(
            SurfacePrimitive::Cylinder {
                axis_point: c,
                axis,
                radius: 0.2,
            },
            grid.iter()
                .map(|(u, v)| c + ring(*u) * 0.2 + axis * (0.6 * v - 0.3))
                .collect(),
        ),
        surf(
            SurfacePrimitive::Cone {
                apex: c + axis * 0.25,
                axis: -axis,
                half_angle: alpha,
            },
            grid.iter()
                .map(|(u, v)| {
                    let s = 0.1 + 0.4 * v;
                    c + axis * 0.25 + (ring(*u) * alpha.sin() - axis * alpha.cos()) * s
                })
                .collect(),
        ),
        surf(
            SurfacePrimitive::Torus {
                center: c,
                axis,
                major_radius: 0.3,
                minor_radius: 0.1,
            },
            grid.iter()
                .map(|(u, v)| {
                    let w = TAU * v;
                    c + ring(*u) * (0.3 + 0.1 * w.cos()) + axis * (0.1 * w.sin())
                })
                .collect(),
        ),
        curve(
            CurvePrimitive::Line {
                point: c,
                direction: axis,
            },
            line.iter().map(|t| c + axis * (0.6 * t - 0.3)).collect(),
        ),
        curve(
            CurvePrimitive::Circle {
                center: c,
                normal: axis,
                radius: 0.25,
            },
            line.iter().map(|t| c + ring(*t) * 0.25).collect(),
        ),
        curve(
            CurvePrimitive::Ellipse {
                center: c,
                normal: axis,
                major_axis: ea,
                semi_major: 0.3,
                semi_minor: 0.15,
            },
            line.iter()
                .map(|t| c + ea * (0.3 * (TAU * t).cos()) + eb * (0.15 * (TAU * t).sin()))
                .collect(),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_topology_counts() {
        let s = cube(0.05);
        assert_eq!(s.gt.counts(), (8, 12, 6));
        assert_eq!(s.gt.euler_characteristic(), 2);
        assert!((0..6).all(|f| s.gt.fe.row_degree(f) == 4 && s.gt.ff.row_degree(f) == 4));
        assert!((0..12).all(|e| s.gt.ev.row_degree(e) == 2 && s.gt.ee.row_degree(e) == 4));
        assert!((0..8).all(|v| s.gt.ev.col_degree(v) == 3 && s.gt.fv.col_degree(v) == 3));
        assert!(s.gt.ff.is_symmetric() && s.gt.ee.is_symmetric());
    }

    #[test]
    fn cube_edges_touch_their_faces() {
        let s = cube(0.05);
        for [f, e] in s.gt.fe.ones() {
            let mid = s.sample_sets[6 + e][s.sample_sets[6 + e].len() / 2];
            assert!(s.gt.surfaces[f].geometry.distance(&mid) < 1e-12);
        }
        for [e, v] in s.gt.ev.ones() {
            assert!(s.gt.curves[e].geometry.distance(&s.gt.vertices[v]) < 1e-12);
        }
    }

    #[test]
    fn samples_lie_on_their_primitives() {
        for name in SCENE_NAMES {
            let s = by_name(name, 0.02).unwrap();
            for (set, el) in s.sample_sets.iter().zip(&s.elements) {
                for p in set {
                    let d = match *el {
                        Element::Surface(i) => s.gt.surfaces[i].geometry.distance(p),
                        Element::Curve(i) => s.gt.curves[i].geometry.distance(p),
                        Element::Vertex(i) => (p - s.gt.vertices[i]).norm(),
                    };
                    assert!(d < 1e-12, "{name}: {d}");
                }
            }
        }
    }

    #[test]
    fn capped_cylinder_topology() {
        let s = capped_cylinder(0.02);
        assert_eq!(s.gt.counts(), (0, 2, 3));
        assert_eq!(s.gt.fe.row_degree(0), 2);
        assert_eq!(s.gt.fe.row_degree(1), 1);
        assert!(!s.gt.ff.get(1, 2));
    }

    #[test]
    fn noise_is_seeded() {
        let s = sphere_plane(0.05);
        assert_eq!(
            s.with_noise(0.01, 3).sample_sets,
            s.with_noise(0.01, 3).sample_sets
        );
        assert_ne!(s.with_noise(0.01, 3).sample_sets, s.sample_sets);
    }
}
