use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::geom::orthonormal_basis;

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

fn noisy(points: &[Vec3], sigma: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    points
        .iter()
        .map(|p| p + v(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)))
        .collect()
}

fn fibonacci_sphere(c: Vec3, r: f64, n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            c + v(rho * t.cos(), rho * t.sin(), z) * r
        })
        .collect()
}

fn cylinder_points(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let t = TAU * (i % 40) as f64 / 40.0;
            let z = 0.2 + 0.6 * (i / 40) as f64 / (n / 40) as f64;
            v(0.5 + 0.2 * t.cos(), 0.5 + 0.2 * t.sin(), z)
        })
        .collect()
}

fn surface(r: &FitResult) -> SurfacePrimitive {
    r.surface().cloned().expect("surface")
}

fn curve(r: &FitResult) -> CurvePrimitive {
    r.curve().cloned().expect("curve")
}

#[test]
fn three_point_plane() {
    let r = fit_surface(
        &[v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)],
        SurfaceKind::Plane,
    )
    .unwrap();
    let SurfacePrimitive::Plane { normal, offset } = surface(&r) else {
        panic!()
    };
    assert!((normal - v(0., 0., 1.)).norm() < 1e-12 && offset.abs() < 1e-12);
    assert!(r.rms_error < 1e-12 && !r.rank_deficient);
}

#[test]
fn collinear_plane_is_rank_deficient() {
    let pts: Vec<Vec3> = (0..5).map(|i| v(i as f64, 0.0, 0.0)).collect();
    let r = fit_surface(&pts, SurfaceKind::Plane).unwrap();
    assert!(r.rank_deficient && r.rms_error < 1e-12);
}

#[test]
fn too_few_points() {
    let pts = [v(0., 0., 0.), v(1., 0., 0.)];
    assert_eq!(
        fit_surface(&pts, SurfaceKind::Plane),
        Err(FitError::TooFewPoints { needed: 3, got: 2 })
    );
    assert!(matches!(
        fit_curve(&pts, CurveKind::Ellipse),
        Err(FitError::TooFewPoints { .. })
    ));
}

#[test]
fn sphere_from_fibonacci_samples() {
    let c = v(0.5, 0.5, 0.5);
    let r = fit_surface(&fibonacci_sphere(c, 0.3, 1000), SurfaceKind::Sphere).unwrap();
    let SurfacePrimitive::Sphere { center, radius } = surface(&r) else {
        panic!()
    };
    assert!((center - c).norm() < 1e-6 && (radius - 0.3).abs() < 1e-6);
    assert!(r.rms_error < 1e-7);
}

#[test]
fn noisy_cylinder_radius() {
    let pts = noisy(&cylinder_points(1000), 0.002, 7);
    let r = fit_surface(&pts, SurfaceKind::Cylinder).unwrap();
    let SurfacePrimitive::Cylinder {
        axis,
        radius,
        axis_point,
    } = surface(&r)
    else {
        panic!()
    };
    assert!((radius - 0.2).abs() < 0.01);
    assert!((axis - v(0., 0., 1.)).norm() < 0.01);
    assert!((axis_point.xy() - v(0.5, 0.5, 0.).xy()).norm() < 0.01);
}

#[test]
fn coplanar_cylinder_is_nonconvergent() {
    let pts: Vec<Vec3> = (0..50)
        .map(|i| v((i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1, 0.5))
        .collect();
    assert_eq!(
        fit_surface(&pts, SurfaceKind::Cylinder),
        Err(FitError::NonConvergent)
    );
}

#[test]
fn cone_recovery() {
    let apex = v(0.5, 0.5, 0.75);
    let alpha = PI / 6.0;
    let pts: Vec<Vec3> = (0..1000)
        .map(|i| {
            let t = TAU * (i % 50) as f64 / 50.0;
            let s = 0.1 + 0.4 * (i / 50) as f64 / 20.0;
            apex + v(alpha.sin() * t.cos(), alpha.sin() * t.sin(), -alpha.cos()) * s
        })
        .collect();
    let r = fit_surface(&pts, SurfaceKind::Cone).unwrap();
    let SurfacePrimitive::Cone {
        apex: a,
        axis,
        half_angle,
    } = surface(&r)
    else {
        panic!()
    };
    assert!((a - apex).norm() < 1e-6, "{a:?}");
    assert!((axis - v(0., 0., -1.)).norm() < 1e-6);
    assert!((half_angle - alpha).abs() < 1e-6);
}

#[test]
fn torus_recovery() {
    let c = v(0.5, 0.5, 0.5);
    let pts: Vec<Vec3> = (0..1000)
        .map(|i| {
            let u = TAU * (i % 40) as f64 / 40.0;
            let w = TAU * (i / 40) as f64 / 25.0;
            let rho = 0.3 + 0.1 * w.cos();
            c + v(rho * u.cos(), rho * u.sin(), 0.1 * w.sin())
        })
        .collect();
    let r = fit_surface(&pts, SurfaceKind::Torus).unwrap();
    let SurfacePrimitive::Torus {
        center,
        axis,
        major_radius,
        minor_radius,
    } = surface(&r)
    else {
        panic!()
    };
    assert!((center - c).norm() < 1e-6);
    assert!((axis - v(0., 0., 1.)).norm() < 1e-6);
    assert!((major_radius - 0.3).abs() < 1e-6 && (minor_radius - 0.1).abs() < 1e-6);
}

#[test]
fn two_point_line() {
    let r = fit_curve(&[v(0., 0., 0.), v(0., 0., 1.)], CurveKind::Line).unwrap();
    let CurvePrimitive::Line { point, direction } = curve(&r) else {
        panic!()
    };
    assert!(point.norm() < 1e-12 && (direction - v(0., 0., 1.)).norm() < 1e-12);
    assert!(r.rms_error < 1e-12);
}

#[test]
fn coincident_line_is_degenerate() {
    let pts = [v(1., 1., 1.); 4];
    assert!(matches!(
        fit_curve(&pts, CurveKind::Line),
        Err(FitError::DegenerateConfiguration(_))
    ));
}

#[test]
fn circle_recovery() {
    let c = v(0.5, 0.5, 0.5);
    let pts: Vec<Vec3> = (0..100)
        .map(|i| {
            let t = TAU * i as f64 / 100.0;
            c + v(t.cos(), t.sin(), 0.0) * 0.25
        })
        .collect();
    let r = fit_curve(&pts, CurveKind::Circle).unwrap();
    let CurvePrimitive::Circle {
        center,
        normal,
        radius,
    } = curve(&r)
    else {
        panic!()
    };
    assert!((center - c).norm() < 1e-6 && (normal - v(0., 0., 1.)).norm() < 1e-6);
    assert!((radius - 0.25).abs() < 1e-6);
}

#[test]
fn ellipse_recovery() {
    let c = v(0.4, 0.5, 0.5);
    let (ax, ay) = (v(0.6, 0.8, 0.0), v(-0.8, 0.6, 0.0));
    let pts: Vec<Vec3> = (0..200)
        .map(|i| {
            let t = TAU * i as f64 / 200.0;
            c + ax * (0.3 * t.cos()) + ay * (0.15 * t.sin())
        })
        .collect();
    let r = fit_curve(&pts, CurveKind::Ellipse).unwrap();
    let CurvePrimitive::Ellipse {
        center,
        major_axis,
        semi_major,
        semi_minor,
        ..
    } = curve(&r)
    else {
        panic!()
    };
    assert!((semi_major - 0.3).abs() < 1e-4 && (semi_minor - 0.15).abs() < 1e-4);
    assert!((center - c).norm() < 1e-4);
    assert!(major_axis.dot(&ax).abs() > 1.0 - 1e-6);
}

#[test]
fn best_surface_prefers_sphere_on_sphere_samples() {
    let pts = fibonacci_sphere(v(0.5, 0.5, 0.5), 0.3, 500);
    let best = fit_best_surface(&pts).unwrap();
    assert_eq!(surface(&best).kind(), SurfaceKind::Sphere);
    // Every kind that ran has rms no smaller than the winner's.
    for k in SurfaceKind::ALL {
        if let Ok(r) = fit_surface(&pts, k) {
            assert!(r.rms_error >= best.rms_error - RMS_TIE);
        }
    }
}

#[test]
fn best_surface_is_exhaustive_argmin_on_general_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Vec3> = (0..8).map(|_| v(rng.gen(), rng.gen(), rng.gen())).collect();
    let best = fit_best_surface(&pts).unwrap();
    let min = SurfaceKind::ALL
        .iter()
        .filter_map(|&k| fit_surface(&pts, k).ok())
        .map(|r| r.rms_error)
        .fold(f64::INFINITY, f64::min);
    assert!(best.rms_error <= min + RMS_TIE);
}

#[test]
fn planar_samples_pick_plane() {
    let pts: Vec<Vec3> = (0..400)
        .map(|i| v((i % 20) as f64 * 0.015, (i / 20) as f64 * 0.015, 0.3))
        .collect();
    let best = fit_best_surface(&pts).unwrap();
    assert_eq!(surface(&best).kind(), SurfaceKind::Plane);
    assert!(best.rms_error < 1e-12);
}

#[test]
fn cell_on_segment_is_line() {
    let pts: Vec<Vec3> = (0..50)
        .map(|i| v(0.1 + 0.01 * i as f64, 0.2, 0.3))
        .collect();
    match fit_cell(&pts, false, 1e-3, 0) {
        CellFit::Curve(r) => assert_eq!(curve(&r).kind(), CurveKind::Line),
        other => panic!("{other:?}"),
    }
}

#[test]
fn cell_on_plane_patch_is_plane() {
    let pts: Vec<Vec3> = (0..1000)
        .map(|i| {
            v(
                0.2 + 0.3 * (i % 40) as f64 / 39.0,
                0.2 + 0.3 * (i / 40) as f64 / 24.0,
                0.5,
            )
        })
        .collect();
    let best_curve = fit_best_curve(&pts).unwrap();
    assert!(best_curve.rms_error > 1e-3);
    match fit_cell(&pts, false, 1e-3, 0) {
        CellFit::Surface(r) => assert_eq!(surface(&r).kind(), SurfaceKind::Plane),
        other => panic!("{other:?}"),
    }
}

fn two_perpendicular_planes() -> Vec<Vec3> {
    let mut pts = Vec::new();
    for i in 0..30 {
        for j in 0..30 {
            let (a, b) = (0.01 * i as f64, 0.01 * j as f64);
            pts.push(v(0.2 + a, 0.2 + b, 0.2));
            pts.push(v(0.2 + a, 0.2, 0.21 + b));
        }
    }
    pts
}

#[test]
fn cell_on_two_planes_is_multi() {
    let pts = two_perpendicular_planes();
    match fit_cell(&pts, false, 1e-3, 0) {
        CellFit::Multi(members) => {
            assert_eq!(members.len(), 2);
            let mut normals: Vec<Vec3> = members
                .iter()
                .map(|m| match surface(m) {
                    SurfacePrimitive::Plane { normal, .. } => normal,
                    other => panic!("{other:?}"),
                })
                .collect();
            normals.sort_by(|a, b| a.z.total_cmp(&b.z));
            assert!((normals[0] - v(0., 1., 0.)).norm() < 1e-3);
            assert!((normals[1] - v(0., 0., 1.)).norm() < 1e-3);
            for m in &members {
                assert!(m.rms_error <= 1e-3);
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn degenerate_cells_are_skipped() {
    assert_eq!(
        fit_cell(&[v(0., 0., 0.)], true, 1e-3, 0),
        CellFit::Degenerate
    );
    assert_eq!(fit_cell(&[], false, 1e-3, 0), CellFit::Degenerate);
}

#[test]
fn ransac_single_sphere() {
    let pts = fibonacci_sphere(v(0.5, 0.5, 0.5), 0.3, 800);
    let models = ransac_multi(&pts, 1e-3, 1).unwrap();
    assert_eq!(models.len(), 1);
    assert_eq!(surface(&models[0]).kind(), SurfaceKind::Sphere);
}

#[test]
fn ransac_random_points_find_little() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Vec3> = (0..10)
        .map(|_| v(rng.gen(), rng.gen(), rng.gen()))
        .collect();
    match ransac_multi(&pts, 1e-3, 5) {
        Err(FitError::NoModelFound) => {}
        Ok(models) => assert!(models.len() <= 2),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn ransac_is_seed_deterministic() {
    let pts = two_perpendicular_planes();
    assert_eq!(
        ransac_multi(&pts, 1e-3, 9).unwrap(),
        ransac_multi(&pts, 1e-3, 9).unwrap()
    );
}

#[test]
fn closed_form_fits_are_locally_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let plane_pts = noisy(
        &(0..200)
            .map(|i| v((i % 20) as f64 * 0.02, (i / 20) as f64 * 0.03, 0.4))
            .collect::<Vec<_>>(),
        0.01,
        2,
    );
    let r = fit_surface(&plane_pts, SurfaceKind::Plane).unwrap();
    let SurfacePrimitive::Plane { normal, offset } = surface(&r) else {
        panic!()
    };
    let sphere_pts = noisy(&fibonacci_sphere(v(0.5, 0.5, 0.5), 0.3, 300), 0.01, 3);
    let rs = fit_surface(&sphere_pts, SurfaceKind::Sphere).unwrap();
    let SurfacePrimitive::Sphere { center, radius } = surface(&rs) else {
        panic!()
    };
    let rms_of = |s: &SurfacePrimitive, pts: &[Vec3]| rms(pts, |p| s.distance(p));
    for _ in 0..20 {
        let d: [f64; 4] = std::array::from_fn(|_| if rng.gen::<bool>() { 1e-3 } else { -1e-3 });
        let p = SurfacePrimitive::Plane {
            normal: (normal + v(d[0], d[1], d[2])).normalize(),
            offset: offset + d[3],
        };
        assert!(rms_of(&p, &plane_pts) >= r.rms_error);
        let s = SurfacePrimitive::Sphere {
            center: center + v(d[0], d[1], d[2]),
            radius: radius + d[3],
        };
        assert!(rms_of(&s, &sphere_pts) >= rs.rms_error);
    }
}

#[test]
fn fits_are_scale_equivariant() {
    let pts = fibonacci_sphere(v(0.5, 0.2, 0.1), 0.3, 300);
    let scaled: Vec<Vec3> = pts.iter().map(|p| p * 2.5).collect();
    let a = fit_surface(&pts, SurfaceKind::Sphere).unwrap();
    let b = fit_surface(&scaled, SurfaceKind::Sphere).unwrap();
    let (
        SurfacePrimitive::Sphere {
            center: c1,
            radius: r1,
        },
        SurfacePrimitive::Sphere {
            center: c2,
            radius: r2,
        },
    ) = (surface(&a), surface(&b))
    else {
        panic!()
    };
    assert!((c1 * 2.5 - c2).norm() < 1e-9 && (r1 * 2.5 - r2).abs() < 1e-9);
    let n = v(1.0, 2.0, 3.0).normalize();
    let (e1, e2) = orthonormal_basis(&n);
    let circ: Vec<Vec3> = (0..60)
        .map(|i| {
            let t = TAU * i as f64 / 60.0;
            v(0.3, 0.3, 0.3) + (e1 * t.cos() + e2 * t.sin()) * 0.2
        })
        .collect();
    let big: Vec<Vec3> = circ.iter().map(|p| p * 3.0).collect();
    let (c, cb) = (
        curve(&fit_curve(&circ, CurveKind::Circle).unwrap()),
        curve(&fit_curve(&big, CurveKind::Circle).unwrap()),
    );
    let (
        CurvePrimitive::Circle {
            normal: n1,
            radius: r1,
            ..
        },
        CurvePrimitive::Circle {
            normal: n2,
            radius: r2,
            ..
        },
    ) = (c, cb)
    else {
        panic!()
    };
    assert!((n1 - n2).norm() < 1e-9 && (r1 * 3.0 - r2).abs() < 1e-9);
}
