//! End-to-end run on a synthetic scene with ground-truth boundaries.
//!
//! `points` fits the input samples, `projected` the voxel foot points.
//!
//! Usage: `cube_pipeline [scene] [resolution] [points|projected] [sigma] [eps1]`

use std::time::Instant;

use vorofit::config::Config;
use vorofit::fitting::CellFit;
use vorofit::grid::GridGeometry;
use vorofit::gt_voronoi::boundary_from_labels;
use vorofit::pipeline::run_from_boundary;
use vorofit::scenes::{by_name, default_step};
use vorofit::udf::udf_from_primitive_samples_on;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("cube");
    let r: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128);
    let use_points = args.get(3).is_none_or(|s| s == "points");
    let sigma: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let t0 = Instant::now();
    let mut scene = by_name(name, default_step(r)).expect("known scene");
    if sigma > 0.0 {
        scene = scene.with_noise(sigma, 1);
    }
    let (udf, labels) =
        udf_from_primitive_samples_on(&scene.sample_sets, GridGeometry::unit(r)).expect("udf");
    let boundary = boundary_from_labels(&labels);
    println!("udf + labels: {:?}", t0.elapsed());
    let mut cfg = Config::with_resolution(r);
    if let Some(e) = args.get(5).and_then(|s| s.parse().ok()) {
        cfg.eps1 = e;
    }
    let pts = scene.all_points();
    let out =
        run_from_boundary(&udf, &boundary, use_points.then_some(&pts[..]), &cfg).expect("pipeline");
    println!("pipeline: {:?}", t0.elapsed());
    for (c, f) in out.fits.iter().enumerate() {
        let n = out.cell_points.points[c].len();
        match f {
            CellFit::Surface(r) => println!(
                "cell {c:3} ({n:6} pts): surface {:?} rms {:.2e}",
                r.surface().unwrap().kind(),
                r.rms_error
            ),
            CellFit::Curve(r) => println!(
                "cell {c:3} ({n:6} pts): curve {:?} rms {:.2e}",
                r.curve().unwrap().kind(),
                r.rms_error
            ),
            CellFit::Multi(m) => println!(
                "cell {c:3} ({n:6} pts): multi {:?}",
                m.iter()
                    .map(|r| (r.surface().unwrap().kind(), r.rms_error, r.inlier_count))
                    .collect::<Vec<_>>()
            ),
            CellFit::Degenerate => println!("cell {c:3} ({n:6} pts): degenerate"),
        }
    }
    let m = &out.recovered.model;
    println!(
        "V E F = {:?}, euler {}",
        m.counts(),
        m.euler_characteristic()
    );
    for e in &m.curves {
        println!("  curve {:?}", e.geometry);
    }
    println!("warnings: {:?}", out.recovered.warnings);
}
