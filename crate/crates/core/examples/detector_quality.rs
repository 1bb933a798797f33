//! Precision and recall of the analytic detector against ground-truth
//! boundaries on the synthetic scenes.
//!
//! Usage: `detector_quality [resolution] [flat|scaled] [clearance]`

use vorofit::detect::{detect_analytic, dilated_precision_recall, DetectorParams};
use vorofit::grid::GridGeometry;
use vorofit::gt_voronoi::{boundary_from_labels, flags};
use vorofit::scenes::{by_name, default_step, SCENE_NAMES};
use vorofit::udf::udf_from_primitive_samples_on;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let r: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let mut params = DetectorParams::for_spacing(1.0 / r as f64);
    if let Some(s) = args.get(2) {
        params.distance_scaled = s == "scaled";
    }
    if let Some(c) = args.get(3).and_then(|s| s.parse().ok()) {
        params.surface_clearance = c;
    }
    println!("resolution {r}, {params:?}");
    for name in SCENE_NAMES {
        let t0 = std::time::Instant::now();
        let scene = by_name(name, default_step(r)).expect("known scene");
        let (udf, labels) =
            udf_from_primitive_samples_on(&scene.sample_sets, GridGeometry::unit(r))
                .expect("samples");
        let t1 = t0.elapsed();
        let gt = flags(&boundary_from_labels(&labels));
        let found = flags(&detect_analytic(&udf, &params).expect("detector"));
        let t2 = t0.elapsed();
        let (p, rec) = dilated_precision_recall(&found, &gt, &udf, params.d_max);
        println!(
            "{name:>16}: precision {p:.3} recall {rec:.3} ({t1:?} {t2:?} {:?})",
            t0.elapsed()
        );
    }
}
