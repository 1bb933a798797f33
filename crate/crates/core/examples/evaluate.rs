//! Scores the analytic-detector pipeline on every scene against its ground
//! truth.
//!
//! Usage: `evaluate [resolution]`

use vorofit::config::{Config, TOPOLOGY_MATCH_THRESHOLD};
use vorofit::detect::{detect_tiled, DetectorParams, PatchSpec};
use vorofit::metrics::{
    class_chamfer, detection_scores, sample_model, topo_f1, CURVE_DENSITY, SURFACE_DENSITY,
};
use vorofit::pipeline::run_from_boundary;
use vorofit::scenes::{by_name, default_step, SCENE_NAMES};
use vorofit::udf::udf_from_points;

fn main() {
    let r: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(64);
    let cfg = Config::with_resolution(r);
    for name in SCENE_NAMES {
        let scene = by_name(name, default_step(r)).expect("known scene");
        let pts = scene.all_points();
        let udf = udf_from_points(&pts, &cfg).expect("udf");
        let spec = PatchSpec::new(r, cfg.patch_stride, cfg.patch_size).expect("patches");
        let boundary =
            detect_tiled(&udf, &DetectorParams::from_config(&cfg), &spec).expect("detect");
        let out = run_from_boundary(&udf, &boundary, Some(&pts), &cfg).expect("pipeline");
        let pred =
            sample_model(&out.recovered.model, SURFACE_DENSITY, CURVE_DENSITY).expect("samples");
        let gt = sample_model(&scene.gt, SURFACE_DENSITY, CURVE_DENSITY).expect("samples");
        let det = detection_scores(&pred, &gt, &[TOPOLOGY_MATCH_THRESHOLD]);
        let topo = topo_f1(&out.recovered.model, &scene.gt, &det.per_threshold[0]);
        println!(
            "{name:>16}: VEF {:?} (gt {:?}), surface CD {:.2e}, F1@0.01 s/c/v {:.2}/{:.2}/{:.2}, FE {:.2}, EV {:.2}",
            out.recovered.model.counts(),
            scene.gt.counts(),
            class_chamfer(&pred.surfaces, &gt.surfaces).unwrap_or(f64::NAN),
            det.per_threshold[0].surface.f1,
            det.per_threshold[0].curve.f1,
            det.per_threshold[0].vertex.f1,
            topo.fe_f1,
            topo.ev_f1,
        );
    }
}
