//! Feeds an externally predicted boundary grid through a pipeline manifest.
//!
//! The ground-truth boundary of a scene is turned into a soft probability
//! grid with seeded jitter, standing in for a learned predictor, saved as
//! NVDB and referenced from the manifest's `boundary.external` field.
//!
//! Usage: `external_boundary [scene] [resolution] [jitter]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vorofit::cli::{self, ConfigOverrides};
use vorofit::config::Config;
use vorofit::io;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("capped_cylinder");
    let r: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);
    let jitter: f32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.3);

    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let files = cli::cmd_scene(name, d, &Config::with_resolution(r), 0.0, 0).expect("scene");

    let truth = io::load_boundary(&d.join("gt/boundary.nvdb")).expect("gt boundary");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let predicted = truth.map(|&p| {
        let base = if p >= 0.5 { 0.85 } else { 0.15 };
        (base + rng.gen_range(-jitter..=jitter)).clamp(0.0, 1.0)
    });
    io::save_boundary(&d.join("predicted.nvdb"), &predicted).expect("save");

    let mut manifest: cli::PipelineManifest =
        serde_json::from_slice(&std::fs::read(&files.pipeline_detect).expect("manifest"))
            .expect("manifest json");
    manifest.boundary.analytic = false;
    manifest.boundary.external = Some("predicted.nvdb".into());
    manifest.output_dir = "out_external".into();
    let path = d.join("external.json");
    std::fs::write(&path, io::to_json(&manifest)).expect("write manifest");

    let report = cli::cmd_pipeline(&path, &ConfigOverrides::default()).expect("pipeline");
    let gt = io::load_brep(&files.gt_brep)
        .expect("gt brep")
        .model()
        .expect("gt model");
    let eval = cli::cmd_eval(
        &report.output_dir.join("brep.json"),
        &files.gt_brep,
        None,
        &Config::with_resolution(r),
    )
    .expect("eval");
    let at = eval.detection.at(0.01).expect("0.01 threshold");
    println!("scene {name} at r={r}, jitter {jitter}");
    println!(
        "VEF {:?} (gt {:?}), warnings {}",
        report.counts,
        gt.counts(),
        report.warnings.len()
    );
    println!(
        "F1@0.01 surface {:.2} curve {:.2} vertex {:.2}, FE {:.2}, EV {:.2}",
        at.surface.f1,
        at.curve.f1,
        at.vertex.f1,
        eval.topology.fe_f1,
        eval.topology.ev_f1
    );
}
