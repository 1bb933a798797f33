//! Cells grown from ground-truth boundaries against the labels they came
//! from.
//!
//! Usage: `gt_cells [resolution]`

use std::time::Instant;

use vorofit::cells::{fill_holes, grow_regions, label_agreement};
use vorofit::config::Config;
use vorofit::grid::GridGeometry;
use vorofit::gt_voronoi::{boundary_from_labels, cells_from_labels};
use vorofit::scenes::{by_name, default_step, SCENE_NAMES};
use vorofit::udf::udf_from_primitive_samples_on;

fn main() {
    let r: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(64);
    let cfg = Config::with_resolution(r);
    for name in SCENE_NAMES {
        let scene = by_name(name, default_step(r)).expect("known scene");
        let t = Instant::now();
        let (udf, labels) =
            udf_from_primitive_samples_on(&scene.sample_sets, GridGeometry::unit(r)).expect("udf");
        let boundary = boundary_from_labels(&labels);
        let filled = fill_holes(&boundary, &udf, cfg.hole_fill_steps, cfg.d_max).expect("fill");
        let cells = grow_regions(&filled, cfg.min_cell_voxels).expect("grow");
        let reference = cells_from_labels(&labels);
        println!(
            "{name:>16}: {} cells (reference {}), agreement {:.4}, {:?}",
            cells.n_cells,
            reference.n_cells,
            label_agreement(&cells, &reference),
            t.elapsed()
        );
    }
}
