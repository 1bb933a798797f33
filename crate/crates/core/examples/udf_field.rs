//! Distance field of a scene's point cloud against brute-force nearest
//! sample distances on a subset of voxels.
//!
//! Usage: `udf_field [scene] [resolution]`

use vorofit::grid::GridGeometry;
use vorofit::scenes::{by_name, default_step};
use vorofit::udf::udf_on_grid;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("capped_cylinder");
    let r: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);
    let scene = by_name(name, default_step(r)).expect("known scene");
    let pts = scene.all_points();
    let geom = GridGeometry::unit(r);
    let udf = udf_on_grid(&pts, geom).expect("udf");
    let (mut worst, mut grad_worst, mut checked) = (0.0f64, 0.0f64, 0usize);
    for (i, s) in udf.values().iter().enumerate().step_by(97) {
        let x = geom.world_of_index(i);
        let exact = pts
            .iter()
            .map(|p| (p - x).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((s.d as f64 - exact).abs());
        if s.d > 0.0 {
            grad_worst = grad_worst.max((s.gradient().norm() - 1.0).abs());
        }
        checked += 1;
    }
    println!(
        "{name} r={r}: {} points, {checked} voxels checked, max |d - brute force| = {worst:.2e}, max ||g| - 1| = {grad_worst:.2e}",
        pts.len()
    );
}
