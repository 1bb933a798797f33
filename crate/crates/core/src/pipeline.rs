//! Stage orchestration from a distance field and a boundary grid to a
//! B-Rep model.

use rayon::prelude::*;

use crate::cells::{assign_points, fill_holes, grow_regions, CellPoints, VoronoiCells};
use crate::config::Config;
use crate::fitting::{fit_cell, CellFit};
use crate::geom::Vec3;
use crate::gt_voronoi::BoundaryGrid;
use crate::topology::{recover, Recovered};
use crate::udf::UdfGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Udf,
    Detect,
    FillHoles,
    GrowRegions,
    AssignPoints,
    Fit,
    Topology,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Udf => "udf",
            Stage::Detect => "detect",
            Stage::FillHoles => "fill_holes",
            Stage::GrowRegions => "grow_regions",
            Stage::AssignPoints => "assign_points",
            Stage::Fit => "fit",
            Stage::Topology => "topology",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage} failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

impl StageError {
    pub fn new(stage: Stage, err: impl std::fmt::Display) -> Self {
        StageError {
            stage,
            message: err.to_string(),
        }
    }
}

/// RANSAC seed of one cell: the cell id when the run seed is zero.
pub fn cell_seed(seed: u64, cell: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(cell as u64)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub boundary: BoundaryGrid,
    pub cells: VoronoiCells,
    pub cell_points: CellPoints,
    pub fits: Vec<CellFit>,
    pub recovered: Recovered,
}

/// Boundary voxels carry no points, so point sets of surfaces meeting at a
/// curve stop about one and a half voxels short of it on either side. The
/// surface proximity threshold is widened to at least this many voxels.
pub const PROXIMITY_BAND_VOXELS: f64 = 3.0;

/// Surface proximity threshold on a grid of spacing `h`.
pub fn proximity_threshold(eps2: f64, h: f64) -> f64 {
    eps2.max(PROXIMITY_BAND_VOXELS * h)
}

/// Fits every cell independently.
pub fn fit_cells(cell_points: &CellPoints, cfg: &Config) -> Vec<CellFit> {
    (0..cell_points.points.len())
        .into_par_iter()
        .map(|c| {
            fit_cell(
                &cell_points.points[c],
                cell_points.degenerate[c],
                cfg.eps1,
                cell_seed(cfg.seed, c),
            )
        })
        .collect()
}

/// Hole filling, region growing, point assignment, fitting and topology.
/// `points`, when given, are the input samples fitted per cell; otherwise
/// cells are fitted to voxel projections onto the surface.
pub fn run_from_boundary(
    udf: &UdfGrid,
    boundary: &BoundaryGrid,
    points: Option<&[Vec3]>,
    cfg: &Config,
) -> Result<PipelineOutput, StageError> {
    let filled = fill_holes(boundary, udf, cfg.hole_fill_steps, cfg.d_max)
        .map_err(|e| StageError::new(Stage::FillHoles, e))?;
    let cells = grow_regions(&filled, cfg.min_cell_voxels)
        .map_err(|e| StageError::new(Stage::GrowRegions, e))?;
    let cell_points =
        assign_points(&cells, udf, points).map_err(|e| StageError::new(Stage::AssignPoints, e))?;
    let fits = fit_cells(&cell_points, cfg);
    let eps2 = proximity_threshold(cfg.eps2, udf.geometry().spacing);
    let recovered = recover(
        &cells.adjacency,
        &fits,
        &cell_points,
        cfg.eps1,
        eps2,
        cfg.eps3,
    );
    Ok(PipelineOutput {
        boundary: filled,
        cells,
        cell_points,
        fits,
        recovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proximity_threshold_is_eps2_on_fine_grids() {
        assert_eq!(proximity_threshold(0.02, 1.0 / 256.0), 0.02);
        assert_eq!(proximity_threshold(0.02, 1.0 / 64.0), 3.0 / 64.0);
    }

    #[test]
    fn cell_seeds_differ_per_cell() {
        assert_ne!(cell_seed(0, 0), cell_seed(0, 1));
        assert_eq!(cell_seed(5, 3), cell_seed(5, 3));
    }
}
