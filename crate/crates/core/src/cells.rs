//! Voronoi cells from a boundary grid: hole filling, region growing,
//! adjacency and point assignment.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rayon::prelude::*;

use crate::brep::BoolMatrix;
use crate::geom::{bbox_diagonal, Vec3};
use crate::grid::{face_neighbor_indices, GridCoord, GridGeometry, VoxelGrid};
use crate::gt_voronoi::{is_flagged, BoundaryGrid};
use crate::kdtree::KdTree;
use crate::udf::UdfGrid;

/// Cell id carried by boundary voxels and discarded fragments.
pub const NONE: u32 = u32::MAX;

/// Cells with fewer points are degenerate: a circle through three points
/// always fits exactly, so smaller sets say nothing about their primitive.
pub const MIN_CELL_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiCells {
    pub cell_of: VoxelGrid<u32>,
    pub n_cells: usize,
    /// Symmetric cell adjacency `E_v`.
    pub adjacency: BoolMatrix,
    /// Voxel indices of each cell, ascending.
    pub voxels: Vec<Vec<usize>>,
}

impl VoronoiCells {
    pub fn geometry(&self) -> &GridGeometry {
        self.cell_of.geometry()
    }

    pub fn cell_at(&self, idx: usize) -> Option<usize> {
        let c = self.cell_of.values()[idx];
        (c != NONE).then_some(c as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointSource {
    InputPoint,
    ProjectedVoxel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPoints {
    pub points: Vec<Vec<Vec3>>,
    pub source: PointSource,
    /// Cells whose points span less than three voxels or number fewer than
    /// [`MIN_CELL_POINTS`]; skipped by fitting.
    pub degenerate: Vec<bool>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CellsError {
    #[error("every voxel is boundary; no cells to grow")]
    NoCells,
    #[error("grid resolutions differ ({0} vs {1})")]
    ResolutionMismatch(usize, usize),
}

/// Single-pass gradient-traversal hole filling.
///
/// A non-boundary voxel with `d <= d_max` is marched `steps` voxels along
/// `+g` and `-g`. If at least half of the voxels visited (excluding itself)
/// are boundary, it becomes boundary. Reads the input flags only.
pub fn fill_holes(
    boundary: &BoundaryGrid,
    udf: &UdfGrid,
    steps: usize,
    d_max: f64,
) -> Result<BoundaryGrid, CellsError> {
    let geom = *boundary.geometry();
    if udf.resolution() != geom.resolution {
        return Err(CellsError::ResolutionMismatch(
            geom.resolution,
            udf.resolution(),
        ));
    }
    let b = boundary.values();
    let u = udf.values();
    let values = (0..geom.len())
        .into_par_iter()
        .map(|i| {
            if is_flagged(b[i]) || u[i].d as f64 > d_max {
                return b[i];
            }
            let g = u[i].gradient();
            if g.norm() < 1e-6 {
                return b[i];
            }
            let x = geom.world_of_index(i);
            let (mut hits, mut total) = (0usize, 0usize);
            for sign in [1.0, -1.0] {
                for k in 1..=steps {
                    let p = x + g * (sign * k as f64 * geom.spacing);
                    let Some(c) = geom.voxel_containing(&p) else {
                        break;
                    };
                    let j = geom.index_of(c);
                    if j == i {
                        continue;
                    }
                    total += 1;
                    hits += usize::from(is_flagged(b[j]));
                }
            }
            if total > 0 && 2 * hits >= total {
                1.0
            } else {
                b[i]
            }
        })
        .collect();
    Ok(VoxelGrid::from_values(geom, values).expect("sized by geometry"))
}

/// 6-connected flood fill over non-boundary voxels, seeded in ascending voxel
/// index. Components smaller than `min_cell_voxels` fall back to [`NONE`].
/// The returned cells carry adjacency from [`cell_adjacency`].
pub fn grow_regions(
    boundary: &BoundaryGrid,
    min_cell_voxels: usize,
) -> Result<VoronoiCells, CellsError> {
    let geom = *boundary.geometry();
    let open: Vec<bool> = boundary.values().iter().map(|&p| !is_flagged(p)).collect();
    let mut cell_of = vec![NONE; geom.len()];
    let mut voxels: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut any_open = false;
    for seed in 0..geom.len() {
        if !open[seed] || cell_of[seed] != NONE {
            continue;
        }
        any_open = true;
        let id = voxels.len() as u32;
        let mut members = vec![seed];
        cell_of[seed] = id;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            for j in face_neighbor_indices(&geom, i) {
                if open[j] && cell_of[j] == NONE {
                    cell_of[j] = id;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        if members.len() < min_cell_voxels {
            // Mark as visited but unowned: a sentinel distinct from NONE
            // keeps later seeds from re-entering the fragment.
            for &m in &members {
                cell_of[m] = NONE - 1;
            }
        } else {
            members.sort_unstable();
            voxels.push(members);
        }
    }
    if !any_open {
        return Err(CellsError::NoCells);
    }
    for c in cell_of.iter_mut() {
        if *c == NONE - 1 {
            *c = NONE;
        }
    }
    let n = voxels.len();
    let mut cells = VoronoiCells {
        cell_of: VoxelGrid::from_values(geom, cell_of).expect("sized by geometry"),
        n_cells: n,
        adjacency: BoolMatrix::new(n, n),
        voxels,
    };
    cells.adjacency = cell_adjacency(&cells, boundary);
    Ok(cells)
}

fn ball_offsets(radius: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -radius..=radius {
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx * dx + dy * dy + dz * dz <= radius * radius {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Cells are adjacent when they touch directly or both occur within the
/// radius-2 ball around some voxel that belongs to no cell.
pub fn cell_adjacency(cells: &VoronoiCells, _boundary: &BoundaryGrid) -> BoolMatrix {
    let geom = *cells.geometry();
    let n = cells.n_cells;
    let ids = cells.cell_of.values();
    let offsets = ball_offsets(2);
    let pairs: BTreeSet<(u32, u32)> = (0..geom.len())
        .into_par_iter()
        .fold(BTreeSet::new, |mut acc, i| {
            let own = ids[i];
            if own != NONE {
                for j in face_neighbor_indices(&geom, i) {
                    let other = ids[j];
                    if other != NONE && other != own {
                        acc.insert((own.min(other), own.max(other)));
                    }
                }
                return acc;
            }
            let c = geom.coord_of(i);
            let mut near: BTreeSet<u32> = BTreeSet::new();
            for o in &offsets {
                let (x, y, z) = (c.x as i64 + o[0], c.y as i64 + o[1], c.z as i64 + o[2]);
                if geom.contains(x, y, z) {
                    let id = ids[geom.index_of(GridCoord::new(x as usize, y as usize, z as usize))];
                    if id != NONE {
                        near.insert(id);
                    }
                }
            }
            let near: Vec<u32> = near.into_iter().collect();
            for (k, &a) in near.iter().enumerate() {
                for &b in &near[k + 1..] {
                    acc.insert((a, b));
                }
            }
            acc
        })
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let mut m = BoolMatrix::new(n, n);
    for (a, b) in pairs {
        m.set_symmetric(a as usize, b as usize);
    }
    m
}

/// Points feeding each cell's fit.
///
/// Each cell voxel with `d <= 2 * spacing` contributes its foot point
/// `x - d * g` on the surface. With `input_points` the foot point is
/// snapped to the nearest input point, so a cell gets the samples that are
/// nearest to its voxels (in ascending input order); without, the foot
/// points themselves are used with exact duplicates dropped.
pub fn assign_points(
    cells: &VoronoiCells,
    udf: &UdfGrid,
    input_points: Option<&[Vec3]>,
) -> Result<CellPoints, CellsError> {
    let geom = *cells.geometry();
    if udf.resolution() != geom.resolution {
        return Err(CellsError::ResolutionMismatch(
            geom.resolution,
            udf.resolution(),
        ));
    }
    let h = geom.spacing;
    let u = udf.values();
    let feet = |vox: &Vec<usize>| -> Vec<Vec3> {
        vox.iter()
            .filter(|&&i| u[i].d as f64 <= 2.0 * h)
            .map(|&i| geom.world_of_index(i) - u[i].gradient() * u[i].d as f64)
            .collect()
    };
    let (points, source) = match input_points {
        Some(pts) => {
            let tree = KdTree::from_vecs(pts);
            let out = cells
                .voxels
                .par_iter()
                .map(|vox| {
                    let ids: BTreeSet<usize> = feet(vox)
                        .iter()
                        .filter_map(|f| tree.nearest(&[f.x, f.y, f.z]).map(|(j, _)| j))
                        .collect();
                    ids.into_iter().map(|j| pts[j]).collect()
                })
                .collect();
            (out, PointSource::InputPoint)
        }
        None => {
            let out: Vec<Vec<Vec3>> = cells
                .voxels
                .par_iter()
                .map(|vox| {
                    let mut seen = HashSet::new();
                    feet(vox)
                        .into_iter()
                        .filter(|p| seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]))
                        .collect()
                })
                .collect();
            (out, PointSource::ProjectedVoxel)
        }
    };
    let limit = 3.0 * geom.spacing;
    let degenerate = points
        .iter()
        .map(|p: &Vec<Vec3>| p.len() < MIN_CELL_POINTS || bbox_diagonal(p) < limit)
        .collect();
    Ok(CellPoints {
        points,
        source,
        degenerate,
    })
}

/// Fraction of voxels owned by a cell in both labelings on which the
/// labelings agree, after mapping each `found` cell to the `reference` cell
/// it overlaps most.
pub fn label_agreement(found: &VoronoiCells, reference: &VoronoiCells) -> f64 {
    let a = found.cell_of.values();
    let b = reference.cell_of.values();
    let mut overlap: Vec<std::collections::BTreeMap<u32, usize>> =
        vec![Default::default(); found.n_cells];
    for (x, y) in a.iter().zip(b) {
        if *x != NONE && *y != NONE {
            *overlap[*x as usize].entry(*y).or_default() += 1;
        }
    }
    let (mut agree, mut total) = (0usize, 0usize);
    for m in &overlap {
        total += m.values().sum::<usize>();
        // Largest overlap; ties go to the lowest reference id.
        agree += m
            .iter()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
            .map_or(0, |(_, &c)| c);
    }
    if total == 0 {
        return 1.0;
    }
    agree as f64 / total as f64
}
