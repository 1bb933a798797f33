//! Voxelized unsigned distance fields.
//!
//! Distances are exact nearest-neighbor distances to the input samples,
//! evaluated at voxel centers. Gradients are stored analytically as the unit
//! vector from the nearest sample to the voxel center.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::geom::Vec3;
use crate::grid::{GridGeometry, VoxelGrid};
use crate::gt_voronoi::LabelGrid;
use crate::kdtree::KdTree;

/// Per-voxel record `(d, gx, gy, gz)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UdfSample {
    pub d: f32,
    pub g: [f32; 3],
}

impl UdfSample {
    #[inline]
    pub fn gradient(&self) -> Vec3 {
        Vec3::new(self.g[0] as f64, self.g[1] as f64, self.g[2] as f64)
    }
}

pub type UdfGrid = VoxelGrid<UdfSample>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum UdfError {
    #[error("empty input point set")]
    EmptyInput,
    #[error("grid resolution {0} too small (need at least 3)")]
    GridTooSmall(usize),
}

/// Uniform scale and translation mapping a shape into the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub translation: [f64; 3],
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        scale: 1.0,
        translation: [0.0; 3],
    };

    /// Centers the bounding box of `points` in `[0,1]^3`, scaling its largest
    /// side to `fill` (aspect ratio preserved).
    pub fn fit(points: &[Vec3], fill: f64) -> Self {
        if points.is_empty() {
            return Self::IDENTITY;
        }
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let size = (hi - lo).max();
        let scale = if size > 0.0 { fill / size } else { 1.0 };
        let center = (lo + hi) * 0.5;
        let t = Vec3::repeat(0.5) - center * scale;
        Self {
            scale,
            translation: [t.x, t.y, t.z],
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        p * self.scale + Vec3::from(self.translation)
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        (p - Vec3::from(self.translation)) / self.scale
    }
}

fn to_arrays(points: &[Vec3]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

#[inline]
fn sample_from(x: &Vec3, nn: &[f64; 3], d2: f64) -> UdfSample {
    let d = d2.sqrt();
    let g = if d > 0.0 {
        [
            ((x.x - nn[0]) / d) as f32,
            ((x.y - nn[1]) / d) as f32,
            ((x.z - nn[2]) / d) as f32,
        ]
    } else {
        [0.0; 3]
    };
    UdfSample { d: d as f32, g }
}

/// Exact UDF of a point set sampled at voxel centers of `geometry`.
pub fn udf_on_grid(points: &[Vec3], geometry: GridGeometry) -> Result<UdfGrid, UdfError> {
    if points.is_empty() {
        return Err(UdfError::EmptyInput);
    }
    let tree = KdTree::new(to_arrays(points));
    let values: Vec<UdfSample> = (0..geometry.len())
        .into_par_iter()
        .map(|i| {
            let x = geometry.world_of_index(i);
            let (j, d2) = tree.nearest(&[x.x, x.y, x.z]).expect("non-empty tree");
            sample_from(&x, &tree.point(j), d2)
        })
        .collect();
    Ok(VoxelGrid::from_values(geometry, values).expect("sized by geometry"))
}

/// UDF of `points` on the unit-box grid of resolution `cfg.resolution`.
pub fn udf_from_points(points: &[Vec3], cfg: &Config) -> Result<UdfGrid, UdfError> {
    udf_on_grid(points, GridGeometry::unit(cfg.resolution))
}

/// UDF of the union of all sample sets plus the index of the set owning each
/// voxel's nearest sample. Ties go to the lowest set index, then the lowest
/// sample index.
pub fn udf_from_primitive_samples(
    sample_sets: &[Vec<Vec3>],
    cfg: &Config,
) -> Result<(UdfGrid, LabelGrid), UdfError> {
    udf_from_primitive_samples_on(sample_sets, GridGeometry::unit(cfg.resolution))
}

pub fn udf_from_primitive_samples_on(
    sample_sets: &[Vec<Vec3>],
    geometry: GridGeometry,
) -> Result<(UdfGrid, LabelGrid), UdfError> {
    if sample_sets.is_empty() || sample_sets.iter().any(|s| s.is_empty()) {
        return Err(UdfError::EmptyInput);
    }
    let mut owner = Vec::new();
    let mut all = Vec::new();
    for (label, set) in sample_sets.iter().enumerate() {
        owner.extend(std::iter::repeat_n(label as u32, set.len()));
        all.extend(to_arrays(set));
    }
    let tree = KdTree::new(all);
    let (samples, labels): (Vec<UdfSample>, Vec<u32>) = (0..geometry.len())
        .into_par_iter()
        .map(|i| {
            let x = geometry.world_of_index(i);
            let (j, d2) = tree.nearest(&[x.x, x.y, x.z]).expect("non-empty tree");
            (sample_from(&x, &tree.point(j), d2), owner[j])
        })
        .unzip();
    Ok((
        VoxelGrid::from_values(geometry, samples).expect("sized by geometry"),
        VoxelGrid::from_values(geometry, labels).expect("sized by geometry"),
    ))
}

/// Central differences in the interior, one-sided differences on grid faces.
pub fn finite_gradient(field: &VoxelGrid<f64>) -> Result<VoxelGrid<Vec3>, UdfError> {
    let geom = *field.geometry();
    let r = geom.resolution;
    if r < 3 {
        return Err(UdfError::GridTooSmall(r));
    }
    let h = geom.spacing;
    let v = field.values();
    let strides = [1, r, r * r];
    let values = (0..geom.len())
        .into_par_iter()
        .map(|i| {
            let c = geom.coord_of(i);
            let pos = [c.x, c.y, c.z];
            let mut g = Vec3::zeros();
            for axis in 0..3 {
                let s = strides[axis];
                g[axis] = if pos[axis] == 0 {
                    (v[i + s] - v[i]) / h
                } else if pos[axis] == r - 1 {
                    (v[i] - v[i - s]) / h
                } else {
                    (v[i + s] - v[i - s]) / (2.0 * h)
                };
            }
            g
        })
        .collect();
    Ok(VoxelGrid::from_values(geom, values).expect("sized by geometry"))
}

/// The scalar distance channel as `f64`.
pub fn distance_channel(udf: &UdfGrid) -> VoxelGrid<f64> {
    udf.map(|s| s.d as f64)
}
