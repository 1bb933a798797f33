//! Analytic Voronoi-boundary detection on a UDF grid, ingestion of external
//! probability grids, and overlapping-patch tiling.
//!
//! A Voronoi boundary is where the UDF's second derivative jumps. The
//! detector evaluates five-point third differences along a fan of tangent
//! directions plus the gradient and thresholds the largest magnitude.
//!
//! Two refinements over a fixed threshold: the threshold shrinks as
//! `h / (2 d)` away from the surface, since a curvature jump of `1 / d`
//! produces a third difference of order `1 / (d h)`; and stencils that pass
//! within `0.75 h` of the surface are skipped, so the surface's own kink is
//! not reported as a boundary.

use rayon::prelude::*;

use crate::config::Config;
use crate::geom::{orthonormal_basis, Vec3};
use crate::grid::{GridCoord, GridGeometry, VoxelGrid};
use crate::gt_voronoi::BoundaryGrid;
use crate::udf::UdfGrid;

/// Stencil reach in voxels.
pub const STENCIL_MARGIN: usize = 2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectError {
    #[error("voxel {0:?} is within {STENCIL_MARGIN} voxels of a grid face")]
    OutOfStencil(GridCoord),
    #[error("grid resolution {0} below the detector minimum of 8")]
    GridTooSmall(usize),
    #[error("expected resolution {expected}, found {found}")]
    ResolutionMismatch { expected: usize, found: usize },
    #[error("probability {value} at voxel {index} outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f32 },
    #[error("invalid detector parameters: {0}")]
    Params(String),
    #[error("invalid patch layout: {0}")]
    Patch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Third-difference threshold at distances up to half a voxel.
    pub tau: f64,
    pub n_dirs: usize,
    pub d_max: f64,
    /// Scale the threshold by `h / (2 d)` beyond half a voxel from the
    /// surface, so curvature jumps at distance `d` stay detectable.
    pub distance_scaled: bool,
    /// Stencils with a sample closer than this many voxels to the surface
    /// are skipped, which keeps the surface's own kink out of the test.
    pub surface_clearance: f64,
}

impl DetectorParams {
    /// Defaults for grid spacing `h`.
    pub fn for_spacing(h: f64) -> Self {
        Self {
            tau: 0.5 / (h * h),
            n_dirs: 8,
            d_max: 0.3,
            distance_scaled: true,
            surface_clearance: 0.75,
        }
    }

    pub fn from_config(cfg: &Config) -> Self {
        Self {
            tau: cfg.tau(),
            n_dirs: cfg.detect_dirs,
            d_max: cfg.d_max,
            ..Self::for_spacing(cfg.spacing())
        }
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(DetectError::Params(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.n_dirs < 2 {
            return Err(DetectError::Params(format!(
                "n_dirs must be >= 2, got {}",
                self.n_dirs
            )));
        }
        if self.surface_clearance < 0.0 {
            return Err(DetectError::Params("surface_clearance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Trilinear interpolation of `d` at continuous voxel coordinates `q`.
fn trilinear(udf: &UdfGrid, q: &Vec3) -> f64 {
    let geom = udf.geometry();
    let hi = geom.resolution as f64 - 1.0;
    let v = udf.values();
    let base = |c: f64| c.clamp(0.0, hi).floor().min(hi - 1.0).max(0.0);
    let (x0, y0, z0) = (base(q.x), base(q.y), base(q.z));
    let (fx, fy, fz) = (q.x - x0, q.y - y0, q.z - z0);
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let w = (if dx == 0 { 1.0 - fx } else { fx })
                    * (if dy == 0 { 1.0 - fy } else { fy })
                    * (if dz == 0 { 1.0 - fz } else { fz });
                if w == 0.0 {
                    continue;
                }
                let c = GridCoord::new(x0 as usize + dx, y0 as usize + dy, z0 as usize + dz);
                acc += w * v[geom.index_of(c)].d as f64;
            }
        }
    }
    acc
}

fn differences(f: [f64; 5], h: f64) -> (f64, f64) {
    let [m2, m1, c, p1, p2] = f;
    let f2 = (p1 - 2.0 * c + m1) / (h * h);
    let f3 = (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h);
    (f2, f3)
}

/// Second and third differences of `d` along unit `dir` at voxel `c`, with
/// step `h` in world units and trilinear interpolation off the lattice.
pub fn directional_derivatives(
    udf: &UdfGrid,
    c: GridCoord,
    dir: &Vec3,
    h: f64,
) -> Result<(f64, f64), DetectError> {
    if udf.geometry().face_margin(c) < STENCIL_MARGIN {
        return Err(DetectError::OutOfStencil(c));
    }
    Ok(differences(stencil_samples(udf, c, dir, h), h))
}

fn stencil_samples(udf: &UdfGrid, c: GridCoord, dir: &Vec3, h: f64) -> [f64; 5] {
    let step = dir * (h / udf.geometry().spacing);
    let center = Vec3::new(c.x as f64, c.y as f64, c.z as f64);
    let mut f = [0.0; 5];
    for (k, t) in (-2i32..=2).enumerate() {
        f[k] = if t == 0 {
            udf.get(c).d as f64
        } else {
            trilinear(udf, &(center + step * t as f64))
        };
    }
    f
}

/// Largest admissible `|f3|` at `c`, or `None` when every stencil was
/// skipped for surface clearance.
fn max_third_difference(udf: &UdfGrid, c: GridCoord, params: &DetectorParams) -> Option<f64> {
    let geom = udf.geometry();
    let h = geom.spacing;
    let clearance = params.surface_clearance * h;
    let mut best: Option<f64> = None;
    let mut consider = |f: [f64; 5], step: f64| {
        if f.iter().any(|&x| x < clearance) {
            return;
        }
        let (_, f3) = differences(f, step);
        best = Some(best.map_or(f3.abs(), |b: f64| b.max(f3.abs())));
    };
    let g = udf.get(c).gradient();
    let g = g / g.norm();
    let (t1, t2) = orthonormal_basis(&g);
    for k in 0..params.n_dirs {
        let a = std::f64::consts::PI * k as f64 / params.n_dirs as f64;
        let dir = t1 * a.cos() + t2 * a.sin();
        consider(stencil_samples(udf, c, &dir, h), h);
    }
    consider(stencil_samples(udf, c, &g, h), h);
    best
}

/// Probability at one voxel; `None` when the voxel cannot be evaluated
/// (stencil leaves the grid).
fn voxel_probability(udf: &UdfGrid, idx: usize, params: &DetectorParams) -> Option<f32> {
    let geom = udf.geometry();
    let c = geom.coord_of(idx);
    if geom.face_margin(c) < STENCIL_MARGIN {
        return None;
    }
    let s = udf.values()[idx];
    let d = s.d as f64;
    if d > params.d_max {
        return Some(0.0);
    }
    if s.gradient().norm() < 1e-6 {
        return Some(1.0);
    }
    let h = geom.spacing;
    let tau = if params.distance_scaled && d > 0.5 * h {
        params.tau * h / (2.0 * d)
    } else {
        params.tau
    };
    let m = max_third_difference(udf, c, params).unwrap_or(0.0);
    Some((m / tau).clamp(0.0, 1.0) as f32)
}

/// Per-voxel probabilities; voxels the stencil cannot reach are `None`.
pub fn detect_partial(
    udf: &UdfGrid,
    params: &DetectorParams,
) -> Result<VoxelGrid<Option<f32>>, DetectError> {
    params.validate()?;
    let geom = *udf.geometry();
    let values = (0..geom.len())
        .into_par_iter()
        .map(|i| voxel_probability(udf, i, params))
        .collect();
    Ok(VoxelGrid::from_values(geom, values).expect("sized by geometry"))
}

/// Whole-grid analytic detection. Voxels within two voxels of a grid face
/// get `p = 0`.
pub fn detect_analytic(
    udf: &UdfGrid,
    params: &DetectorParams,
) -> Result<BoundaryGrid, DetectError> {
    if udf.resolution() < 8 {
        return Err(DetectError::GridTooSmall(udf.resolution()));
    }
    Ok(detect_partial(udf, params)?.map(|p| p.unwrap_or(0.0)))
}

/// Validates an externally produced probability grid.
pub fn ingest_external(grid: BoundaryGrid, expected_r: usize) -> Result<BoundaryGrid, DetectError> {
    if grid.resolution() != expected_r {
        return Err(DetectError::ResolutionMismatch {
            expected: expected_r,
            found: grid.resolution(),
        });
    }
    if let Some((index, &value)) = grid
        .values()
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(DetectError::ValueOutOfRange { index, value });
    }
    Ok(grid)
}

/// Overlapping cubic patches of size `k` at stride `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSpec {
    pub stride: usize,
    pub size: usize,
    pub origins: Vec<[usize; 3]>,
}

impl PatchSpec {
    /// Origins at multiples of `stride` along each axis; the last origin is
    /// clamped so the patch ends at the grid face.
    pub fn new(resolution: usize, stride: usize, size: usize) -> Result<Self, DetectError> {
        if stride == 0 || size == 0 || stride > size {
            return Err(DetectError::Patch(format!("stride {stride}, size {size}")));
        }
        let size = size.min(resolution);
        let mut axis = Vec::new();
        let mut o = 0;
        loop {
            if o + size >= resolution {
                axis.push(resolution - size);
                break;
            }
            axis.push(o);
            o += stride;
        }
        axis.dedup();
        let mut origins = Vec::new();
        for &z in &axis {
            for &y in &axis {
                for &x in &axis {
                    origins.push([x, y, z]);
                }
            }
        }
        Ok(Self {
            stride,
            size,
            origins,
        })
    }
}

fn extract_patch(udf: &UdfGrid, origin: [usize; 3], size: usize) -> UdfGrid {
    let g = udf.geometry();
    let geom = GridGeometry {
        resolution: size,
        origin: [
            g.origin[0] + origin[0] as f64 * g.spacing,
            g.origin[1] + origin[1] as f64 * g.spacing,
            g.origin[2] + origin[2] as f64 * g.spacing,
        ],
        spacing: g.spacing,
    };
    VoxelGrid::from_fn(geom, |i| {
        let c = geom.coord_of(i);
        *udf.get(GridCoord::new(
            origin[0] + c.x,
            origin[1] + c.y,
            origin[2] + c.z,
        ))
    })
}

/// Runs `detector` on every patch and averages each voxel over the patches
/// that evaluated it (`Some`). Voxels no patch evaluated get `p = 0`.
pub fn tile_and_merge<F>(udf: &UdfGrid, spec: &PatchSpec, detector: F) -> BoundaryGrid
where
    F: Fn(&UdfGrid) -> VoxelGrid<Option<f32>> + Sync,
{
    let geom = *udf.geometry();
    let r = geom.resolution;
    let k = spec.size;
    let patches: Vec<([usize; 3], VoxelGrid<Option<f32>>)> = spec
        .origins
        .par_iter()
        .map(|&o| (o, detector(&extract_patch(udf, o, k))))
        .collect();
    let mut sum = vec![0.0f64; geom.len()];
    let mut count = vec![0u32; geom.len()];
    // Patches are folded in origin order so the floating-point sums do not
    // depend on scheduling.
    for (o, p) in &patches {
        for (li, v) in p.values().iter().enumerate() {
            if let Some(v) = v {
                let c = p.geometry().coord_of(li);
                let gi = (o[0] + c.x) + r * ((o[1] + c.y) + r * (o[2] + c.z));
                sum[gi] += *v as f64;
                count[gi] += 1;
            }
        }
    }
    let values = sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { (s / n as f64) as f32 })
        .collect();
    VoxelGrid::from_values(geom, values).expect("sized by geometry")
}

/// Tiled analytic detection with the default per-patch detector.
pub fn detect_tiled(
    udf: &UdfGrid,
    params: &DetectorParams,
    spec: &PatchSpec,
) -> Result<BoundaryGrid, DetectError> {
    params.validate()?;
    Ok(tile_and_merge(udf, spec, |patch| {
        detect_partial(patch, params).expect("validated params")
    }))
}

/// Precision and recall of `flags` against `reference`, each tolerant to a
/// one-voxel (26-neighborhood) offset, over voxels at least
/// [`STENCIL_MARGIN`] from the grid faces with `d <= d_max`.
pub fn dilated_precision_recall(
    flags: &[bool],
    reference: &[bool],
    udf: &UdfGrid,
    d_max: f64,
) -> (f64, f64) {
    let geom = *udf.geometry();
    let u = udf.values();
    let in_domain =
        |i: usize| geom.face_margin(geom.coord_of(i)) >= STENCIL_MARGIN && u[i].d as f64 <= d_max;
    let near = |set: &[bool], i: usize| {
        let c = geom.coord_of(i);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (x, y, z) = (c.x as i64 + dx, c.y as i64 + dy, c.z as i64 + dz);
                    if geom.contains(x, y, z)
                        && set[geom.index_of(GridCoord::new(x as usize, y as usize, z as usize))]
                    {
                        return true;
                    }
                }
            }
        }
        false
    };
    let (mut tp_p, mut n_p, mut tp_r, mut n_r) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..geom.len() {
        if !in_domain(i) {
            continue;
        }
        if flags[i] {
            n_p += 1;
            tp_p += usize::from(near(reference, i));
        }
        if reference[i] {
            n_r += 1;
            tp_r += usize::from(near(flags, i));
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    (ratio(tp_p, n_p), ratio(tp_r, n_r))
}
