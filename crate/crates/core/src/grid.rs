//! Dense cubic voxel grids.
//!
//! Every stage of the pipeline works on an `r x r x r` grid whose voxels are
//! addressed in x-fastest order (`idx = x + r * (y + r * z)`). Sample points
//! are voxel centers.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl GridCoord {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Six,
    TwentySix,
}

/// Placement of a grid in world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub resolution: usize,
    pub origin: [f64; 3],
    pub spacing: f64,
}

impl GridGeometry {
    /// Grid covering the unit box `[0,1]^3` with `r` voxels per axis.
    pub fn unit(resolution: usize) -> Self {
        assert!(resolution > 0, "grid resolution must be positive");
        Self {
            resolution,
            origin: [0.0; 3],
            spacing: 1.0 / resolution as f64,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution * self.resolution * self.resolution
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    #[inline]
    pub fn index_of(&self, c: GridCoord) -> usize {
        let r = self.resolution;
        c.x + r * (c.y + r * c.z)
    }

    #[inline]
    pub fn coord_of(&self, idx: usize) -> GridCoord {
        let r = self.resolution;
        GridCoord::new(idx % r, (idx / r) % r, idx / (r * r))
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        let r = self.resolution as i64;
        (0..r).contains(&x) && (0..r).contains(&y) && (0..r).contains(&z)
    }

    /// Voxel center in world coordinates.
    #[inline]
    pub fn world_of(&self, c: GridCoord) -> Vec3 {
        let h = self.spacing;
        Vec3::new(
            self.origin[0] + (c.x as f64 + 0.5) * h,
            self.origin[1] + (c.y as f64 + 0.5) * h,
            self.origin[2] + (c.z as f64 + 0.5) * h,
        )
    }

    #[inline]
    pub fn world_of_index(&self, idx: usize) -> Vec3 {
        self.world_of(self.coord_of(idx))
    }

    /// Continuous voxel coordinates of `p`: voxel centers sit at integers.
    #[inline]
    pub fn to_voxel_space(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            (p.x - self.origin[0]) / self.spacing - 0.5,
            (p.y - self.origin[1]) / self.spacing - 0.5,
            (p.z - self.origin[2]) / self.spacing - 0.5,
        )
    }

    /// The voxel whose cell contains `p`, if any.
    pub fn voxel_containing(&self, p: &Vec3) -> Option<GridCoord> {
        let q = (p - Vec3::from(self.origin)) / self.spacing;
        let (x, y, z) = (q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64);
        self.contains(x, y, z)
            .then(|| GridCoord::new(x as usize, y as usize, z as usize))
    }

    /// Nearest voxel center to `p`, clamped into the grid.
    pub fn nearest_voxel(&self, p: &Vec3) -> GridCoord {
        let q = self.to_voxel_space(p);
        let r = self.resolution as i64 - 1;
        let c = |v: f64| (v.round() as i64).clamp(0, r) as usize;
        GridCoord::new(c(q.x), c(q.y), c(q.z))
    }

    /// Number of voxels between `c` and the nearest grid face.
    pub fn face_margin(&self, c: GridCoord) -> usize {
        let hi = self.resolution - 1;
        [c.x, c.y, c.z, hi - c.x, hi - c.y, hi - c.z]
            .into_iter()
            .min()
            .unwrap_or(0)
    }
}

const FACE_OFFSETS: [[i64; 3]; 6] = [
    [0, 0, -1],
    [0, -1, 0],
    [-1, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
];

/// In-bounds neighbors of `c`, sorted by linear index.
pub fn voxel_neighbors(c: GridCoord, connectivity: Connectivity, r: usize) -> Vec<GridCoord> {
    let geom = GridGeometry::unit(r);
    let mut out = Vec::with_capacity(26);
    let mut push = |dx: i64, dy: i64, dz: i64| {
        let (x, y, z) = (c.x as i64 + dx, c.y as i64 + dy, c.z as i64 + dz);
        if geom.contains(x, y, z) {
            out.push(GridCoord::new(x as usize, y as usize, z as usize));
        }
    };
    match connectivity {
        Connectivity::Six => {
            for [dx, dy, dz] in FACE_OFFSETS {
                push(dx, dy, dz);
            }
        }
        Connectivity::TwentySix => {
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if dx != 0 || dy != 0 || dz != 0 {
                            push(dx, dy, dz);
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|n| geom.index_of(*n));
    out
}

/// Linear indices of the in-bounds 6-neighbors of voxel `idx`.
#[inline]
pub(crate) fn face_neighbor_indices(
    geom: &GridGeometry,
    idx: usize,
) -> impl Iterator<Item = usize> {
    let r = geom.resolution;
    let c = geom.coord_of(idx);
    let rr = r * r;
    let mut buf = [usize::MAX; 6];
    if c.z > 0 {
        buf[0] = idx - rr;
    }
    if c.y > 0 {
        buf[1] = idx - r;
    }
    if c.x > 0 {
        buf[2] = idx - 1;
    }
    if c.x + 1 < r {
        buf[3] = idx + 1;
    }
    if c.y + 1 < r {
        buf[4] = idx + r;
    }
    if c.z + 1 < r {
        buf[5] = idx + rr;
    }
    buf.into_iter().filter(|&i| i != usize::MAX)
}

/// Dense grid of payloads in x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    geometry: GridGeometry,
    values: Vec<T>,
}

#[derive(Debug, thiserror::Error)]
#[error("grid payload has {actual} values, expected {expected}")]
pub struct GridSizeError {
    pub expected: usize,
    pub actual: usize,
}

impl<T> VoxelGrid<T> {
    pub fn from_values(geometry: GridGeometry, values: Vec<T>) -> Result<Self, GridSizeError> {
        if values.len() != geometry.len() {
            return Err(GridSizeError {
                expected: geometry.len(),
                actual: values.len(),
            });
        }
        Ok(Self { geometry, values })
    }

    pub fn from_fn(geometry: GridGeometry, f: impl FnMut(usize) -> T) -> Self {
        let values = (0..geometry.len()).map(f).collect();
        Self { geometry, values }
    }

    #[inline]
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.geometry.resolution
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, c: GridCoord) -> &T {
        &self.values[self.geometry.index_of(c)]
    }

    #[inline]
    pub fn set(&mut self, c: GridCoord, v: T) {
        let i = self.geometry.index_of(c);
        self.values[i] = v;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> VoxelGrid<U> {
        VoxelGrid {
            geometry: self.geometry,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> VoxelGrid<T> {
    pub fn filled(geometry: GridGeometry, value: T) -> Self {
        Self {
            values: vec![value; geometry.len()],
            geometry,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neighbor_counts() {
        assert_eq!(
            voxel_neighbors(GridCoord::new(0, 0, 0), Connectivity::Six, 4).len(),
            3
        );
        assert_eq!(
            voxel_neighbors(GridCoord::new(1, 1, 1), Connectivity::Six, 4).len(),
            6
        );
        assert_eq!(
            voxel_neighbors(GridCoord::new(1, 1, 1), Connectivity::TwentySix, 4).len(),
            26
        );
        assert_eq!(
            voxel_neighbors(GridCoord::new(3, 3, 3), Connectivity::TwentySix, 4).len(),
            7
        );
    }

    #[test]
    fn neighbors_sorted_by_index() {
        let g = GridGeometry::unit(5);
        let n = voxel_neighbors(GridCoord::new(2, 1, 3), Connectivity::TwentySix, 5);
        let idx: Vec<_> = n.iter().map(|c| g.index_of(*c)).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn voxel_centers() {
        let g = GridGeometry::unit(64);
        let h = 1.0 / 128.0;
        assert_eq!(g.world_of(GridCoord::new(0, 0, 0)), Vec3::new(h, h, h));
        assert_eq!(
            g.world_of(GridCoord::new(63, 0, 0)),
            Vec3::new(127.0 * h, h, h)
        );
        let c = g.world_of(GridCoord::new(31, 31, 31));
        assert_eq!(c, Vec3::new(63.0 * h, 63.0 * h, 63.0 * h));
    }

    #[test]
    fn face_neighbor_indices_match_coordinate_version() {
        let g = GridGeometry::unit(4);
        for idx in 0..g.len() {
            let mut a: Vec<usize> = face_neighbor_indices(&g, idx).collect();
            a.sort_unstable();
            let b: Vec<usize> = voxel_neighbors(g.coord_of(idx), Connectivity::Six, 4)
                .into_iter()
                .map(|c| g.index_of(c))
                .collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn from_values_checks_length() {
        assert!(VoxelGrid::from_values(GridGeometry::unit(2), vec![0u8; 7]).is_err());
        assert!(VoxelGrid::from_values(GridGeometry::unit(2), vec![0u8; 8]).is_ok());
    }

    proptest! {
        #[test]
        fn index_round_trip(r in 1usize..40, x in 0usize..40, y in 0usize..40, z in 0usize..40) {
            let c = GridCoord::new(x % r, y % r, z % r);
            let g = GridGeometry::unit(r);
            prop_assert_eq!(g.coord_of(g.index_of(c)), c);
        }

        #[test]
        fn world_of_is_injective(r in 2usize..64, a in 0usize..100_000, b in 0usize..100_000) {
            let g = GridGeometry::unit(r);
            let (ia, ib) = (a % g.len(), b % g.len());
            prop_assume!(ia != ib);
            let d = g.world_of_index(ia) - g.world_of_index(ib);
            let max_axis = d.x.abs().max(d.y.abs()).max(d.z.abs());
            prop_assert!(max_axis >= g.spacing * (1.0 - 1e-9));
        }

        #[test]
        fn containing_voxel_of_center_is_itself(r in 1usize..50, i in 0usize..125_000) {
            let g = GridGeometry::unit(r);
            let idx = i % g.len();
            let c = g.coord_of(idx);
            prop_assert_eq!(g.voxel_containing(&g.world_of(c)), Some(c));
            prop_assert_eq!(g.nearest_voxel(&g.world_of(c)), c);
        }
    }
}
