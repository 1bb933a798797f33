//! Ground-truth Voronoi boundaries and cells from nearest-primitive labels.
//!
//! Two 6-adjacent voxels with different labels both become boundary voxels,
//! so label interfaces turn into two-voxel-thick boundary sheets.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::brep::BoolMatrix;
use crate::cells::VoronoiCells;
use crate::grid::{face_neighbor_indices, VoxelGrid};

/// Per-voxel index of the nearest primitive.
pub type LabelGrid = VoxelGrid<u32>;

/// Per-voxel boundary probability in `[0, 1]`; flagged when `p >= 0.5`.
pub type BoundaryGrid = VoxelGrid<f32>;

#[inline]
pub fn is_flagged(p: f32) -> bool {
    p >= 0.5
}

/// Binary flags of a probability grid.
pub fn flags(boundary: &BoundaryGrid) -> Vec<bool> {
    boundary.values().iter().map(|&p| is_flagged(p)).collect()
}

pub fn boundary_from_labels(labels: &LabelGrid) -> BoundaryGrid {
    let geom = *labels.geometry();
    let v = labels.values();
    let values = (0..geom.len())
        .into_par_iter()
        .map(|i| {
            let differs = face_neighbor_indices(&geom, i).any(|j| v[j] != v[i]);
            if differs {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    VoxelGrid::from_values(geom, values).expect("sized by geometry")
}

/// One cell per distinct label; adjacency from 6-connected label contacts.
/// Cell ids follow ascending label value.
pub fn cells_from_labels(labels: &LabelGrid) -> VoronoiCells {
    let geom = *labels.geometry();
    let v = labels.values();
    let present: BTreeSet<u32> = v.iter().copied().collect();
    let max_label = present.iter().next_back().copied().unwrap_or(0) as usize;
    let mut dense = vec![u32::MAX; max_label + 1];
    for (id, &l) in present.iter().enumerate() {
        dense[l as usize] = id as u32;
    }
    let n = present.len();
    let cell_of: Vec<u32> = v.iter().map(|&l| dense[l as usize]).collect();
    let mut voxels = vec![Vec::new(); n];
    let mut adjacency = BoolMatrix::new(n, n);
    for i in 0..geom.len() {
        let a = cell_of[i];
        voxels[a as usize].push(i);
        for j in face_neighbor_indices(&geom, i) {
            let b = cell_of[j];
            if a != b {
                adjacency.set_symmetric(a as usize, b as usize);
            }
        }
    }
    VoronoiCells {
        cell_of: VoxelGrid::from_values(geom, cell_of).expect("sized by geometry"),
        n_cells: n,
        adjacency,
        voxels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use proptest::prelude::*;

    fn half_space(r: usize) -> LabelGrid {
        let g = GridGeometry::unit(r);
        VoxelGrid::from_fn(g, |i| u32::from(g.coord_of(i).z >= r / 2))
    }

    #[test]
    fn uniform_labels_have_no_boundary() {
        let l = VoxelGrid::filled(GridGeometry::unit(8), 3u32);
        assert!(boundary_from_labels(&l).values().iter().all(|&p| p == 0.0));
        let cells = cells_from_labels(&l);
        assert_eq!(cells.n_cells, 1);
        assert_eq!(cells.adjacency.count_ones(), 0);
    }

    #[test]
    fn half_space_boundary_is_two_layers() {
        let l = half_space(64);
        let b = boundary_from_labels(&l);
        let g = *b.geometry();
        let mut count = 0;
        for (i, &p) in b.values().iter().enumerate() {
            let z = g.coord_of(i).z;
            assert_eq!(p == 1.0, z == 31 || z == 32);
            count += usize::from(p == 1.0);
        }
        assert_eq!(count, 2 * 64 * 64);
        let cells = cells_from_labels(&l);
        assert_eq!(cells.n_cells, 2);
        assert!(cells.adjacency.get(0, 1) && cells.adjacency.get(1, 0));
    }

    #[test]
    fn cell_voxel_counts_partition_grid() {
        let g = GridGeometry::unit(10);
        let l = VoxelGrid::from_fn(g, |i| ((i * 7919) % 5) as u32 * 2);
        let cells = cells_from_labels(&l);
        assert_eq!(cells.n_cells, 5);
        assert_eq!(cells.voxels.iter().map(Vec::len).sum::<usize>(), g.len());
    }

    proptest! {
        #[test]
        fn boundary_invariant_under_label_swap(
            labels in prop::collection::vec(0u32..4, 216),
            a in 0u32..4, b in 0u32..4,
        ) {
            let g = GridGeometry::unit(6);
            let l = VoxelGrid::from_values(g, labels.clone()).unwrap();
            let swapped = VoxelGrid::from_values(
                g,
                labels.iter().map(|&x| if x == a { b } else if x == b { a } else { x }).collect(),
            )
            .unwrap();
            prop_assert_eq!(boundary_from_labels(&l), boundary_from_labels(&swapped));
        }
    }
}
