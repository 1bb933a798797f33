//! B-Rep container: vertices, curves and surfaces plus the boolean adjacency
//! matrices FF, FE, EE, EV and FV.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::primitives::{CurvePrimitive, Extent, SurfacePrimitive};

/// Dense boolean matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BoolMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_pairs(rows: usize, cols: usize, pairs: &[[usize; 2]]) -> Option<Self> {
        let mut m = Self::new(rows, cols);
        for &[i, j] in pairs {
            if i >= rows || j >= cols {
                return None;
            }
            m.set(i, j, true);
        }
        Some(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.cols + j] = v;
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize) {
        self.set(i, j, true);
        self.set(j, i, true);
    }

    /// `(row, col)` of every true entry in row-major order.
    pub fn ones(&self) -> Vec<[usize; 2]> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| [k / self.cols, k % self.cols])
            .collect()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn row_degree(&self, i: usize) -> usize {
        (0..self.cols).filter(|&j| self.get(i, j)).count()
    }

    pub fn col_degree(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, j)).count()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_empty_diagonal(&self) -> bool {
        (0..self.rows.min(self.cols)).all(|i| !self.get(i, i))
    }

    /// Copy with rows and columns reindexed: entry `(i, j)` moves to
    /// `(row_map[i], col_map[j])`.
    pub fn permuted(&self, row_map: &[usize], col_map: &[usize]) -> Self {
        let mut m = Self::new(self.rows, self.cols);
        for [i, j] in self.ones() {
            m.set(row_map[i], col_map[j], true);
        }
        m
    }
}

/// A surface with the parameter box it was observed over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    #[serde(flatten)]
    pub geometry: SurfacePrimitive,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(flatten)]
    pub geometry: CurvePrimitive,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
}

impl Face {
    pub fn new(geometry: SurfacePrimitive) -> Self {
        Self {
            geometry,
            extent: None,
        }
    }

    pub fn bounded(geometry: SurfacePrimitive, points: &[Vec3]) -> Self {
        let extent = geometry.extent_of(points);
        Self { geometry, extent }
    }
}

impl Edge {
    pub fn new(geometry: CurvePrimitive) -> Self {
        Self {
            geometry,
            extent: None,
        }
    }

    pub fn bounded(geometry: CurvePrimitive, points: &[Vec3]) -> Self {
        let extent = geometry.extent_of(points);
        Self { geometry, extent }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BRepModel {
    pub vertices: Vec<Vec3>,
    pub curves: Vec<Edge>,
    pub surfaces: Vec<Face>,
    pub ff: BoolMatrix,
    pub fe: BoolMatrix,
    pub ee: BoolMatrix,
    pub ev: BoolMatrix,
    pub fv: BoolMatrix,
}

impl BRepModel {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.vertices.len(), self.curves.len(), self.surfaces.len())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.curves.len() as i64 + self.surfaces.len() as i64
    }
}
