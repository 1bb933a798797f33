//! Primitive-based B-Rep reconstruction from unsigned distance fields.
//!
//! The pipeline voxelizes an unsigned distance field, finds Voronoi
//! boundaries between primitives, grows cells, fits one primitive per cell
//! and recovers curves, vertices and their adjacency.

pub mod brep;
pub mod cells;
pub mod cli;
pub mod config;
pub mod detect;
pub mod fitting;
pub mod geom;
pub mod grid;
pub mod gt_voronoi;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod pipeline;
pub mod primitives;
pub mod scenes;
pub mod topology;
pub mod udf;
