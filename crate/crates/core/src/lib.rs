//! 3D Voronoi and power diagram construction for large weighted point sets.
//!
//! Each cell is built independently by clipping the global bounding box
//! against bisecting planes of candidate neighbors. Candidates come from a
//! best-first traversal of a BVH whose nodes carry the maximum weight of
//! their subtree, and a directional bound derived from the evolving cell's
//! AABB corners culls whole volumes that provably cannot touch the cell.
//!
//! The crate ships a brute-force reference ([`oracle`]), synthetic dataset
//! generators ([`datasets`]), and binary file formats ([`io`]). Builds run
//! in `f64` or `f32` end to end; with the default `parallel` feature, cells
//! are distributed across threads with bit-identical output for any worker
//! count.

pub mod builder;
pub mod bvh;
pub mod cell;
pub mod datasets;
pub mod geom;
pub mod io;
pub mod oracle;
pub mod real;

pub use builder::{
    build_diagram, build_diagram_with_deadline, empty_ratio, global_box, BuildConfig, BuildError,
    PowerDiagram,
};
pub use bvh::{best_first_clip, knn_warm_start, PowerBvh, TraversalOrder, TraversalStats};
pub use cell::{ClipOutcome, ConvexCell, CullingMode};
pub use geom::{
    bisector, bisector_distance, power_distance, Aabb, HalfSpace, PlaneSource, Tolerances, Vec3,
    WeightedSite,
};
pub use oracle::{brute_force_cell, brute_force_diagram, diff, DiagramDiff};
pub use real::{PrecisionMode, Real};
