//! Fruchterman-Reingold graph layout with interchangeable repulsive-force
//! backends.
//!
//! The repulsive phase only needs, for every vertex, the other vertices
//! within radius `2k`. Five backends answer that query: an all-pairs loop
//! with and without cutoff, a uniform grid, a linear BVH gather, and a
//! reversed query that puts a disc on every vertex and probes each vertex
//! position against the disc BVH. With deterministic accumulation all
//! cutoff backends produce bitwise-identical layouts.

pub mod backend;
pub mod bench;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod layout;
pub mod svg;

pub use backend::{make_backend, BackendId, Exec, PhaseTimes, RepulsiveBackend};
pub use engine::{run_layout, run_layout_from, EngineConfig, IterationTiming, TimingReport};
pub use error::{LayoutError, Result};
pub use geometry::{Aabb, Vec2};
pub use graph::{gen_binary_tree, gen_k5_cluster_graph, graph_stats, parse_edge_list, Graph, GraphStats};
pub use layout::{init_layout, ForceParams, Layout};
