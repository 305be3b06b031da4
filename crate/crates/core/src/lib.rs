//! Walk algebra on directed mixed graphs.
//!
//! Graphs carry directed edges `a -> b` and bidirected edges `a <-> b`
//! (bidirected loops allowed). On top of them this crate provides matrices of
//! walk sets, constructors for the usual walk families (treks, arcs,
//! unblocked walks), exact separation oracles, latent projection, and a
//! Gaussian linear system engine used to cross-check everything numerically.

pub mod automaton;
pub mod fixtures;
pub mod gaussian;
pub mod graph;
pub mod marginal;
pub mod par;
pub mod queries;
pub mod separation;
pub mod testbench;
pub mod walk;

pub use gaussian::{LinearSystemError, RegularityFlags, SymbolicCovariance, WeightedLinearSystem};
pub use graph::{DirectedMixedGraph, Edge, EdgeKind, GraphClassFlags, GraphError, VertexSet};
pub use marginal::{marginal_walk_image, marginalize, marginalize_admg, MarginalError};
pub use par::Execution;
pub use queries::{WalkClassification, WalkKind};
pub use separation::{
    SeparationError, SeparationKind, SeparationQuery, SeparationVerdict, UndirectedGraph,
};
pub use walk::{Step, StepKind, Truncated, Walk, WalkError, WalkMatrix, WalkSet};
