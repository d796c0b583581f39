//! Graph learning for district-heating sensor networks.
//!
//! Edge weights of an undirected sensor graph are learned from smooth signals,
//! optionally pulled toward a prior graph built from pipe physics, and the
//! resulting graph is used to denoise and impute sensor readings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod learn;
pub mod physics;
pub mod reconstruct;

pub use error::{Error, Result};
pub use graph::{
    adjacency_to_vector, degree_operator_adjoint, degree_operator_apply, edge_count, edge_index,
    laplacian, operator_norm_s, pairwise_distance_vector, smoothness, vector_to_adjacency,
    EdgeWeightVector, LaplacianMatrix, NodeLabel, SensorGraph, SensorKind, SignalMatrix,
};
pub use learn::{
    solve_adj_smooth, solve_igl, solve_lap_smooth, IglParams, LapSmoothParams, SolverTrace,
};
pub use physics::{build_prior_graph, KnowledgePrior, NetworkTopology, PipeSpec, PriorGraph};
pub use reconstruct::{denoise, impute, ObservationMask, ReconstructionParams};
