//! Simulation and analysis toolkit for nonlinear multi-agent, multi-option
//! opinion dynamics with saturated coupling.
//!
//! The crate is organized around the pipeline the toolkit supports:
//!
//! - [`graph`]: communication structure and its spectral analysis; the
//!   extremal eigenpairs drive every prediction downstream.
//! - [`saturation`] and [`model`]: the saturating nonlinearities, opinion
//!   states, parameter sets, and the vector fields (general multi-option,
//!   adjacency-tensor generalization in [`tensor`], and the scalar
//!   two-option reduction).
//! - [`dynamics`]: fixed-step integration of the composed system,
//!   equilibrium search, bifurcation sweeps, and the cluster-manifold
//!   distance.
//! - [`analysis`]: critical attention thresholds, state classification,
//!   pitchfork unfolding direction, cluster reduction, and equivariance
//!   checks.
//! - [`feedback`]: attention dynamics with a Hill saturation, slow
//!   inter-cluster coupling gains, and cascade-threshold estimation.
//!
//! All types are immutable after construction and the operations are pure,
//! so values can be shared freely across worker threads; parameter sweeps
//! and Monte-Carlo studies parallelize per grid point with deterministic,
//! per-trial seeds.

// Parameter validation uses `!(x > 0.0)` on purpose: the negation is the
// only comparison that also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod feedback;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod saturation;
pub mod tensor;

pub use analysis::{
    classify_state, critical_attention, default_strong_threshold, equivariance_residual,
    predict_symmetric_lambda, reduce_clusters, Regime, RegimePrediction, StateClassification,
};
pub use dynamics::{
    distance_to_cluster_manifold, find_equilibrium, integrate, integrate_terminal,
    sweep_bifurcation, EquilibriumReport, GeneralSystem, InputChange, InputSchedule,
    ScheduleSegment, StateLayout, System, Trajectory, TwoOptionSystem,
};
pub use error::{CoreError, Result};
pub use feedback::{
    estimate_cascade_threshold, hill_eval, AttentionParams, CascadeProbe, CascadeThreshold,
    CouplingFeedbackParams,
};
pub use graph::{AdjacencySpec, GraphKind, SpectralSummary};
pub use model::{
    boundedness_radius, jacobian_at_origin, project_tangent, simplex_map, vector_field,
    vector_field_two_option, HomogeneousRegime, ModelParams, OpinionState, TwoOptionParams,
};
pub use saturation::{OddSaturation, SaturationFamily, SaturationSpec};
pub use tensor::{vector_field_tensor, AdjacencyTensor};
