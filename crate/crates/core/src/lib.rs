//! Feed-forward coupled cell networks.
//!
//! Structural combinatorics (layers, balanced colorings, quotients, lifts),
//! enumeration of steady-state bifurcation branch signatures, the lifting
//! bifurcation problem, and a numeric oracle for branch asymptotics.

pub mod branches;
pub mod coloring;
pub mod corpus;
pub mod error;
pub mod lift;
pub mod lifting;
pub mod network;
pub mod numeric;
pub mod random;

pub use branches::{
    canonical_chain_slopes, canonical_delta, canonical_layer_signature, center_subspace_dim,
    enumerate_branches_internal, enumerate_branches_valency, jacobian_at_origin,
    layer_order_profile, validate_signature, BifurcationType, BranchSignature,
    EnumerationOptions, JetCoefficients, SlopeTemplate, ValencyBranchPattern,
};
pub use coloring::{
    enumerate_balanced_colorings, find_colorings_with_quotient, is_balanced, lies_in_synchrony,
    quotient, refines, Balance, Coloring, Quotient, DEFAULT_SIZE_BOUND,
};
pub use error::{Error, ErrorKind, Result};
pub use lift::{
    classify_lift, compose_decomposition, create_new_layers, decompose_lift, lift_projection,
    restrict_coloring, split_cell, unique_coloring_check, verify_layer_alignment, Decomposition,
    DecompositionStep, EdgeReassignment, LiftClassification, SplitSpec, UniqueColoring,
};
pub use lifting::{
    cross_check, decide_exhaustive, is_lifted, is_lifted_valency, predict_via_theorems, CrossCheck,
    LiftingVerdict, RuleCheck, RuleStatus, Verdict, Witness,
};
pub use numeric::{
    all_equilibria_at, equilibria_near_origin, estimate_order_slope, match_numeric_to_signatures,
    newton_solve, trace_branches, CellEstimate, MatchReport, NumericBranch,
    PolynomialCellFunction, SideMatch, Trace, TraceConfig,
};
pub use network::{
    adjacency_matrices, detect_layers, is_backward_connected, is_connected, networks_equal,
    parse_network, AdjacencyMatrices, FeedForwardStructure, Network, NotFeedForward,
};
