//! Bayesian additive regression trees with a shard-inflation knob.
//!
//! One engine covers every method: the likelihood exponent κ, the prior
//! exponent and the working-variance adjustment in [`InflationSpec`] select
//! full-data, likelihood-inflated, variance-adjusted or prior-tempered
//! sampling.

mod conditionals;
mod hyper;
mod moves;
mod prior;
mod sampler;
mod tree;

pub use conditionals::{
    grow_likelihood_log_ratio, leaf_conditional, node_log_marginal, sample_leaf_mean,
    sample_sigma2, sigma2_conditional, NodeSufficientStats,
};
pub use hyper::{
    calibrate_hyperparams, BartHyper, BartSettings, Calibration, InflationSpec, MoveProbs,
};
pub use moves::{
    apply_proposal, distinct_values, log_acceptance_ratio, propose_move, MoveContext, MoveKind,
    Proposal,
};
pub use prior::{grow_log_prior_ratio, split_probability, tree_log_prior, SplitCounts};
pub use sampler::{
    compute_partial_residual, draw_forest_from_prior, predict, BartSampler, Forest, MoveCounters,
};
pub use tree::{DecisionTree, Node, NodeId, NodeKind, Shape, SplitRule};
