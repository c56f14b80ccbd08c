//! One-shot active label selection for several regression models that see
//! the same instances through different feature representations.
//!
//! Unlabeled rows are sampled by their maximum ℓp Lewis weight across the
//! representations, the sampled rows are reweighted into a shared sampling
//! matrix, and each model is then fitted on the queried labels by a
//! constrained single-neuron ℓp regression.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod lewis;
pub mod matrix;
pub mod oracle;
pub mod pipeline;
pub mod regression;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use lewis::{leverage_scores, lewis_weights, verify_fixed_point, LewisConfig, WeightVector};
pub use matrix::RealMatrix;
pub use regression::{
    evaluate_guarantee, solve_constrained_neuron, solve_lp_regression, Activation, NeuronProblem, NeuronSolution,
};
pub use rng::SeededRng;
pub use sampling::{
    bernoulli_sampling_matrix, build_sampling_matrix, draw_until_distinct, max_weight_distribution,
    sample_size_bound, QueryPlan, SamplingDistribution, SamplingMatrix,
};
pub use pipeline::{run_one_shot, LabelOracle, MultiRepDataset, OneShotParams, PipelineResult};
