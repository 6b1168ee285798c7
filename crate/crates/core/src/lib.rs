//! Interpretable point-based ordinal risk scorecards learned from partially
//! labeled data.
//!
//! A [`Scorecard`] holds integer (or real) weights and ordered thresholds; the
//! score `beta . x` is mapped to one of `K` ordinal categories. Training data
//! carries a [`FeasibleSet`] per instance instead of a single label, and
//! misclassification is priced by an asymmetric distance-aware [`LossParams`].
//!
//! - [`loss`]: ordinal loss, feasible-set cost and exact empirical risk.
//! - [`cso`]: smooth softplus relaxation and projected subgradient solver.
//! - [`mip`]: exact integer-weight search, brute-force oracle, feasibility
//!   checks, variant presets and the two-phase pipeline.
//! - [`eval`]: accuracy, precision/recall, AUROC/AUPRC, KS and tables.
//! - [`data`]: cohort partitioning, splits, grid search, synthetic data, CSV.

pub mod cso;
pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod loss;
pub mod mip;
pub mod numeric;
pub mod preset;
pub mod qp;
pub mod scorecard;

pub use dataset::{Dataset, FeasibleSet, Instance, ValidationReport, Violation};
pub use error::{Error, Result};
pub use loss::{empirical_risk, feasible_cost, ordinal_loss, LossParams};
pub use scorecard::{categorize, score, Crossing, Scorecard};
