//! Preference learning from pairwise comparisons under the Plackett-Luce
//! model, with menus chosen to maximise a task utility and active selection
//! of the comparisons that improve those menus the most.
//!
//! - [`prefcore`]: ids, comparisons, menus and rankings.
//! - [`plackett`]: ranking probabilities, sampling and smoothing.
//! - [`models`]: scoring models and their pairwise / rating training.
//! - [`utility`]: menu utilities, expected utility and menu optimisation.
//! - [`sampler`]: query-selection strategies and the simulated oracle.
//! - [`datasets`]: loaders, synthetic generators and splits.
//! - [`metrics`]: Kendall tau, Precision@k, NDCG@k, max-rank percentile.
//! - [`harness`]: the experiment runner behind the `run` command.

pub mod datasets;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod plackett;
pub mod prefcore;
pub mod sampler;
pub mod utility;

pub use prefcore::{ComparisonTriplet, GroundTruthRanking, ItemId, Menu, PartialRanking, UserId};
