//! Distributed bandit online primal-dual optimization over time-varying
//! networks with time-varying constraints.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: decision sets, clipping and projections;
//! - [`oracle`]: value-only feedback and two-point gradient estimators;
//! - [`network`]: time-varying graphs and doubly stochastic mixing;
//! - [`schedule`]: stepsize, dual, shrinkage and exploration sequences;
//! - [`engine`]: the per-round primal-dual iteration;
//! - [`problems`]: the seeded online regression benchmark;
//! - [`metrics`]: network regret, cumulative constraint violation and the
//!   offline comparator;
//! - [`experiment`]: configuration, presets and the multi-seed runner.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
