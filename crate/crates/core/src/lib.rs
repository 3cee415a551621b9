//! Deterministic simulator for federated semi-supervised learning where each
//! client holds an arbitrary share of labeled data.
//!
//! The crate provides a small dense network engine ([`nn`]), datasets with
//! Dirichlet partitioning and per-client annotation ([`data`]), the round
//! engine ([`federation`]), the dual-model SUMA strategy ([`suma`]),
//! reference strategies ([`baselines`]) and the experiment harness
//! ([`config`], [`metrics`], [`suite`], [`plot`]).

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod plot;
pub mod seed;
pub mod suite;
pub mod suma;
pub mod train;

pub use error::{Error, Result};
