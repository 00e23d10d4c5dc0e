//! Problem generators, experiment configuration and the `fastkm-bench` CLI.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plotdata;
pub mod problems;
pub mod sweep;
pub mod trajectories;

pub use error::{BenchError, Result};
