//! Generalized fast Krasnoselskii-Mann iteration for nonexpansive operators,
//! degenerate preconditioned splitting methods built on it, Lyapunov
//! diagnostics, and a simulator for the continuous-time model.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fastkm;
pub mod operators;
pub mod precond;

pub use error::{Error, Result};
pub use operators::{BlockVector, Vector};
