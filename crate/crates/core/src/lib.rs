//! Joint optimization of UAV hovering height, movable-antenna positions and
//! antenna weights for max-min beamforming toward secondary users under
//! interference caps toward primary users.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: problem instance, steering geometry and exact gain evaluation.
//! - [`surrogate`]: tangent quadratic and linear bounds on the gain used by the
//!   successive convex approximation.
//! - [`qcqp`]: solvers for the three convex subproblems (height, weights, positions).
//! - [`alternating`]: the outer block-alternating loop and its initializers.
//! - [`bench`]: benchmark schemes and experiment runners.

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alternating;
pub mod bench;
mod error;
pub mod qcqp;
pub mod scenario;
pub mod surrogate;

pub use error::{Error, Result};

/// Absolute slack used for every feasibility check on a configuration.
pub const FEASIBILITY_TOL: f64 = 1e-6;
