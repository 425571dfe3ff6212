//! Dual-model lane keeping: two PilotNet-style steering networks, a
//! detection-driven brake controller, a procedural driving simulator and
//! the harness that trains, drives and benchmarks them.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod data;
pub mod error;
pub mod frame;
pub mod harness;
pub mod models;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
