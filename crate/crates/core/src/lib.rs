//! Numerical laboratory for randomizing quantum maps.
//!
//! Approximate private quantum channels built from a few random unitaries,
//! data hiding with a transpose-channel decoder, locked classical
//! correlations, and the concentration estimates behind them, all driven by
//! seeded Monte Carlo experiments.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod hiding;
pub mod locking;
pub mod matcore;
pub mod pqc;
pub mod randomizer;
pub mod sampler;
pub mod stats;
pub mod xcli;

pub use error::{Error, Result};
