//! Well-conditioned subframes of finite frames.
//!
//! The crate extracts small weighted or unweighted subsets of a frame in `ℂ^m`
//! whose frame bounds stay close to the original ones, either by random
//! norm-based sampling or by the deterministic barrier method, and uses them
//! to build Marcinkiewicz-Zygmund node sets for least-squares recovery.

// Checks like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bss;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod frame;
pub mod linalg;
pub mod potentials;
pub mod precondition;
pub mod recovery;
pub mod strategies;

pub use error::{FrameError, Result};
pub use frame::{frame_bounds, frobenius_norm_sq, weighted_frame_bounds, FrameBounds, FrameMatrix, WeightedSubframe};
