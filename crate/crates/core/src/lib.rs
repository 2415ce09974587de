//! Spectral inequalities, observability constants and impulsive null controls
//! for discretized heat equations `d_t u - Delta u = 0` with Lipschitz metric
//! and density, on 1-D and 2-D grids.

#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod control;
pub mod domain;
pub mod doubling;
pub mod error;
pub mod inequality;
pub mod linalg;
pub mod lp;
pub mod obsets;
pub mod operator;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};
