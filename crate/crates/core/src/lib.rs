//! Statistical-query laboratory core.
//!
//! Oracles (STAT, VSTAT, SAMPLE), the planted and parity distribution
//! families, detection algorithms, the SAMPLE-from-VSTAT simulation,
//! statistical-dimension calculators and the planted-biclique reductions.
//! Everything here is `no_std` with `alloc`; file formats and the command
//! line live in the `sqlab` crate.

#![no_std]

extern crate alloc;

pub mod algorithms;
pub mod bits;
pub mod dimension;
pub mod distributions;
pub mod error;
pub mod oracles;
pub mod query;
pub mod reductions;
pub mod rng;
pub mod scalar;
pub mod simulation;

pub use bits::{IndexSet, Point};
pub use error::{Error, Result};
pub use query::Query;
pub use scalar::{ArithmeticMode, Prob, Scalar};
