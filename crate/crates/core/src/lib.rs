//! Day-ahead clearing of interconnected electricity markets.
//!
//! Three regimes are provided over the same case format: the whole system
//! cleared as one area ([`baselines::run_single_area`]), every area cleared
//! on its own under a fixed interchange schedule
//! ([`baselines::run_uncoordinated`]), and areas coordinating through
//! consensus ADMM on shared bus angles and tie-line flows
//! ([`coordination::run_multi_area_uc`]).

pub mod admm;
pub mod baselines;
pub mod cli;
pub mod coordination;
pub mod error;
pub mod miqp;
pub mod model;
pub mod qp;
pub mod uc;

pub use error::{Error, Result};
