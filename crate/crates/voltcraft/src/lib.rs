//! Derivatives pricing, local-volatility calibration, super-replication,
//! Monte-Carlo/BSDE valuation and risk measurement.

// `!(x > 0.0)` is the NaN-rejecting form used throughout input validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod market;
pub mod mc;
pub mod numerics;
pub mod pde;
pub mod risk;
pub mod superrep;

pub use error::{Error, Result};
