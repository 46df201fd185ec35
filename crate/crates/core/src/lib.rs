//! Blind uplink channel estimation and signal extraction for massive MIMO
//! receivers facing IRS-based correlative attacks.

pub mod baselines;
pub mod bss;
pub mod error;
pub mod extractor;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod par;

pub use error::{Error, Result};
pub use num_complex::Complex64;
