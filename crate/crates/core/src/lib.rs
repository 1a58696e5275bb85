//! Local loss functions for learning discrete distributions under calibration
//! constraints.

pub mod bounds;
pub mod calibrate;
pub mod calibration;
pub mod distribution;
pub mod error;
pub mod harness;
pub mod io;
pub mod losses;
pub mod sampling;
pub mod scoring;
pub mod trigram;

pub use error::{Error, Result};
