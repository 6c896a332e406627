//! Aerocapture flight dynamics, bang-bang control profiles, predictor-corrector
//! guidance and Monte Carlo dispersion analysis.

pub mod dynamics;
pub mod environment;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod numerics;
pub mod orbit;
pub mod profiles;
pub mod vehicle;

pub use error::{Error, Result};
