//! Simulation and verification of finite systems of jump SDEs with
//! non-Lipschitz diffusion and jump coefficients and monotone mean-field
//! drifts.

pub mod approx;
pub mod coeffs;
pub mod error;
pub mod noise;
pub mod paths;
pub mod quad;
pub mod scenario;
pub mod solver;
pub mod staircase;
pub mod system;
pub mod uniqueness;

pub use error::{Error, Result};
