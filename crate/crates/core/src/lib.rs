//! Riesz potentials of radial functions and the double-potential inequality
//! `u >= I_alpha * ((I_beta * u^p) u^q)` on `R^N`.

pub mod chebyshev;
pub mod error;
pub mod exponent;
pub mod quad;
pub mod radial;
pub mod rational;
pub mod region;
pub mod region_map;
pub mod riesz;
pub mod selftest;
pub mod verifier;

pub use error::{Error, Result};
