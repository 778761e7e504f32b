//! Photon–axion mixing in inhomogeneous magnetic fields: mode indices, ray
//! splitting in a field gradient, multi-pass bifurcation in a mirror cavity
//! and the resulting drop of the central beam intensity.

pub mod cavity;
pub mod error;
pub mod field_ray;
pub mod mixing;
pub mod numerics;
pub mod output;
pub mod profile;
pub mod scenario;
pub mod units;

pub use error::{Error, Result};
