//! Coexistence model for DPS quantum key distribution over a passive
//! optical network: ODN losses, Raman noise from classical channels, the
//! DPS link with its detectors, sifting, key rate and scenario sweeps.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod keyrate;
pub mod link;
pub mod raman;
pub mod repro;
pub mod scenario;
pub mod sifting;
pub mod topology;
pub mod units;

pub use error::{Error, FieldError, Result};
