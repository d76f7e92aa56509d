//! Exponentially tempered stable random measures and the random fields built on them.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod fields;
pub mod integrability;
pub mod operators;
pub mod polar;
pub mod quad;
pub mod simulate;
pub mod tstable;

pub use error::{Error, Result};
