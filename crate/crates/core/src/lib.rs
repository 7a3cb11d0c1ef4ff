// `!(x > 0.0)` is deliberate: NaN must fail the checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod data;
pub mod encoder;
pub mod svgp;
pub mod ranking;
pub mod eval;
