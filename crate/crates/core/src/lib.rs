// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod friction;
pub mod gbt;
pub mod service;
pub mod synthgen;
pub mod time;

pub use error::{Error, Result};
