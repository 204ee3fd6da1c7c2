// Negated comparisons reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod gan;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod prior;
pub mod reversal;

pub use error::{Error, Result};
pub use matrix::Matrix;
