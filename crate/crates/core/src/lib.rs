//! Low-degree likelihood ratios and statistical dimension for concrete
//! hypothesis-testing problems, with exact checks of the inequalities that
//! relate them.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloning;
pub mod corpus;
pub mod error;
pub mod ldlr;
pub mod measures;
pub mod noise;
pub mod numerics;
pub mod problem_file;
pub mod sda;
pub mod sq;
pub mod zoo;

pub use error::{Error, Result};
