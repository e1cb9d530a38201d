//! Finite-dimensional machinery for quantum algorithmic randomness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod binom;
pub mod bits;
pub mod complexity;
pub mod entropy;
pub mod error;
pub mod limits;
pub mod linalg;
pub mod measurement;
pub mod oracles;
pub mod qtests;
pub mod rational;
pub mod rng;
pub mod states;

pub use binom::{binom_row, weighted_binomial_sum};
pub use bits::BitString;
pub use error::{QrlError, Result};
pub use rational::Rational;
