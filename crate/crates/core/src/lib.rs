// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod figures;
pub mod gmm;
pub mod io;
pub mod math;
pub mod montecarlo;
pub mod ngram;
pub mod processes;
pub mod rng;

pub use error::{Error, Result};
