// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod gs_model;
pub mod linops;
pub mod relay;
pub mod rng;
pub mod scalar;
pub mod smv;
pub mod special;
pub mod state_evolution;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub type C32 = num_complex::Complex<f32>;
pub type C64 = num_complex::Complex<f64>;
