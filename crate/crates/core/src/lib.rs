//! Keyword spotting with Gram-polynomial KAN convolutions inside a LiCo-Net
//! encoder: autodiff core, log-mel front-end, streaming keyword decoder,
//! training and FRR/FA-per-hour evaluation.
//!
//! The numeric core is generic over [`scalar::Scalar`]; the aliases below
//! fix the two supported precisions. Training and evaluation default to f64.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoder;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod frontend;
pub mod gram;
pub mod layers;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod trainer;
pub mod vocab;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Tape64 = tensor::Tape<f64>;
pub type Tape32 = tensor::Tape<f32>;
pub type Model64 = encoder::Model<f64>;
pub type Model32 = encoder::Model<f32>;
