//! A small convolutional-network framework and experiment harness for
//! comparing three handwritten-digit classifiers on MNIST:
//!
//! * a LeNet-5 style **baseline**,
//! * an **inception-like** variant with an unlinked auxiliary softmax head,
//! * an **embodied** variant whose auxiliary sigmoid head predicts a
//!   16-value robot finger configuration and feeds it into the final
//!   classifier through a pre-trained 16→10 link.
//!
//! Everything below the experiment harness is implemented from scratch:
//! IDX parsing ([`idx`]), tensor kernels ([`tensor`]), layers with exact
//! backward passes ([`layers`]), losses and Adam ([`loss`], [`optim`]),
//! the training loop ([`train`]), and the statistics used to compare models
//! ([`stats`]).
//!
//! All arithmetic runs in [`Float`], which is `f64` unless the `f32` feature
//! is enabled.

pub mod cli;
pub mod embodiment;
mod error;
pub mod experiment;
pub mod gradcheck;
pub mod idx;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;

#[cfg(not(feature = "f32"))]
pub type Float = f64;
#[cfg(feature = "f32")]
pub type Float = f32;

/// Number of digit classes.
pub const NUM_CLASSES: usize = 10;
/// MNIST image side length.
pub const IMAGE_SIDE: usize = 28;
/// Length of a finger-code vector (8 motor values per hand).
pub const FINGER_CODE_LEN: usize = 16;
