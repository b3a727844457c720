//! Layers with exact backward passes.
//!
//! Each layer caches what its backward pass needs during a `Train` forward
//! and overwrites its parameter gradients on `backward`.

mod activation;
mod batchnorm;
pub mod checkpoint;
mod conv;
mod dense;
mod dropout;
mod pool;

use rand::Rng;

pub use activation::{relu, sigmoid, softmax_rows, Activation};
pub use batchnorm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use conv::Conv2d;
pub use dense::{dense_forward, Dense};
pub use dropout::{dropout_forward, Dropout};
pub use pool::AvgPool;

use crate::{Float, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable tensor and the gradient from the latest backward pass.
#[derive(Clone, Debug)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }
}

pub trait Layer {
    fn name(&self) -> &str;

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor>;

    /// Gradient with respect to the input of the most recent `Train`
    /// forward; parameter gradients are stored on the layer.
    fn backward(&mut self, grad: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Every stored tensor under a stable name, trainable or not.
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        Vec::new()
    }

    fn tensor_mut(&mut self, _name: &str) -> Option<&mut Tensor> {
        None
    }

    /// Stored values, counted the way Keras reports them (batch-norm
    /// running statistics included).
    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Uniform Glorot initialization, limit `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as Float).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-limit..limit))
}
