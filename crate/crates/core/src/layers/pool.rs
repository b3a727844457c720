use super::{Layer, Mode};
use crate::tensor::{avgpool_same, avgpool_same_backward};
use crate::{Error, Result, Tensor};

#[derive(Clone, Debug)]
pub struct AvgPool {
    name: String,
    pub window: usize,
    pub stride: usize,
    input_shape: Option<Vec<usize>>,
}

impl AvgPool {
    pub fn new(name: impl Into<String>, window: usize, stride: usize) -> Self {
        AvgPool { name: name.into(), window, stride, input_shape: None }
    }
}

impl Layer for AvgPool {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.input_shape = (mode == Mode::Train).then(|| x.shape().to_vec());
        avgpool_same(x, self.window, self.stride)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or_else(|| Error::MissingForwardState { layer: self.name.clone() })?;
        avgpool_same_backward(grad, shape, self.window, self.stride)
    }
}
