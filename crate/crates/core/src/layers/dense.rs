use rand::Rng;

use super::{glorot_uniform, Activation, Layer, Mode, Param};
use crate::tensor::{gemm, row_major, transposed};
use crate::{Error, Result, Tensor};

/// `activation(x · weights + bias)` for `x` of shape `(batch, in)`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let [batch, fan_in] = *x.shape() else {
        return Err(Error::shape("dense_forward", format!("input {:?} is not (batch, in)", x.shape())));
    };
    let [w_in, fan_out] = *weights.shape() else {
        return Err(Error::shape("dense_forward", format!("weights {:?}", weights.shape())));
    };
    if w_in != fan_in || bias.shape() != [fan_out] {
        return Err(Error::shape(
            "dense_forward",
            format!("input {:?}, weights {:?}, bias {:?}", x.shape(), weights.shape(), bias.shape()),
        ));
    }
    let mut out = vec![0.0; batch * fan_out];
    for row in out.chunks_exact_mut(fan_out) {
        row.copy_from_slice(bias.data());
    }
    gemm(batch, fan_in, fan_out, 1.0, x.data(), row_major(fan_in), weights.data(), row_major(fan_out), 1.0, &mut out);
    let mut out = Tensor::from_vec(&[batch, fan_out], out)?;
    activation.apply(&mut out);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Dense {
    name: String,
    pub weights: Param,
    pub bias: Param,
    pub activation: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Dense {
    pub fn new(name: impl Into<String>, fan_in: usize, fan_out: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Dense {
            name: name.into(),
            weights: Param::new(glorot_uniform(&[fan_in, fan_out], fan_in, fan_out, rng)),
            bias: Param::new(Tensor::zeros(&[fan_out])),
            activation,
            cache: None,
        }
    }

    pub fn from_params(name: impl Into<String>, weights: Tensor, bias: Tensor, activation: Activation) -> Self {
        Dense { name: name.into(), weights: Param::new(weights), bias: Param::new(bias), activation, cache: None }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.value.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weights.value.shape()[1]
    }
}

impl Layer for Dense {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let y = dense_forward(x, &self.weights.value, &self.bias.value, self.activation)?;
        self.cache = (mode == Mode::Train).then(|| (x.clone(), y.clone()));
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (x, y) = self.cache.as_ref().ok_or_else(|| Error::MissingForwardState { layer: self.name.clone() })?;
        let dz = self.activation.backward(y, grad)?;
        let (batch, fan_in, fan_out) = (x.shape()[0], self.fan_in(), self.fan_out());

        let dw = self.weights.grad.data_mut();
        gemm(fan_in, batch, fan_out, 1.0, x.data(), transposed(fan_in), dz.data(), row_major(fan_out), 0.0, dw);

        let db = self.bias.grad.data_mut();
        db.fill(0.0);
        for row in dz.data().chunks_exact(fan_out) {
            for (acc, g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }

        let mut dx = Tensor::zeros(&[batch, fan_in]);
        gemm(
            batch,
            fan_out,
            fan_in,
            1.0,
            dz.data(),
            row_major(fan_out),
            self.weights.value.data(),
            transposed(fan_out),
            0.0,
            dx.data_mut(),
        );
        Ok(dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weights, &mut self.bias]
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weights", &self.weights.value), ("bias", &self.bias.value)]
    }

    fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        match name {
            "weights" => Some(&mut self.weights.value),
            "bias" => Some(&mut self.bias.value),
            _ => None,
        }
    }
}
