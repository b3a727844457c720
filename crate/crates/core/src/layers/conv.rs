use rand::Rng;

use super::{glorot_uniform, Layer, Mode, Param};
use crate::tensor::{col2im, conv2d_same_with_patches, gemm, row_major, transposed};
use crate::{Error, Result, Tensor};

/// Same-padded 2-D convolution, no activation.
#[derive(Clone, Debug)]
pub struct Conv2d {
    name: String,
    pub kernels: Param,
    pub bias: Param,
    cache: Option<(Tensor, [usize; 4])>,
}

impl Conv2d {
    pub fn new(name: impl Into<String>, size: usize, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let area = size * size;
        Conv2d {
            name: name.into(),
            kernels: Param::new(glorot_uniform(&[size, size, c_in, c_out], area * c_in, area * c_out, rng)),
            bias: Param::new(Tensor::zeros(&[c_out])),
            cache: None,
        }
    }

    pub fn from_params(name: impl Into<String>, kernels: Tensor, bias: Tensor) -> Self {
        Conv2d { name: name.into(), kernels: Param::new(kernels), bias: Param::new(bias), cache: None }
    }
}

impl Layer for Conv2d {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (y, patches) = conv2d_same_with_patches(x, &self.kernels.value, &self.bias.value)?;
        self.cache = match mode {
            Mode::Train => {
                let s = x.shape();
                Some((patches, [s[0], s[1], s[2], s[3]]))
            }
            Mode::Eval => None,
        };
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let (patches, [b, h, w, c_in]) = self.cache.as_ref().ok_or_else(|| Error::MissingForwardState { layer: self.name.clone() })?;
        let ks = self.kernels.value.shape();
        let (kh, kw, c_out) = (ks[0], ks[1], ks[3]);
        if grad.shape() != [*b, *h, *w, c_out] {
            return Err(Error::shape("Conv2d::backward", format!("gradient {:?}", grad.shape())));
        }
        let rows = b * h * w;
        let width = kh * kw * c_in;

        gemm(width, rows, c_out, 1.0, patches.data(), transposed(width), grad.data(), row_major(c_out), 0.0, self.kernels.grad.data_mut());

        let db = self.bias.grad.data_mut();
        db.fill(0.0);
        for row in grad.data().chunks_exact(c_out) {
            for (acc, g) in db.iter_mut().zip(row) {
                *acc += g;
            }
        }

        let mut dcols = Tensor::zeros(&[rows, width]);
        gemm(rows, c_out, width, 1.0, grad.data(), row_major(c_out), self.kernels.value.data(), transposed(c_out), 0.0, dcols.data_mut());
        col2im(&dcols, (*b, *h, *w, *c_in), kh, kw)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.kernels, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.kernels, &mut self.bias]
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("kernels", &self.kernels.value), ("bias", &self.bias.value)]
    }

    fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        match name {
            "kernels" => Some(&mut self.kernels.value),
            "bias" => Some(&mut self.bias.value),
            _ => None,
        }
    }
}
