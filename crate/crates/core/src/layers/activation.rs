use crate::{Error, Float, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
    Softmax,
}

pub fn relu(x: Float) -> Float {
    x.max(0.0)
}

pub fn sigmoid(x: Float) -> Float {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax over the last axis, in place.
pub fn softmax_rows(t: &mut Tensor) {
    let (_, cols) = t.as_matrix_dims();
    if cols == 0 {
        return;
    }
    for row in t.data_mut().chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(Float::NEG_INFINITY, Float::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

impl Activation {
    pub fn apply(self, z: &mut Tensor) {
        match self {
            Activation::None => {}
            Activation::Relu => z.data_mut().iter_mut().for_each(|v| *v = relu(*v)),
            Activation::Sigmoid => z.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => softmax_rows(z),
        }
    }

    /// Gradient with respect to the pre-activation, given the activation
    /// output `y` and the upstream gradient `dy`.
    pub fn backward(self, y: &Tensor, dy: &Tensor) -> Result<Tensor> {
        if y.shape() != dy.shape() {
            return Err(Error::shape("Activation::backward", format!("{:?} vs {:?}", y.shape(), dy.shape())));
        }
        let mut dz = dy.clone();
        match self {
            Activation::None => {}
            Activation::Relu => {
                for (g, &out) in dz.data_mut().iter_mut().zip(y.data()) {
                    if out <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &out) in dz.data_mut().iter_mut().zip(y.data()) {
                    *g *= out * (1.0 - out);
                }
            }
            Activation::Softmax => {
                let (_, cols) = y.as_matrix_dims();
                for (g, p) in dz.data_mut().chunks_exact_mut(cols).zip(y.data().chunks_exact(cols)) {
                    let dot: Float = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    for (gi, &pi) in g.iter_mut().zip(p) {
                        *gi = pi * (*gi - dot);
                    }
                }
            }
        }
        Ok(dz)
    }
}
