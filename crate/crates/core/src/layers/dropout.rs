use rand::Rng;

use super::{Layer, Mode};
use crate::rng::StreamRng;
use crate::{Error, Float, Result, Tensor};

/// Inverted dropout. Returns the output and, in train mode, the per-element
/// multiplier (`0` or `1 / (1 - rate)`) that backward reuses.
pub fn dropout_forward(x: &Tensor, rate: Float, rng: &mut impl Rng, mode: Mode) -> (Tensor, Option<Vec<Float>>) {
    if mode == Mode::Eval || rate == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<Float> = (0..x.len()).map(|_| if rng.gen::<Float>() < rate { 0.0 } else { keep }).collect();
    (apply_mask(x, &mask), Some(mask))
}

fn apply_mask(x: &Tensor, mask: &[Float]) -> Tensor {
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    y
}

#[derive(Clone, Debug)]
pub struct Dropout {
    name: String,
    pub rate: Float,
    rng: StreamRng,
    mask: Option<Vec<Float>>,
    frozen: bool,
    passthrough: bool,
}

impl Dropout {
    pub fn new(name: impl Into<String>, rate: Float, rng: StreamRng) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
        Dropout { name: name.into(), rate, rng, mask: None, frozen: false, passthrough: false }
    }

    /// While frozen, train-mode forwards reuse the last mask instead of
    /// drawing a new one. Used by finite-difference gradient checks.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }
}

impl Layer for Dropout {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if mode == Mode::Eval {
            self.passthrough = false;
            self.mask = None;
            return Ok(x.clone());
        }
        if self.frozen {
            if let Some(mask) = self.mask.as_ref().filter(|m| m.len() == x.len()) {
                self.passthrough = false;
                return Ok(apply_mask(x, mask));
            }
        }
        let (y, mask) = dropout_forward(x, self.rate, &mut self.rng, mode);
        self.passthrough = mask.is_none();
        self.mask = mask;
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        if self.passthrough {
            return Ok(grad.clone());
        }
        let mask = self.mask.as_ref().ok_or_else(|| Error::MissingForwardState { layer: self.name.clone() })?;
        if mask.len() != grad.len() {
            return Err(Error::shape("Dropout::backward", format!("gradient {:?}", grad.shape())));
        }
        Ok(apply_mask(grad, mask))
    }
}
