use super::{Layer, Mode, Param};
use crate::{Error, Float, Result, Tensor};

pub const BN_MOMENTUM: Float = 0.99;
pub const BN_EPSILON: Float = 1e-3;

/// Batch normalization over the last axis. For image tensors the batch and
/// spatial axes are pooled into one statistic per channel.
///
/// Running statistics are exponential moving averages of the batch mean and
/// of the unbiased batch variance. With `zero_debias` (the default) the
/// average is bias-corrected the way Adam corrects its moments: after `t`
/// updates the running value is `a_t / (1 − momentum^t)`, where `a_t` is the
/// plain average started from zero, so the initial 0 / 1 values never leak
/// into evaluation. Without it the plain average starts from 0 / 1.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    name: String,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: Float,
    pub epsilon: Float,
    pub zero_debias: bool,
    /// Train-mode forward passes seen so far.
    pub updates: u64,
    cache: Option<BnCache>,
}

#[derive(Clone, Debug)]
struct BnCache {
    x_hat: Tensor,
    inv_std: Vec<Float>,
}

impl BatchNorm {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        Self::with_hyper(name, channels, BN_MOMENTUM, BN_EPSILON)
    }

    pub fn with_hyper(name: impl Into<String>, channels: usize, momentum: Float, epsilon: Float) -> Self {
        BatchNorm {
            name: name.into(),
            gamma: Param::new(Tensor::filled(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            momentum,
            epsilon,
            zero_debias: true,
            updates: 0,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }
}

impl Layer for BatchNorm {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (rows, c) = x.as_matrix_dims();
        if c != self.channels() || rows == 0 {
            return Err(Error::shape("batchnorm_forward", format!("input {:?} for {} channels", x.shape(), self.channels())));
        }
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut y = x.clone();
        match mode {
            Mode::Eval => {
                let scale: Vec<Float> = (0..c).map(|j| gamma[j] / (self.running_var.data()[j] + self.epsilon).sqrt()).collect();
                let mean = self.running_mean.data();
                for row in y.data_mut().chunks_exact_mut(c) {
                    for j in 0..c {
                        row[j] = (row[j] - mean[j]) * scale[j] + beta[j];
                    }
                }
                self.cache = None;
            }
            Mode::Train => {
                let n = rows as Float;
                let mut mean = vec![0.0; c];
                for row in x.data().chunks_exact(c) {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; c];
                for row in x.data().chunks_exact(c) {
                    for j in 0..c {
                        let d = row[j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n);
                let inv_std: Vec<Float> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();

                let mut x_hat = x.clone();
                for (xh, out) in x_hat.data_mut().chunks_exact_mut(c).zip(y.data_mut().chunks_exact_mut(c)) {
                    for j in 0..c {
                        xh[j] = (xh[j] - mean[j]) * inv_std[j];
                        out[j] = gamma[j] * xh[j] + beta[j];
                    }
                }

                // Running variance tracks the unbiased estimate; a single row
                // has no spread to correct.
                let correction = if rows > 1 { n / (n - 1.0) } else { 1.0 };
                let m = self.momentum;
                let (keep, norm) = if self.zero_debias {
                    let before = 1.0 - m.powi(self.updates.min(i32::MAX as u64) as i32);
                    let after = 1.0 - m.powi((self.updates + 1).min(i32::MAX as u64) as i32);
                    (m * before / after, (1.0 - m) / after)
                } else {
                    (m, 1.0 - m)
                };
                for j in 0..c {
                    let rm = &mut self.running_mean.data_mut()[j];
                    *rm = keep * *rm + norm * mean[j];
                    let rv = &mut self.running_var.data_mut()[j];
                    *rv = keep * *rv + norm * var[j] * correction;
                }
                self.updates += 1;
                self.cache = Some(BnCache { x_hat, inv_std });
            }
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| Error::MissingForwardState { layer: self.name.clone() })?;
        if grad.shape() != cache.x_hat.shape() {
            return Err(Error::shape("BatchNorm::backward", format!("gradient {:?}", grad.shape())));
        }
        let (rows, c) = grad.as_matrix_dims();
        let n = rows as Float;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for (g, xh) in grad.data().chunks_exact(c).zip(cache.x_hat.data().chunks_exact(c)) {
            for j in 0..c {
                sum_dy[j] += g[j];
                sum_dy_xhat[j] += g[j] * xh[j];
            }
        }
        self.gamma.grad.data_mut().copy_from_slice(&sum_dy_xhat);
        self.beta.grad.data_mut().copy_from_slice(&sum_dy);

        let gamma = self.gamma.value.data();
        let mut dx = grad.clone();
        for (d, xh) in dx.data_mut().chunks_exact_mut(c).zip(cache.x_hat.data().chunks_exact(c)) {
            for j in 0..c {
                let k = gamma[j] * cache.inv_std[j] / n;
                d[j] = k * (n * d[j] - sum_dy[j] - xh[j] * sum_dy_xhat[j]);
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("gamma", &self.gamma.value),
            ("beta", &self.beta.value),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ]
    }

    fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        match name {
            "gamma" => Some(&mut self.gamma.value),
            "beta" => Some(&mut self.beta.value),
            "running_mean" => Some(&mut self.running_mean),
            "running_var" => Some(&mut self.running_var),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng;

    fn channel_moments(t: &Tensor, c: usize) -> Vec<(Float, Float)> {
        let (rows, _) = t.as_matrix_dims();
        (0..c)
            .map(|j| {
                let vals: Vec<Float> = t.data().chunks_exact(c).map(|r| r[j]).collect();
                let mean = vals.iter().sum::<Float>() / rows as Float;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<Float>() / rows as Float;
                (mean, var)
            })
            .collect()
    }

    fn random_input(seed: u64) -> Tensor {
        let mut r = rng::stream(seed, 0);
        Tensor::from_fn(&[8, 3, 3, 4], |i| r.gen_range(-2.0..2.0) + (i % 4) as Float)
    }

    #[test]
    fn train_mode_standardizes() {
        let mut bn = BatchNorm::new("bn", 4);
        let y = bn.forward(&random_input(1), Mode::Train).unwrap();
        for (mean, var) in channel_moments(&y, 4) {
            assert!(mean.abs() < 1e-12);
            // epsilon shrinks the variance slightly below one
            assert!((var - 1.0).abs() < 2e-3, "var {var}");
        }
    }

    #[test]
    fn affine_parameters_shift_and_scale() {
        let mut bn = BatchNorm::new("bn", 4);
        bn.gamma.value.fill(2.0);
        bn.beta.value.fill(3.0);
        let y = bn.forward(&random_input(2), Mode::Train).unwrap();
        for (mean, var) in channel_moments(&y, 4) {
            assert!((mean - 3.0).abs() < 1e-12);
            assert!((var - 4.0).abs() < 1e-2);
        }
    }

    #[test]
    fn eval_with_unit_running_stats_is_affine() {
        let mut bn = BatchNorm::with_hyper("bn", 4, 0.99, 0.0);
        bn.gamma.value.fill(1.5);
        bn.beta.value.fill(-0.5);
        let x = random_input(3);
        let y = bn.forward(&x, Mode::Eval).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - (1.5 * b - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_batch_does_not_crash() {
        let mut bn = BatchNorm::new("bn", 3);
        let y = bn.forward(&Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap(), Mode::Train).unwrap();
        assert!(y.all_finite());
        assert!(bn.running_var.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn running_stats_follow_moving_average() {
        let mut bn = BatchNorm::new("bn", 1);
        bn.zero_debias = false;
        let x = Tensor::from_vec(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.data()[0] - 0.01 * 2.5).abs() < 1e-15);
        // unbiased variance of 1..4 is 5/3
        assert!((bn.running_var.data()[0] - (0.99 + 0.01 * 5.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn debiased_stats_match_a_direct_average() {
        let mut bn = BatchNorm::new("bn", 1);
        let batches = [[1.0, 3.0], [2.0, 6.0], [0.0, 1.0]];
        for b in &batches {
            bn.forward(&Tensor::from_vec(&[2, 1], b.to_vec()).unwrap(), Mode::Train).unwrap();
        }
        // weights m^(t-1-i) over the batch means, normalized to sum to one
        let m: Float = 0.99;
        let w: Vec<Float> = (0..3).map(|i| m.powi(2 - i)).collect();
        let total: Float = w.iter().sum();
        let means = [2.0, 4.0, 0.5];
        let vars = [2.0, 8.0, 0.5];
        let want_mean: Float = w.iter().zip(means).map(|(w, x)| w * x).sum::<Float>() / total;
        let want_var: Float = w.iter().zip(vars).map(|(w, x)| w * x).sum::<Float>() / total;
        assert!((bn.running_mean.data()[0] - want_mean).abs() < 1e-12);
        assert!((bn.running_var.data()[0] - want_var).abs() < 1e-12);
        assert_eq!(bn.updates, 3);
    }

    #[test]
    fn parameter_counts() {
        for (c, n) in [(6, 24), (16, 64), (120, 480), (84, 336)] {
            assert_eq!(BatchNorm::new("bn", c).param_count(), n);
        }
    }
}
