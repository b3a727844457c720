//! Cross-entropy losses, their gradients, and the weighting of the two
//! network outputs.
//!
//! Both losses average over the output units as well as over the batch:
//!
//! ```text
//! H_C = (1/N) Σ_i −y_i log p_i
//! H_B = (1/K) Σ_i −y_i log z_i − (1 − y_i) log(1 − z_i)
//! ```
//!
//! Probabilities are clipped to `[CLIP, 1 − CLIP]` before the logarithm;
//! clipped entries contribute no gradient.

use std::fmt;

use crate::{Error, Float, Result, Tensor};

pub const CLIP: Float = 1e-7;

fn check_pair(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    if a.shape() != b.shape() || a.ndim() != 2 {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok((a.shape()[0], a.shape()[1]))
}

fn clip(p: Float) -> Float {
    p.clamp(CLIP, 1.0 - CLIP)
}

fn inside(p: Float) -> bool {
    p > CLIP && p < 1.0 - CLIP
}

pub fn categorical_cross_entropy(p: &Tensor, y: &Tensor) -> Result<Float> {
    let (batch, n) = check_pair("categorical_cross_entropy", p, y)?;
    let total: Float = p.data().iter().zip(y.data()).map(|(&pi, &yi)| -yi * clip(pi).ln()).sum();
    Ok(total / (n * batch) as Float)
}

/// Gradient of [`categorical_cross_entropy`] with respect to `p`.
pub fn categorical_cross_entropy_grad(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    let (batch, n) = check_pair("categorical_cross_entropy", p, y)?;
    let scale = 1.0 / (n * batch) as Float;
    let mut g = Tensor::zeros(p.shape());
    for ((gi, &pi), &yi) in g.data_mut().iter_mut().zip(p.data()).zip(y.data()) {
        if inside(pi) {
            *gi = -yi / pi * scale;
        }
    }
    Ok(g)
}

pub fn binary_cross_entropy(z: &Tensor, y: &Tensor) -> Result<Float> {
    let (batch, k) = check_pair("binary_cross_entropy", z, y)?;
    let total: Float = z
        .data()
        .iter()
        .zip(y.data())
        .map(|(&zi, &yi)| {
            let c = clip(zi);
            -yi * c.ln() - (1.0 - yi) * (1.0 - c).ln()
        })
        .sum();
    Ok(total / (k * batch) as Float)
}

/// Gradient of [`binary_cross_entropy`] with respect to `z`.
pub fn binary_cross_entropy_grad(z: &Tensor, y: &Tensor) -> Result<Tensor> {
    let (batch, k) = check_pair("binary_cross_entropy", z, y)?;
    let scale = 1.0 / (k * batch) as Float;
    let mut g = Tensor::zeros(z.shape());
    for ((gi, &zi), &yi) in g.data_mut().iter_mut().zip(z.data()).zip(y.data()) {
        if inside(zi) {
            *gi = (-yi / zi + (1.0 - yi) / (1.0 - zi)) * scale;
        }
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub classification_weight: Float,
    pub embodied_weight: Float,
}

impl LossWeights {
    pub fn new(embodied_weight: Float) -> Result<Self> {
        if !(0.1..=1.0).contains(&embodied_weight) {
            return Err(Error::ConfigInvalid(format!("embodied loss weight {embodied_weight} outside [0.1, 1]")));
        }
        Ok(LossWeights { classification_weight: 1.0, embodied_weight })
    }
}

/// `classification_weight · h_c + embodied_weight · h_b`.
pub fn combined_loss(h_c: Float, h_b: Float, w: LossWeights) -> Float {
    w.classification_weight * h_c + w.embodied_weight * h_b
}

/// Auxiliary-loss weight as a function of training-set size.
///
/// Weights are interpolated linearly in `ln(size)` between listed sizes and
/// held constant beyond the ends; every result is clamped into `[0.1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSchedule {
    points: Vec<(usize, Float)>,
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule { points: vec![(256, 1.0), (512, 1.0), (1024, 0.8), (3200, 0.5), (6400, 0.3), (60000, 0.1)] }
    }
}

impl WeightSchedule {
    pub fn new(mut points: Vec<(usize, Float)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::ConfigInvalid("empty weight schedule".into()));
        }
        points.sort_by_key(|&(s, _)| s);
        if points.windows(2).any(|w| w[0].0 == w[1].0) || points[0].0 == 0 {
            return Err(Error::ConfigInvalid("weight schedule sizes must be positive and distinct".into()));
        }
        Ok(WeightSchedule { points })
    }

    pub fn points(&self) -> &[(usize, Float)] {
        &self.points
    }

    /// Parse `size:weight,size:weight,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let points = s
            .split(',')
            .map(|item| {
                let (size, w) =
                    item.split_once(':').ok_or_else(|| Error::ConfigInvalid(format!("schedule entry `{item}` is not size:weight")))?;
                let size = size.trim().parse().map_err(|_| Error::ConfigInvalid(format!("bad size `{size}`")))?;
                let w = w.trim().parse().map_err(|_| Error::ConfigInvalid(format!("bad weight `{w}`")))?;
                Ok((size, w))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }
}

impl fmt::Display for WeightSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.points.iter().map(|(s, w)| format!("{s}:{w}")).collect();
        f.write_str(&items.join(","))
    }
}

pub fn embodied_loss_weight(train_size: usize, schedule: &WeightSchedule) -> Result<Float> {
    if train_size == 0 {
        return Err(Error::NonPositiveSize);
    }
    let pts = &schedule.points;
    let raw = if train_size <= pts[0].0 {
        pts[0].1
    } else if train_size >= pts[pts.len() - 1].0 {
        pts[pts.len() - 1].1
    } else {
        let i = pts.iter().position(|&(s, _)| s >= train_size).expect("inside range");
        let ((s0, w0), (s1, w1)) = (pts[i - 1], pts[i]);
        let t = ((train_size as Float).ln() - (s0 as Float).ln()) / ((s1 as Float).ln() - (s0 as Float).ln());
        w0 + t * (w1 - w0)
    };
    Ok(raw.clamp(0.1, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[Float]) -> Tensor {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn cce_of_exact_prediction_is_clip_limited() {
        let p = t(&[1, 3], &[0.0, 1.0, 0.0]);
        let y = p.clone();
        let expected = -(1.0 - CLIP).ln() / 3.0;
        assert!((categorical_cross_entropy(&p, &y).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn cce_of_uniform_prediction() {
        let p = Tensor::filled(&[4, 10], 0.1);
        let mut y = Tensor::zeros(&[4, 10]);
        for (i, c) in [3, 0, 9, 5].into_iter().enumerate() {
            y.data_mut()[i * 10 + c] = 1.0;
        }
        let h = categorical_cross_entropy(&p, &y).unwrap();
        assert!((h - (10.0 as Float).ln() / 10.0).abs() < 1e-12);
        assert!((h - 0.23026).abs() < 1e-5);
    }

    #[test]
    fn bce_at_one_half_is_ln_two() {
        let z = Tensor::filled(&[2, 16], 0.5);
        let y = Tensor::from_fn(&[2, 16], |i| (i % 3 == 0) as u8 as Float);
        assert!((binary_cross_entropy(&z, &y).unwrap() - (2.0 as Float).ln()).abs() < 1e-12);
        assert!(binary_cross_entropy(&y, &y).unwrap() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[3, 2]);
        assert!(categorical_cross_entropy(&a, &b).is_err());
        assert!(binary_cross_entropy_grad(&a, &b).is_err());
    }

    #[test]
    fn combined_loss_examples() {
        assert!((combined_loss(0.5, 0.2, LossWeights::new(1.0).unwrap()) - 0.7).abs() < 1e-15);
        assert!((combined_loss(0.5, 0.2, LossWeights::new(0.1).unwrap()) - 0.52).abs() < 1e-15);
        assert!(LossWeights::new(0.05).is_err());
    }

    #[test]
    fn schedule_defaults_and_bounds() {
        let s = WeightSchedule::default();
        assert_eq!(embodied_loss_weight(256, &s).unwrap(), 1.0);
        assert_eq!(embodied_loss_weight(60000, &s).unwrap(), 0.1);
        assert_eq!(embodied_loss_weight(1024, &s).unwrap(), 0.8);
        assert_eq!(embodied_loss_weight(10, &s).unwrap(), 1.0);
        assert_eq!(embodied_loss_weight(1_000_000, &s).unwrap(), 0.1);
        let mid = embodied_loss_weight(2048, &s).unwrap();
        assert!(mid < 0.8 && mid > 0.5);
        assert!(matches!(embodied_loss_weight(0, &s), Err(Error::NonPositiveSize)));
        for n in (1..70000).step_by(97) {
            let w = embodied_loss_weight(n, &s).unwrap();
            assert!((0.1..=1.0).contains(&w));
        }
    }

    #[test]
    fn schedule_parses_and_prints() {
        let s = WeightSchedule::parse("512:1,256:0.9").unwrap();
        assert_eq!(s.points(), &[(256, 0.9), (512, 1.0)]);
        assert_eq!(WeightSchedule::parse(&s.to_string()).unwrap(), s);
        assert!(WeightSchedule::parse("12").is_err());
    }
}
