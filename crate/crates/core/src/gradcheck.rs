//! Central finite-difference checks of every analytic gradient.
//!
//! Each check compares the backward pass against
//! `(f(θ + h) − f(θ − h)) / 2h` on a sample of coordinates, using only
//! forward evaluations. Relative error is
//! `|analytic − numeric| / max(|analytic|, |numeric|, floor)`. Parameters
//! feeding straight into batch norm have an exact gradient of zero, where the
//! difference quotient is pure round-off (about `ulp(f) / h`, near 1e-9 for
//! an O(1) loss); the default floor of 1e-4 turns those coordinates into an
//! absolute bound of 1e-8.

use rand::seq::index::sample;
use rand::Rng;

use crate::embodiment::{default_finger_codes, pretrain_stage1, PretrainConfig};
use crate::layers::{Activation, AvgPool, BatchNorm, Conv2d, Dense, Dropout, Layer, Mode};
use crate::loss::{
    binary_cross_entropy, binary_cross_entropy_grad, categorical_cross_entropy, categorical_cross_entropy_grad, LossWeights,
};
use crate::model::{build_model, ModelSpec, Network, Variant};
use crate::rng::{self, StreamRng};
use crate::{Float, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: Float,
    pub tolerance: Float,
    pub floor: Float,
    /// Coordinates checked per tensor; smaller tensors are checked fully.
    pub samples_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { step: 1e-6, tolerance: 1e-4, floor: 1e-4, samples_per_tensor: 24, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: Float,
}

impl GradReport {
    pub fn passed(&self, tolerance: Float) -> bool {
        self.max_rel_error <= tolerance
    }
}

pub fn relative_error(analytic: Float, numeric: Float, floor: Float) -> Float {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn coordinates(len: usize, cfg: &GradCheckConfig, rng: &mut StreamRng) -> Vec<usize> {
    if len <= cfg.samples_per_tensor {
        (0..len).collect()
    } else {
        let mut idx = sample(rng, len, cfg.samples_per_tensor).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Compare `analytic` with central differences of `f` over the coordinates
/// of one tensor, reached through `slot`.
fn compare<S, F>(analytic: &Tensor, mut slot: S, mut f: F, cfg: &GradCheckConfig, rng: &mut StreamRng) -> Result<(usize, Float)>
where
    S: FnMut(&mut dyn FnMut(&mut Tensor)),
    F: FnMut() -> Result<Float>,
{
    let coords = coordinates(analytic.len(), cfg, rng);
    let mut worst: Float = 0.0;
    for &i in &coords {
        let mut orig = 0.0;
        slot(&mut |t| {
            orig = t.data()[i];
            t.data_mut()[i] = orig + cfg.step;
        });
        let plus = f()?;
        slot(&mut |t| t.data_mut()[i] = orig - cfg.step);
        let minus = f()?;
        slot(&mut |t| t.data_mut()[i] = orig);
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let e = relative_error(analytic.data()[i], numeric, cfg.floor);
        worst = worst.max(e);
    }
    Ok((coords.len(), worst))
}

fn dot(a: &Tensor, b: &Tensor) -> Float {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Check one layer under the objective `Σ forward(x) ⊙ r` with a fixed
/// random `r`, covering the input and every trainable parameter.
pub fn check_layer(name: &str, layer: &mut dyn Layer, x: &Tensor, cfg: &GradCheckConfig) -> Result<GradReport> {
    let mut r = rng::stream(cfg.seed, 11);
    let y = layer.forward(x, Mode::Train)?;
    let weights = Tensor::from_fn(y.shape(), |_| r.gen_range(-1.0..1.0));
    let dx = layer.backward(&weights)?;
    let param_grads: Vec<Tensor> = layer.params().iter().map(|p| p.grad.clone()).collect();

    let mut checked = 0;
    let mut worst: Float = 0.0;

    let mut input = x.clone();
    let layer_cell = std::cell::RefCell::new(&mut *layer);
    let input_cell = std::cell::RefCell::new(&mut input);
    let (n, e) = compare(
        &dx,
        |edit| edit(&mut input_cell.borrow_mut()),
        || Ok(dot(&layer_cell.borrow_mut().forward(&input_cell.borrow(), Mode::Train)?, &weights)),
        cfg,
        &mut r,
    )?;
    checked += n;
    worst = worst.max(e);

    for (pi, grad) in param_grads.iter().enumerate() {
        let (n, e) = compare(
            grad,
            |edit| edit(&mut layer_cell.borrow_mut().params_mut()[pi].value),
            || Ok(dot(&layer_cell.borrow_mut().forward(x, Mode::Train)?, &weights)),
            cfg,
            &mut r,
        )?;
        checked += n;
        worst = worst.max(e);
    }
    Ok(GradReport { name: name.to_string(), checked, max_rel_error: worst })
}

/// Check a loss gradient with respect to its prediction argument.
pub fn check_loss(
    name: &str,
    loss: fn(&Tensor, &Tensor) -> Result<Float>,
    grad: fn(&Tensor, &Tensor) -> Result<Tensor>,
    pred: &Tensor,
    target: &Tensor,
    cfg: &GradCheckConfig,
) -> Result<GradReport> {
    let mut r = rng::stream(cfg.seed, 12);
    let analytic = grad(pred, target)?;
    let cell = std::cell::RefCell::new(pred.clone());
    let (checked, worst) = compare(&analytic, |edit| edit(&mut cell.borrow_mut()), || loss(&cell.borrow(), target), cfg, &mut r)?;
    Ok(GradReport { name: name.to_string(), checked, max_rel_error: worst })
}

/// End-to-end check of a network's combined loss with dropout masks frozen.
pub fn check_network(name: &str, net: &mut Network, x: &Tensor, labels: &[u8], cfg: &GradCheckConfig) -> Result<GradReport> {
    let mut r = rng::stream(cfg.seed, 13);
    // masks drawn here are reused by every finite-difference evaluation
    net.set_dropout_frozen(true);
    net.loss_and_grads(x, labels)?;
    let grads: Vec<Tensor> = net.params_mut().iter().map(|p| p.grad.clone()).collect();

    let cell = std::cell::RefCell::new(&mut *net);
    let objective = || -> Result<Float> {
        let mut n = cell.borrow_mut();
        let out = n.forward(x, Mode::Train)?;
        Ok(n.loss(&out, labels)?.total)
    };
    let mut checked = 0;
    let mut worst: Float = 0.0;
    for (pi, grad) in grads.iter().enumerate() {
        let (n, e) = compare(grad, |edit| edit(&mut cell.borrow_mut().params_mut()[pi].value), &objective, cfg, &mut r)?;
        checked += n;
        worst = worst.max(e);
    }
    cell.borrow_mut().set_dropout_frozen(false);
    Ok(GradReport { name: name.to_string(), checked, max_rel_error: worst })
}

fn random_tensor(shape: &[usize], lo: Float, hi: Float, r: &mut StreamRng) -> Tensor {
    Tensor::from_fn(shape, |_| r.gen_range(lo..hi))
}

/// Every layer type, both losses, and all three network variants.
pub fn run_suite(cfg: &GradCheckConfig) -> Result<Vec<GradReport>> {
    let mut r = rng::stream(cfg.seed, 14);
    let mut reports = Vec::new();

    let x2 = random_tensor(&[5, 7], -1.0, 1.0, &mut r);
    for (name, act) in [
        ("dense/none", Activation::None),
        ("dense/relu", Activation::Relu),
        ("dense/sigmoid", Activation::Sigmoid),
        ("dense/softmax", Activation::Softmax),
    ] {
        let mut layer = Dense::new(name, 7, 4, act, &mut r);
        layer.bias.value = random_tensor(&[4], -0.5, 0.5, &mut r);
        reports.push(check_layer(name, &mut layer, &x2, cfg)?);
    }

    let img = random_tensor(&[2, 6, 5, 3], -1.0, 1.0, &mut r);
    let mut conv = Conv2d::new("conv", 3, 3, 4, &mut r);
    conv.bias.value = random_tensor(&[4], -0.5, 0.5, &mut r);
    reports.push(check_layer("conv2d", &mut conv, &img, cfg)?);
    reports.push(check_layer("avgpool", &mut AvgPool::new("pool", 3, 2), &img, cfg)?);

    let mut bn = BatchNorm::new("bn", 3);
    bn.gamma.value = random_tensor(&[3], 0.5, 1.5, &mut r);
    bn.beta.value = random_tensor(&[3], -0.5, 0.5, &mut r);
    reports.push(check_layer("batchnorm/spatial", &mut bn, &img, cfg)?);
    let mut bn = BatchNorm::new("bn", 7);
    bn.gamma.value = random_tensor(&[7], 0.5, 1.5, &mut r);
    reports.push(check_layer("batchnorm/dense", &mut bn, &x2, cfg)?);

    let mut drop = Dropout::new("dropout", 0.5, rng::stream(cfg.seed, 15));
    drop.set_frozen(true);
    drop.forward(&x2, Mode::Train)?;
    reports.push(check_layer("dropout", &mut drop, &x2, cfg)?);

    let mut probs = random_tensor(&[4, 10], 0.05, 1.0, &mut r);
    crate::layers::softmax_rows(&mut probs);
    let labels = [3u8, 0, 9, 5];
    reports.push(check_loss(
        "loss/categorical",
        categorical_cross_entropy,
        categorical_cross_entropy_grad,
        &probs,
        &crate::model::one_hot(&labels),
        cfg,
    )?);
    let z = random_tensor(&[4, 16], 0.05, 0.95, &mut r);
    let y = random_tensor(&[4, 16], 0.0, 1.0, &mut r);
    reports.push(check_loss("loss/binary", binary_cross_entropy, binary_cross_entropy_grad, &z, &y, cfg)?);

    let images = random_tensor(&[4, 28, 28, 1], 0.0, 1.0, &mut r);
    let link = pretrain_stage1(&default_finger_codes(), &PretrainConfig { seed: cfg.seed, ..Default::default() })?;
    for variant in [Variant::Baseline, Variant::InceptionLike, Variant::Embodied] {
        let mut spec = ModelSpec::new(variant);
        spec.loss_weights = LossWeights::new(0.5)?;
        if variant == Variant::Embodied {
            spec = spec.with_link(link.clone());
        }
        let mut net = build_model(&spec, cfg.seed)?;
        reports.push(check_network(&format!("model/{variant}"), &mut net, &images, &labels, cfg)?);
    }
    Ok(reports)
}
