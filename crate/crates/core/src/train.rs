//! Mini-batch training and evaluation.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embodiment::argmax;
use crate::idx::Dataset;
use crate::layers::Mode;
use crate::model::Network;
use crate::optim::{adam_step, AdamState, OptimizerConfig};
use crate::{Error, Float, Result, Tensor, IMAGE_SIDE, NUM_CLASSES};

/// Examples per forward pass during evaluation. Eval-mode outputs do not
/// depend on it.
pub const EVAL_BATCH: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    /// Example-weighted mean of the combined loss over the epoch.
    pub mean_loss: Float,
    /// Fraction of training examples classified correctly by the train-mode
    /// forward passes of the epoch.
    pub accuracy: Float,
    pub steps: usize,
}

/// Gather examples into a `(batch, 28, 28, 1)` input tensor.
pub fn make_batch(data: &Dataset, indices: &[usize]) -> Tensor {
    let n = data.pixels_per_image();
    let mut buf = Vec::with_capacity(indices.len() * n);
    for &i in indices {
        buf.extend_from_slice(data.image(i));
    }
    Tensor::from_vec(&[indices.len(), IMAGE_SIDE, IMAGE_SIDE, 1], buf).expect("MNIST images are 28x28")
}

fn count_correct(probs: &Tensor, labels: &[u8]) -> usize {
    probs.data().chunks_exact(NUM_CLASSES).zip(labels).filter(|(row, &l)| argmax(row) == l as usize).count()
}

/// One pass over `data` in shuffled mini-batches, the last one possibly
/// short, with one Adam step per batch.
pub fn train_epoch(
    net: &mut Network,
    adam: &mut AdamState,
    opt: &OptimizerConfig,
    data: &Dataset,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<EpochMetrics> {
    if data.count() == 0 {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::ConfigInvalid("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..data.count()).collect();
    order.shuffle(rng);
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let mut steps = 0;
    for chunk in order.chunks(batch_size) {
        let x = make_batch(data, chunk);
        let labels: Vec<u8> = chunk.iter().map(|&i| data.labels.labels[i]).collect();
        let (loss, out) = net.loss_and_grads(&x, &labels)?;
        if !loss.total.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss at step {steps}")));
        }
        adam_step(&mut net.params_mut(), adam, opt)?;
        loss_sum += loss.total * chunk.len() as Float;
        correct += count_correct(&out.out1, &labels);
        steps += 1;
    }
    Ok(EpochMetrics { mean_loss: loss_sum / data.count() as Float, accuracy: correct as Float / data.count() as Float, steps })
}

/// Number of examples whose most probable class equals the label, with
/// dropout off and batch-norm running statistics.
pub fn count_correct_eval(net: &mut Network, data: &Dataset) -> Result<usize> {
    let mut correct = 0;
    let all: Vec<usize> = (0..data.count()).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let out = net.forward(&make_batch(data, chunk), Mode::Eval)?;
        let labels: Vec<u8> = chunk.iter().map(|&i| data.labels.labels[i]).collect();
        correct += count_correct(&out.out1, &labels);
    }
    Ok(correct)
}

pub fn evaluate(net: &mut Network, data: &Dataset) -> Result<Float> {
    if data.count() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(count_correct_eval(net, data)? as Float / data.count() as Float)
}
