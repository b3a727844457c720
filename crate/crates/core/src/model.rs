//! The three digit classifiers.
//!
//! Shared trunk (layer numbers follow the architecture table):
//!
//! ```text
//!  2 conv 3x3x6      3 avgpool 3/2   4 batchnorm   5 dropout 0.2
//!  6 conv 3x3x16     7 avgpool 3/2   8 batchnorm   9 dropout 0.2
//! 14 flatten (784)
//! 16 dense 120 relu 17 batchnorm    18 dropout 0.5
//! 19 dense 84 relu  20 batchnorm    21 dropout 0.5
//! 22 dense 10 softmax (classifier, Out1)
//! ```
//!
//! The inception-like variant adds layer 15, a 10-unit softmax on the
//! flattened features trained against the class (Out2), not wired to 22.
//! The embodied variant makes layer 15 a 16-unit sigmoid trained against
//! the finger code of the class, and feeds it together with layer 21 into
//! the classifier, whose 16→10 block starts from the stage-1 link.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::embodiment::{default_finger_codes, FingerCodeTable, PretrainedLink};
use crate::layers::checkpoint::Checkpoint;
use crate::layers::{glorot_uniform, Activation, AvgPool, BatchNorm, Conv2d, Dense, Dropout, Layer, Mode, Param, BN_EPSILON, BN_MOMENTUM};
use crate::loss::{
    binary_cross_entropy, binary_cross_entropy_grad, categorical_cross_entropy, categorical_cross_entropy_grad, combined_loss, LossWeights,
};
use crate::{rng, Error, Float, Result, Tensor, FINGER_CODE_LEN, IMAGE_SIDE, NUM_CLASSES};

pub const FLAT_WIDTH: usize = 7 * 7 * 16;
const TRUNK_WIDTH: usize = 84;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Embodied,
    InceptionLike,
    Baseline,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Embodied, Variant::InceptionLike, Variant::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::InceptionLike => "inception",
            Variant::Embodied => "embodied",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Variant::Baseline),
            "inception" | "inception-like" | "inceptionlike" => Ok(Variant::InceptionLike),
            "embodied" => Ok(Variant::Embodied),
            other => Err(Error::ConfigInvalid(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerHyper {
    pub conv_dropout: Float,
    pub dense_dropout: Float,
    pub bn_momentum: Float,
    pub bn_epsilon: Float,
    pub bn_zero_debias: bool,
}

impl Default for LayerHyper {
    fn default() -> Self {
        LayerHyper { conv_dropout: 0.2, dense_dropout: 0.5, bn_momentum: BN_MOMENTUM, bn_epsilon: BN_EPSILON, bn_zero_debias: true }
    }
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub variant: Variant,
    pub pretrained_link: Option<PretrainedLink>,
    pub loss_weights: LossWeights,
    /// Out2 targets of the embodied variant.
    pub finger_codes: FingerCodeTable,
    pub hyper: LayerHyper,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        ModelSpec {
            variant,
            pretrained_link: None,
            loss_weights: LossWeights { classification_weight: 1.0, embodied_weight: 1.0 },
            finger_codes: default_finger_codes(),
            hyper: LayerHyper::default(),
        }
    }

    pub fn with_link(mut self, link: PretrainedLink) -> Self {
        self.pretrained_link = Some(link);
        self
    }
}

/// Network outputs for one batch.
#[derive(Clone, Debug)]
pub struct Outputs {
    /// `(batch, 10)` class probabilities.
    pub out1: Tensor,
    /// Auxiliary head: `(batch, 16)` finger activations for the embodied
    /// variant, `(batch, 10)` class probabilities for the inception-like one.
    pub out2: Option<Tensor>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchLoss {
    pub total: Float,
    pub classification: Float,
    pub auxiliary: Float,
}

#[derive(Clone, Debug)]
pub struct Network {
    variant: Variant,
    pub loss_weights: LossWeights,
    finger_codes: FingerCodeTable,
    conv1: Conv2d,
    pool1: AvgPool,
    bn1: BatchNorm,
    drop1: Dropout,
    conv2: Conv2d,
    pool2: AvgPool,
    bn2: BatchNorm,
    drop2: Dropout,
    dense1: Dense,
    bn3: BatchNorm,
    drop3: Dropout,
    dense2: Dense,
    bn4: BatchNorm,
    drop4: Dropout,
    aux: Option<Dense>,
    classifier: Dense,
    pooled_shape: Vec<usize>,
}

/// Parameter count of one named layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCount {
    pub name: String,
    /// Row of the architecture table this layer implements.
    pub table_row: u8,
    pub count: usize,
}

pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Network> {
    let h = spec.hyper;
    let init = |row: u64| rng::stream(seed, rng::INIT_BASE + row);
    let drop = |name: &str, row: u64, rate: Float| Dropout::new(name, rate, rng::stream(seed, rng::DROPOUT_BASE + row));
    let bn = |name: &str, c: usize| {
        let mut layer = BatchNorm::with_hyper(name, c, h.bn_momentum, h.bn_epsilon);
        layer.zero_debias = h.bn_zero_debias;
        layer
    };

    let (aux, classifier) = match spec.variant {
        Variant::Baseline => (None, Dense::new("classifier", TRUNK_WIDTH, NUM_CLASSES, Activation::Softmax, &mut init(22))),
        Variant::InceptionLike => (
            Some(Dense::new("aux", FLAT_WIDTH, NUM_CLASSES, Activation::Softmax, &mut init(15))),
            Dense::new("classifier", TRUNK_WIDTH, NUM_CLASSES, Activation::Softmax, &mut init(22)),
        ),
        Variant::Embodied => {
            let link = spec.pretrained_link.as_ref().ok_or(Error::MissingPretrainedLink)?;
            if link.weights.shape() != [FINGER_CODE_LEN, NUM_CLASSES] {
                return Err(Error::shape("build_model", format!("link weights {:?}", link.weights.shape())));
            }
            let width = FINGER_CODE_LEN + TRUNK_WIDTH;
            let mut weights = glorot_uniform(&[width, NUM_CLASSES], width, NUM_CLASSES, &mut init(22));
            weights.data_mut()[..FINGER_CODE_LEN * NUM_CLASSES].copy_from_slice(link.weights.data());
            (
                Some(Dense::new("aux", FLAT_WIDTH, FINGER_CODE_LEN, Activation::Sigmoid, &mut init(15))),
                Dense::from_params("classifier", weights, link.bias.clone(), Activation::Softmax),
            )
        }
    };

    Ok(Network {
        variant: spec.variant,
        loss_weights: spec.loss_weights,
        finger_codes: spec.finger_codes.clone(),
        conv1: Conv2d::new("conv1", 3, 1, 6, &mut init(2)),
        pool1: AvgPool::new("pool1", 3, 2),
        bn1: bn("bn1", 6),
        drop1: drop("drop1", 5, h.conv_dropout),
        conv2: Conv2d::new("conv2", 3, 6, 16, &mut init(6)),
        pool2: AvgPool::new("pool2", 3, 2),
        bn2: bn("bn2", 16),
        drop2: drop("drop2", 9, h.conv_dropout),
        dense1: Dense::new("dense1", FLAT_WIDTH, 120, Activation::Relu, &mut init(16)),
        bn3: bn("bn3", 120),
        drop3: drop("drop3", 18, h.dense_dropout),
        dense2: Dense::new("dense2", 120, TRUNK_WIDTH, Activation::Relu, &mut init(19)),
        bn4: bn("bn4", TRUNK_WIDTH),
        drop4: drop("drop4", 21, h.dense_dropout),
        aux,
        classifier,
        pooled_shape: Vec::new(),
    })
}

fn concat_cols(a: &Tensor, b: &Tensor) -> Tensor {
    let (rows, ca) = a.as_matrix_dims();
    let (_, cb) = b.as_matrix_dims();
    let mut out = Vec::with_capacity(rows * (ca + cb));
    for (ra, rb) in a.data().chunks_exact(ca).zip(b.data().chunks_exact(cb)) {
        out.extend_from_slice(ra);
        out.extend_from_slice(rb);
    }
    Tensor::from_vec(&[rows, ca + cb], out).expect("concat shape")
}

fn split_cols(t: &Tensor, left: usize) -> (Tensor, Tensor) {
    let (rows, cols) = t.as_matrix_dims();
    let right = cols - left;
    let mut a = Vec::with_capacity(rows * left);
    let mut b = Vec::with_capacity(rows * right);
    for row in t.data().chunks_exact(cols) {
        a.extend_from_slice(&row[..left]);
        b.extend_from_slice(&row[left..]);
    }
    (Tensor::from_vec(&[rows, left], a).expect("split"), Tensor::from_vec(&[rows, right], b).expect("split"))
}

pub fn one_hot(labels: &[u8]) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), NUM_CLASSES]);
    for (row, &l) in t.data_mut().chunks_exact_mut(NUM_CLASSES).zip(labels) {
        row[l as usize] = 1.0;
    }
    t
}

impl Network {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn finger_codes(&self) -> &FingerCodeTable {
        &self.finger_codes
    }

    fn trunk(&self) -> [&dyn Layer; 14] {
        [
            &self.conv1,
            &self.pool1,
            &self.bn1,
            &self.drop1,
            &self.conv2,
            &self.pool2,
            &self.bn2,
            &self.drop2,
            &self.dense1,
            &self.bn3,
            &self.drop3,
            &self.dense2,
            &self.bn4,
            &self.drop4,
        ]
    }

    /// Every layer in architecture-table order.
    pub fn layers(&self) -> Vec<&dyn Layer> {
        let mut out: Vec<&dyn Layer> = self.trunk().to_vec();
        if let Some(aux) = &self.aux {
            out.insert(8, aux);
        }
        out.push(&self.classifier);
        out
    }

    fn layer_mut(&mut self, name: &str) -> Option<&mut dyn Layer> {
        let l: &mut dyn Layer = match name {
            "conv1" => &mut self.conv1,
            "bn1" => &mut self.bn1,
            "conv2" => &mut self.conv2,
            "bn2" => &mut self.bn2,
            "dense1" => &mut self.dense1,
            "bn3" => &mut self.bn3,
            "dense2" => &mut self.dense2,
            "bn4" => &mut self.bn4,
            "classifier" => &mut self.classifier,
            "aux" => self.aux.as_mut()?,
            _ => return None,
        };
        Some(l)
    }

    /// Trainable parameters in a fixed order (the order Adam state follows).
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        out.extend(self.conv1.params_mut());
        out.extend(self.bn1.params_mut());
        out.extend(self.conv2.params_mut());
        out.extend(self.bn2.params_mut());
        out.extend(self.dense1.params_mut());
        out.extend(self.bn3.params_mut());
        out.extend(self.dense2.params_mut());
        out.extend(self.bn4.params_mut());
        if let Some(aux) = self.aux.as_mut() {
            out.extend(aux.params_mut());
        }
        out.extend(self.classifier.params_mut());
        out
    }

    pub fn params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        for layer in self.layers() {
            let names = layer.tensors();
            for (param, (tname, _)) in layer.params().into_iter().zip(names) {
                out.push((format!("{}.{}", layer.name(), tname), param));
            }
        }
        out
    }

    pub fn set_dropout_frozen(&mut self, frozen: bool) {
        for d in [&mut self.drop1, &mut self.drop2, &mut self.drop3, &mut self.drop4] {
            d.set_frozen(frozen);
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Outputs> {
        match *x.shape() {
            [_, IMAGE_SIDE, IMAGE_SIDE, 1] => {}
            _ => return Err(Error::shape("forward_model", format!("input {:?}, expected (batch, 28, 28, 1)", x.shape()))),
        }
        let batch = x.shape()[0];
        let mut h = self.conv1.forward(x, mode)?;
        h = self.pool1.forward(&h, mode)?;
        h = self.bn1.forward(&h, mode)?;
        h = self.drop1.forward(&h, mode)?;
        h = self.conv2.forward(&h, mode)?;
        h = self.pool2.forward(&h, mode)?;
        h = self.bn2.forward(&h, mode)?;
        h = self.drop2.forward(&h, mode)?;
        self.pooled_shape = h.shape().to_vec();
        let flat = h.reshape(&[batch, FLAT_WIDTH])?;

        let out2 = match self.aux.as_mut() {
            Some(aux) => Some(aux.forward(&flat, mode)?),
            None => None,
        };

        let mut h = self.dense1.forward(&flat, mode)?;
        h = self.bn3.forward(&h, mode)?;
        h = self.drop3.forward(&h, mode)?;
        h = self.dense2.forward(&h, mode)?;
        h = self.bn4.forward(&h, mode)?;
        h = self.drop4.forward(&h, mode)?;

        let classifier_in = match (&self.variant, &out2) {
            (Variant::Embodied, Some(fingers)) => concat_cols(fingers, &h),
            _ => h,
        };
        let out1 = self.classifier.forward(&classifier_in, mode)?;
        Ok(Outputs { out1, out2 })
    }

    /// Backpropagate output gradients through the most recent train-mode
    /// forward. Returns the gradient with respect to the input images.
    pub fn backward(&mut self, d_out1: &Tensor, d_out2: Option<&Tensor>) -> Result<Tensor> {
        let d_in = self.classifier.backward(d_out1)?;
        let (mut d_aux, d_trunk) = match self.variant {
            Variant::Embodied => {
                let (a, t) = split_cols(&d_in, FINGER_CODE_LEN);
                (Some(a), t)
            }
            _ => (None, d_in),
        };
        if let Some(d2) = d_out2 {
            match d_aux.as_mut() {
                Some(acc) => acc.add_scaled(d2, 1.0)?,
                None => d_aux = Some(d2.clone()),
            }
        }

        let mut g = self.drop4.backward(&d_trunk)?;
        g = self.bn4.backward(&g)?;
        g = self.dense2.backward(&g)?;
        g = self.drop3.backward(&g)?;
        g = self.bn3.backward(&g)?;
        let mut d_flat = self.dense1.backward(&g)?;

        if let (Some(aux), Some(d)) = (self.aux.as_mut(), d_aux.as_ref()) {
            d_flat.add_scaled(&aux.backward(d)?, 1.0)?;
        }

        let mut g = d_flat.reshape(&self.pooled_shape)?;
        g = self.drop2.backward(&g)?;
        g = self.bn2.backward(&g)?;
        g = self.pool2.backward(&g)?;
        g = self.conv2.backward(&g)?;
        g = self.drop1.backward(&g)?;
        g = self.bn1.backward(&g)?;
        g = self.pool1.backward(&g)?;
        self.conv1.backward(&g)
    }

    /// Out2 targets for a batch of labels, if this variant has an auxiliary
    /// head.
    pub fn aux_targets(&self, labels: &[u8]) -> Option<Tensor> {
        match self.variant {
            Variant::Baseline => None,
            Variant::InceptionLike => Some(one_hot(labels)),
            Variant::Embodied => Some(Tensor::from_fn(&[labels.len(), FINGER_CODE_LEN], |i| {
                self.finger_codes.code(labels[i / FINGER_CODE_LEN])[i % FINGER_CODE_LEN]
            })),
        }
    }

    /// Weighted loss of a set of outputs against the labels.
    pub fn loss(&self, out: &Outputs, labels: &[u8]) -> Result<BatchLoss> {
        let classification = categorical_cross_entropy(&out.out1, &one_hot(labels))?;
        let auxiliary = match (self.variant, &out.out2, self.aux_targets(labels)) {
            (Variant::Embodied, Some(z), Some(y)) => binary_cross_entropy(z, &y)?,
            (Variant::InceptionLike, Some(p), Some(y)) => categorical_cross_entropy(p, &y)?,
            _ => 0.0,
        };
        let total = combined_loss(classification, auxiliary, self.loss_weights);
        Ok(BatchLoss { total, classification, auxiliary })
    }

    /// Train-mode forward, loss, and backward for one batch. Parameter
    /// gradients are left on the layers.
    pub fn loss_and_grads(&mut self, x: &Tensor, labels: &[u8]) -> Result<(BatchLoss, Outputs)> {
        let out = self.forward(x, Mode::Train)?;
        let loss = self.loss(&out, labels)?;
        let w = self.loss_weights;
        let mut d1 = categorical_cross_entropy_grad(&out.out1, &one_hot(labels))?;
        d1.data_mut().iter_mut().for_each(|g| *g *= w.classification_weight);
        let d2 = match (self.variant, &out.out2, self.aux_targets(labels)) {
            (Variant::Embodied, Some(z), Some(y)) => Some(binary_cross_entropy_grad(z, &y)?),
            (Variant::InceptionLike, Some(p), Some(y)) => Some(categorical_cross_entropy_grad(p, &y)?),
            _ => None,
        }
        .map(|mut g| {
            g.data_mut().iter_mut().for_each(|v| *v *= w.embodied_weight);
            g
        });
        self.backward(&d1, d2.as_ref())?;
        Ok((loss, out))
    }

    pub fn param_count(&self) -> Vec<LayerCount> {
        const ROWS: [(&str, u8); 16] = [
            ("conv1", 2),
            ("pool1", 3),
            ("bn1", 4),
            ("drop1", 5),
            ("conv2", 6),
            ("pool2", 7),
            ("bn2", 8),
            ("drop2", 9),
            ("aux", 15),
            ("dense1", 16),
            ("bn3", 17),
            ("drop3", 18),
            ("dense2", 19),
            ("bn4", 20),
            ("drop4", 21),
            ("classifier", 22),
        ];
        self.layers()
            .iter()
            .map(|l| LayerCount {
                name: l.name().to_string(),
                table_row: ROWS.iter().find(|(n, _)| *n == l.name()).map(|&(_, r)| r).unwrap_or(0),
                count: l.param_count(),
            })
            .collect()
    }

    pub fn total_params(&self) -> usize {
        self.param_count().iter().map(|c| c.count).sum()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.set_meta("kind", "network");
        c.set_meta("variant", self.variant);
        c.set_meta("finger_codes_sha256", self.finger_codes.sha256());
        c.set_meta("classification_weight", format!("{:e}", self.loss_weights.classification_weight));
        c.set_meta("embodied_weight", format!("{:e}", self.loss_weights.embodied_weight));
        for layer in self.layers() {
            for (name, t) in layer.tensors() {
                c.push(format!("{}.{name}", layer.name()), t.clone());
            }
        }
        for bn in [&self.bn1, &self.bn2, &self.bn3, &self.bn4] {
            c.set_meta(&format!("{}.updates", bn.name()), bn.updates);
        }
        c
    }

    /// Overwrite all stored tensors from a checkpoint of the same variant.
    pub fn load_checkpoint(&mut self, c: &Checkpoint) -> Result<()> {
        if c.meta("variant") != Some(self.variant.as_str()) {
            return Err(Error::Checkpoint(format!("checkpoint variant {:?} does not match {}", c.meta("variant"), self.variant)));
        }
        let names: Vec<(String, String)> = self
            .layers()
            .iter()
            .flat_map(|l| l.tensors().into_iter().map(|(t, _)| (l.name().to_string(), t.to_string())).collect::<Vec<_>>())
            .collect();
        for (layer, tensor) in names {
            let value = c.take(&format!("{layer}.{tensor}"))?;
            let slot = self
                .layer_mut(&layer)
                .and_then(|l| l.tensor_mut(&tensor))
                .ok_or_else(|| Error::Checkpoint(format!("no slot for {layer}.{tensor}")))?;
            if slot.shape() != value.shape() {
                return Err(Error::Checkpoint(format!("{layer}.{tensor}: shape {:?} vs {:?}", value.shape(), slot.shape())));
            }
            *slot = value;
        }
        for bn in [&mut self.bn1, &mut self.bn2, &mut self.bn3, &mut self.bn4] {
            let key = format!("{}.updates", bn.name());
            bn.updates = c.meta(&key).and_then(|v| v.parse().ok()).unwrap_or(0);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embodiment::{pretrain_stage1, PretrainConfig};

    fn embodied_spec() -> ModelSpec {
        let link = pretrain_stage1(&default_finger_codes(), &PretrainConfig::default()).unwrap();
        ModelSpec::new(Variant::Embodied).with_link(link)
    }

    fn count(net: &Network, name: &str) -> usize {
        net.param_count().iter().find(|c| c.name == name).unwrap().count
    }

    #[test]
    fn parameter_counts_match_architecture_table() {
        let base = build_model(&ModelSpec::new(Variant::Baseline), 0).unwrap();
        for (name, n) in [
            ("conv1", 60),
            ("bn1", 24),
            ("conv2", 880),
            ("bn2", 64),
            ("dense1", 94200),
            ("bn3", 480),
            ("dense2", 10164),
            ("bn4", 336),
            ("classifier", 850),
        ] {
            assert_eq!(count(&base, name), n, "{name}");
        }
        assert!(base.param_count().iter().all(|c| c.name != "aux"));
        let emb = build_model(&embodied_spec(), 0).unwrap();
        assert_eq!(count(&emb, "classifier"), 1010);
        assert_eq!(count(&emb, "aux"), 12560);
        let inc = build_model(&ModelSpec::new(Variant::InceptionLike), 0).unwrap();
        assert_eq!(count(&inc, "classifier"), 850);
        assert_eq!(count(&inc, "aux"), 7850);
    }

    #[test]
    fn embodied_requires_link() {
        assert!(matches!(build_model(&ModelSpec::new(Variant::Embodied), 0), Err(Error::MissingPretrainedLink)));
    }

    #[test]
    fn shared_layers_have_identical_init() {
        let base = build_model(&ModelSpec::new(Variant::Baseline), 11).unwrap();
        let emb = build_model(&embodied_spec(), 11).unwrap();
        for name in ["conv1", "conv2", "dense1", "dense2", "bn1", "bn4"] {
            let a = base.layers().into_iter().find(|l| l.name() == name).unwrap().tensors();
            let b = emb.layers().into_iter().find(|l| l.name() == name).unwrap().tensors();
            for ((_, x), (_, y)) in a.iter().zip(&b) {
                assert_eq!(x, y, "{name}");
            }
        }
    }

    #[test]
    fn embodied_classifier_starts_from_link() {
        let spec = embodied_spec();
        let link = spec.pretrained_link.clone().unwrap();
        let net = build_model(&spec, 3).unwrap();
        assert_eq!(&net.classifier.weights.value.data()[..160], link.weights.data());
        assert_eq!(net.classifier.bias.value, link.bias);
    }

    #[test]
    fn output_shapes_and_ranges() {
        let x = Tensor::from_fn(&[3, 28, 28, 1], |i| ((i * 7919) % 256) as Float / 255.0);
        for spec in [ModelSpec::new(Variant::Baseline), ModelSpec::new(Variant::InceptionLike), embodied_spec()] {
            let mut net = build_model(&spec, 5).unwrap();
            for mode in [Mode::Train, Mode::Eval] {
                let out = net.forward(&x, mode).unwrap();
                assert_eq!(out.out1.shape(), &[3, 10]);
                for row in out.out1.data().chunks(10) {
                    assert!((row.iter().sum::<Float>() - 1.0).abs() < 1e-12);
                }
                match spec.variant {
                    Variant::Baseline => assert!(out.out2.is_none()),
                    Variant::InceptionLike => assert_eq!(out.out2.unwrap().shape(), &[3, 10]),
                    Variant::Embodied => {
                        let z = out.out2.unwrap();
                        assert_eq!(z.shape(), &[3, 16]);
                        assert!(z.data().iter().all(|&v| v > 0.0 && v < 1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weight_embodied_net_is_uninformative() {
        let mut net = build_model(&embodied_spec(), 0).unwrap();
        for name in ["conv1", "conv2", "dense1", "dense2", "aux", "classifier"] {
            let l = net.layer_mut(name).unwrap();
            for t in ["kernels", "weights", "bias"] {
                if let Some(v) = l.tensor_mut(t) {
                    v.fill(0.0);
                }
            }
        }
        let x = Tensor::filled(&[2, 28, 28, 1], 0.5);
        let out = net.forward(&x, Mode::Eval).unwrap();
        assert!(out.out1.data().iter().all(|&v| (v - 0.1).abs() < 1e-15));
        assert!(out.out2.unwrap().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let mut net = build_model(&ModelSpec::new(Variant::Baseline), 0).unwrap();
        assert!(matches!(net.forward(&Tensor::zeros(&[2, 28, 28]), Mode::Eval), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = embodied_spec();
        let net = build_model(&spec, 1).unwrap();
        let text = net.to_checkpoint().to_text();
        let mut other = build_model(&spec, 2).unwrap();
        other.load_checkpoint(&Checkpoint::parse(&text).unwrap()).unwrap();
        assert_eq!(other.to_checkpoint(), net.to_checkpoint());
        let mut base = build_model(&ModelSpec::new(Variant::Baseline), 0).unwrap();
        assert!(base.load_checkpoint(&Checkpoint::parse(&text).unwrap()).is_err());
    }
}
