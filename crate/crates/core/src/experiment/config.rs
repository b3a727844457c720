use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::idx::Sampling;
use crate::loss::{embodied_loss_weight, LossWeights, WeightSchedule};
use crate::model::Variant;
use crate::optim::OptimizerConfig;
use crate::{Error, Float, Result};

/// Size of the full MNIST training split.
pub const FULL_TRAIN_SIZE: usize = 60_000;

/// The experimental protocol: which cells of the (size × model × repetition)
/// grid to train, and how.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub epochs: usize,
    pub repetitions: usize,
    /// Mini-batch size below the full training split.
    pub batch_size: usize,
    /// Mini-batch size when training on all 60000 examples.
    pub full_batch_size: usize,
    pub base_seed: u64,
    pub models: Vec<Variant>,
    pub weight_schedule: WeightSchedule,
    /// Multiplier on the classification loss; 1 follows the stated loss.
    pub classification_weight: Float,
    pub alpha: f64,
    pub sampling: Sampling,
    /// Reuse the subset drawn with `base_seed` for every repetition instead
    /// of drawing a fresh one per repetition.
    pub fixed_subset: bool,
    pub optimizer: OptimizerConfig,
    /// Concurrent training runs. Does not affect results.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sizes: vec![256, 512, 1024, 3200, 6400, FULL_TRAIN_SIZE],
            epochs: 20,
            repetitions: 21,
            batch_size: 32,
            full_batch_size: 128,
            base_seed: 0,
            models: vec![Variant::Embodied, Variant::InceptionLike, Variant::Baseline],
            weight_schedule: WeightSchedule::default(),
            classification_weight: 1.0,
            alpha: 0.05,
            sampling: Sampling::Stratified,
            fixed_subset: false,
            optimizer: OptimizerConfig::default(),
            jobs: 1,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|s| s.trim().parse().map_err(|_| Error::ConfigInvalid(format!("{key}: cannot parse `{s}`")))).collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::ConfigInvalid(format!("{key}: cannot parse `{value}`")))
}

impl ExperimentConfig {
    pub fn batch_size_for(&self, size: usize) -> usize {
        if size >= FULL_TRAIN_SIZE {
            self.full_batch_size
        } else {
            self.batch_size
        }
    }

    pub fn subset_seed(&self, rep: usize) -> u64 {
        if self.fixed_subset {
            self.base_seed
        } else {
            self.base_seed + rep as u64
        }
    }

    pub fn model_seed(&self, rep: usize) -> u64 {
        self.base_seed + rep as u64
    }

    pub fn loss_weights(&self, size: usize) -> Result<LossWeights> {
        let mut w = LossWeights::new(embodied_loss_weight(size, &self.weight_schedule)?)?;
        w.classification_weight = self.classification_weight;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if self.repetitions < 2 {
            return bad("repetitions must be at least 2".into());
        }
        if self.sizes.is_empty() || self.models.is_empty() {
            return bad("sizes and models must be non-empty".into());
        }
        if let Some(&s) = self.sizes.iter().find(|&&s| s == 0 || s > FULL_TRAIN_SIZE) {
            return bad(format!("training size {s} outside 1..={FULL_TRAIN_SIZE}"));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].contains(m) {
                return bad(format!("model `{m}` listed twice"));
            }
        }
        if self.batch_size == 0 || self.full_batch_size == 0 || self.jobs == 0 {
            return bad("batch sizes and jobs must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if !(self.classification_weight > 0.0 && self.classification_weight.is_finite()) {
            return bad(format!("classification weight {} must be positive", self.classification_weight));
        }
        self.optimizer.validate()?;
        for &s in &self.sizes {
            self.loss_weights(s)?;
        }
        Ok(())
    }

    /// Every setting as `(key, value)` in a fixed order. Values parse back
    /// through [`ExperimentConfig::set`].
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let join = |v: Vec<String>| v.join(",");
        vec![
            ("sizes", join(self.sizes.iter().map(|s| s.to_string()).collect())),
            ("epochs", self.epochs.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("full_batch_size", self.full_batch_size.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("models", join(self.models.iter().map(|m| m.to_string()).collect())),
            ("weight_schedule", self.weight_schedule.to_string()),
            ("classification_weight", self.classification_weight.to_string()),
            ("alpha", self.alpha.to_string()),
            ("sampling", sampling_name(self.sampling).into()),
            ("fixed_subset", self.fixed_subset.to_string()),
            ("eta", self.optimizer.eta.to_string()),
            ("beta1", self.optimizer.beta1.to_string()),
            ("beta2", self.optimizer.beta2.to_string()),
            ("epsilon", self.optimizer.epsilon_hat.to_string()),
            ("jobs", self.jobs.to_string()),
        ]
    }

    /// Set one setting from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "sizes" => self.sizes = parse_list(key, value)?,
            "epochs" => self.epochs = parse_one(key, value)?,
            "repetitions" => self.repetitions = parse_one(key, value)?,
            "batch_size" => self.batch_size = parse_one(key, value)?,
            "full_batch_size" => self.full_batch_size = parse_one(key, value)?,
            "base_seed" => self.base_seed = parse_one(key, value)?,
            "models" => self.models = parse_list(key, value)?,
            "weight_schedule" => self.weight_schedule = WeightSchedule::parse(value)?,
            "classification_weight" => self.classification_weight = parse_one(key, value)?,
            "alpha" => self.alpha = parse_one(key, value)?,
            "sampling" => self.sampling = parse_sampling(value)?,
            "fixed_subset" => self.fixed_subset = parse_one(key, value)?,
            "eta" => self.optimizer.eta = parse_one(key, value)?,
            "beta1" => self.optimizer.beta1 = parse_one(key, value)?,
            "beta2" => self.optimizer.beta2 = parse_one(key, value)?,
            "epsilon" => self.optimizer.epsilon_hat = parse_one(key, value)?,
            "jobs" => self.jobs = parse_one(key, value)?,
            _ => return Err(Error::ConfigInvalid(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Apply `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped; keys unknown here are returned so the
    /// caller can handle them.
    pub fn apply_text(&mut self, text: &str) -> Result<Vec<(String, String)>> {
        let mut unknown = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ParseError { line: n + 1, msg: format!("expected key = value, got `{line}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if self.entries().iter().any(|(key, _)| *key == k) {
                self.set(k, v)?;
            } else {
                unknown.push((k.to_string(), v.to_string()));
            }
        }
        Ok(unknown)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<(String, String)>)> {
        let mut cfg = Self::default();
        let unknown = cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok((cfg, unknown))
    }

    /// Digest of every setting that can change a result (all but `jobs`).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k != "jobs" {
                h.update(format!("{k}={v}\n"));
            }
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sampling_name(s: Sampling) -> &'static str {
    match s {
        Sampling::Stratified => "stratified",
        Sampling::Uniform => "uniform",
    }
}

fn parse_sampling(s: &str) -> Result<Sampling> {
    match s.trim() {
        "stratified" => Ok(Sampling::Stratified),
        "uniform" => Ok(Sampling::Uniform),
        other => Err(Error::ConfigInvalid(format!("sampling must be stratified or uniform, got `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.sizes, [256, 512, 1024, 3200, 6400, 60000]);
        assert_eq!((c.epochs, c.repetitions), (20, 21));
        assert_eq!((c.batch_size_for(3200), c.batch_size_for(60000)), (32, 128));
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig { sizes: vec![512, 1024], base_seed: 9, fixed_subset: true, ..Default::default() };
        c.models = vec![Variant::Baseline, Variant::Embodied];
        let mut back = ExperimentConfig::default();
        assert!(back.apply_text(&c.to_text()).unwrap().is_empty());
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn jobs_do_not_change_the_hash() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { jobs: 4, ..Default::default() };
        let c = ExperimentConfig { base_seed: 1, ..Default::default() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn invalid_settings() {
        for (k, v) in [("epochs", "0"), ("repetitions", "1"), ("sizes", "0"), ("models", "baseline,baseline"), ("alpha", "1")] {
            let mut c = ExperimentConfig::default();
            c.set(k, v).unwrap();
            assert!(matches!(c.validate(), Err(Error::ConfigInvalid(_))), "{k}={v}");
        }
        assert!(ExperimentConfig::default().set("nope", "1").is_err());
        assert!(ExperimentConfig::default().set("epochs", "x").is_err());
    }

    #[test]
    fn seeds_per_repetition() {
        let c = ExperimentConfig { base_seed: 100, ..Default::default() };
        assert_eq!((c.subset_seed(3), c.model_seed(3)), (103, 103));
        let f = ExperimentConfig { fixed_subset: true, ..c };
        assert_eq!((f.subset_seed(3), f.model_seed(3)), (100, 103));
    }
}
