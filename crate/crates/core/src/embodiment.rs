//! Robot finger representations of the digits and the stage-1 training of
//! the 16→10 link from finger codes to number classes.
//!
//! A finger code holds 8 normalized motor values per hand, right hand
//! first. Within a hand the order is thumb (2 joints), index (2), middle
//! (2), then the single ring+pinky motor written twice so the coupled
//! fingers weigh as much as the others.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::layers::checkpoint::Checkpoint;
use crate::layers::{Activation, Dense, Layer, Mode};
use crate::loss::{categorical_cross_entropy, categorical_cross_entropy_grad};
use crate::optim::{adam_step, AdamState, OptimizerConfig};
use crate::{rng, Error, Float, Result, Tensor, FINGER_CODE_LEN, NUM_CLASSES};

pub const HAND_LEN: usize = FINGER_CODE_LEN / 2;

pub type FingerCode = [Float; FINGER_CODE_LEN];

#[derive(Clone, Debug, PartialEq)]
pub struct FingerCodeTable {
    pub codes: [FingerCode; NUM_CLASSES],
}

#[derive(Clone, Copy)]
enum Finger {
    Thumb,
    Index,
    Middle,
    RingPinky,
}

/// One hand showing `n` in American Sign Language counting.
fn hand(n: usize) -> [Float; HAND_LEN] {
    use Finger::*;
    let open: &[Finger] = match n {
        0 => &[],
        1 => &[Index],
        2 => &[Index, Middle],
        3 => &[Thumb, Index, Middle],
        4 => &[Index, Middle, RingPinky],
        5 => &[Thumb, Index, Middle, RingPinky],
        _ => unreachable!("a hand shows at most five"),
    };
    let mut code = [0.0; HAND_LEN];
    for f in open {
        let at = *f as usize * 2;
        code[at] = 1.0;
        code[at + 1] = 1.0;
    }
    code
}

/// Binary open/closed finger codes: 1–5 on the right hand, 6–9 as an open
/// right hand plus 1–4 on the left, 0 as two closed fists.
pub fn default_finger_codes() -> FingerCodeTable {
    let codes = std::array::from_fn(|d| {
        let (right, left) = if d <= 5 { (hand(d), hand(0)) } else { (hand(5), hand(d - 5)) };
        let mut code = [0.0; FINGER_CODE_LEN];
        code[..HAND_LEN].copy_from_slice(&right);
        code[HAND_LEN..].copy_from_slice(&left);
        code
    });
    FingerCodeTable { codes }
}

impl FingerCodeTable {
    pub fn new(codes: [FingerCode; NUM_CLASSES]) -> Result<Self> {
        let table = FingerCodeTable { codes };
        table.validate()?;
        Ok(table)
    }

    #[allow(clippy::useless_conversion)] // Float is f32 under the `f32` feature
    pub fn validate(&self) -> Result<()> {
        for (d, code) in self.codes.iter().enumerate() {
            if let Some(&v) = code.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::RangeViolation { digit: d as u8, value: f64::from(v) });
            }
        }
        for a in 0..NUM_CLASSES {
            for b in a + 1..NUM_CLASSES {
                if self.codes[a] == self.codes[b] {
                    return Err(Error::DuplicateCode { a: a as u8, b: b as u8 });
                }
            }
        }
        Ok(())
    }

    pub fn code(&self, digit: u8) -> &FingerCode {
        &self.codes[digit as usize]
    }

    /// `(10, 16)` tensor with row `d` holding the code of digit `d`.
    pub fn as_tensor(&self) -> Tensor {
        Tensor::from_fn(&[NUM_CLASSES, FINGER_CODE_LEN], |i| self.codes[i / FINGER_CODE_LEN][i % FINGER_CODE_LEN])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# digit, then 16 motor values: right hand (thumb x2, index x2, middle x2, ring+pinky x2), left hand\n");
        for (d, code) in self.codes.iter().enumerate() {
            let _ = write!(out, "{d}");
            for v in code {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut codes: [Option<FingerCode>; NUM_CLASSES] = [None; NUM_CLASSES];
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != FINGER_CODE_LEN + 1 {
                return Err(Error::ParseError {
                    line: line_no,
                    msg: format!("expected a digit and {FINGER_CODE_LEN} values, found {} fields", fields.len()),
                });
            }
            let digit: usize = fields[0]
                .parse()
                .ok()
                .filter(|&d| d < NUM_CLASSES)
                .ok_or_else(|| Error::ParseError { line: line_no, msg: format!("`{}` is not a digit", fields[0]) })?;
            if codes[digit].is_some() {
                return Err(Error::ParseError { line: line_no, msg: format!("digit {digit} listed twice") });
            }
            let mut code = [0.0; FINGER_CODE_LEN];
            for (slot, field) in code.iter_mut().zip(&fields[1..]) {
                *slot = field.parse().map_err(|_| Error::ParseError { line: line_no, msg: format!("`{field}` is not a number") })?;
            }
            codes[digit] = Some(code);
        }
        let mut out = [[0.0; FINGER_CODE_LEN]; NUM_CLASSES];
        for (d, code) in codes.into_iter().enumerate() {
            out[d] = code.ok_or(Error::MissingDigit(d as u8))?;
        }
        Self::new(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_finger_codes(path: &Path) -> Result<FingerCodeTable> {
    FingerCodeTable::parse(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainConfig {
    pub optimizer: OptimizerConfig,
    pub max_steps: usize,
    /// Keep training after 10/10 accuracy until the loss drops to this.
    pub target_loss: Float,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig { optimizer: OptimizerConfig::default(), max_steps: 5000, target_loss: 0.05, seed: 0 }
    }
}

/// Stage-1 classifier weights mapping finger codes to digit classes.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedLink {
    /// `(16, 10)`
    pub weights: Tensor,
    /// `(10,)`
    pub bias: Tensor,
    pub steps: usize,
    pub correct: usize,
    pub final_loss: Float,
    pub finger_codes_sha256: String,
}

fn one_hot_identity() -> Tensor {
    Tensor::from_fn(&[NUM_CLASSES, NUM_CLASSES], |i| (i / NUM_CLASSES == i % NUM_CLASSES) as u8 as Float)
}

fn count_correct(probs: &Tensor) -> usize {
    probs.data().chunks_exact(NUM_CLASSES).enumerate().filter(|(d, row)| argmax(row) == *d).count()
}

pub(crate) fn argmax(row: &[Float]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Train a single softmax layer on the ten (code, digit) pairs, full batch,
/// with categorical cross-entropy and Adam.
pub fn pretrain_stage1(table: &FingerCodeTable, cfg: &PretrainConfig) -> Result<PretrainedLink> {
    cfg.optimizer.validate()?;
    let x = table.as_tensor();
    let y = one_hot_identity();
    let mut layer = Dense::new("link", FINGER_CODE_LEN, NUM_CLASSES, Activation::Softmax, &mut rng::stream(cfg.seed, rng::PRETRAIN));
    let mut state = AdamState::new();
    let mut steps = 0;
    loop {
        let p = layer.forward(&x, Mode::Train)?;
        let loss = categorical_cross_entropy(&p, &y)?;
        let correct = count_correct(&p);
        let done = correct == NUM_CLASSES && loss <= cfg.target_loss;
        if done || steps == cfg.max_steps {
            if correct < NUM_CLASSES {
                return Err(Error::DidNotConverge { steps, correct });
            }
            return Ok(PretrainedLink {
                weights: layer.weights.value,
                bias: layer.bias.value,
                steps,
                correct,
                final_loss: loss,
                finger_codes_sha256: table.sha256(),
            });
        }
        layer.backward(&categorical_cross_entropy_grad(&p, &y)?)?;
        adam_step(&mut layer.params_mut(), &mut state, &cfg.optimizer)?;
        steps += 1;
    }
}

impl PretrainedLink {
    /// Class probabilities for each row of a `(n, 16)` batch of codes.
    pub fn classify(&self, codes: &Tensor) -> Result<Tensor> {
        crate::layers::dense_forward(codes, &self.weights, &self.bias, Activation::Softmax)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new();
        c.set_meta("kind", "pretrained-link");
        c.set_meta("steps", self.steps);
        c.set_meta("correct", self.correct);
        c.set_meta("final_loss", format!("{:e}", self.final_loss));
        c.set_meta("finger_codes_sha256", &self.finger_codes_sha256);
        c.push("link.weights", self.weights.clone());
        c.push("link.bias", self.bias.clone());
        c
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.meta("kind") != Some("pretrained-link") {
            return Err(Error::Checkpoint("not a pretrained-link checkpoint".into()));
        }
        let num = |key: &str| -> Result<usize> {
            c.meta(key).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Checkpoint(format!("missing `{key}`")))
        };
        let weights = c.take("link.weights")?;
        let bias = c.take("link.bias")?;
        if weights.shape() != [FINGER_CODE_LEN, NUM_CLASSES] || bias.shape() != [NUM_CLASSES] {
            return Err(Error::Checkpoint("link tensors have the wrong shape".into()));
        }
        Ok(PretrainedLink {
            weights,
            bias,
            steps: num("steps")?,
            correct: num("correct")?,
            final_loss: c.meta("final_loss").and_then(|v| v.parse().ok()).unwrap_or(Float::NAN),
            finger_codes_sha256: c.meta("finger_codes_sha256").unwrap_or_default().to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_table_structure() {
        let t = default_finger_codes();
        t.validate().unwrap();
        assert_eq!(t.code(5)[..HAND_LEN], [1.0; HAND_LEN]);
        assert_eq!(t.code(5)[HAND_LEN..], [0.0; HAND_LEN]);
        assert_eq!(t.code(0), &[0.0; FINGER_CODE_LEN]);
        for d in 6..=9u8 {
            assert_eq!(t.code(d)[..HAND_LEN], t.code(5)[..HAND_LEN]);
            assert_eq!(t.code(d)[HAND_LEN..], t.code(d - 5)[..HAND_LEN]);
        }
        // seven: open right hand, left hand shows two (index + middle)
        assert_eq!(t.code(7)[HAND_LEN..], [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        // three and four use partially overlapping finger sets
        assert_eq!(t.code(3)[..2], [1.0, 1.0]);
        assert_eq!(t.code(4)[..2], [0.0, 0.0]);
        assert_eq!(t.code(4)[6..8], [1.0, 1.0]);
    }

    #[test]
    fn text_round_trip() {
        let t = default_finger_codes();
        assert_eq!(FingerCodeTable::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn parse_errors() {
        let good = default_finger_codes().to_text();
        let bad_range = good.replacen("5,1,1", "5,1.2,1", 1);
        assert!(matches!(FingerCodeTable::parse(&bad_range), Err(Error::RangeViolation { digit: 5, .. })));

        let short: String = good
            .lines()
            .map(|l| if l.starts_with("3,") { l.rsplit_once(',').unwrap().0.to_string() } else { l.to_string() })
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(FingerCodeTable::parse(&short), Err(Error::ParseError { .. })));

        let missing: String = good.lines().filter(|l| !l.starts_with("8,")).collect::<Vec<_>>().join("\n");
        assert!(matches!(FingerCodeTable::parse(&missing), Err(Error::MissingDigit(8))));

        let mut dup = default_finger_codes();
        dup.codes[2] = dup.codes[4];
        assert!(matches!(FingerCodeTable::parse(&dup.to_text()), Err(Error::DuplicateCode { a: 2, b: 4 })));
    }

    #[test]
    fn pretraining_separates_default_codes() {
        let link = pretrain_stage1(&default_finger_codes(), &PretrainConfig::default()).unwrap();
        assert_eq!(link.correct, 10);
        assert!(link.final_loss <= 0.05);
        assert_eq!(link.param_count(), 170);
        let p = link.classify(&default_finger_codes().as_tensor()).unwrap();
        assert_eq!(count_correct(&p), 10);
    }

    #[test]
    fn identical_codes_do_not_converge() {
        let mut t = default_finger_codes();
        t.codes[3] = t.codes[6];
        let cfg = PretrainConfig { max_steps: 300, ..Default::default() };
        assert!(matches!(pretrain_stage1(&t, &cfg), Err(Error::DidNotConverge { steps: 300, .. })));
    }

    #[test]
    fn link_checkpoint_round_trip() {
        let link = pretrain_stage1(&default_finger_codes(), &PretrainConfig { seed: 4, ..Default::default() }).unwrap();
        let back = PretrainedLink::from_checkpoint(&Checkpoint::parse(&link.to_checkpoint().to_text()).unwrap()).unwrap();
        assert_eq!(back, link);
    }
}
