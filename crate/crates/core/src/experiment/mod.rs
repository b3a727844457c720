//! The experimental protocol: a grid of training sizes × models ×
//! repetitions, each run trained for a fixed number of epochs and evaluated
//! after every epoch on its training subset, the test set, and their union.
//!
//! Runs are independent. Repetition `r` draws its subset with seed
//! `base_seed + r` and builds its network with the same seed, so the models
//! of one repetition see the same examples and share the initial weights of
//! their common layers. Finished runs are appended to a records file, which
//! makes long grids resumable; [`summarize`] turns records into the
//! comparison tables and learning curves.

mod config;
mod plot;
mod records;
mod summary;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, FULL_TRAIN_SIZE};
pub use plot::plot_curves;
pub use records::{model_rank, EpochRow, RecordSet, RecordStore, RunKey, RunRecord, RECORDS_HEADER};
pub use summary::{summarize, write_summary, CellStats, Comparison, ComparisonStat, CurvePoint, Split, Summary, TableRow};

use crate::embodiment::{default_finger_codes, pretrain_stage1, FingerCodeTable, PretrainConfig, PretrainedLink};
use crate::idx::{load_mnist, subset, Mnist};
use crate::model::{build_model, ModelSpec, Network, Variant};
use crate::optim::AdamState;
use crate::rng;
use crate::train::{count_correct_eval, train_epoch};
use crate::{Error, Result};

/// A validated configuration together with the embodiment inputs the
/// embodied runs need.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub finger_codes: FingerCodeTable,
    /// Present whenever the grid contains embodied runs.
    pub link: Option<PretrainedLink>,
}

impl Experiment {
    /// Validate `config`. When embodied runs are requested and no link is
    /// supplied, one is pre-trained on `finger_codes` with `base_seed`.
    pub fn new(config: ExperimentConfig, finger_codes: FingerCodeTable, link: Option<PretrainedLink>) -> Result<Self> {
        config.validate()?;
        finger_codes.validate()?;
        let link = match link {
            Some(l) => Some(l),
            None if config.models.contains(&Variant::Embodied) => Some(pretrain_stage1(
                &finger_codes,
                &PretrainConfig { optimizer: config.optimizer, seed: config.base_seed, ..Default::default() },
            )?),
            None => None,
        };
        Ok(Experiment { config, finger_codes, link })
    }

    pub fn with_defaults(config: ExperimentConfig) -> Result<Self> {
        Self::new(config, default_finger_codes(), None)
    }

    /// Digest of the configuration and the embodiment inputs; records
    /// written under a different digest are never mixed.
    pub fn identity_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config.hash());
        h.update(self.finger_codes.sha256());
        if let Some(l) = &self.link {
            h.update(l.to_checkpoint().to_text());
        }
        config::hex(&h.finalize())
    }

    /// Self-describing header for records and summaries.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut meta: Vec<(String, String)> = self.config.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        meta.push(("finger_codes_sha256".into(), self.finger_codes.sha256()));
        if let Some(l) = &self.link {
            meta.push(("link_steps".into(), l.steps.to_string()));
            meta.push(("link_final_loss".into(), format!("{:e}", l.final_loss)));
        }
        meta.push(("config_hash".into(), self.identity_hash()));
        meta
    }

    /// Every cell of the grid in run order: by size, then repetition, then
    /// model, so the runs of one repetition finish together.
    pub fn cells(&self) -> Vec<(Variant, usize, usize)> {
        let c = &self.config;
        let mut cells = Vec::new();
        for &size in &c.sizes {
            for rep in 0..c.repetitions {
                for &m in &c.models {
                    cells.push((m, size, rep));
                }
            }
        }
        cells
    }

    /// Train and evaluate one cell. Identical inputs give bitwise identical
    /// records apart from the wall time.
    pub fn run_cell(&self, mnist: &Mnist, model: Variant, size: usize, rep: usize) -> Result<RunRecord> {
        Ok(self.train_cell(mnist, model, size, rep)?.0)
    }

    /// [`Experiment::run_cell`], also returning the trained network.
    pub fn train_cell(&self, mnist: &Mnist, model: Variant, size: usize, rep: usize) -> Result<(RunRecord, Network)> {
        let c = &self.config;
        let start = Instant::now();
        let train = subset(&mnist.train, size, c.subset_seed(rep), c.sampling)?;
        let seed = c.model_seed(rep);
        let mut spec = ModelSpec::new(model);
        spec.loss_weights = c.loss_weights(size)?;
        spec.finger_codes = self.finger_codes.clone();
        if model == Variant::Embodied {
            spec = spec.with_link(self.link.clone().ok_or(Error::MissingPretrainedLink)?);
        }
        let mut net = build_model(&spec, seed)?;
        let mut adam = AdamState::new();
        let mut shuffle = rng::stream(seed, rng::SHUFFLE);
        let batch = c.batch_size_for(size);
        let (n_train, n_test) = (train.count(), mnist.test.count());

        let mut epochs = Vec::with_capacity(c.epochs);
        for epoch in 1..=c.epochs {
            let m = train_epoch(&mut net, &mut adam, &c.optimizer, &train, batch, &mut shuffle)?;
            let train_correct = count_correct_eval(&mut net, &train)?;
            let test_correct = count_correct_eval(&mut net, &mnist.test)?;
            epochs.push(EpochRow {
                epoch,
                train_acc: train_correct as f64 / n_train as f64,
                test_acc: test_correct as f64 / n_test as f64,
                whole_acc: (train_correct + test_correct) as f64 / (n_train + n_test) as f64,
                loss: m.mean_loss as f64,
            });
        }
        let record =
            RunRecord { model, size, rep, seed, epochs, wall_seconds: start.elapsed().as_secs_f64(), config_hash: self.identity_hash() };
        Ok((record, net))
    }

    /// Run every cell not already present in the records file at `records`
    /// (if given), calling `on_run` as each finishes. Returns all runs of
    /// the grid in canonical order.
    pub fn run(&self, mnist: &Mnist, records: Option<&Path>, on_run: &(dyn Fn(&RunRecord) + Sync)) -> Result<Vec<RunRecord>> {
        let mut store = match records {
            Some(p) => Some(RecordStore::open(p, self.metadata(), self.config.epochs)?),
            None => None,
        };
        let mut done: Vec<RunRecord> = Vec::new();
        let mut todo = VecDeque::new();
        for (m, size, rep) in self.cells() {
            let key = (size, model_rank(m), rep);
            match store.as_ref().and_then(|s| s.runs().iter().find(|r| r.key() == key)) {
                Some(r) => done.push(r.clone()),
                None => todo.push_back((m, size, rep)),
            }
        }

        let mut record = |run: RunRecord, done: &mut Vec<RunRecord>| -> Result<()> {
            on_run(&run);
            if let Some(s) = store.as_mut() {
                s.append(run.clone())?;
            }
            done.push(run);
            Ok(())
        };

        if self.config.jobs <= 1 {
            while let Some((m, size, rep)) = todo.pop_front() {
                record(self.run_cell(mnist, m, size, rep)?, &mut done)?;
            }
        } else {
            let queue = Mutex::new(todo);
            let (tx, rx) = mpsc::channel();
            std::thread::scope(|scope| -> Result<()> {
                for _ in 0..self.config.jobs {
                    let tx = tx.clone();
                    let queue = &queue;
                    scope.spawn(move || loop {
                        let Some((m, size, rep)) = queue.lock().expect("queue lock").pop_front() else { break };
                        let result = self.run_cell(mnist, m, size, rep);
                        let failed = result.is_err();
                        if tx.send(result).is_err() || failed {
                            break;
                        }
                    });
                }
                drop(tx);
                for result in rx {
                    match result {
                        Ok(run) => record(run, &mut done)?,
                        Err(e) => {
                            queue.lock().expect("queue lock").clear();
                            return Err(e);
                        }
                    }
                }
                Ok(())
            })?;
        }

        if let Some(s) = store {
            s.finish()?;
        }
        done.sort_by_key(RunRecord::key);
        Ok(done)
    }
}

/// Load MNIST from `data_dir` and run the whole grid of `config` with the
/// default finger codes, appending to `records` when given.
pub fn run_experiment(config: ExperimentConfig, data_dir: &Path, records: Option<&Path>) -> Result<Vec<RunRecord>> {
    let exp = Experiment::with_defaults(config)?;
    let mnist = load_mnist(data_dir)?;
    exp.run(&mnist, records, &|_| {})
}
