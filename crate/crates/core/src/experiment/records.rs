use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::model::Variant;
use crate::{Error, Result};

pub const RECORDS_HEADER: [&str; 9] = ["model", "size", "rep", "epoch", "train_acc", "test_acc", "whole_acc", "loss", "seed"];

/// Accuracies after one epoch of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    /// Accuracy on the training subset, evaluation mode.
    pub train_acc: f64,
    pub test_acc: f64,
    /// Accuracy on the union of the training subset and the test set.
    pub whole_acc: f64,
    /// Mean training loss over the epoch.
    pub loss: f64,
}

/// One training run: a model trained on one subset for all epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub model: Variant,
    pub size: usize,
    pub rep: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRow>,
    pub wall_seconds: f64,
    pub config_hash: String,
}

/// Cell key; orders runs by size, then model, then repetition.
pub type RunKey = (usize, u8, usize);

pub fn model_rank(v: Variant) -> u8 {
    match v {
        Variant::Baseline => 0,
        Variant::InceptionLike => 1,
        Variant::Embodied => 2,
    }
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        (self.size, model_rank(self.model), self.rep)
    }

    pub fn last(&self) -> &EpochRow {
        self.epochs.last().expect("a run has at least one epoch")
    }

    /// The data lines of this run, without a trailing newline.
    pub fn lines(&self) -> Vec<String> {
        self.epochs
            .iter()
            .map(|e| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    self.model, self.size, self.rep, e.epoch, e.train_acc, e.test_acc, e.whole_acc, e.loss, self.seed
                )
            })
            .collect()
    }

    fn wall_line(&self) -> String {
        format!("# wall {},{},{} {:.3}", self.model, self.size, self.rep, self.wall_seconds)
    }
}

/// Parsed contents of a records file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordSet {
    /// `# key = value` lines from the top of the file.
    pub meta: Vec<(String, String)>,
    pub runs: Vec<RunRecord>,
}

impl RecordSet {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn sort(&mut self) {
        self.runs.sort_by_key(RunRecord::key);
    }

    /// Canonical text: metadata, header, then each run's lines in key order.
    pub fn to_text(&self) -> String {
        let mut runs: Vec<&RunRecord> = self.runs.iter().collect();
        runs.sort_by_key(|r| r.key());
        let mut s = String::new();
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s.push_str(&RECORDS_HEADER.join(","));
        s.push('\n');
        for r in runs {
            for l in r.lines() {
                s.push_str(&l);
                s.push('\n');
            }
            s.push_str(&r.wall_line());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut walls: BTreeMap<(String, usize, usize), f64> = BTreeMap::new();
        let mut data = String::new();
        let mut header_seen = false;
        for (n, line) in text.lines().enumerate() {
            let err = |msg: String| Error::ParseError { line: n + 1, msg };
            if let Some(rest) = line.strip_prefix("# wall ") {
                let (key, secs) = rest.rsplit_once(' ').ok_or_else(|| err("malformed wall line".into()))?;
                let parts: Vec<&str> = key.split(',').collect();
                if parts.len() != 3 {
                    return Err(err("malformed wall line".into()));
                }
                let size = parts[1].parse().map_err(|_| err("bad size".into()))?;
                let rep = parts[2].parse().map_err(|_| err("bad rep".into()))?;
                walls.insert((parts[0].to_string(), size, rep), secs.parse().unwrap_or(f64::NAN));
            } else if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else if !header_seen {
                if line.trim().is_empty() {
                    continue;
                }
                if line.trim() != RECORDS_HEADER.join(",") {
                    return Err(err(format!("expected header `{}`", RECORDS_HEADER.join(","))));
                }
                header_seen = true;
                data.push_str(line);
                data.push('\n');
            } else {
                data.push_str(line);
                data.push('\n');
            }
        }

        let mut grouped: BTreeMap<RunKey, RunRecord> = BTreeMap::new();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data.as_bytes());
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::ParseError { line: i + 2, msg: e.to_string() })?;
            let field = |j: usize| row.get(j).unwrap_or("");
            let bad =
                |what: &str| Error::ParseError { line: i + 2, msg: format!("bad {what} `{}`", row.iter().collect::<Vec<_>>().join(",")) };
            let num = |j: usize, what: &str| field(j).parse::<f64>().map_err(|_| bad(what));
            let model: Variant = field(0).parse().map_err(|_| bad("model"))?;
            let size: usize = field(1).parse().map_err(|_| bad("size"))?;
            let rep: usize = field(2).parse().map_err(|_| bad("rep"))?;
            let seed: u64 = field(8).parse().map_err(|_| bad("seed"))?;
            let e = EpochRow {
                epoch: field(3).parse().map_err(|_| bad("epoch"))?,
                train_acc: num(4, "train_acc")?,
                test_acc: num(5, "test_acc")?,
                whole_acc: num(6, "whole_acc")?,
                loss: num(7, "loss")?,
            };
            grouped
                .entry((size, model_rank(model), rep))
                .or_insert_with(|| RunRecord {
                    model,
                    size,
                    rep,
                    seed,
                    epochs: Vec::new(),
                    wall_seconds: walls.get(&(model.to_string(), size, rep)).copied().unwrap_or(f64::NAN),
                    config_hash: String::new(),
                })
                .epochs
                .push(e);
        }
        let hash = meta.iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v.clone()).unwrap_or_default();
        let runs = grouped
            .into_values()
            .map(|mut r| {
                r.config_hash = hash.clone();
                r.epochs.sort_by_key(|e| e.epoch);
                r
            })
            .collect();
        Ok(RecordSet { meta, runs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Write the canonical text atomically (temporary file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_text())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Append-only records file that survives interruption: complete runs are
/// appended as they finish, and reopening keeps them.
pub struct RecordStore {
    path: PathBuf,
    set: RecordSet,
}

impl RecordStore {
    /// Open `path`, keeping runs with exactly `epochs` epochs whose file was
    /// written under the same `config_hash`. A file written under a
    /// different configuration is refused rather than mixed.
    pub fn open(path: &Path, meta: Vec<(String, String)>, epochs: usize) -> Result<Self> {
        let want = meta.iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v.clone());
        let mut runs = Vec::new();
        if path.exists() {
            let old = RecordSet::load(path)?;
            if old.meta("config_hash").map(str::to_string) != want {
                return Err(Error::ConfigInvalid(format!(
                    "{} was written by a different configuration; choose another output file",
                    path.display()
                )));
            }
            runs = old
                .runs
                .into_iter()
                .filter(|r| r.epochs.len() == epochs && r.epochs.iter().enumerate().all(|(i, e)| e.epoch == i + 1))
                .collect();
        }
        let store = RecordStore { path: path.to_path_buf(), set: RecordSet { meta, runs } };
        store.set.save(&store.path)?;
        Ok(store)
    }

    pub fn runs(&self) -> &[RunRecord] {
        &self.set.runs
    }

    pub fn contains(&self, key: RunKey) -> bool {
        self.set.runs.iter().any(|r| r.key() == key)
    }

    pub fn append(&mut self, run: RunRecord) -> Result<()> {
        let mut f = fs::OpenOptions::new().append(true).open(&self.path)?;
        let mut text = run.lines().join("\n");
        text.push('\n');
        text.push_str(&run.wall_line());
        text.push('\n');
        f.write_all(text.as_bytes())?;
        f.flush()?;
        self.set.runs.push(run);
        Ok(())
    }

    /// Rewrite the file in canonical order and return its contents.
    pub fn finish(mut self) -> Result<RecordSet> {
        self.set.sort();
        self.set.save(&self.path)?;
        Ok(self.set)
    }
}
