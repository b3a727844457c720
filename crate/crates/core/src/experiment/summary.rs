use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::plot::plot_curves;
use super::records::{EpochRow, RunRecord};
use crate::model::Variant;
use crate::stats::{cohens_d, mean, sample_sd, welch_t_test};
use crate::{Error, Result};

/// Which examples an accuracy is measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    /// Training subset plus test set.
    Whole,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Whole => "whole",
            Split::Test => "test",
        }
    }

    pub fn value(self, row: &EpochRow) -> f64 {
        match self {
            Split::Whole => row.whole_acc,
            Split::Test => row.test_acc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl CellStats {
    fn of(xs: &[f64]) -> Self {
        CellStats { n: xs.len(), mean: mean(xs), sd: if xs.len() > 1 { sample_sd(xs) } else { 0.0 } }
    }
}

/// A comparator sample `a` against the embodied sample `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonStat {
    pub mean_a: f64,
    pub mean_b: f64,
    pub stdev_a: f64,
    pub stdev_b: f64,
    pub t: f64,
    pub p: f64,
    /// `(mean_a − mean_b) / s_pooled`; negative when embodied is higher.
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Comparison {
    Stat(ComparisonStat),
    /// Both samples have zero spread, so Cohen's d is undefined.
    Degenerate(String),
}

impl Comparison {
    pub fn stat(&self) -> Result<&ComparisonStat> {
        match self {
            Comparison::Stat(s) => Ok(s),
            Comparison::Degenerate(msg) => Err(Error::DegenerateSample(msg.clone())),
        }
    }

    fn compute(a: &[f64], b: &[f64]) -> Result<Self> {
        let w = welch_t_test(a, b)?;
        Ok(match cohens_d(a, b) {
            Ok(d) => Comparison::Stat(ComparisonStat {
                mean_a: mean(a),
                mean_b: mean(b),
                stdev_a: sample_sd(a),
                stdev_b: sample_sd(b),
                t: w.t,
                p: w.p,
                d,
            }),
            Err(Error::DegenerateSample(msg)) => Comparison::Degenerate(msg),
            Err(e) => return Err(e),
        })
    }
}

/// One model at one (size, epoch) of Table II or III.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub split: Split,
    pub size: usize,
    pub epoch: usize,
    pub model: Variant,
    pub stats: CellStats,
    /// Against the embodied model; absent for the embodied row itself or
    /// when the grid has no embodied runs.
    pub vs_embodied: Option<Comparison>,
    /// Comparator rows: the difference from embodied is significant at
    /// `alpha`. Embodied row: embodied is higher than every comparator and
    /// every difference is significant.
    pub bold: bool,
}

/// Mean accuracies of one model at one size after one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub size: usize,
    pub model: Variant,
    pub epoch: usize,
    pub train: CellStats,
    pub test: CellStats,
    pub whole: CellStats,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub config: ExperimentConfig,
    /// Epochs reported in the tables: the first and the last.
    pub table_epochs: Vec<usize>,
    pub rows: Vec<TableRow>,
    pub curves: Vec<CurvePoint>,
}

fn check_complete(runs: &[RunRecord], cfg: &ExperimentConfig) -> Result<()> {
    let mut missing = Vec::new();
    for &size in &cfg.sizes {
        for &m in &cfg.models {
            for rep in 0..cfg.repetitions {
                let ok = runs.iter().any(|r| r.model == m && r.size == size && r.rep == rep && r.epochs.len() == cfg.epochs);
                if !ok {
                    missing.push(format!("{m}/{size}/rep{rep}"));
                }
            }
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    let total = cfg.sizes.len() * cfg.models.len() * cfg.repetitions;
    Err(Error::IncompleteGrid(format!("{} of {total} runs missing (first: {})", missing.len(), missing[..missing.len().min(5)].join(", "))))
}

/// Means, standard deviations and comparisons against the embodied model
/// for every cell of `cfg`'s grid. Fails with `IncompleteGrid` unless every
/// run of the grid is present with all epochs.
pub fn summarize(runs: &[RunRecord], cfg: &ExperimentConfig) -> Result<Summary> {
    check_complete(runs, cfg)?;
    let sample = |m: Variant, size: usize, epoch: usize, f: &dyn Fn(&EpochRow) -> f64| -> Vec<f64> {
        let mut rs: Vec<&RunRecord> = runs.iter().filter(|r| r.model == m && r.size == size && r.rep < cfg.repetitions).collect();
        rs.sort_by_key(|r| r.rep);
        rs.iter().map(|r| f(&r.epochs[epoch - 1])).collect()
    };

    let mut table_epochs = vec![1];
    if cfg.epochs > 1 {
        table_epochs.push(cfg.epochs);
    }
    let has_embodied = cfg.models.contains(&Variant::Embodied);

    let mut rows = Vec::new();
    for split in [Split::Whole, Split::Test] {
        for &epoch in &table_epochs {
            for &size in &cfg.sizes {
                let get = |m| sample(m, size, epoch, &|e: &EpochRow| split.value(e));
                let emb = if has_embodied { Some(get(Variant::Embodied)) } else { None };
                let mut cell_rows = Vec::new();
                for &m in &cfg.models {
                    let xs = get(m);
                    let vs_embodied = match &emb {
                        Some(b) if m != Variant::Embodied => Some(Comparison::compute(&xs, b)?),
                        _ => None,
                    };
                    let bold = vs_embodied.as_ref().is_some_and(|c| match c {
                        Comparison::Stat(s) => s.p < cfg.alpha,
                        Comparison::Degenerate(_) => false,
                    });
                    cell_rows.push(TableRow { split, size, epoch, model: m, stats: CellStats::of(&xs), vs_embodied, bold });
                }
                if let Some(b) = &emb {
                    let emb_mean = mean(b);
                    let comparators: Vec<&TableRow> = cell_rows.iter().filter(|r| r.model != Variant::Embodied).collect();
                    let wins = !comparators.is_empty() && comparators.iter().all(|r| r.bold && emb_mean > r.stats.mean);
                    for r in cell_rows.iter_mut().filter(|r| r.model == Variant::Embodied) {
                        r.bold = wins;
                    }
                }
                rows.extend(cell_rows);
            }
        }
    }

    let mut curves = Vec::new();
    for &size in &cfg.sizes {
        for &m in &cfg.models {
            for epoch in 1..=cfg.epochs {
                let s = |f: &dyn Fn(&EpochRow) -> f64| CellStats::of(&sample(m, size, epoch, f));
                curves.push(CurvePoint {
                    size,
                    model: m,
                    epoch,
                    train: s(&|e| e.train_acc),
                    test: s(&|e| e.test_acc),
                    whole: s(&|e| e.whole_acc),
                    loss: s(&|e| e.loss).mean,
                });
            }
        }
    }
    Ok(Summary { config: cfg.clone(), table_epochs, rows, curves })
}

impl Summary {
    pub fn row(&self, split: Split, size: usize, epoch: usize, model: Variant) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.split == split && r.size == size && r.epoch == epoch && r.model == model)
    }

    pub fn curve(&self, size: usize, model: Variant) -> Vec<&CurvePoint> {
        self.curves.iter().filter(|c| c.size == size && c.model == model).collect()
    }

    /// One table as comma-separated text laid out like the published tables:
    /// a row per (epoch, size) and, per model, mean, stdev, and for
    /// comparators Cohen's d, p and the significance flag.
    pub fn table_csv(&self, split: Split) -> String {
        let models = &self.config.models;
        let mut header = vec!["epoch".to_string(), "size".to_string()];
        for m in models {
            header.push(format!("{m}_avg"));
            header.push(format!("{m}_stdev"));
            if *m != Variant::Embodied && models.contains(&Variant::Embodied) {
                header.push(format!("{m}_d"));
                header.push(format!("{m}_p"));
            }
            header.push(format!("{m}_bold"));
        }
        let mut out = header.join(",");
        out.push('\n');
        for &epoch in &self.table_epochs {
            for &size in &self.config.sizes {
                let mut fields = vec![epoch.to_string(), size.to_string()];
                for &m in models {
                    let r = self.row(split, size, epoch, m).expect("summarized cell");
                    fields.push(r.stats.mean.to_string());
                    fields.push(r.stats.sd.to_string());
                    match &r.vs_embodied {
                        Some(Comparison::Stat(s)) => {
                            fields.push(s.d.to_string());
                            fields.push(s.p.to_string());
                        }
                        Some(Comparison::Degenerate(_)) => {
                            fields.push("degenerate".into());
                            fields.push("degenerate".into());
                        }
                        None => {}
                    }
                    fields.push(r.bold.to_string());
                }
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        out
    }

    /// Learning curves: one row per (size, model, epoch).
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("size,model,epoch,train_mean,train_sd,test_mean,test_sd,whole_mean,whole_sd,loss_mean\n");
        for c in &self.curves {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.size, c.model, c.epoch, c.train.mean, c.train.sd, c.test.mean, c.test.sd, c.whole.mean, c.whole.sd, c.loss
            );
        }
        out
    }

    /// Fixed-width rendering with three decimals, for terminals.
    pub fn render(&self, split: Split) -> String {
        let title = match split {
            Split::Whole => "Accuracy on the whole database (training subset + test set)",
            Split::Test => "Accuracy on the test set",
        };
        let models = &self.config.models;
        let mut out = format!("{title}\n{:>8}", "size");
        for m in models {
            let _ = write!(out, " | {:>9} {:>6}", format!("{m}"), "stdev");
            if *m != Variant::Embodied && models.contains(&Variant::Embodied) {
                let _ = write!(out, " {:>7} {:>8}", "d", "p");
            }
        }
        out.push('\n');
        for &epoch in &self.table_epochs {
            let _ = writeln!(out, "after {epoch} epoch{}", if epoch == 1 { "" } else { "s" });
            for &size in &self.config.sizes {
                let _ = write!(out, "{size:>8}");
                for &m in models {
                    let r = self.row(split, size, epoch, m).expect("summarized cell");
                    let star = if r.bold { "*" } else { " " };
                    let _ = write!(out, " | {:>8.3}{star} {:>6.3}", r.stats.mean, r.stats.sd);
                    match &r.vs_embodied {
                        Some(Comparison::Stat(s)) => {
                            let _ = write!(out, " {:>7.3} {:>8.2e}", s.d, s.p);
                        }
                        Some(Comparison::Degenerate(_)) => {
                            let _ = write!(out, " {:>7} {:>8}", "undef", "-");
                        }
                        None => {}
                    }
                }
                out.push('\n');
            }
        }
        out.push_str("* significantly different from the other models (p < alpha)\n");
        out
    }
}

fn with_meta(meta: &[(String, String)], body: &str) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s.push_str(body);
    s
}

/// Write both tables, the learning curves, and one plot per (size, split)
/// into `dir`. Output depends only on `summary` and `meta`.
pub fn write_summary(summary: &Summary, meta: &[(String, String)], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    put("table_whole.csv".into(), with_meta(meta, &summary.table_csv(Split::Whole)))?;
    put("table_test.csv".into(), with_meta(meta, &summary.table_csv(Split::Test)))?;
    put("curves.csv".into(), with_meta(meta, &summary.curves_csv()))?;
    for &size in &summary.config.sizes {
        for split in [Split::Whole, Split::Test] {
            let p = dir.join(format!("curves_{}_{size}.svg", split.name()));
            plot_curves(summary, size, split, &p)?;
            written.push(p);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: &dyn Fn(Variant, usize) -> f64) -> (Vec<RunRecord>, ExperimentConfig) {
        let cfg = ExperimentConfig {
            sizes: vec![256],
            epochs: 2,
            repetitions: 3,
            models: vec![Variant::Embodied, Variant::Baseline],
            ..Default::default()
        };
        let mut runs = Vec::new();
        for &m in &cfg.models {
            for rep in 0..3 {
                let v = values(m, rep);
                let row = |epoch| EpochRow { epoch, train_acc: v, test_acc: v, whole_acc: v, loss: 0.1 };
                runs.push(RunRecord {
                    model: m,
                    size: 256,
                    rep,
                    seed: rep as u64,
                    epochs: vec![row(1), row(2)],
                    wall_seconds: 0.0,
                    config_hash: String::new(),
                });
            }
        }
        (runs, cfg)
    }

    #[test]
    fn identical_records_are_degenerate_not_nan() {
        let (runs, cfg) = grid(&|_, _| 0.5);
        let s = summarize(&runs, &cfg).unwrap();
        let r = s.row(Split::Test, 256, 2, Variant::Baseline).unwrap();
        assert_eq!(r.stats.sd, 0.0);
        assert!(matches!(r.vs_embodied.as_ref().unwrap().stat(), Err(Error::DegenerateSample(_))));
        assert!(s.table_csv(Split::Test).contains("degenerate"));
        assert!(!s.table_csv(Split::Test).contains("NaN"));
    }

    #[test]
    fn embodied_win_is_bold() {
        let (runs, cfg) = grid(&|m, rep| if m == Variant::Embodied { 0.9 } else { 0.5 } + 0.01 * rep as f64);
        let s = summarize(&runs, &cfg).unwrap();
        assert_eq!(s.table_epochs, [1, 2]);
        let b = s.row(Split::Whole, 256, 1, Variant::Baseline).unwrap();
        let stat = b.vs_embodied.as_ref().unwrap().stat().unwrap();
        assert!(stat.d < 0.0 && stat.p < 0.05);
        assert!(b.bold && s.row(Split::Whole, 256, 1, Variant::Embodied).unwrap().bold);
        assert_eq!(s.curve(256, Variant::Embodied).len(), 2);
    }

    #[test]
    fn missing_runs_are_reported() {
        let (mut runs, cfg) = grid(&|_, rep| rep as f64);
        runs.pop();
        assert!(matches!(summarize(&runs, &cfg), Err(Error::IncompleteGrid(_))));
        assert!(matches!(summarize(&[], &cfg), Err(Error::IncompleteGrid(_))));
    }
}
