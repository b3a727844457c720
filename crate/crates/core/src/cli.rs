//! Command-line front end.
//!
//! Settings come from defaults, then an optional `key = value` file given
//! with `--config`, then flags; later sources win. Every subcommand prints
//! the resolved settings before doing any work.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 missing or
//! malformed data, 3 numerical failure (a failed gradient check, divergence,
//! or stage-1 pre-training that did not converge), 4 incomplete grid.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::embodiment::{default_finger_codes, load_finger_codes, pretrain_stage1, FingerCodeTable, PretrainConfig, PretrainedLink};
use crate::experiment::{summarize, write_summary, Experiment, ExperimentConfig, RecordSet, Split};
use crate::gradcheck::{run_suite, GradCheckConfig};
use crate::idx::{load_mnist, resolve_data_dir, subset, DATA_DIR_ENV};
use crate::model::Variant;
use crate::{Error, Float, Result, IMAGE_SIDE};

#[derive(Debug, Parser)]
#[command(name = "embodied-cnn", version, about = "Train and compare baseline, inception-like and embodied digit classifiers on MNIST")]
pub struct Cli {
    /// Settings file with one `key = value` per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory holding the four MNIST IDX files (plain or .gz).
    #[arg(long, global = true, value_name = "DIR", env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-train the 16→10 finger-code classifier and save it.
    Pretrain(PretrainArgs),
    /// Train one model on one subset and report every epoch.
    Train(TrainArgs),
    /// Run the full size × model × repetition grid, resumably.
    Experiment(ExperimentArgs),
    /// Build tables, learning curves and plots from a records file.
    Summarize(SummarizeArgs),
    /// Compare every analytic gradient with finite differences.
    Gradcheck(GradcheckArgs),
    /// Report dataset sizes and class balance.
    InspectData(InspectArgs),
}

/// Flags that map onto [`ExperimentConfig`].
#[derive(Debug, Default, Args)]
pub struct GridFlags {
    /// Training-set sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Models to train: baseline, inception, embodied.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<Variant>>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub repetitions: Option<u64>,
    /// Base seed; repetition r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Batch size when training on all 60000 examples.
    #[arg(long)]
    pub full_batch_size: Option<usize>,
    /// Auxiliary-loss weights as size:weight,...
    #[arg(long)]
    pub weight_schedule: Option<String>,
    /// Multiplier on the classification loss.
    #[arg(long)]
    pub classification_weight: Option<Float>,
    /// Significance level for the comparison flags.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// stratified or uniform.
    #[arg(long)]
    pub sampling: Option<String>,
    /// Reuse one training subset for all repetitions.
    #[arg(long)]
    pub fixed_subset: bool,
    /// Learning rate.
    #[arg(long)]
    pub eta: Option<Float>,
    /// Concurrent training runs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Embodiment inputs shared by the training subcommands.
#[derive(Debug, Default, Args)]
pub struct EmbodimentFlags {
    /// Finger-code table (digit followed by 16 comma-separated values).
    #[arg(long, value_name = "FILE")]
    pub finger_codes: Option<PathBuf>,
    /// Pre-trained link checkpoint; pre-trained on the fly when absent.
    #[arg(long, value_name = "FILE")]
    pub link: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long, value_name = "FILE")]
    pub finger_codes: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Keep training after 10/10 until the loss reaches this value.
    #[arg(long)]
    pub target_loss: Option<Float>,
    #[arg(long, value_name = "FILE", default_value = "pretrain.ckpt")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "embodied")]
    pub model: Variant,
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Repetition index; selects seed + rep.
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
    #[command(flatten)]
    pub grid: GridFlags,
    #[command(flatten)]
    pub embodiment: EmbodimentFlags,
    /// Save the trained network here.
    #[arg(long, value_name = "FILE")]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub grid: GridFlags,
    #[command(flatten)]
    pub embodiment: EmbodimentFlags,
    /// Records file; existing complete runs are kept and skipped.
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
    /// Also write tables and plots here when the grid completes.
    #[arg(long, value_name = "DIR")]
    pub summary_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override the grid read from the records header, e.g. to summarize a
    /// subset of sizes.
    #[command(flatten)]
    pub grid: GridFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coordinates checked per tensor.
    #[arg(long, default_value_t = 24)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Also draw a stratified subset of this size and report its balance.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print this many test digits as text.
    #[arg(long, default_value_t = 0)]
    pub show: usize,
}

/// Settings from `--config` that are not experiment settings.
#[derive(Debug, Default)]
struct FileSettings {
    data_dir: Option<PathBuf>,
    finger_codes: Option<PathBuf>,
    link: Option<PathBuf>,
    records: Option<PathBuf>,
    out: Option<PathBuf>,
    max_steps: Option<usize>,
    target_loss: Option<Float>,
}

fn read_config(path: Option<&Path>) -> Result<(ExperimentConfig, FileSettings)> {
    let mut cfg = ExperimentConfig::default();
    let mut extra = FileSettings::default();
    let Some(path) = path else { return Ok((cfg, extra)) };
    let text = fs::read_to_string(path).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
    for (k, v) in cfg.apply_text(&text)? {
        let num = |what: &str| Error::ConfigInvalid(format!("{k}: cannot parse `{v}` as {what}"));
        match k.as_str() {
            "data_dir" => extra.data_dir = Some(v.into()),
            "finger_codes" => extra.finger_codes = Some(v.into()),
            "link" => extra.link = Some(v.into()),
            "records" => extra.records = Some(v.into()),
            "out" | "summary_dir" => extra.out = Some(v.into()),
            "max_steps" => extra.max_steps = Some(v.parse().map_err(|_| num("an integer"))?),
            "target_loss" => extra.target_loss = Some(v.parse().map_err(|_| num("a number"))?),
            _ => return Err(Error::ConfigInvalid(format!("unknown setting `{k}` in {}", path.display()))),
        }
    }
    Ok((cfg, extra))
}

impl GridFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(v) = &self.sizes {
            cfg.sizes = v.clone();
        }
        if let Some(v) = &self.models {
            cfg.models = v.clone();
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v as usize;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v as usize;
        }
        if let Some(v) = self.seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.full_batch_size {
            cfg.full_batch_size = v;
        }
        if let Some(v) = &self.weight_schedule {
            cfg.set("weight_schedule", v)?;
        }
        if let Some(v) = self.classification_weight {
            cfg.classification_weight = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = &self.sampling {
            cfg.set("sampling", v)?;
        }
        if self.fixed_subset {
            cfg.fixed_subset = true;
        }
        if let Some(v) = self.eta {
            cfg.optimizer.eta = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        Ok(())
    }
}

fn print_settings(out: &mut dyn Write, title: &str, entries: &[(String, String)]) -> Result<()> {
    writeln!(out, "# {title}")?;
    for (k, v) in entries {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

fn load_codes(path: Option<&Path>) -> Result<FingerCodeTable> {
    match path {
        Some(p) => load_finger_codes(p),
        None => Ok(default_finger_codes()),
    }
}

fn build_experiment(cfg: ExperimentConfig, flags: &EmbodimentFlags, file: &FileSettings) -> Result<Experiment> {
    let codes = load_codes(flags.finger_codes.as_deref().or(file.finger_codes.as_deref()))?;
    let link = match flags.link.as_deref().or(file.link.as_deref()) {
        Some(p) => {
            let link = PretrainedLink::load(p)?;
            if !link.finger_codes_sha256.is_empty() && link.finger_codes_sha256 != codes.sha256() {
                eprintln!("warning: {} was pre-trained on a different finger-code table", p.display());
            }
            Some(link)
        }
        None => None,
    };
    Experiment::new(cfg, codes, link)
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_) | Error::ParseError { .. } | Error::MissingPretrainedLink | Error::NonPositiveSize => 1,
        Error::BadMagic { .. }
        | Error::Truncated { .. }
        | Error::TrailingBytes { .. }
        | Error::LabelOutOfRange { .. }
        | Error::SizeTooLarge { .. }
        | Error::EmptyDataset
        | Error::DataMissing(_)
        | Error::Checkpoint(_)
        | Error::Io(_) => 2,
        Error::Numerical(_) | Error::DidNotConverge { .. } => 3,
        Error::IncompleteGrid(_) => 4,
        _ => 1,
    }
}

/// Parse `args` (program name first), run, and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let (mut cfg, file) = read_config(cli.config.as_deref())?;
    let data_dir = resolve_data_dir(cli.data_dir.as_deref().or(file.data_dir.as_deref()));
    match cli.command {
        Command::Pretrain(a) => pretrain(a, &cfg, &file, out),
        Command::Train(a) => {
            a.grid.apply(&mut cfg)?;
            cfg.sizes = vec![a.size];
            cfg.models = vec![a.model];
            train(a, cfg, &file, &data_dir, out)
        }
        Command::Experiment(a) => {
            a.grid.apply(&mut cfg)?;
            experiment(a, cfg, &file, &data_dir, out)
        }
        Command::Summarize(a) => summarize_cmd(a, &file, out),
        Command::Gradcheck(a) => gradcheck(a, out),
        Command::InspectData(a) => inspect(a, &data_dir, out),
    }
}

fn pretrain(a: PretrainArgs, cfg: &ExperimentConfig, file: &FileSettings, out: &mut dyn Write) -> Result<()> {
    let codes = load_codes(a.finger_codes.as_deref().or(file.finger_codes.as_deref()))?;
    let mut p = PretrainConfig { optimizer: cfg.optimizer, seed: a.seed.unwrap_or(cfg.base_seed), ..Default::default() };
    if let Some(v) = a.max_steps.or(file.max_steps) {
        p.max_steps = v;
    }
    if let Some(v) = a.target_loss.or(file.target_loss) {
        p.target_loss = v;
    }
    print_settings(
        out,
        "pretrain settings",
        &[
            ("seed".into(), p.seed.to_string()),
            ("max_steps".into(), p.max_steps.to_string()),
            ("target_loss".into(), p.target_loss.to_string()),
            ("eta".into(), p.optimizer.eta.to_string()),
            ("finger_codes_sha256".into(), codes.sha256()),
            ("out".into(), a.out.display().to_string()),
        ],
    )?;
    let link = pretrain_stage1(&codes, &p)?;
    link.save(&a.out)?;
    writeln!(
        out,
        "pre-trained link: {}/10 correct after {} steps, loss {:.4}; saved to {}",
        link.correct,
        link.steps,
        link.final_loss,
        a.out.display()
    )?;
    Ok(())
}

fn train(a: TrainArgs, cfg: ExperimentConfig, file: &FileSettings, data_dir: &Path, out: &mut dyn Write) -> Result<()> {
    // a single run has no repetitions to compare; validate the rest
    let cfg = ExperimentConfig { repetitions: cfg.repetitions.max(2), ..cfg };
    let exp = build_experiment(cfg, &a.embodiment, file)?;
    let mut meta = exp.metadata();
    meta.push(("data_dir".into(), data_dir.display().to_string()));
    meta.push(("rep".into(), a.rep.to_string()));
    print_settings(out, "train settings", &meta)?;
    let mnist = load_mnist(data_dir)?;
    let (run, net) = exp.train_cell(&mnist, a.model, a.size, a.rep)?;
    writeln!(out, "{}", crate::experiment::RECORDS_HEADER.join(","))?;
    for line in run.lines() {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "# wall seconds {:.1}", run.wall_seconds)?;
    if let Some(p) = &a.save {
        net.save(p)?;
        writeln!(out, "# saved network to {}", p.display())?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs, cfg: ExperimentConfig, file: &FileSettings, data_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let exp = build_experiment(cfg, &a.embodiment, file)?;
    let records = a.records.or_else(|| file.records.clone()).unwrap_or_else(|| PathBuf::from("records.csv"));
    let mut meta = exp.metadata();
    meta.push(("data_dir".into(), data_dir.display().to_string()));
    meta.push(("records".into(), records.display().to_string()));
    print_settings(out, "experiment settings", &meta)?;
    let mnist = load_mnist(data_dir)?;
    let cells = exp.cells().len();
    let runs = exp.run(&mnist, Some(&records), &|r| {
        let last = r.last();
        eprintln!(
            "{:>9} size {:>5} rep {:>2}: test {:.4} whole {:.4} ({:.1} s)",
            r.model, r.size, r.rep, last.test_acc, last.whole_acc, r.wall_seconds
        );
    })?;
    writeln!(out, "{} of {cells} runs recorded in {}", runs.len(), records.display())?;
    let summary = summarize(&runs, &exp.config)?;
    writeln!(out, "{}", summary.render(Split::Whole))?;
    writeln!(out, "{}", summary.render(Split::Test))?;
    if let Some(dir) = a.summary_dir.or_else(|| file.out.clone()) {
        let set = RecordSet::load(&records)?;
        for p in write_summary(&summary, &set.meta, &dir)? {
            writeln!(out, "wrote {}", p.display())?;
        }
    }
    Ok(())
}

fn summarize_cmd(a: SummarizeArgs, file: &FileSettings, out: &mut dyn Write) -> Result<()> {
    let records = a.records.or_else(|| file.records.clone()).unwrap_or_else(|| PathBuf::from("records.csv"));
    let set = RecordSet::load(&records).map_err(|e| match e {
        Error::Io(io) => Error::DataMissing(PathBuf::from(format!("{}: {io}", records.display()))),
        other => other,
    })?;
    // the grid is whatever the records were written for, unless overridden
    let mut cfg = ExperimentConfig::default();
    for (k, v) in &set.meta {
        if cfg.entries().iter().any(|(key, _)| key == k) {
            cfg.set(k, v)?;
        }
    }
    a.grid.apply(&mut cfg)?;
    let mut meta = set.meta.clone();
    meta.retain(|(k, _)| !cfg.entries().iter().any(|(key, _)| key == k));
    let mut resolved: Vec<(String, String)> = cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    resolved.extend(meta);
    print_settings(out, "summarize settings", &resolved)?;

    let summary = summarize(&set.runs, &cfg)?;
    writeln!(out, "{}", summary.render(Split::Whole))?;
    writeln!(out, "{}", summary.render(Split::Test))?;
    let dir = a.out.or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("summary"));
    for p in write_summary(&summary, &resolved, &dir)? {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = GradCheckConfig { seed: a.seed, samples_per_tensor: a.samples, ..Default::default() };
    print_settings(
        out,
        "gradcheck settings",
        &[
            ("step".into(), cfg.step.to_string()),
            ("tolerance".into(), cfg.tolerance.to_string()),
            ("floor".into(), cfg.floor.to_string()),
            ("samples_per_tensor".into(), cfg.samples_per_tensor.to_string()),
            ("seed".into(), cfg.seed.to_string()),
        ],
    )?;
    let reports = run_suite(&cfg)?;
    let mut failed = Vec::new();
    for r in &reports {
        let ok = r.passed(cfg.tolerance);
        writeln!(out, "{:<20} {:>5} coords  max rel err {:.3e}  {}", r.name, r.checked, r.max_rel_error, if ok { "ok" } else { "FAIL" })?;
        if !ok {
            failed.push(r.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn inspect(a: InspectArgs, data_dir: &Path, out: &mut dyn Write) -> Result<()> {
    print_settings(out, "inspect-data settings", &[("data_dir".into(), data_dir.display().to_string())])?;
    let mnist = load_mnist(data_dir)?;
    for (name, d) in [("train", &mnist.train), ("test", &mnist.test)] {
        writeln!(out, "{name:<6} {:>6} images  per class {:?}", d.count(), d.class_histogram())?;
    }
    if let Some(size) = a.size {
        let s = subset(&mnist.train, size, a.seed, Default::default())?;
        writeln!(out, "subset {size} (seed {}) per class {:?}", a.seed, s.class_histogram())?;
    }
    for i in 0..a.show.min(mnist.test.count()) {
        writeln!(out, "test[{i}] label {}", mnist.test.labels.labels[i])?;
        for row in mnist.test.image(i).chunks(IMAGE_SIDE) {
            let line: String = row
                .iter()
                .map(|&p| {
                    if p > 0.66 {
                        '#'
                    } else if p > 0.33 {
                        '+'
                    } else {
                        '.'
                    }
                })
                .collect();
            writeln!(out, "  {line}")?;
        }
    }
    Ok(())
}
