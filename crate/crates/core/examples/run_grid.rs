//! Run a (size × model × repetition) grid, append every finished run to a
//! records file, and print the comparison tables.
//!
//! ```text
//! cargo run --release --example run_grid -- records.csv sizes=512,1024 epochs=1 repetitions=21 models=baseline,embodied
//! ```
//!
//! The first argument is the records file (default `records.csv`); rerunning
//! with the same settings skips runs already recorded. Remaining `key=value`
//! arguments override experiment settings; see `ExperimentConfig::entries`
//! for the keys.

use std::path::PathBuf;

use embodied_cnn::experiment::{summarize, Experiment, ExperimentConfig, Split};
use embodied_cnn::idx::{load_mnist, resolve_data_dir};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (overrides, args): (Vec<String>, Vec<String>) = std::env::args().skip(1).partition(|a| a.contains('='));
    let records = PathBuf::from(args.first().map_or("records.csv", String::as_str));
    let mut config = ExperimentConfig { sizes: vec![512, 1024], epochs: 1, ..Default::default() };
    for kv in &overrides {
        let (k, v) = kv.split_once('=').expect("partitioned on '='");
        config.set(k, v)?;
    }

    let exp = Experiment::with_defaults(config)?;
    print!("{}", exp.config.to_text());
    let mnist = load_mnist(&resolve_data_dir(None))?;
    let runs = exp.run(&mnist, Some(&records), &|r| {
        let last = r.last();
        eprintln!(
            "{:>9} size {:>5} rep {:>2}: test {:.4} whole {:.4} ({:.1} s)",
            r.model, r.size, r.rep, last.test_acc, last.whole_acc, r.wall_seconds
        );
    })?;

    let summary = summarize(&runs, &exp.config)?;
    println!("\n{}", summary.render(Split::Whole));
    println!("{}", summary.render(Split::Test));
    Ok(())
}
