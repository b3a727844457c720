//! Turn a records file into the comparison tables, learning-curve CSV and
//! SVG plots.
//!
//! ```text
//! cargo run --release --example summarize_records -- records.csv [out-dir]
//! ```
//!
//! The grid (sizes, models, epochs, repetitions) is read from the records
//! header, so any file written by `run_grid` or the `experiment` subcommand
//! works.

use std::path::PathBuf;

use embodied_cnn::experiment::{summarize, write_summary, ExperimentConfig, RecordSet, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let records = PathBuf::from(args.next().unwrap_or_else(|| "records.csv".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "summary".into()));

    let set = RecordSet::load(&records)?;
    let mut config = ExperimentConfig::default();
    for (k, v) in &set.meta {
        if config.entries().iter().any(|(key, _)| key == k) {
            config.set(k, v)?;
        }
    }
    let summary = summarize(&set.runs, &config)?;
    println!("{}", summary.render(Split::Whole));
    println!("{}", summary.render(Split::Test));
    for p in write_summary(&summary, &set.meta, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
