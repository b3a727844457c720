//! Train one model on one stratified MNIST subset and print accuracy after
//! every epoch.
//!
//! ```text
//! cargo run --release --example train_single -- [model] [size] [epochs] [seed]
//! ```
//!
//! `model` is `baseline`, `inception` or `embodied` (default), `size` defaults
//! to 1024, `epochs` to 5 and `seed` to 0. Any further `key=value` arguments
//! override experiment settings, e.g. `classification_weight=10`. MNIST is
//! read from `$EMBODIED_MNIST_DIR` or `data/mnist`.

use embodied_cnn::experiment::{Experiment, ExperimentConfig};
use embodied_cnn::idx::{load_mnist, resolve_data_dir};
use embodied_cnn::model::Variant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (overrides, args): (Vec<String>, Vec<String>) = std::env::args().skip(1).partition(|a| a.contains('='));
    let model: Variant = args.first().map_or(Ok(Variant::Embodied), |s| s.parse())?;
    let size: usize = args.get(1).map_or(Ok(1024), |s| s.parse())?;
    let epochs: usize = args.get(2).map_or(Ok(5), |s| s.parse())?;
    let seed: u64 = args.get(3).map_or(Ok(0), |s| s.parse())?;

    let mnist = load_mnist(&resolve_data_dir(None))?;
    let mut config = ExperimentConfig { sizes: vec![size], epochs, base_seed: seed, models: vec![model], ..Default::default() };
    for kv in &overrides {
        let (k, v) = kv.split_once('=').expect("partitioned on '='");
        config.set(k, v)?;
    }
    let exp = Experiment::with_defaults(config)?;
    let run = exp.run_cell(&mnist, model, size, 0)?;

    println!("{model} on {size} examples, seed {seed}");
    println!("epoch  train_acc  test_acc  whole_acc  loss");
    for e in &run.epochs {
        println!("{:>5}  {:>9.4}  {:>8.4}  {:>9.4}  {:.4}", e.epoch, e.train_acc, e.test_acc, e.whole_acc, e.loss);
    }
    println!("{:.1} s", run.wall_seconds);
    Ok(())
}
