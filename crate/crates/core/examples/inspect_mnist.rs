//! Load MNIST, report class balance, draw a stratified subset and print a
//! few digits as text.
//!
//! ```text
//! cargo run --release --example inspect_mnist -- [size] [seed]
//! ```

use embodied_cnn::idx::{load_mnist, resolve_data_dir, stratified_subset};
use embodied_cnn::IMAGE_SIDE;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let size: usize = args.next().map_or(Ok(512), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;

    let dir = resolve_data_dir(None);
    let mnist = load_mnist(&dir)?;
    println!("MNIST from {}", dir.display());
    println!("train {:>6} per class {:?}", mnist.train.count(), mnist.train.class_histogram());
    println!("test  {:>6} per class {:?}", mnist.test.count(), mnist.test.class_histogram());

    let sub = stratified_subset(&mnist.train, size, seed)?;
    println!("subset {size} (seed {seed}) per class {:?}", sub.class_histogram());

    for i in 0..3 {
        println!("\nsubset[{i}] label {}", sub.labels.labels[i]);
        for row in sub.image(i).chunks(IMAGE_SIDE) {
            println!("{}", row.iter().map(|&p| if p > 0.5 { '#' } else { '.' }).collect::<String>());
        }
    }
    Ok(())
}
