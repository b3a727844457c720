//! Pre-train the 16→10 finger-code classifier and show what it learned.
//!
//! ```text
//! cargo run --release --example pretrain_link -- [codes.txt] [seed]
//! ```
//!
//! Without a codes file the built-in binary codes are used and written to
//! `finger_codes.txt` as a template for custom tables.

use embodied_cnn::embodiment::{default_finger_codes, load_finger_codes, pretrain_stage1, PretrainConfig};
use embodied_cnn::NUM_CLASSES;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let codes = match args.next() {
        Some(path) => load_finger_codes(path.as_ref())?,
        None => {
            let codes = default_finger_codes();
            codes.save("finger_codes.txt".as_ref())?;
            codes
        }
    };
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;

    print!("{}", codes.to_text());
    let link = pretrain_stage1(&codes, &PretrainConfig { seed, ..Default::default() })?;
    println!("\n{}/10 correct after {} steps, loss {:.4}", link.correct, link.steps, link.final_loss);

    let probs = link.classify(&codes.as_tensor())?;
    println!("digit  p(correct)");
    for (d, row) in probs.data().chunks(NUM_CLASSES).enumerate() {
        println!("{d:>5}  {:.4}", row[d]);
    }
    link.save("pretrain.ckpt".as_ref())?;
    println!("saved pretrain.ckpt");
    Ok(())
}
