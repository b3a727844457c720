//! Welch's t-test and Cohen's d on two samples given on the command line.
//!
//! ```text
//! cargo run --example statistics -- 0.91,0.93,0.95,0.90,0.94 0.89,0.92,0.88,0.90
//! ```
//!
//! The first sample plays the comparator and the second the embodied model,
//! so a negative d means the second sample is higher.

use embodied_cnn::stats::{cohens_d, mean, sample_sd, welch_t_test};

fn parse(s: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|v| v.trim().parse()).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (a, b) = match args.as_slice() {
        [a, b] => (parse(a)?, parse(b)?),
        _ => (vec![0.91, 0.93, 0.95, 0.90, 0.94], vec![0.89, 0.92, 0.88, 0.90]),
    };
    println!("a: n {} mean {:.4} sd {:.4}", a.len(), mean(&a), sample_sd(&a));
    println!("b: n {} mean {:.4} sd {:.4}", b.len(), mean(&b), sample_sd(&b));
    let w = welch_t_test(&a, &b)?;
    println!("Welch t {:.6}  df {:.4}  two-sided p {:.6}", w.t, w.df, w.p);
    println!("Cohen's d (a vs b) {:.6}", cohens_d(&a, &b)?);
    Ok(())
}
