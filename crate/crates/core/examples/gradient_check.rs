//! Compare every analytic gradient in the framework with central finite
//! differences.
//!
//! ```text
//! cargo run --release --example gradient_check -- [seed] [samples-per-tensor]
//! ```

use embodied_cnn::gradcheck::{run_suite, GradCheckConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = GradCheckConfig::default();
    if let Some(s) = args.next() {
        cfg.seed = s.parse()?;
    }
    if let Some(n) = args.next() {
        cfg.samples_per_tensor = n.parse()?;
    }
    println!("h = {:e}, tolerance {:e}, floor {:e}", cfg.step, cfg.tolerance, cfg.floor);
    let reports = run_suite(&cfg)?;
    for r in &reports {
        let verdict = if r.passed(cfg.tolerance) { "ok" } else { "FAIL" };
        println!("{:<20} {:>5} coords  max rel err {:.3e}  {verdict}", r.name, r.checked, r.max_rel_error);
    }
    if reports.iter().any(|r| !r.passed(cfg.tolerance)) {
        std::process::exit(3);
    }
    Ok(())
}
