use embodied_cnn::gradcheck::{run_suite, GradCheckConfig};

#[test]
fn every_gradient_matches_finite_differences() {
    let cfg = GradCheckConfig::default();
    let reports = run_suite(&cfg).unwrap();
    for r in &reports {
        println!("{:<20} checked {:>4}  max rel err {:.3e}", r.name, r.checked, r.max_rel_error);
    }
    for r in &reports {
        assert!(r.passed(cfg.tolerance), "{} max rel err {:e}", r.name, r.max_rel_error);
    }
    assert!(reports.iter().any(|r| r.name == "model/embodied"));
}

#[test]
fn suite_holds_across_seeds() {
    for seed in 1..4 {
        let cfg = GradCheckConfig { seed, samples_per_tensor: 8, ..Default::default() };
        for r in run_suite(&cfg).unwrap() {
            assert!(r.passed(cfg.tolerance), "seed {seed}: {} max rel err {:e}", r.name, r.max_rel_error);
        }
    }
}
