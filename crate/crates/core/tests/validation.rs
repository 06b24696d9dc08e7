use underlay_relay::experiments::{run_validation, ExperimentConfig};

fn cfg(scale: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference();
    cfg.validate_trials = 200_000;
    cfg.validate_sets = 20;
    cfg.validate_lambda_scale = scale;
    cfg.resolve.alpha_draws = 20_000;
    cfg
}

fn status(report: &underlay_relay::experiments::ValidationReport, name: &str) -> bool {
    report
        .checks
        .iter()
        .filter(|c| c.name.starts_with(name))
        .all(|c| c.passed)
}

#[test]
fn exact_checks_pass_at_reference() {
    let report = run_validation(&cfg(1.0)).unwrap();
    for name in [
        "exp-integral",
        "relayed-outage-exactness",
        "quotient-pdf",
        "primary-protection",
        "ap-beats-as",
    ] {
        assert!(status(&report, name), "{name} failed:\n{report}");
    }
    assert!(report
        .checks
        .iter()
        .all(|c| c.trials > 0 || c.name.starts_with("exp-integral")));
}

#[test]
fn halved_threshold_is_caught() {
    // negative control: closed forms evaluated at Λ/2 no longer match
    let report = run_validation(&cfg(0.5)).unwrap();
    assert!(!status(&report, "relayed-outage-exactness"), "{report}");
    assert!(!report.passed());
}
