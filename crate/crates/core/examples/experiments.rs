//! Running registered experiments from code, pooling independent seeds
//! and writing the artifacts.

use betacoal::experiments::{list, merge_reports, run_experiment, ExperimentConfig};

fn main() -> betacoal::Result<()> {
    for e in list() {
        println!("{:<16} {}", e.name, e.summary);
    }

    let mut reports = Vec::new();
    for seed in [1, 2, 3] {
        let mut cfg = ExperimentConfig::new("queue", seed);
        cfg.replicates = Some(100);
        reports.push(run_experiment(&cfg)?.report);
    }
    let pooled = merge_reports(&reports)?;
    print!("{}", pooled.summary());

    let dir = std::env::temp_dir().join("betacoal-example");
    let mut cfg = ExperimentConfig::new("rate-identities", 1);
    cfg.out = Some(dir.clone());
    let outcome = run_experiment(&cfg)?;
    println!("rate identities pass: {}; artifacts in {}", outcome.report.pass(), dir.join("rate-identities").display());
    Ok(())
}
