//! The twelve acceptance criteria at full scale, seed 1.
//!
//! Runs sequentially and prints one line per criterion, followed by the
//! failing metrics. Exits non-zero when any criterion fails. Positional
//! arguments restrict the run to experiments whose name contains them:
//!
//!     cargo test --release --test acceptance -- theorem1 queue

use std::process::ExitCode;
use std::time::Instant;

use betacoal::experiments::{list, run_experiment, ExperimentConfig};

const SEED: u64 = 1;

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        for e in list() {
            println!("{}: test", e.name);
        }
        return ExitCode::SUCCESS;
    }
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let chosen: Vec<_> = list().iter().filter(|e| filters.is_empty() || filters.iter().any(|f| e.name.contains(f.as_str()))).collect();
    println!("\nrunning {} acceptance criteria (seed {SEED})", chosen.len());
    let mut failed = Vec::new();
    for e in chosen {
        let start = Instant::now();
        let line = match run_experiment(&ExperimentConfig::new(e.name, SEED)) {
            Ok(outcome) => {
                let r = &outcome.report;
                let verdict = if r.pass() { "pass" } else { "FAIL" };
                let mut line = format!("criterion {:>2} {:<16} {verdict}  ({:.1} s)", e.criterion, e.name, start.elapsed().as_secs_f64());
                for m in r.failures() {
                    line.push_str(&format!("\n      {m}"));
                }
                if !r.pass() {
                    failed.push(e.name);
                }
                line
            }
            Err(err) => {
                failed.push(e.name);
                format!("criterion {:>2} {:<16} FAIL  error: {err}", e.criterion, e.name)
            }
        };
        println!("{line}");
    }
    if failed.is_empty() {
        println!("\nacceptance: all criteria pass\n");
        ExitCode::SUCCESS
    } else {
        println!("\nacceptance: {} failing: {}\n", failed.len(), failed.join(", "));
        ExitCode::FAILURE
    }
}
