//! Named reproduction experiments with seeded, replicate-parallel runs.
//!
//! Every experiment is deterministic given its configuration. A failing
//! statistical test whose p-value lies in [0.001, 0.01) triggers one
//! rerun on an independent seed before the failure is reported.

mod config;
mod report;
mod suite;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{ConfigFile, ExperimentConfig};
pub use report::{merge_reports, Check, Metric, Provenance, StatReport};
pub use suite::{block_count_window_average, first_merger_by_x_events, integer_partitions, Outcome};

use crate::error::{Error, Result};
use suite::Ctx;

type Runner = fn(&Ctx) -> Result<Outcome>;

/// A registered experiment.
#[derive(Clone, Copy)]
pub struct Experiment {
    pub name: &'static str,
    /// Number of the acceptance criterion it implements.
    pub criterion: u8,
    pub summary: &'static str,
    run: Runner,
}

const REGISTRY: &[Experiment] = &[
    Experiment { name: "rate-identities", criterion: 1, summary: "consistency of collision rates and closed form vs quadrature", run: suite::rate_identities },
    Experiment { name: "brute-force-n3", criterion: 2, summary: "first merger at n=3 from the rates and from raw x-events", run: suite::brute_force_n3 },
    Experiment { name: "ewens", criterion: 3, summary: "Kingman allelic partitions vs the Ewens sampling formula", run: suite::ewens },
    Experiment { name: "theorem4", criterion: 4, summary: "small-time number of blocks t^(1/(a-1)) N(t)", run: suite::theorem4 },
    Experiment { name: "frechet", criterion: 5, summary: "largest block frequency vs the Frechet law", run: suite::frechet },
    Experiment { name: "xi-tau", criterion: 6, summary: "killed GW law: closed form, recursion and simulation", run: suite::xi_tau },
    Experiment { name: "theorem9", criterion: 7, summary: "site and allele frequency spectra at n=2000", run: suite::theorem9 },
    Experiment { name: "marked-gw", criterion: 8, summary: "marked GW tree: family counts and the L_k/K sandwich", run: suite::marked_gw },
    Experiment { name: "queue", criterion: 9, summary: "infinite-server queue with exponentially growing arrivals", run: suite::queue },
    Experiment { name: "csbp-marginals", criterion: 10, summary: "truncated stable CSBP: Laplace transforms and extinction", run: suite::csbp_marginals_check },
    Experiment { name: "theorem1", criterion: 11, summary: "lookdown genealogy under the time change vs direct coalescent", run: suite::theorem1 },
    Experiment { name: "invariants", criterion: 12, summary: "exact structural invariants", run: suite::invariants },
];

pub fn list() -> &'static [Experiment] {
    REGISTRY
}

pub fn find(name: &str) -> Result<&'static Experiment> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

/// Seed for the k-th independent rerun.
pub fn rerun_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one experiment, rerunning once on an independent seed when every
/// failure is a borderline test. Artifacts are written when `out` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let exp = find(&cfg.experiment)?;
    let go = || -> Result<Outcome> {
        let first = (exp.run)(&Ctx { cfg, seed: cfg.seed })?;
        let r = &first.report;
        if r.pass() || !r.failures().all(|m| m.borderline()) {
            return Ok(first);
        }
        let seed = rerun_seed(cfg.seed, 1);
        let mut second = (exp.run)(&Ctx { cfg, seed })?;
        let failed: Vec<String> = first.report.failures().map(|m| m.name.clone()).collect();
        second.report.reruns = 1;
        second.report.seeds.insert(0, cfg.seed);
        second.report.note(format!("borderline failure of {} on seed {}; reported result is the rerun", failed.join(", "), cfg.seed));
        Ok(second)
    };
    let outcome = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Domain(format!("cannot start {w} workers: {e}")))?
            .install(go)?,
        None => go()?,
    };
    if let Some(dir) = &cfg.out {
        write_outputs(&dir.join(&cfg.experiment), cfg, &outcome).map_err(|e| Error::Domain(format!("writing {}: {e}", dir.display())))?;
    }
    Ok(outcome)
}

/// Runs every registered experiment with the shared settings of `base`.
/// Model parameters in `base` apply to all experiments, so the default
/// suite is `base` with only seed, output, tolerance and workers set.
pub fn verify_all(base: &ExperimentConfig) -> Result<Vec<Outcome>> {
    REGISTRY
        .iter()
        .map(|e| run_experiment(&ExperimentConfig { experiment: e.name.to_string(), ..base.clone() }))
        .collect()
}

/// `config.json`, `report.json` and the CSV tables in `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> std::io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    put("config.json", &cfg.to_json())?;
    put("report.json", &outcome.report.to_json())?;
    for (name, text) in &outcome.tables {
        put(name, text)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_covers_every_criterion_once() {
        let mut c: Vec<u8> = list().iter().map(|e| e.criterion).collect();
        c.sort_unstable();
        assert_eq!(c, (1..=12).collect::<Vec<_>>());
        assert!(matches!(find("nope"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn rerun_seeds_differ() {
        assert_ne!(rerun_seed(1, 1), 1);
        assert_ne!(rerun_seed(1, 1), rerun_seed(2, 1));
    }

    #[test]
    fn small_run_is_deterministic() {
        let mut cfg = ExperimentConfig::new("queue", 3);
        cfg.replicates = Some(5);
        cfg.horizon = Some(4.0);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.report, b.report);
    }
}
