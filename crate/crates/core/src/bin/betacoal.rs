use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use betacoal::coalescent::{simulate_coalescent, to_lines, Stop};
use betacoal::csbp::{run_lookdown, simulate_csbp, CsbpSpec, Horizon};
use betacoal::experiments::{self, ConfigFile, ExperimentConfig};
use betacoal::gw::{simulate_gw, simulate_marked_gw, DEFAULT_CAP};
use betacoal::rates::{build_rate_table, limit_constants, LambdaMeasure, ModelConstants};
use betacoal::rng::RngStream;
use betacoal::spectrum::{scatter_mutations, SpectrumCounts};

#[derive(Parser)]
#[command(name = "betacoal", version, about = "Beta-coalescent simulations and reproduction checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// JSON file with any of the keys below; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Time horizon of the simulation subcommands.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides an experiment's main threshold.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Collision rates and limit constants.
    Rates,
    /// One coalescent tree in the line format (Kingman when --alpha is absent).
    Coalescent,
    /// Site and allele frequency spectra of one sample as CSV.
    Spectrum {
        /// Print the wrapped spectrum instead.
        #[arg(long)]
        wrapped: bool,
    },
    /// Galton-Watson population path as CSV, or marked-tree counts with --theta.
    Gw,
    /// Truncated stable CSBP path as CSV.
    Csbp,
    /// Lookdown event log driven by a CSBP path, as JSON.
    Lookdown,
    /// Run one registered experiment.
    Run { experiment: String },
    /// Run every registered experiment.
    VerifyAll,
    /// List registered experiments.
    List,
}

fn settings(opts: &Opts) -> Result<ConfigFile> {
    let file = match &opts.config {
        Some(p) => ConfigFile::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => ConfigFile::default(),
    };
    let flags = ConfigFile {
        experiment: None,
        alpha: opts.alpha,
        theta: opts.theta,
        n: opts.n,
        eps: opts.eps,
        horizon: opts.horizon,
        replicates: opts.replicates,
        seed: opts.seed,
        out: opts.out.clone(),
        tolerance: opts.tolerance,
        workers: opts.workers,
    };
    Ok(file.overlay(flags))
}

/// Writes to `<out>/<name>` when an output directory is set, else stdout.
fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let p: PathBuf = Path::new(dir).join(name);
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn measure(alpha: Option<f64>) -> Result<LambdaMeasure> {
    Ok(match alpha {
        Some(a) => LambdaMeasure::beta(a)?,
        None => LambdaMeasure::KingmanAtom,
    })
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = settings(&cli.opts)?;
    match cli.command {
        Command::List => {
            for e in experiments::list() {
                println!("{:<16} criterion {:>2}  {}", e.name, e.criterion, e.summary);
            }
            Ok(true)
        }
        Command::Run { experiment } => {
            let cfg = cfg.resolve(&experiment)?;
            let outcome = experiments::run_experiment(&cfg)?;
            print!("{}", outcome.report.summary());
            Ok(outcome.report.pass())
        }
        Command::VerifyAll => {
            let cfg = cfg.resolve("verify-all")?;
            let mut ok = true;
            for e in experiments::list() {
                let outcome = experiments::run_experiment(&ExperimentConfig { experiment: e.name.to_string(), ..cfg.clone() })?;
                print!("{}", outcome.report.summary());
                ok &= outcome.report.pass();
            }
            println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
            Ok(ok)
        }
        Command::Rates => {
            let alpha = cfg.alpha.unwrap_or(1.5);
            let n = cfg.n.unwrap_or(10);
            let table = build_rate_table(n, &LambdaMeasure::beta(alpha)?)?;
            let mut csv = String::from("b,k,lambda_bk,G_b\n");
            for b in 2..=n {
                for k in 2..=b {
                    csv.push_str(&format!("{b},{k},{:e},{:e}\n", table.rate(b, k), table.total_rate(b)));
                }
            }
            emit(&cfg.out, "rates.csv", &csv)?;
            let lc = limit_constants(alpha, cfg.theta.unwrap_or(1.0))?;
            let mc = ModelConstants::new(alpha, cfg.theta.unwrap_or(1.0))?;
            eprintln!("{}", serde_json::to_string_pretty(&(mc, lc))?);
            Ok(table.max_consistency_error().2 <= 1e-10)
        }
        Command::Coalescent => {
            let seed = cfg.seed.context("--seed is required")?;
            let stop = cfg.horizon.map_or(Stop::AtMrca, Stop::AtTime);
            let tree = simulate_coalescent(cfg.n.unwrap_or(10), &measure(cfg.alpha)?, RngStream::new(seed, 0), stop)?;
            emit(&cfg.out, "tree.txt", &to_lines(&tree))?;
            Ok(true)
        }
        Command::Spectrum { wrapped } => {
            let seed = cfg.seed.context("--seed is required")?;
            let s = RngStream::new(seed, 0);
            let tree = simulate_coalescent(cfg.n.unwrap_or(100), &measure(cfg.alpha)?, s.substream(0), Stop::AtMrca)?;
            let muts = scatter_mutations(&tree, cfg.theta.unwrap_or(1.0), s.substream(1))?;
            let counts = SpectrumCounts::compute(&tree, &muts);
            if wrapped {
                emit(&cfg.out, "wrapped_spectrum.csv", &counts.wrapped_csv())?;
            } else {
                emit(&cfg.out, "spectrum.csv", &counts.to_csv())?;
            }
            let summary = serde_json::json!({
                "n": counts.n, "alpha": cfg.alpha, "theta": cfg.theta.unwrap_or(1.0),
                "m_total": counts.m_total, "seed": seed,
            });
            emit(&cfg.out, "spectrum.json", &format!("{summary}\n"))?;
            Ok(true)
        }
        Command::Gw => {
            let seed = cfg.seed.context("--seed is required")?;
            let alpha = cfg.alpha.unwrap_or(1.5);
            let t = cfg.horizon.unwrap_or(3.0);
            match cfg.theta {
                Some(theta) => {
                    let stats = simulate_marked_gw(alpha, theta, t, DEFAULT_CAP as u64, RngStream::new(seed, 0))?;
                    let ok = stats.decomposition_holds() && stats.sandwich_violations(true) == 0;
                    emit(&cfg.out, "marked_gw.json", &(serde_json::to_string_pretty(&stats)? + "\n"))?;
                    Ok(ok)
                }
                None => {
                    let tree = simulate_gw(alpha, cfg.n.unwrap_or(1), t, DEFAULT_CAP, RngStream::new(seed, 0))?;
                    emit(&cfg.out, "gw.csv", &tree.to_csv())?;
                    Ok(true)
                }
            }
        }
        Command::Csbp | Command::Lookdown => {
            let seed = cfg.seed.context("--seed is required")?;
            let spec = CsbpSpec::new(cfg.alpha.unwrap_or(1.5), 1.0, cfg.eps.unwrap_or(0.002), Horizon::Time(cfg.horizon.unwrap_or(1.0)));
            let s = RngStream::new(seed, 0);
            let path = simulate_csbp(&spec, s.substream(1))?;
            if matches!(cli.command, Command::Csbp) {
                emit(&cfg.out, "csbp.csv", &path.to_csv())?;
            } else {
                let log = run_lookdown(&path, cfg.n.unwrap_or(5), s.substream(2));
                emit(&cfg.out, "lookdown.json", &(log.to_json() + "\n"))?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
