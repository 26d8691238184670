//! Infinite-sites and infinite-alleles spectra on Beta-coalescent trees,
//! averaged over a few trees and compared with their large-n limits.
//!
//!     cargo run --release --example spectrum -- 2000 20

use betacoal::coalescent::{simulate_coalescent, Stop};
use betacoal::rates::{limit_constants, LambdaMeasure};
use betacoal::rng::RngStream;
use betacoal::spectrum::{scatter_mutations, SpectrumCounts};

fn main() -> betacoal::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let trees: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let (alpha, theta) = (1.5, 1.0);
    let beta = LambdaMeasure::beta(alpha)?;

    let mut site = [0.0; 5];
    let mut allele = [0.0; 5];
    let mut total = 0.0;
    for i in 0..trees {
        let s = RngStream::new(11, i);
        let tree = simulate_coalescent(n, &beta, s.substream(0), Stop::AtMrca)?;
        let muts = scatter_mutations(&tree, theta, s.substream(1))?;
        let c = SpectrumCounts::compute(&tree, &muts);
        for k in 1..=5 {
            site[k - 1] += c.m_k(k) as f64;
            allele[k - 1] += c.n_k(k) as f64;
        }
        total += c.m_total as f64;
    }

    let scale = (n as f64).powf(alpha - 2.0) / trees as f64;
    let lc = limit_constants(alpha, theta)?;
    println!("n={n}, {trees} trees, alpha={alpha}, theta={theta}");
    println!("{:>2} {:>12} {:>12} {:>12}", "k", "n^(a-2)M_k", "n^(a-2)N_k", "limit");
    for k in 1..=5 {
        println!("{k:>2} {:>12.4} {:>12.4} {:>12.4}", site[k - 1] * scale, allele[k - 1] * scale, lc.theorem9_const(k as u64));
    }
    println!("n^(a-2)M = {:.4}, limit {:.4}", total * scale, lc.m_total_const);
    Ok(())
}
