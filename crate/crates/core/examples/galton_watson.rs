//! The continuous-time Galton-Watson tree with offspring law χ: growth,
//! the Kesten-Stigum martingale and the law of ξ_τ.

use betacoal::gw::{kesten_stigum_at, simulate_gw, simulate_xi_tau, DEFAULT_CAP};
use betacoal::rates::{xi_tau_pmf, ChiSampler};
use betacoal::rng::RngStream;

fn main() -> betacoal::Result<()> {
    let alpha = 1.5;
    let tree = simulate_gw(alpha, 1, 6.0, DEFAULT_CAP, RngStream::new(3, 0))?;
    println!("population at t=6: {}", tree.final_population());
    println!("{:>4} {:>10} {:>12}", "t", "xi_t", "e^(-2t)xi_t");
    for t in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
        println!("{t:>4} {:>10} {:>12.4}", tree.population_at(t), kesten_stigum_at(&tree, alpha, t));
    }

    // ξ_τ by simulation against its closed form
    let chi = ChiSampler::new(alpha)?;
    let mut rng = RngStream::new(3, 1).rng();
    let draws = 100_000;
    let mut counts = [0u64; 5];
    for _ in 0..draws {
        let k = simulate_xi_tau(&chi, 1000, &mut rng) as usize;
        if k <= 4 {
            counts[k] += 1;
        }
    }
    for (k, &c) in counts.iter().enumerate().skip(1) {
        println!("P(xi_tau={k}): simulated {:.4}, exact {:.4}", c as f64 / draws as f64, xi_tau_pmf(k as u64, alpha)?);
    }
    Ok(())
}
