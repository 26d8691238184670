//! Mutations on a Galton-Watson tree: family counts M_k, allelic block
//! counts N_k and the marks without later mutations L_k.

use betacoal::gw::simulate_marked_gw;
use betacoal::rates::{xi_tau_pmf, ModelConstants};
use betacoal::rng::RngStream;

fn main() -> betacoal::Result<()> {
    let (alpha, theta, t) = (1.5, 1.0, 5.0);
    let c = ModelConstants::new(alpha, theta)?.c;
    let trees = 200;
    let mut mk = [0.0; 3];
    for i in 0..trees {
        let s = simulate_marked_gw(alpha, theta, t, 1 << 32, RngStream::new(5, i))?;
        assert!(s.decomposition_holds());
        for k in 1..=3 {
            mk[k - 1] += s.m(k as u64) as f64;
        }
        if i == 0 {
            println!("first tree: population {}, marks {}, K = {}", s.population, s.m_total, s.k_t);
            println!("  mutant-block sandwich violations: {}", s.sandwich_violations(true));
            println!("  counting the ancestral block too: {}", s.sandwich_violations(false));
        }
    }
    for k in 1..=3 {
        let est = (-c * t).exp() * mk[k - 1] / trees as f64;
        println!("e^(-ct) E[M_{k}] = {est:.4}, limit (theta/c) P(xi_tau={k}) = {:.4}", theta / c * xi_tau_pmf(k as u64, alpha)?);
    }
    Ok(())
}
