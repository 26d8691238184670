//! Collision rates of the Beta(2−α, α)-coalescent and the constants that
//! govern its small-time and large-sample behaviour.
//!
//!     cargo run --example rates -- 1.5

use betacoal::rates::{build_rate_table, limit_constants, xi_tau_pmf, LambdaMeasure, ModelConstants};

fn main() -> betacoal::Result<()> {
    let alpha: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1.5);
    let beta = LambdaMeasure::beta(alpha)?;
    let table = build_rate_table(8, &beta)?;

    println!("alpha = {alpha}");
    println!("{:>3} {:>3} {:>14} {:>10}", "b", "k", "lambda(b,k)", "P(size k)");
    for b in 2..=5 {
        for k in 2..=b {
            println!("{b:>3} {k:>3} {:>14.8} {:>10.5}", table.rate(b, k), table.merger_size_prob(b, k));
        }
        println!("    total rate G_{b} = {:.8}", table.total_rate(b));
    }
    let (b, k, err) = table.max_consistency_error();
    println!("worst consistency error {err:e} at b={b}, k={k}");

    let mc = ModelConstants::new(alpha, 1.0)?;
    let lc = limit_constants(alpha, 1.0)?;
    println!("offspring mean m = {:.4}, killing rate c = {:.4}", mc.m, mc.c);
    println!("t^(1/(a-1)) N(t) -> {:.6}", lc.theorem4_const);
    println!("n^(a-2) M(n)     -> {:.6}", lc.m_total_const);
    for k in 1..=4u64 {
        println!("P(xi_tau = {k}) = {:.6}   n^(a-2) M_{k}(n) -> {:.6}", xi_tau_pmf(k, alpha)?, lc.theorem9_const(k));
    }
    Ok(())
}
