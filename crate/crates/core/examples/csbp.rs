//! The α-stable continuous-state branching process with jumps below ε
//! removed: a path, its time change, and Laplace transforms against the
//! exact semigroup.

use betacoal::csbp::{simulate_csbp, time_change_r, CsbpSpec, Horizon};
use betacoal::rates::csbp_laplace_u;
use betacoal::rng::RngStream;

fn main() -> betacoal::Result<()> {
    let (alpha, eps) = (1.5, 0.005);
    let path = simulate_csbp(&CsbpSpec::new(alpha, 1.0, eps, Horizon::Time(1.0)), RngStream::new(2, 0))?;
    println!("jump rate {:.2}, drift {:.4}, {} jumps", path.nu_eps, path.c_eps, path.jumps.len());
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("  Z({s}) = {:.4}", path.value_at(s));
    }
    let r = time_change_r(&path);
    println!("R(1) = {:.4}; R^-1(R(0.5)) = {:.6}", r.r_at(1.0)?, r.inverse(r.r_at(0.5)?)?);

    let paths = 20_000;
    let spec = CsbpSpec::new(alpha, 1.0, eps, Horizon::Time(1.0)).absorbing(eps);
    let (t, lam) = (1.0, 1.0);
    let mut sum = 0.0;
    for i in 0..paths {
        sum += simulate_csbp(&spec, RngStream::new(2, 1 + i))?.laplace_at(t, lam);
    }
    let exact = (-csbp_laplace_u(t, lam, alpha)?).exp();
    println!("E exp(-Z_1): simulated {:.4}, exact {exact:.4}", sum / paths as f64);
    Ok(())
}
