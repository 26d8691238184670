//! Cross-validation of the lookdown genealogy against direct simulation
//! of the Beta-coalescent on the same number of levels.
//!
//!     cargo run --release --example lookdown_vs_coalescent -- 2000

use betacoal::csbp::{crossvalidate_theorem1, Theorem1Config};

fn main() -> betacoal::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(500);
    for small_jump_births in [false, true] {
        let cfg = Theorem1Config {
            alpha: 1.5,
            z0: 1.0,
            epsilon: 0.002,
            t: 1.0,
            s_grid: vec![0.5, 1.0],
            n_levels: 5,
            replicates,
            seed: 1,
            small_jump_births,
        };
        let rep = crossvalidate_theorem1(&cfg)?;
        println!("small-jump births {small_jump_births}: {} used, {} discarded, dropped-pair budget {:.4}", rep.used, rep.discarded, rep.dropped_pair_budget);
        for p in &rep.points {
            println!(
                "  s={}: blocks p={:.4}, pair merged {} vs {} (p={:.4})",
                p.s, p.blocks_test.p_value, p.lookdown_pair, p.direct_pair, p.pair_p_value
            );
        }
    }
    Ok(())
}
