//! Simulating Kingman and Beta-coalescent genealogies and reading off
//! block counts, partitions, pairwise coalescence times and tree length.

use betacoal::coalescent::{from_lines, simulate_coalescent, to_lines, Stop};
use betacoal::rates::LambdaMeasure;
use betacoal::rng::RngStream;

fn main() -> betacoal::Result<()> {
    let n = 8;
    for (name, measure) in [("Kingman", LambdaMeasure::KingmanAtom), ("Beta a=1.5", LambdaMeasure::beta(1.5)?)] {
        let tree = simulate_coalescent(n, &measure, RngStream::new(7, 0), Stop::AtMrca)?;
        println!("== {name}: {} events, MRCA at {:.4}", tree.events().len(), tree.mrca_time().unwrap_or(f64::NAN));
        for e in tree.events() {
            println!("  t = {:.4}: nodes {:?} -> {}", e.time, e.merged, e.into);
        }
        let t = 0.3;
        println!("  {} blocks at t={t}: {:?}", tree.block_count_at(t), tree.partition_at(t).blocks());
        let d = tree.coalescence_time_matrix();
        println!("  d(0,1) = {:.4}, ultrametric violations: {}", d.get(0, 1), d.ultrametric_violations());
        println!("  total branch length {:.4}", tree.total_tree_length().length);

        // the line format round-trips exactly
        let text = to_lines(&tree);
        assert_eq!(from_lines(&text)?, tree);
    }

    // Truncated runs: stop when 3 blocks remain.
    let big = simulate_coalescent(10_000, &LambdaMeasure::beta(1.5)?, RngStream::new(7, 1), Stop::AtBlocks(3))?;
    println!("n=10000 reaches <= 3 blocks at t = {:.5}", big.last_event_time());
    Ok(())
}
