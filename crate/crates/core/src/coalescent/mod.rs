//! Λ-coalescent simulation on a finite sample.
//!
//! With `b` live blocks the chain waits an Exponential(G_b) time, draws a
//! merger size `k` with probability C(b,k) λ_{b,k} / G_b and merges a
//! uniformly chosen k-subset of the live blocks.

mod format;
mod tree;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub use format::{from_json, from_lines, to_json, to_lines};
pub use tree::{BlockHit, CoalescenceTimes, GenealogyTree, MergeEvent, Partition, TreeLength};

use crate::error::{domain, Result};
use crate::rates::{LambdaMeasure, MergerLaw};
use crate::rng::RngStream;

/// When to stop the merger chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// Keep every event with time `<= t`.
    AtTime(f64),
    /// Stop at the first event leaving at most `m` blocks.
    AtBlocks(usize),
    /// Run until one block remains.
    AtMrca,
}

/// Simulates the coalescent driven by `measure` on `n` labelled leaves.
pub fn simulate_coalescent(n: usize, measure: &LambdaMeasure, stream: RngStream, stop: Stop) -> Result<GenealogyTree> {
    let law = MergerLaw::for_measure(measure, n)?;
    simulate_with_law(n, &law, measure.alpha(), stream, stop)
}

/// As [`simulate_coalescent`], reusing a prepared merger law (useful when
/// many replicates share a tabulated measure).
pub fn simulate_with_law(
    n: usize,
    law: &MergerLaw,
    alpha: Option<f64>,
    stream: RngStream,
    stop: Stop,
) -> Result<GenealogyTree> {
    if n == 0 {
        return domain("sample size must be positive");
    }
    if let MergerLaw::Table(t) = law {
        if t.n_max() < n {
            return domain(format!("rate table covers {} blocks, sample has {n}", t.n_max()));
        }
    }
    let (horizon, floor) = match stop {
        Stop::AtTime(t) if t >= 0.0 => (t, 1),
        Stop::AtTime(t) => return domain(format!("stop time must be non-negative, got {t}")),
        Stop::AtBlocks(m) if (1..=n).contains(&m) => (f64::INFINITY, m),
        Stop::AtBlocks(m) => return domain(format!("block target {m} outside [1, {n}]")),
        Stop::AtMrca => (f64::INFINITY, 1),
    };
    let mut rng = stream.rng();
    let mut live: Vec<u32> = (0..n as u32).collect();
    let mut events = Vec::new();
    let mut t = 0.0;
    while live.len() > floor {
        let b = live.len();
        let hold: f64 = Exp1.sample(&mut rng);
        t += hold / law.total_rate(b);
        if t > horizon {
            break;
        }
        let k = law.sample_size(b, &mut rng);
        // partial Fisher-Yates: the chosen k end up at the tail
        for i in 0..k {
            let j = rng.random_range(0..b - i);
            live.swap(j, b - 1 - i);
        }
        let mut merged = live.split_off(b - k);
        merged.sort_unstable();
        let into = (n + events.len()) as u32;
        live.push(into);
        events.push(MergeEvent { time: t, merged, into });
    }
    GenealogyTree::from_events(n, alpha, stream.seed, events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_complete() {
        let m = LambdaMeasure::beta(1.5).unwrap();
        let s = RngStream::new(7, 0);
        let a = simulate_coalescent(50, &m, s, Stop::AtMrca).unwrap();
        let b = simulate_coalescent(50, &m, s, Stop::AtMrca).unwrap();
        assert_eq!(a, b);
        assert!(a.is_complete());
        assert_eq!(a.node_size(a.num_nodes() - 1), 50);
        let c = simulate_coalescent(50, &m, RngStream::new(7, 1), Stop::AtMrca).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stop_rules() {
        let m = LambdaMeasure::beta(1.3).unwrap();
        let s = RngStream::new(3, 0);
        let full = simulate_coalescent(200, &m, s, Stop::AtMrca).unwrap();
        let mid = full.events()[full.events().len() / 2].time;
        let cut = simulate_coalescent(200, &m, s, Stop::AtTime(mid)).unwrap();
        assert_eq!(cut.events(), &full.events()[..full.events().len() / 2 + 1]);
        let blocks = simulate_coalescent(200, &m, s, Stop::AtBlocks(20)).unwrap();
        assert!(blocks.block_count_at(blocks.last_event_time()) <= 20);
        let hit = full.time_to_m_blocks(20).unwrap().unwrap();
        assert_eq!(hit.time, blocks.last_event_time());
        assert!(simulate_coalescent(10, &m, s, Stop::AtBlocks(0)).is_err());
        assert!(simulate_coalescent(10, &m, s, Stop::AtTime(-1.0)).is_err());
    }

    #[test]
    fn kingman_merges_pairs() {
        let t = simulate_coalescent(30, &LambdaMeasure::KingmanAtom, RngStream::new(1, 0), Stop::AtMrca).unwrap();
        assert_eq!(t.events().len(), 29);
        assert!(t.events().iter().all(|e| e.merged.len() == 2));
    }

    #[test]
    fn single_leaf_is_trivially_complete() {
        let t = simulate_coalescent(1, &LambdaMeasure::UniformBS, RngStream::new(1, 0), Stop::AtMrca).unwrap();
        assert!(t.is_complete());
        assert_eq!(t.mrca_time(), Some(0.0));
    }
}
