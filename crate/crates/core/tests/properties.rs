//! Exact invariants checked over randomly drawn parameters and seeds.

use betacoal::coalescent::{from_lines, simulate_coalescent, to_lines, Stop};
use betacoal::csbp::{ancestral_partition, apply_birth, run_lookdown, simulate_csbp, time_change_r, CsbpSpec, Horizon};
use betacoal::experiments::{integer_partitions, ConfigFile};
use betacoal::gw::simulate_marked_gw;
use betacoal::rates::{build_rate_table, collision_rate, ChiSampler, LambdaMeasure};
use betacoal::rng::RngStream;
use betacoal::spectrum::{ewens_probability, scatter_mutations, SpectrumCounts};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn rates_are_consistent(alpha in 1.02f64..1.98, b in 2usize..150) {
        let m = LambdaMeasure::beta(alpha).unwrap();
        for k in 2..=b {
            let lhs = collision_rate(b, k, &m).unwrap();
            let rhs = collision_rate(b + 1, k, &m).unwrap() + collision_rate(b + 1, k + 1, &m).unwrap();
            prop_assert!((lhs / rhs - 1.0).abs() < 1e-10, "b={b} k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn total_rate_is_binomial_sum(alpha in 1.02f64..1.98, n in 2usize..60) {
        let t = build_rate_table(n, &LambdaMeasure::beta(alpha).unwrap()).unwrap();
        for b in 2..=n {
            let mut g = 0.0;
            let mut binom = 1.0;
            for k in 2..=b {
                binom = if k == 2 { (b * (b - 1) / 2) as f64 } else { binom * (b + 1 - k) as f64 / k as f64 };
                g += binom * t.rate(b, k);
            }
            prop_assert!((g / t.total_rate(b) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn genealogies_are_nested_and_ultrametric(
        n in 2usize..40,
        alpha in prop::option::of(1.05f64..1.95),
        seed in any::<u64>(),
    ) {
        let m = alpha.map_or(LambdaMeasure::KingmanAtom, |a| LambdaMeasure::beta(a).unwrap());
        let tree = simulate_coalescent(n, &m, RngStream::new(seed, 0), Stop::AtMrca).unwrap();
        prop_assert!(tree.is_complete());
        let seq = tree.partition_sequence();
        for w in seq.windows(2) {
            prop_assert!(w[1].is_coarsening_of(&w[0]));
            prop_assert!(w[1].num_blocks() < w[0].num_blocks());
        }
        prop_assert_eq!(seq.last().unwrap().num_blocks(), 1);
        prop_assert_eq!(tree.coalescence_time_matrix().ultrametric_violations(), 0);
        prop_assert_eq!(from_lines(&to_lines(&tree)).unwrap(), tree);
    }

    #[test]
    fn block_counts_never_increase(n in 2usize..200, alpha in 1.05f64..1.95, seed in any::<u64>()) {
        let tree = simulate_coalescent(n, &LambdaMeasure::beta(alpha).unwrap(), RngStream::new(seed, 1), Stop::AtMrca).unwrap();
        let mut last = n;
        for e in tree.events() {
            let now = tree.block_count_at(e.time);
            prop_assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn spectra_account_for_every_mutation_and_leaf(
        n in 2usize..60,
        alpha in 1.05f64..1.95,
        theta in 0.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let s = RngStream::new(seed, 2);
        let tree = simulate_coalescent(n, &LambdaMeasure::beta(alpha).unwrap(), s.substream(0), Stop::AtMrca).unwrap();
        let muts = scatter_mutations(&tree, theta, s.substream(1)).unwrap();
        let c = SpectrumCounts::compute(&tree, &muts);
        prop_assert_eq!(c.site.iter().sum::<u64>(), c.m_total);
        let covered: u64 = c.allele.iter().enumerate().map(|(i, &a)| (i as u64 + 1) * a).sum();
        prop_assert_eq!(covered, n as u64);
        prop_assert_eq!(c.allelic_partition.num_blocks() as u64, c.allele.iter().sum::<u64>());
    }

    #[test]
    fn marked_gw_decomposes(alpha in 1.1f64..1.9, theta in 0.1f64..3.0, seed in any::<u64>()) {
        let s = simulate_marked_gw(alpha, theta, 2.0, 1 << 20, RngStream::new(seed, 3)).unwrap();
        prop_assert!(s.decomposition_holds());
        prop_assert_eq!(s.sandwich_violations(true), 0);
        let marked: u64 = s.m_k.values().sum();
        prop_assert_eq!(marked, s.m_total);
    }

    #[test]
    fn time_change_inverts(seed in any::<u64>(), u in 0.0f64..1.0) {
        let path = simulate_csbp(&CsbpSpec::new(1.5, 1.0, 0.02, Horizon::Time(1.0)), RngStream::new(seed, 4)).unwrap();
        let r = time_change_r(&path);
        let level = u * r.end_level();
        let back = r.r_at(r.inverse(level).unwrap()).unwrap();
        prop_assert!((back - level).abs() <= 1e-9 * (1.0 + level));
        let s = u * path.end_time;
        prop_assert!((r.inverse(r.r_at(s).unwrap()).unwrap() - s).abs() <= 1e-9);
    }

    #[test]
    fn birth_copies_the_lowest_participant(
        n in 2usize..30,
        picks in prop::collection::vec(any::<bool>(), 30),
    ) {
        let participants: Vec<u32> = (0..n as u32).filter(|&i| picks[i as usize]).collect();
        prop_assume!(participants.len() >= 2);
        let before: Vec<usize> = (0..n).collect();
        let mut after = before.clone();
        apply_birth(&mut after, &participants);
        let low = participants[0] as usize;
        prop_assert_eq!(&after[..=low], &before[..=low]);
        for &p in &participants {
            prop_assert_eq!(after[p as usize], low);
        }
        // non-participants keep their relative order and none is lost
        // unless it is pushed past the top level
        let rest: Vec<usize> = after.iter().enumerate().filter(|(i, _)| !participants.contains(&(*i as u32))).map(|(_, &t)| t).collect();
        prop_assert!(rest.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn lookdown_ancestry_coarsens_backwards(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let path = simulate_csbp(&CsbpSpec::new(1.5, 1.0, 0.01, Horizon::Level(1.0)), RngStream::new(seed, 5)).unwrap();
        let log = run_lookdown(&path, 8, RngStream::new(seed, 6));
        let end = path.end_time;
        let (near, far) = (end * a.max(b), end * a.min(b));
        let recent = ancestral_partition(&log, near, end).unwrap();
        let older = ancestral_partition(&log, far, end).unwrap();
        prop_assert!(older.is_coarsening_of(&recent));
        // the replayed types agree with the ancestry
        let types = log.types_at(end);
        let start = log.types_at(far);
        for i in 0..8 {
            for j in 0..8 {
                if older.same_block(i, j) {
                    prop_assert_eq!(types[i], types[j]);
                }
            }
            prop_assert!(start.contains(&types[i]));
        }
    }

    #[test]
    fn chi_quantiles_are_monotone(alpha in 1.05f64..1.95, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let chi = ChiSampler::new(alpha).unwrap();
        let (lo, hi) = (u.min(v), u.max(v));
        // a smaller tail probability needs a larger k
        prop_assert!(chi.quantile(lo) >= chi.quantile(hi));
        prop_assert!(chi.quantile(hi) >= 2);
    }

    #[test]
    fn ewens_law_sums_to_one(n in 1usize..12, theta in 0.05f64..10.0) {
        let total: f64 = integer_partitions(n).iter().map(|a| ewens_probability(a, theta).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flags_always_win(file_alpha in 1.1f64..1.9, flag_alpha in prop::option::of(1.1f64..1.9), seed in any::<u64>()) {
        let file = ConfigFile { alpha: Some(file_alpha), seed: Some(seed), ..Default::default() };
        let flags = ConfigFile { alpha: flag_alpha, ..Default::default() };
        let cfg = file.overlay(flags).resolve("rate-identities").unwrap();
        prop_assert_eq!(cfg.alpha, Some(flag_alpha.unwrap_or(file_alpha)));
        prop_assert_eq!(cfg.seed, seed);
    }
}
