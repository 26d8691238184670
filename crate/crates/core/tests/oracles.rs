//! Monte Carlo output against independently computed expectations.

use betacoal::coalescent::{simulate_coalescent, Stop};
use betacoal::csbp::{ancestral_partition, run_lookdown, simulate_csbp, CsbpPath, CsbpSpec, Horizon};
use betacoal::gw::{simulate_gw, simulate_marked_gw, simulate_queue, simulate_xi_tau, QueueStart, ServiceRate, DEFAULT_CAP};
use betacoal::rates::{csbp_laplace_u, limit_constants, ChiSampler, LambdaMeasure};
use betacoal::rng::RngStream;
use betacoal::stats::{chi_square_two_sample, mean_se, two_proportion, Estimate};
use rand::Rng;
use statrs::function::gamma::gamma;

fn within(est: &Estimate, target: f64, k: f64) {
    assert!((est.mean - target).abs() <= k * est.se, "estimate {} ± {} vs {target}", est.mean, est.se);
}

fn beta(alpha: f64) -> LambdaMeasure {
    LambdaMeasure::beta(alpha).unwrap()
}

#[test]
fn two_leaves_meet_after_unit_mean() {
    let t: Vec<f64> = (0..100_000)
        .map(|i| simulate_coalescent(2, &beta(1.5), RngStream::new(21, i), Stop::AtMrca).unwrap().mrca_time().unwrap())
        .collect();
    within(&mean_se(&t), 1.0, 3.0);
}

#[test]
fn kingman_three_leaves() {
    let trees: Vec<_> = (0..100_000)
        .map(|i| simulate_coalescent(3, &LambdaMeasure::KingmanAtom, RngStream::new(22, i), Stop::AtMrca).unwrap())
        .collect();
    let t: Vec<f64> = trees.iter().map(|t| t.mrca_time().unwrap()).collect();
    let l: Vec<f64> = trees.iter().map(|t| t.total_tree_length().length).collect();
    within(&mean_se(&t), 4.0 / 3.0, 3.0);
    within(&mean_se(&l), 3.0, 3.0);
}

/// Size of the first merger among `b` blocks, built from x-events alone.
/// Events that involve at least two blocks have intensity
/// x^{−2} q_b(x) Λ(dx) with q_b(x) = P(Bin(b, x) ≥ 2), a finite measure,
/// so they can be drawn exactly: propose from x^{−1−α} min(1, C(b,2) x²)
/// and accept with (1−x)^{α−1} q_b(x) / min(1, C(b,2) x²).
fn first_merger_from_x_events<R: Rng>(b: usize, alpha: f64, rng: &mut R) -> usize {
    let pairs = (b * (b - 1) / 2) as f64;
    let x0 = pairs.powf(-0.5);
    let mass_low = pairs * x0.powf(2.0 - alpha) / (2.0 - alpha);
    let mass_high = (x0.powf(-alpha) - 1.0) / alpha;
    let weights = |x: f64| -> Vec<f64> {
        let mut binom = 1.0;
        (0..=b)
            .map(|k| {
                if k > 0 {
                    binom = binom * (b + 1 - k) as f64 / k as f64;
                }
                binom * x.powi(k as i32) * (1.0 - x).powi((b - k) as i32)
            })
            .collect::<Vec<f64>>()
    };
    loop {
        let u: f64 = rng.random();
        let x = if rng.random::<f64>() * (mass_low + mass_high) < mass_low {
            x0 * u.powf(1.0 / (2.0 - alpha))
        } else {
            (x0.powf(-alpha) - u * (x0.powf(-alpha) - 1.0)).powf(-1.0 / alpha)
        };
        let w = weights(x);
        let q: f64 = w[2..].iter().sum();
        if rng.random::<f64>() >= (1.0 - x).powf(alpha - 1.0) * q / (pairs * x * x).min(1.0) {
            continue;
        }
        let mut pick = rng.random::<f64>() * q;
        for (k, &wk) in w.iter().enumerate().skip(2) {
            if pick < wk {
                return k;
            }
            pick -= wk;
        }
        return b;
    }
}

#[test]
fn first_merger_size_matches_x_event_construction() {
    for (b, alpha) in [(4, 1.5), (6, 1.2), (6, 1.8)] {
        let reps = 20_000;
        let mut sim = vec![0u64; b - 1];
        let mut oracle = vec![0u64; b - 1];
        let mut rng = RngStream::new(23, 1_000_000 + b as u64).rng();
        for i in 0..reps {
            let tree = simulate_coalescent(b, &beta(alpha), RngStream::new(23, i), Stop::AtBlocks(b - 1)).unwrap();
            sim[tree.events()[0].merged.len() - 2] += 1;
            oracle[first_merger_from_x_events(b, alpha, &mut rng) - 2] += 1;
        }
        let test = chi_square_two_sample(&sim, &oracle);
        assert!(test.p_value > 0.001, "b={b} a={alpha}: {sim:?} vs {oracle:?}, p={}", test.p_value);
    }
}

#[test]
fn time_to_one_hundred_blocks() {
    let alpha = 1.5;
    let times: Vec<f64> = (0..200)
        .map(|i| {
            let tree = simulate_coalescent(10_000, &beta(alpha), RngStream::new(24, i), Stop::AtBlocks(100)).unwrap();
            tree.time_to_m_blocks(100).unwrap().unwrap().time
        })
        .collect();
    let target = alpha * gamma(alpha) * 100f64.powf(1.0 - alpha);
    let m = mean_se(&times).mean;
    assert!((m / target - 1.0).abs() < 0.15, "{m} vs {target}");
}

#[test]
fn scaled_tree_length() {
    let (alpha, n) = (1.5, 2000);
    let l: Vec<f64> = (0..100)
        .map(|i| {
            let tree = simulate_coalescent(n, &beta(alpha), RngStream::new(25, i), Stop::AtMrca).unwrap();
            tree.total_tree_length().length * (n as f64).powf(alpha - 2.0)
        })
        .collect();
    let target = limit_constants(alpha, 1.0).unwrap().m_total_const;
    let m = mean_se(&l).mean;
    assert!((m / target - 1.0).abs() < 0.2, "{m} vs {target}");
}

#[test]
fn galton_watson_growth() {
    let trees: Vec<_> = (0..10_000).map(|i| simulate_gw(1.5, 1, 2.0, DEFAULT_CAP, RngStream::new(26, i)).unwrap()).collect();
    // heavy-tailed offspring: the sample mean converges slowly, so a band
    let pop: Vec<f64> = trees.iter().map(|t| t.final_population() as f64).collect();
    let m = mean_se(&pop).mean;
    assert!((m / 4f64.exp() - 1.0).abs() < 0.15, "{m}");
    let lone = trees.iter().filter(|t| t.population_at(1.0) == 1).count() as u64;
    let p = betacoal::stats::proportion_test(lone, trees.len() as u64, (-1f64).exp());
    assert!(p > 0.001, "P(no birth by 1): p = {p}");
}

#[test]
fn xi_tau_atom_at_one() {
    for (alpha, p1) in [(1.5, 0.5), (1.9, 0.1)] {
        let chi = ChiSampler::new(alpha).unwrap();
        let mut rng = RngStream::new(27, 0).rng();
        let draws = 100_000;
        let ones = (0..draws).filter(|_| simulate_xi_tau(&chi, 1000, &mut rng) == 1).count() as u64;
        assert!(betacoal::stats::proportion_test(ones, draws, p1) > 0.001, "a={alpha}: {ones}");
    }
}

#[test]
fn repeat_mutations_become_rare() {
    let (alpha, theta) = (1.5, 1.0);
    let scaled_k = |t: f64, stream: u64| -> Estimate {
        let v: Vec<f64> = (0..300)
            .map(|i| {
                let s = simulate_marked_gw(alpha, theta, t, 1 << 34, RngStream::new(28 + stream, i)).unwrap();
                (-t).exp() * s.k_t as f64
            })
            .collect();
        mean_se(&v)
    };
    let (k4, k6) = (scaled_k(4.0, 0), scaled_k(6.0, 1));
    assert!(k6.mean + 1.96 * k6.se < k4.mean + 1.96 * k4.se, "{k4:?} {k6:?}");
    assert!(k6.mean < k4.mean);
}

#[test]
fn stationary_queue_stays_poisson() {
    let (a, c, lambda, t) = (2.0, 1.0, 3.0, 2.0);
    let q: Vec<f64> = (0..4000)
        .map(|i| {
            simulate_queue(a, c, &ServiceRate::Constant(lambda), QueueStart::Stationary, t, RngStream::new(29, i))
                .unwrap()
                .final_length() as f64
        })
        .collect();
    let mean = a * (c * t).exp() / (lambda + c);
    let est = mean_se(&q);
    within(&est, mean, 3.0);
    let var = q.iter().map(|x| (x - est.mean).powi(2)).sum::<f64>() / (q.len() - 1) as f64;
    assert!((var / mean - 1.0).abs() < 0.1, "variance {var} vs mean {mean}");
}

fn psi_truncated(q: f64, alpha: f64, eps: f64) -> f64 {
    // q^α minus the part of ∫(e^{−qx} − 1 + qx) ν(dx) that lies below ε;
    // x = ε v² removes the singularity at 0
    let g = |a: f64| if a < 1e-4 { a * a / 2.0 - a * a * a / 6.0 + a.powi(4) / 24.0 } else { (-a).exp_m1() + a };
    let f = |v: f64| if v == 0.0 { 0.0 } else { 2.0 * eps.powf(-alpha) * g(q * eps * v * v) * v.powf(-1.0 - 2.0 * alpha) };
    let m = 2000;
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let c = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
    q.powf(alpha) - c * s * h / 3.0
}

/// u_t(λ) for the truncated mechanism, by RK4 on u' = −ψ_ε(u).
fn u_truncated(t: f64, lambda: f64, alpha: f64, eps: f64) -> f64 {
    let steps = 2000;
    let h = t / steps as f64;
    let f = |u: f64| -psi_truncated(u, alpha, eps);
    let mut u = lambda;
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f(u + h * k1 / 2.0);
        let k3 = f(u + h * k2 / 2.0);
        let k4 = f(u + h * k3);
        u += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    u
}

#[test]
fn truncation_oracle_reduces_to_the_stable_semigroup() {
    for (t, lambda) in [(1.0, 1.0), (0.5, 2.0)] {
        let exact = csbp_laplace_u(t, lambda, 1.5).unwrap();
        assert!((u_truncated(t, lambda, 1.5, 1e-24) / exact - 1.0).abs() < 1e-7);
    }
}

#[test]
fn truncated_csbp_follows_its_own_mechanism() {
    // At a coarse ε the gap to the stable semigroup is large, so this
    // separates the truncated law from the limit.
    let (alpha, eps) = (1.5, 0.05);
    let spec = CsbpSpec::new(alpha, 1.0, eps, Horizon::Time(1.0));
    let paths: Vec<CsbpPath> = (0..20_000).map(|i| simulate_csbp(&spec, RngStream::new(30, i)).unwrap()).collect();
    for (t, lambda) in [(1.0, 1.0), (0.5, 2.0)] {
        let v: Vec<f64> = paths.iter().map(|p| p.laplace_at(t, lambda)).collect();
        let est = mean_se(&v);
        let truncated = (-u_truncated(t, lambda, alpha, eps)).exp();
        let stable = (-csbp_laplace_u(t, lambda, alpha).unwrap()).exp();
        within(&est, truncated, 3.5);
        assert!((est.mean - stable).abs() > 3.0 * est.se, "t={t}: truncation bias should be visible");
    }
}

#[test]
fn levels_join_a_birth_with_probability_y() {
    let path = CsbpPath::fixture(1.5, 1.0, 0.0, &[(0.1, 1.0), (0.3, 6.0)], 1.0).unwrap();
    let n = 20_000;
    let log = run_lookdown(&path, n, RngStream::new(31, 0));
    for (e, y) in log.events.iter().zip([0.5, 0.75]) {
        assert_eq!(e.y, y);
        let p = betacoal::stats::proportion_test(e.participants.len() as u64, n as u64, y);
        assert!(p > 0.001, "y={y}: {} of {n}", e.participants.len());
    }
}

#[test]
fn lookdown_ancestry_is_exchangeable() {
    let reps = 3000;
    let (mut low, mut high) = (0u64, 0u64);
    for i in 0..reps {
        let path = simulate_csbp(&CsbpSpec::new(1.5, 1.0, 0.01, Horizon::Level(0.5)), RngStream::new(32, i)).unwrap();
        let log = run_lookdown(&path, 5, RngStream::new(33, i));
        let p = ancestral_partition(&log, 0.0, path.end_time).unwrap();
        low += p.same_block(0, 1) as u64;
        high += p.same_block(3, 4) as u64;
    }
    let p = two_proportion(low, reps, high, reps);
    assert!(p > 0.001, "{low} vs {high}: p = {p}");
}
