//! Small statistical toolkit for the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Estimate {
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.se, self.mean + 1.96 * self.se)
    }
}

pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN, count: 0 };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Estimate { mean, se, count: n }
}

fn normal_sf(z: f64) -> f64 {
    1.0 - Normal::standard().cdf(z)
}

/// Two-sided p-value of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}

/// Two-sided z-test of a mean estimate against a target value.
pub fn z_test(est: &Estimate, target: f64) -> f64 {
    if est.se == 0.0 {
        return if est.mean == target { 1.0 } else { 0.0 };
    }
    two_sided_p((est.mean - target) / est.se)
}

pub fn chi2_sf(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map_or(f64::NAN, |d| 1.0 - d.cdf(stat))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Minimum expected count per (pooled) cell.
pub const MIN_EXPECTED: f64 = 5.0;

// Merges adjacent cells (left to right) until each expected count reaches
// MIN_EXPECTED; a short remainder is folded into the last kept cell.
fn pool(observed: &[f64], expected: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut o, mut e) = (0.0, 0.0);
    for (&oi, &ei) in observed.iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= MIN_EXPECTED {
            obs.push(o);
            exp.push(e);
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
            *lo += o;
            *le += e;
        } else {
            obs.push(o);
            exp.push(e);
        }
    }
    (obs, exp)
}

/// Pearson goodness of fit of `observed` counts to cell probabilities.
/// Probability mass missing from `probs` forms an implicit final cell.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquareResult {
    assert!(observed.len() >= probs.len());
    let total: u64 = observed.iter().sum();
    let nt = total as f64;
    let mut obs: Vec<f64> = observed[..probs.len()].iter().map(|&x| x as f64).collect();
    let mut exp: Vec<f64> = probs.iter().map(|p| p * nt).collect();
    let rest_p = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    let rest_o: u64 = observed[probs.len()..].iter().sum();
    if rest_p * nt > 1e-9 || rest_o > 0 {
        obs.push(rest_o as f64);
        exp.push(rest_p * nt);
    }
    let (obs, exp) = pool(&obs, &exp);
    let statistic = obs
        .iter()
        .zip(&exp)
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else if *o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let df = obs.len().saturating_sub(1);
    ChiSquareResult { statistic, df, p_value: chi2_sf(statistic, df) }
}

/// Chi-square test of homogeneity for two count vectors over the same cells.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareResult {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let (na, nb): (f64, f64) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let n = na + nb;
    // pool on the smaller of the two expected counts per cell
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for i in 0..len {
        ca += get(a, i);
        cb += get(b, i);
        let tot = ca + cb;
        if tot * na.min(nb) / n >= MIN_EXPECTED {
            cells.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => cells.push((ca, cb)),
        }
    }
    let mut statistic = 0.0;
    for &(x, y) in &cells {
        let tot = x + y;
        let (ea, eb) = (tot * na / n, tot * nb / n);
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = cells.len().saturating_sub(1);
    ChiSquareResult { statistic, df, p_value: chi2_sf(statistic, df) }
}

/// Two-sided two-proportion z-test (pooled variance).
pub fn two_proportion(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let p = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return if p1 == p2 { 1.0 } else { 0.0 };
    }
    two_sided_p((p1 - p2) / se)
}

/// One-sided binomial/normal check that `x` successes out of `n` are
/// compatible with probability `p`; two-sided normal approximation.
pub fn proportion_test(x: u64, n: u64, p: f64) -> f64 {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    two_sided_p((x as f64 / n as f64 - p) / se)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // small-x form converges faster
        let s = (2.0 * std::f64::consts::PI).sqrt() / x;
        let q = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut cdf = 0.0;
        for k in 1..50 {
            let term = q.powi((2 * k - 1) * (2 * k - 1));
            cdf += term;
            if term < 1e-17 {
                break;
            }
        }
        return (1.0 - s * cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * x * x).exp();
        sf += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    sf.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d) }
}

/// Wald chi-square for cell proportions pooled over independent
/// clusters whose members are correlated, e.g. mutations on one tree.
///
/// `clusters[i][j]` counts the members of cluster i in cell j; `probs`
/// gives the null cell probabilities (all cells, summing to one). The
/// covariance of the pooled proportions is estimated from the spread of
/// the clusters, so within-cluster dependence is accounted for.
pub fn cluster_chi_square(clusters: &[Vec<u64>], probs: &[f64]) -> ChiSquareResult {
    let cells = probs.len();
    let df = cells.saturating_sub(1);
    let fail = ChiSquareResult { statistic: f64::NAN, df, p_value: f64::NAN };
    let m = clusters.len();
    let total: f64 = clusters.iter().flatten().sum::<u64>() as f64;
    if df == 0 || m < 2 || total == 0.0 {
        return fail;
    }
    let pooled: Vec<f64> =
        (0..df).map(|j| clusters.iter().map(|c| c[j]).sum::<u64>() as f64 / total).collect();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(df, df);
    for c in clusters {
        let size: f64 = c.iter().sum::<u64>() as f64;
        let r = nalgebra::DVector::from_iterator(df, (0..df).map(|j| c[j] as f64 - size * pooled[j]));
        cov += &r * r.transpose();
    }
    cov *= m as f64 / ((m - 1) as f64 * total * total);
    let d = nalgebra::DVector::from_iterator(df, (0..df).map(|j| pooled[j] - probs[j]));
    match cov.cholesky() {
        Some(ch) => {
            let statistic = d.dot(&ch.solve(&d));
            ChiSquareResult { statistic, df, p_value: chi2_sf(statistic, df) }
        }
        None => fail,
    }
}

/// Fisher's method for combining independent p-values.
pub fn fisher_combine(ps: &[f64]) -> f64 {
    if ps.is_empty() {
        return 1.0;
    }
    let stat: f64 = ps.iter().map(|p| -2.0 * p.max(1e-300).ln()).sum();
    chi2_sf(stat, 2 * ps.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_branches_agree() {
        // both series at the crossover point
        let x = 1.0;
        let mut alt = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            let t = 2.0 * (-2.0 * kf * kf * x * x).exp();
            alt += if k % 2 == 1 { t } else { -t };
        }
        assert!((kolmogorov_sf(0.999_999_999) - alt).abs() < 1e-8);
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square_gof(&[250, 500, 250], &[0.25, 0.5, 0.25]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_gof(&[100, 0], &[0.5, 0.5]);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn pooling_sparse_cells() {
        let r = chi_square_gof(&[10, 2, 1, 0], &[0.77, 0.15, 0.07, 0.01]);
        assert!(r.df <= 1);
    }

    #[test]
    fn cluster_test_reduces_to_multinomial_for_independent_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let probs = [0.5, 0.3, 0.2];
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let u: f64 = rng.random();
            if u < 0.5 { 0 } else if u < 0.8 { 1 } else { 2 }
        };
        let mut ps = Vec::new();
        for _ in 0..200 {
            let clusters: Vec<Vec<u64>> = (0..100)
                .map(|_| {
                    let mut c = vec![0u64; 3];
                    for _ in 0..5 {
                        c[draw(&mut rng)] += 1;
                    }
                    c
                })
                .collect();
            ps.push(cluster_chi_square(&clusters, &probs).p_value);
        }
        // p-values under the null are roughly uniform
        let small = ps.iter().filter(|p| **p < 0.1).count();
        assert!((8..=35).contains(&small), "{small}");
        // clustered copies of one draw inflate the naive test but not this one
        let clusters: Vec<Vec<u64>> = (0..400)
            .map(|_| {
                let mut c = vec![0u64; 3];
                c[draw(&mut rng)] += 20;
                c
            })
            .collect();
        assert!(cluster_chi_square(&clusters, &probs).p_value > 0.001);
    }

    #[test]
    fn fisher_and_proportions() {
        assert!((fisher_combine(&[1.0]) - 1.0).abs() < 1e-12);
        assert!((fisher_combine(&[0.05]) - 0.05).abs() < 1e-9);
        assert!((two_proportion(50, 100, 50, 100) - 1.0).abs() < 1e-12);
        let e = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let two = chi_square_two_sample(&[30, 40, 30], &[30, 40, 30]);
        assert_eq!(two.statistic, 0.0);
    }

    #[test]
    fn ks_uniform_sample() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(r.statistic <= 0.0005 + 1e-12);
        assert!(r.p_value > 0.99);
    }
}
