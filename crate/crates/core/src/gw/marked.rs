//! Galton–Watson tree with mutation marks at rate θe^{−s} per lineage.
//!
//! Individuals carrying the same allele are exchangeable, so the state is
//! the list of allele-class sizes plus the parent of each mark. A uniform
//! individual is a class drawn with probability proportional to its size.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::fenwick::Fenwick;
use crate::error::{check_alpha, domain, Error, Result};
use crate::rates::ChiSampler;
use crate::rng::RngStream;

/// Counts at the horizon. Maps are sparse: absent keys are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedGWStats {
    pub t: f64,
    pub population: u64,
    /// Total marks M(t).
    pub m_total: u64,
    /// Marks with a later mark among their descendants, K(t).
    pub k_t: u64,
    /// M_k: marks whose carrier has k descendants at t.
    pub m_k: BTreeMap<u64, u64>,
    /// N_k: allelic blocks of size k, the ancestral block included.
    pub n_k: BTreeMap<u64, u64>,
    /// L_k: marks with k descendants, none of them mutated again.
    pub l_k: BTreeMap<u64, u64>,
    /// Individuals still of the ancestral type.
    pub ancestral_class: u64,
}

fn get(m: &BTreeMap<u64, u64>, k: u64) -> u64 {
    m.get(&k).copied().unwrap_or(0)
}

impl MarkedGWStats {
    pub fn m(&self, k: u64) -> u64 {
        get(&self.m_k, k)
    }

    pub fn n(&self, k: u64) -> u64 {
        get(&self.n_k, k)
    }

    pub fn l(&self, k: u64) -> u64 {
        get(&self.l_k, k)
    }

    /// Σ_k L_k + K = M.
    pub fn decomposition_holds(&self) -> bool {
        self.l_k.values().sum::<u64>() + self.k_t == self.m_total
    }

    fn keys(&self) -> Vec<u64> {
        let mut ks: Vec<u64> = self.m_k.keys().chain(self.n_k.keys()).chain(self.l_k.keys()).copied().collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Number of k at which L_k ≤ M_k, N_k ≤ L_k + K fails. With
    /// `exclude_ancestral`, the ancestral block is left out of N_k.
    pub fn sandwich_violations(&self, exclude_ancestral: bool) -> usize {
        self.keys()
            .into_iter()
            .filter(|&k| {
                let mut n = self.n(k);
                if exclude_ancestral && self.ancestral_class == k {
                    n -= 1;
                }
                let (l, m, cap) = (self.l(k), self.m(k), self.l(k) + self.k_t);
                !(l <= m && l <= n && m <= cap && n <= cap)
            })
            .count()
    }
}

/// Simulates from one individual to time `horizon`; errors with
/// `PopulationCap` once the population would exceed `cap`.
pub fn simulate_marked_gw(alpha: f64, theta: f64, horizon: f64, cap: u64, stream: RngStream) -> Result<MarkedGWStats> {
    check_alpha(alpha)?;
    if !(theta >= 0.0 && theta.is_finite()) {
        return domain(format!("mutation rate must be finite and non-negative, got {theta}"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return domain(format!("horizon must be finite and non-negative, got {horizon}"));
    }
    let chi = ChiSampler::new(alpha)?;
    let mut rng = stream.rng();
    // class 0 is the ancestral type; class i >= 1 belongs to mark i
    let mut sizes = Fenwick::new();
    sizes.push(1);
    let mut mark_parent: Vec<usize> = vec![usize::MAX];
    let mut pop: u64 = 1;
    let mut t = 0.0;
    let bound = 1.0 + theta;
    loop {
        let e: f64 = Exp1.sample(&mut rng);
        t += e / (pop as f64 * bound);
        if t > horizon {
            break;
        }
        let u = rng.random::<f64>() * bound;
        if u < 1.0 {
            let class = sizes.find(rng.random_range(0..pop));
            let k = chi.sample(&mut rng);
            if pop + k - 1 > cap {
                return Err(Error::PopulationCap { cap: cap as usize, time: t });
            }
            sizes.add(class, (k - 1) as i64);
            pop += k - 1;
        } else if u - 1.0 < theta * (-t).exp() {
            let class = sizes.find(rng.random_range(0..pop));
            sizes.add(class, -1);
            sizes.push(1);
            mark_parent.push(class);
        }
    }

    let classes = sizes.len();
    let class_size: Vec<u64> = (0..classes).map(|i| sizes.get(i)).collect();
    let mut below = class_size.clone();
    let mut has_child = vec![false; classes];
    // marks are numbered after their parents, so sweep downward
    for i in (1..classes).rev() {
        let p = mark_parent[i];
        below[p] += below[i];
        has_child[p] = true;
    }
    let mut stats = MarkedGWStats {
        t: horizon,
        population: pop,
        m_total: (classes - 1) as u64,
        k_t: 0,
        m_k: BTreeMap::new(),
        n_k: BTreeMap::new(),
        l_k: BTreeMap::new(),
        ancestral_class: class_size[0],
    };
    for (i, &size) in class_size.iter().enumerate() {
        if size > 0 {
            *stats.n_k.entry(size).or_default() += 1;
        }
        if i == 0 {
            continue;
        }
        *stats.m_k.entry(below[i]).or_default() += 1;
        if has_child[i] {
            stats.k_t += 1;
        } else {
            *stats.l_k.entry(below[i]).or_default() += 1;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_mutation_no_marks() {
        let s = simulate_marked_gw(1.5, 0.0, 2.0, 1 << 30, RngStream::new(1, 0)).unwrap();
        assert_eq!(s.m_total, 0);
        assert!(s.m_k.is_empty() && s.l_k.is_empty());
        assert_eq!(s.ancestral_class, s.population);
        assert_eq!(s.n(s.population), 1);
    }

    #[test]
    fn exact_identities() {
        for i in 0..200 {
            let s = simulate_marked_gw(1.5, 1.0, 3.0, 1 << 30, RngStream::new(2, i)).unwrap();
            assert!(s.decomposition_holds());
            assert_eq!(s.sandwich_violations(true), 0);
            let covered: u64 = s.n_k.iter().map(|(k, c)| k * c).sum();
            assert_eq!(covered, s.population);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let r = simulate_marked_gw(1.5, 1.0, 30.0, 10_000, RngStream::new(3, 0));
        assert!(matches!(r, Err(Error::PopulationCap { cap: 10_000, .. })));
    }
}
