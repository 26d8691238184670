//! Infinite-sites and infinite-alleles mutation overlays on a genealogy.
//!
//! Marks fall on the tree as a Poisson process of rate θ per unit branch
//! length, below the sample MRCA only. A mark on the branch of block `v`
//! is carried by every leaf of `v`; a leaf's allele is the most recent mark
//! on its path to the root, or the ancestral type.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::coalescent::{GenealogyTree, Partition};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    /// Node whose branch carries the mark.
    pub node: usize,
    /// Backward time of the mark, in `[birth, death)` of the branch.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationSet {
    pub theta: f64,
    pub marks: Vec<Mark>,
}

impl MutationSet {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Checks that every mark sits on a finite branch of `tree`.
    pub fn validate(&self, tree: &GenealogyTree) -> Result<()> {
        for m in &self.marks {
            if m.node >= tree.num_nodes() {
                return domain(format!("mark on unknown node {}", m.node));
            }
            let (b, d) = (tree.node_birth(m.node), tree.node_death(m.node));
            if !(d.is_finite() && b <= m.time && m.time < d) {
                return domain(format!("mark at {} outside branch [{b}, {d}) of node {}", m.time, m.node));
            }
        }
        Ok(())
    }
}

/// Places Poisson(θ·L) marks uniformly on the branch-length measure.
pub fn scatter_mutations(tree: &GenealogyTree, theta: f64, stream: RngStream) -> Result<MutationSet> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return domain(format!("mutation rate must be finite and non-negative, got {theta}"));
    }
    if !tree.is_complete() {
        return domain("mutations need a tree run to its MRCA");
    }
    let branches: Vec<(usize, f64)> = tree.branches().collect();
    let mut cum = Vec::with_capacity(branches.len());
    let mut total = 0.0;
    for &(_, len) in &branches {
        total += len;
        cum.push(total);
    }
    let mut rng = stream.rng();
    let count = if theta * total > 0.0 {
        Poisson::new(theta * total).expect("positive mean").sample(&mut rng) as usize
    } else {
        0
    };
    let mut marks = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.random::<f64>() * total;
        let i = cum.partition_point(|&c| c <= u).min(branches.len() - 1);
        let (node, len) = branches[i];
        let birth = tree.node_birth(node);
        // offset inside the chosen branch, kept strictly below its end
        let off = (u - (cum[i] - len)).clamp(0.0, len);
        let time = (birth + off).min(tree.node_death(node).next_down());
        marks.push(Mark { node, time: time.max(birth) });
    }
    marks.sort_by(|a, b| a.node.cmp(&b.node).then(a.time.total_cmp(&b.time)));
    Ok(MutationSet { theta, marks })
}

/// Site and allele frequency spectra of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCounts {
    pub n: usize,
    /// `site[k - 1]` = M_k, for k = 1..n-1.
    pub site: Vec<u64>,
    /// `allele[k - 1]` = N_k, for k = 1..n.
    pub allele: Vec<u64>,
    pub m_total: u64,
    pub allelic_partition: Partition,
    /// Size of the block still carrying the ancestral type (0 if none).
    pub ancestral_block: usize,
}

impl SpectrumCounts {
    pub fn compute(tree: &GenealogyTree, muts: &MutationSet) -> Self {
        let site = site_frequency_spectrum(tree, muts);
        let (allele, allelic_partition, ancestral_block) = allele_frequency_spectrum(tree, muts);
        Self {
            n: tree.n(),
            m_total: site.iter().sum(),
            site,
            allele,
            allelic_partition,
            ancestral_block,
        }
    }

    pub fn m_k(&self, k: usize) -> u64 {
        if k == 0 { 0 } else { self.site.get(k - 1).copied().unwrap_or(0) }
    }

    pub fn n_k(&self, k: usize) -> u64 {
        if k == 0 { 0 } else { self.allele.get(k - 1).copied().unwrap_or(0) }
    }

    /// Rows `k,M_k,N_k` for k = 1..n.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,M_k,N_k\n");
        for k in 1..=self.n {
            s.push_str(&format!("{k},{},{}\n", self.m_k(k), self.n_k(k)));
        }
        s
    }

    /// Rows `k,Mhat_k` of the wrapped spectrum.
    pub fn wrapped_csv(&self) -> String {
        let mut s = String::from("k,Mhat_k\n");
        for (i, m) in wrapped_spectrum(self).iter().enumerate() {
            s.push_str(&format!("{},{m}\n", i + 1));
        }
        s
    }
}

/// M_k: number of marks carried by exactly k leaves (`[k - 1]`, k < n).
pub fn site_frequency_spectrum(tree: &GenealogyTree, muts: &MutationSet) -> Vec<u64> {
    let n = tree.n();
    let mut site = vec![0u64; n.saturating_sub(1)];
    for m in &muts.marks {
        let k = tree.node_size(m.node);
        if (1..n).contains(&k) {
            site[k - 1] += 1;
        }
    }
    site
}

/// N_k (`[k - 1]`, k = 1..n), the allelic partition, and the size of the
/// ancestral-type block, which is counted among the N_k.
pub fn allele_frequency_spectrum(tree: &GenealogyTree, muts: &MutationSet) -> (Vec<u64>, Partition, usize) {
    const ANCESTRAL: usize = usize::MAX;
    // most recent mark on each branch is the one with the smallest time
    let mut latest = vec![ANCESTRAL; tree.num_nodes()];
    let mut latest_time = vec![f64::INFINITY; tree.num_nodes()];
    for (i, m) in muts.marks.iter().enumerate() {
        if m.time < latest_time[m.node] {
            latest_time[m.node] = m.time;
            latest[m.node] = i;
        }
    }
    // parents have larger ids, so a descending sweep is top-down
    let mut allele = vec![ANCESTRAL; tree.num_nodes()];
    for v in (0..tree.num_nodes()).rev() {
        allele[v] = if latest[v] != ANCESTRAL {
            latest[v]
        } else {
            tree.node_parent(v).map_or(ANCESTRAL, |p| allele[p])
        };
    }
    let labels = &allele[..tree.n()];
    let ancestral_block = labels.iter().filter(|&&a| a == ANCESTRAL).count();
    let part = Partition::from_labels(labels);
    let mut counts = vec![0u64; tree.n()];
    for s in part.block_sizes() {
        counts[s - 1] += 1;
    }
    (counts, part, ancestral_block)
}

/// Marks with at least one other mark strictly below them (on the same
/// branch nearer the leaves, or on a descendant branch).
pub fn marks_with_mutated_descendant(tree: &GenealogyTree, muts: &MutationSet) -> usize {
    let nodes = tree.num_nodes();
    let mut count = vec![0usize; nodes];
    for m in &muts.marks {
        count[m.node] += 1;
    }
    // marks strictly inside the subtree below each node
    let mut below = vec![0usize; nodes];
    for v in 0..nodes {
        if let Some(p) = tree.node_parent(v) {
            below[p] += below[v] + count[v];
        }
    }
    let mut per_node: Vec<Vec<f64>> = vec![Vec::new(); nodes];
    for m in &muts.marks {
        per_node[m.node].push(m.time);
    }
    let mut total = 0;
    for v in 0..nodes {
        let times = &mut per_node[v];
        times.sort_by(f64::total_cmp);
        for (rank, _) in times.iter().enumerate() {
            if rank > 0 || below[v] > 0 {
                total += 1;
            }
        }
    }
    total
}

/// Ewens sampling formula. `a[i - 1]` is the number of blocks of size i.
pub fn ewens_probability(a: &[u64], theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("Ewens parameter must be positive, got {theta}"));
    }
    let n: u64 = a.iter().enumerate().map(|(i, &ai)| (i as u64 + 1) * ai).sum();
    if n == 0 || (a.len() as u64) > n {
        return domain("multiplicities must describe a partition of a positive integer n = len(a)");
    }
    let nf = n as f64;
    let mut lp = ln_gamma(nf + 1.0) - (ln_gamma(theta + nf) - ln_gamma(theta));
    for (i, &ai) in a.iter().enumerate() {
        let af = ai as f64;
        lp += af * theta.ln() - af * ((i + 1) as f64).ln() - ln_gamma(af + 1.0);
    }
    Ok(lp.exp())
}

/// M̂_k = M_k + M_{n-k} for k = 1..⌊n/2⌋ (the centre term is not doubled).
pub fn wrapped_spectrum(counts: &SpectrumCounts) -> Vec<u64> {
    let n = counts.n;
    (1..=n / 2)
        .map(|k| if 2 * k == n { counts.m_k(k) } else { counts.m_k(k) + counts.m_k(n - k) })
        .collect()
}

/// Size of the family of a uniformly chosen mutation.
pub fn sample_family_size<R: Rng + ?Sized>(counts: &SpectrumCounts, rng: &mut R) -> Result<usize> {
    if counts.m_total == 0 {
        return Err(Error::NoMutations);
    }
    let mut u = rng.random_range(0..counts.m_total);
    for (i, &m) in counts.site.iter().enumerate() {
        if u < m {
            return Ok(i + 1);
        }
        u -= m;
    }
    unreachable!("u below the total count")
}

/// Summary record written next to a spectrum CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub n: usize,
    pub alpha: Option<f64>,
    pub theta: f64,
    pub m_total: u64,
    pub seeds: Vec<u64>,
}
