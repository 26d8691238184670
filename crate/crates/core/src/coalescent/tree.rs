use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// One merger: the blocks `merged` (at least two, all live) coalesce at
/// `time` into the new block `into`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub time: f64,
    pub merged: Vec<u32>,
    pub into: u32,
}

/// A partition of `{0, .., n-1}`. Block labels are canonical: blocks are
/// numbered in order of their smallest element, so equal partitions
/// compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    block_of: Vec<u32>,
    num_blocks: usize,
}

impl Partition {
    pub fn discrete(n: usize) -> Self {
        Self {
            block_of: (0..n as u32).collect(),
            num_blocks: n,
        }
    }

    /// Builds a partition from arbitrary labels: `i ~ j` iff `labels[i] == labels[j]`.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let block_of = labels
            .iter()
            .map(|l| {
                let next = seen.len() as u32;
                *seen.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            block_of,
            num_blocks: seen.len(),
        }
    }

    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return domain("empty block");
            }
            for &i in block {
                if i >= n || labels[i] != usize::MAX {
                    return domain(format!("element {i} out of range or repeated"));
                }
                labels[i] = b;
            }
        }
        if labels.contains(&usize::MAX) {
            return domain("blocks do not cover the ground set");
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn n(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i] as usize
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of[i] == self.block_of[j]
    }

    /// Blocks as sorted element lists, in canonical order.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks];
        for (i, &b) in self.block_of.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_blocks];
        for &b in &self.block_of {
            out[b as usize] += 1;
        }
        out
    }

    /// True when every block of `finer` lies inside a block of `self`.
    pub fn is_coarsening_of(&self, finer: &Partition) -> bool {
        if self.n() != finer.n() {
            return false;
        }
        let mut image = vec![u32::MAX; finer.num_blocks];
        for (i, &fb) in finer.block_of.iter().enumerate() {
            let slot = &mut image[fb as usize];
            if *slot == u32::MAX {
                *slot = self.block_of[i];
            } else if *slot != self.block_of[i] {
                return false;
            }
        }
        true
    }
}

/// First time the block count drops to `m` or below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockHit {
    pub time: f64,
    /// Whether the count passed through exactly `m`.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeLength {
    pub length: f64,
    /// False when the tree stops before the MRCA; the length then only
    /// covers branches up to the last event.
    pub complete: bool,
}

/// Pairwise collision times; `INFINITY` for pairs that never met.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalescenceTimes {
    n: usize,
    data: Vec<f64>,
}

impl CoalescenceTimes {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Largest violation of d(i,k) <= max(d(i,j), d(j,k)) over all triples
    /// (zero for an ultrametric).
    pub fn ultrametric_violations(&self) -> usize {
        let n = self.n;
        let mut bad = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.get(i, k) > self.get(i, j).max(self.get(j, k)) {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}

/// Merge history of a finite-sample coalescent.
///
/// Leaves are nodes `0..n`; event `e` creates node `n + e`. The tree is an
/// append-only event log; every statistic below is a view over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct GenealogyTree {
    n: usize,
    alpha: Option<f64>,
    seed: u64,
    events: Vec<MergeEvent>,
    // derived
    size: Vec<u32>,
    birth: Vec<f64>,
    parent: Vec<u32>,
    blocks_after: Vec<usize>,
    max_size_after: Vec<u32>,
    leaf_order: Vec<u32>,
    leaf_range: Vec<(u32, u32)>,
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Serialize, Deserialize)]
struct RawTree {
    n: usize,
    alpha: Option<f64>,
    seed: u64,
    events: Vec<MergeEvent>,
}

impl TryFrom<RawTree> for GenealogyTree {
    type Error = Error;
    fn try_from(r: RawTree) -> Result<Self> {
        GenealogyTree::from_events(r.n, r.alpha, r.seed, r.events)
    }
}

impl From<GenealogyTree> for RawTree {
    fn from(t: GenealogyTree) -> Self {
        RawTree {
            n: t.n,
            alpha: t.alpha,
            seed: t.seed,
            events: t.events,
        }
    }
}

impl GenealogyTree {
    /// Validates an event log and builds the derived views.
    pub fn from_events(n: usize, alpha: Option<f64>, seed: u64, events: Vec<MergeEvent>) -> Result<Self> {
        if n == 0 {
            return domain("sample size must be positive");
        }
        let total = n + events.len();
        let mut size = vec![1u32; n];
        size.reserve(events.len());
        let mut birth = vec![0.0; n];
        birth.reserve(events.len());
        let mut parent = vec![NO_PARENT; total];
        let mut blocks_after = Vec::with_capacity(events.len());
        let mut max_size_after = Vec::with_capacity(events.len());
        let mut live = n;
        let mut max_size = 1u32;
        let mut last_time = 0.0;
        for (e, ev) in events.iter().enumerate() {
            let id = (n + e) as u32;
            if ev.into != id {
                return domain(format!("event {e} creates block {} but {id} expected", ev.into));
            }
            if ev.merged.len() < 2 {
                return domain(format!("event {e} merges fewer than two blocks"));
            }
            if !(ev.time > last_time || (e == 0 && ev.time >= 0.0)) || !ev.time.is_finite() {
                return domain(format!("event times must be finite and strictly increasing (event {e})"));
            }
            last_time = ev.time;
            let mut s = 0u32;
            for &c in &ev.merged {
                if c >= id || parent[c as usize] != NO_PARENT {
                    return domain(format!("event {e} merges block {c}, which is not live"));
                }
                parent[c as usize] = id;
                s += size[c as usize];
            }
            size.push(s);
            birth.push(ev.time);
            live -= ev.merged.len() - 1;
            max_size = max_size.max(s);
            blocks_after.push(live);
            max_size_after.push(max_size);
        }

        // Contiguous leaf ranges from a depth-first walk of every root.
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); total];
        for (e, ev) in events.iter().enumerate() {
            children[n + e] = ev.merged.clone();
        }
        let mut leaf_order = Vec::with_capacity(n);
        let mut leaf_range = vec![(0u32, 0u32); total];
        let roots: Vec<u32> = (0..total as u32).filter(|&v| parent[v as usize] == NO_PARENT).collect();
        for root in roots {
            // (node, expanded?)
            let mut stack = vec![(root, false)];
            while let Some((v, expanded)) = stack.pop() {
                let vi = v as usize;
                if expanded {
                    let start = children[vi].iter().map(|&c| leaf_range[c as usize].0).min().unwrap();
                    let end = children[vi].iter().map(|&c| leaf_range[c as usize].1).max().unwrap();
                    leaf_range[vi] = (start, end);
                } else if vi < n {
                    leaf_range[vi] = (leaf_order.len() as u32, leaf_order.len() as u32 + 1);
                    leaf_order.push(v);
                } else {
                    stack.push((v, true));
                    for &c in children[vi].iter().rev() {
                        stack.push((c, false));
                    }
                }
            }
        }

        Ok(Self {
            n,
            alpha,
            seed,
            events,
            size,
            birth,
            parent,
            blocks_after,
            max_size_after,
            leaf_order,
            leaf_range,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> &[MergeEvent] {
        &self.events
    }

    pub fn num_nodes(&self) -> usize {
        self.size.len()
    }

    /// Number of sampled leaves below node `v`.
    pub fn node_size(&self, v: usize) -> usize {
        self.size[v] as usize
    }

    pub fn node_birth(&self, v: usize) -> f64 {
        self.birth[v]
    }

    pub fn node_parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    /// Time the block is absorbed into a merger, `INFINITY` while live.
    pub fn node_death(&self, v: usize) -> f64 {
        self.node_parent(v).map_or(f64::INFINITY, |p| self.birth[p])
    }

    /// Leaves (0-based elements) below node `v`.
    pub fn leaves(&self, v: usize) -> &[u32] {
        let (s, e) = self.leaf_range[v];
        &self.leaf_order[s as usize..e as usize]
    }

    /// True once a single block remains.
    pub fn is_complete(&self) -> bool {
        self.blocks_after.last().map_or(self.n == 1, |&b| b == 1)
    }

    pub fn mrca_time(&self) -> Option<f64> {
        if self.is_complete() {
            Some(self.events.last().map_or(0.0, |e| e.time))
        } else {
            None
        }
    }

    pub fn last_event_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    // events with time <= t
    fn events_through(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Number of blocks at time `t` (right-continuous).
    pub fn block_count_at(&self, t: f64) -> usize {
        match self.events_through(t) {
            0 => self.n,
            e => self.blocks_after[e - 1],
        }
    }

    /// Size of the largest block at `t`, divided by n.
    pub fn largest_block_frequency(&self, t: f64) -> f64 {
        let m = match self.events_through(t) {
            0 => 1,
            e => self.max_size_after[e - 1],
        };
        m as f64 / self.n as f64
    }

    pub fn time_to_m_blocks(&self, m: usize) -> Result<Option<BlockHit>> {
        if m < 1 || m > self.n {
            return domain(format!("block target {m} outside [1, {}]", self.n));
        }
        if m == self.n {
            return Ok(Some(BlockHit { time: 0.0, exact: true }));
        }
        let e = self.blocks_after.partition_point(|&b| b > m);
        Ok(self.events.get(e).map(|ev| BlockHit {
            time: ev.time,
            exact: self.blocks_after[e] == m,
        }))
    }

    /// Nodes forming the partition at time `t`.
    pub fn live_nodes_at(&self, t: f64) -> Vec<usize> {
        let e = self.events_through(t);
        (0..self.n + e)
            .filter(|&v| self.node_parent(v).is_none_or(|p| p >= self.n + e))
            .collect()
    }

    pub fn partition_at(&self, t: f64) -> Partition {
        let mut labels = vec![0usize; self.n];
        for v in self.live_nodes_at(t) {
            for &leaf in self.leaves(v) {
                labels[leaf as usize] = v;
            }
        }
        Partition::from_labels(&labels)
    }

    /// Partitions just after each event, preceded by the discrete partition.
    pub fn partition_sequence(&self) -> Vec<Partition> {
        let mut labels: Vec<usize> = (0..self.n).collect();
        let mut out = vec![Partition::from_labels(&labels)];
        for (e, _) in self.events.iter().enumerate() {
            let v = self.n + e;
            for &leaf in self.leaves(v) {
                labels[leaf as usize] = v;
            }
            out.push(Partition::from_labels(&labels));
        }
        out
    }

    /// d(i, j) = first time i and j share a block.
    pub fn coalescence_time_matrix(&self) -> CoalescenceTimes {
        let n = self.n;
        let mut data = vec![f64::INFINITY; n * n];
        for i in 0..n {
            data[i * n + i] = 0.0;
        }
        for ev in &self.events {
            for (a_idx, &a) in ev.merged.iter().enumerate() {
                for &b in &ev.merged[a_idx + 1..] {
                    for &i in self.leaves(a as usize) {
                        for &j in self.leaves(b as usize) {
                            data[i as usize * n + j as usize] = ev.time;
                            data[j as usize * n + i as usize] = ev.time;
                        }
                    }
                }
            }
        }
        CoalescenceTimes { n, data }
    }

    /// Σ over inter-event intervals of (live blocks) × (interval length).
    pub fn total_tree_length(&self) -> TreeLength {
        let end = self.last_event_time();
        let length = (0..self.num_nodes())
            .map(|v| self.node_death(v).min(end) - self.birth[v])
            .sum();
        TreeLength {
            length,
            complete: self.is_complete(),
        }
    }

    /// Nodes with a finite branch (everything except live roots), with
    /// their branch lengths.
    pub fn branches(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.num_nodes()).filter_map(|v| {
            let d = self.node_death(v);
            d.is_finite().then(|| (v, d - self.birth[v]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(time: f64, merged: &[u32], into: u32) -> MergeEvent {
        MergeEvent {
            time,
            merged: merged.to_vec(),
            into,
        }
    }

    fn three_leaf() -> GenealogyTree {
        GenealogyTree::from_events(3, None, 0, vec![ev(0.5, &[0, 1], 3), ev(2.0, &[3, 2], 4)]).unwrap()
    }

    #[test]
    fn block_counts_and_hits() {
        let t = three_leaf();
        assert_eq!(t.block_count_at(0.0), 3);
        assert_eq!(t.block_count_at(0.5), 2);
        assert_eq!(t.block_count_at(1.9), 2);
        assert_eq!(t.block_count_at(2.0), 1);
        assert_eq!(t.time_to_m_blocks(3).unwrap(), Some(BlockHit { time: 0.0, exact: true }));
        assert_eq!(t.time_to_m_blocks(1).unwrap().unwrap().time, 2.0);
        assert!(t.time_to_m_blocks(0).is_err());
        assert!(t.time_to_m_blocks(4).is_err());
        let star = GenealogyTree::from_events(3, None, 0, vec![ev(1.0, &[0, 1, 2], 3)]).unwrap();
        assert_eq!(star.time_to_m_blocks(2).unwrap(), Some(BlockHit { time: 1.0, exact: false }));
    }

    #[test]
    fn coalescence_times_three_leaf() {
        let d = three_leaf().coalescence_time_matrix();
        assert_eq!(d.get(0, 1), 0.5);
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(1, 2), 2.0);
        assert_eq!(d.get(2, 2), 0.0);
        assert_eq!(d.ultrametric_violations(), 0);
    }

    #[test]
    fn length_and_frequency() {
        let t = three_leaf();
        // three branches to 0.5, then two to 2.0
        let l = t.total_tree_length();
        assert!(l.complete);
        assert!((l.length - (3.0 * 0.5 + 2.0 * 1.5)).abs() < 1e-12);
        assert!((t.largest_block_frequency(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.largest_block_frequency(2.5), 1.0);
        let part = GenealogyTree::from_events(3, None, 0, vec![ev(0.5, &[0, 1], 3)]).unwrap();
        let l = part.total_tree_length();
        assert!(!l.complete);
        assert!((l.length - 1.5).abs() < 1e-12);
    }

    #[test]
    fn partitions_coarsen() {
        let t = three_leaf();
        let seq = t.partition_sequence();
        assert_eq!(seq[1], Partition::from_blocks(3, &[vec![0, 1], vec![2]]).unwrap());
        assert!(seq.windows(2).all(|w| w[1].is_coarsening_of(&w[0])));
        assert!(!seq[0].is_coarsening_of(&seq[1]));
        assert_eq!(t.partition_at(1.0), seq[1]);
    }

    #[test]
    fn rejects_malformed_logs() {
        assert!(GenealogyTree::from_events(3, None, 0, vec![ev(1.0, &[0], 3)]).is_err());
        assert!(GenealogyTree::from_events(3, None, 0, vec![ev(1.0, &[0, 1], 5)]).is_err());
        assert!(GenealogyTree::from_events(3, None, 0, vec![ev(1.0, &[0, 1], 3), ev(0.5, &[2, 3], 4)]).is_err());
        assert!(GenealogyTree::from_events(3, None, 0, vec![ev(1.0, &[0, 1], 3), ev(2.0, &[0, 2], 4)]).is_err());
    }
}
