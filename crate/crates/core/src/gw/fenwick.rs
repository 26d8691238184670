/// Growable Fenwick tree of non-negative counts with prefix search.
#[derive(Debug, Clone, Default)]
pub(crate) struct Fenwick {
    tree: Vec<u64>, // 1-based; tree[0] unused
}

impl Fenwick {
    pub fn new() -> Self {
        Self { tree: vec![0] }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    fn prefix(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    pub fn push(&mut self, value: u64) {
        let i = self.tree.len();
        let low = i & i.wrapping_neg();
        let covered = self.prefix(i - 1) - self.prefix(i - low);
        self.tree.push(value + covered);
    }

    pub fn add(&mut self, idx: usize, delta: i64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    pub fn get(&self, idx: usize) -> u64 {
        self.prefix(idx + 1) - self.prefix(idx)
    }

    /// Index of the slot containing unit `target` (0-based, target < total).
    pub fn find(&self, mut target: u64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}
