//! Complete binary sum tree over event weights.

/// Sum tree with leaves at `cap..cap + len`; every internal node holds the sum of its children.
#[derive(Debug, Clone)]
pub struct RateIndex {
    tree: Vec<f64>,
    cap: usize,
    len: usize,
}

impl RateIndex {
    pub fn new(weights: &[f64]) -> Self {
        let len = weights.len().max(1);
        let cap = len.next_power_of_two();
        let mut tree = vec![0.0; 2 * cap];
        for (i, &w) in weights.iter().enumerate() {
            debug_assert!(w >= 0.0, "negative weight {w}");
            tree[cap + i] = w;
        }
        let mut idx = Self { tree, cap, len: weights.len() };
        idx.resum();
        idx
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    #[inline]
    pub fn weight(&self, leaf: usize) -> f64 {
        self.tree[self.cap + leaf]
    }

    /// Sets one leaf and refreshes its ancestors.
    #[inline]
    pub fn set(&mut self, leaf: usize, w: f64) {
        assert!(leaf < self.len, "leaf {leaf} out of range");
        let mut node = self.cap + leaf;
        self.tree[node] = w;
        while node > 1 {
            node >>= 1;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    /// Sets two sibling leaves `2p` and `2p + 1` and refreshes their ancestors once.
    #[inline]
    pub fn set_pair(&mut self, pair: usize, left: f64, right: f64) {
        assert!(2 * pair + 1 < self.len, "pair {pair} out of range");
        let tree = self.tree.as_mut_ptr();
        let mut node = (self.cap + 2 * pair) >> 1;
        // SAFETY: every index visited lies on the path from a valid leaf to the root,
        // and all of them are below 2 * cap == tree.len().
        unsafe {
            *tree.add(2 * node) = left;
            *tree.add(2 * node + 1) = right;
            *tree.add(node) = left + right;
            while node > 1 {
                node >>= 1;
                *tree.add(node) = *tree.add(2 * node) + *tree.add(2 * node + 1);
            }
        }
    }

    /// Leaf whose cumulative interval contains `u`, for `u` in `[0, total)`.
    /// Zero-weight leaves are never selected.
    #[inline]
    pub fn find(&self, u: f64) -> usize {
        let tree = &self.tree;
        let mut node = 1;
        let mut rem = u;
        while node < self.cap {
            // SAFETY: node < cap, so both children are below 2 * cap == tree.len().
            let left = unsafe { *tree.get_unchecked(2 * node) };
            let right = rem >= left;
            rem -= if right { left } else { 0.0 };
            node = 2 * node + right as usize;
        }
        if tree[node] > 0.0 {
            node - self.cap
        } else {
            self.find_guarded(u)
        }
    }

    /// Descent that steers away from empty subtrees; used when rounding lands on one.
    fn find_guarded(&self, mut u: f64) -> usize {
        let mut node = 1;
        while node < self.cap {
            let left = self.tree[2 * node];
            let right = self.tree[2 * node + 1];
            if (u < left && left > 0.0) || right <= 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.cap
    }

    /// Recomputes every internal node from the leaves.
    pub fn resum(&mut self) {
        for node in (1..self.cap).rev() {
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    /// Replaces every leaf and re-sums.
    pub fn rebuild(&mut self, weights: impl IntoIterator<Item = f64>) {
        for (i, w) in weights.into_iter().enumerate() {
            self.tree[self.cap + i] = w;
        }
        self.resum();
    }

    /// Plain left-to-right sum of the leaves.
    pub fn leaf_sum(&self) -> f64 {
        self.tree[self.cap..self.cap + self.len].iter().sum()
    }
}
