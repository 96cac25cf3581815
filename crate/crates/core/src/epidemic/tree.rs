use rand::Rng;

/// Binary sum tree over nonnegative leaf rates, for O(log n) updates and
/// rate-proportional sampling. Internal nodes are recomputed from their
/// children on every update, so sums never drift.
#[derive(Clone, Debug)]
pub struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: usize) -> Self {
        let size = leaves.max(1).next_power_of_two();
        SumTree { size, nodes: vec![0.0; 2 * size] }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    pub fn set(&mut self, i: usize, rate: f64) {
        debug_assert!(rate >= 0.0);
        let mut k = self.size + i;
        self.nodes[k] = rate;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf chosen with probability proportional to its rate. Panics on an
    /// all-zero tree.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        assert!(self.total() > 0.0, "sampling from an empty rate tree");
        let mut u = rng.random::<f64>() * self.total();
        let mut k = 1;
        while k < self.size {
            let (l, r) = (self.nodes[2 * k], self.nodes[2 * k + 1]);
            if l > 0.0 && (u < l || r <= 0.0) {
                k *= 2;
            } else {
                u -= l;
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}
