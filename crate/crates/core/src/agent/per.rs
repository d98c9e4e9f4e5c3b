use rand::Rng;

use crate::error::{Error, Result};

/// Binary sum/min tree over leaf values.
#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    sum: Vec<f64>,
    min: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        SumTree {
            leaves,
            sum: vec![0.0; 2 * leaves],
            min: vec![f64::INFINITY; 2 * leaves],
        }
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut node = i + self.leaves;
        self.sum[node] = value;
        self.min[node] = value;
        while node > 1 {
            node /= 2;
            self.sum[node] = self.sum[2 * node] + self.sum[2 * node + 1];
            self.min[node] = self.min[2 * node].min(self.min[2 * node + 1]);
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.sum[i + self.leaves]
    }

    pub fn total(&self) -> f64 {
        self.sum[1]
    }

    pub fn min(&self) -> f64 {
        self.min[1]
    }

    /// Leaf whose cumulative range contains `mass` (in `[0, total)`).
    pub fn find(&self, mut mass: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = 2 * node;
            if mass < self.sum[left] || self.sum[left + 1] <= 0.0 {
                node = left;
            } else {
                mass -= self.sum[left];
                node = left + 1;
            }
        }
        node - self.leaves
    }
}

/// Replay buffer sampling item `i` with probability `p_i^α / Σ p_j^α`.
#[derive(Clone, Debug)]
pub struct PrioritizedReplay<X> {
    capacity: usize,
    items: Vec<X>,
    next: usize,
    tree: SumTree,
    pub alpha: f64,
    pub eps: f64,
    max_priority: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerSample {
    pub indices: Vec<usize>,
    /// `(N · P(i))^-β`, divided by the largest weight over the buffer.
    pub weights: Vec<f64>,
}

impl<X> PrioritizedReplay<X> {
    pub fn new(capacity: usize, alpha: f64, eps: f64) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        PrioritizedReplay {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            tree: SumTree::new(capacity),
            alpha,
            eps,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &X {
        &self.items[i]
    }

    fn store(&mut self, item: X, priority: f64) -> usize {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        self.set_priority(slot, priority);
        slot
    }

    /// Stores `item` with the largest priority seen so far.
    pub fn push(&mut self, item: X) -> usize {
        let p = self.max_priority;
        self.store(item, p)
    }

    /// Stores `item` with priority `|td_error| + ε`.
    pub fn push_with_td(&mut self, item: X, td_error: f64) -> usize {
        let p = td_error.abs() + self.eps;
        self.store(item, p)
    }

    pub fn priority(&self, i: usize) -> f64 {
        self.tree.get(i).powf(1.0 / self.alpha)
    }

    fn set_priority(&mut self, i: usize, p: f64) {
        let p = if p.is_finite() && p > 0.0 { p } else { self.eps };
        self.max_priority = self.max_priority.max(p);
        self.tree.set(i, p.powf(self.alpha));
    }

    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        for (&i, &td) in indices.iter().zip(td_errors) {
            self.set_priority(i, td.abs() + self.eps);
        }
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    /// Draws `batch` indices independently, with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<PerSample> {
        if self.items.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        let total = self.tree.total();
        let n = self.items.len() as f64;
        let max_w = (n * self.tree.min() / total).powf(-beta);
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        for _ in 0..batch {
            let i = self.tree.find(rng.gen::<f64>() * total).min(self.items.len() - 1);
            indices.push(i);
            weights.push((n * self.probability(i)).powf(-beta) / max_w);
        }
        Ok(PerSample { indices, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_to_one_split() {
        let mut buf = PrioritizedReplay::new(4, 1.0, 0.0);
        buf.push_with_td('a', 3.0);
        buf.push_with_td('b', 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = buf.sample(100_000, 0.4, &mut rng).unwrap();
        let frac_a = s.indices.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((frac_a - 0.75).abs() < 0.01, "{frac_a}");
    }

    #[test]
    fn uniform_weights_at_beta_one() {
        let mut buf = PrioritizedReplay::new(8, 0.6, 1e-3);
        for i in 0..5 {
            buf.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = buf.sample(32, 1.0, &mut rng).unwrap();
        assert!(s.weights.iter().all(|&w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn empty_buffer_errors() {
        let buf: PrioritizedReplay<u8> = PrioritizedReplay::new(4, 0.6, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(buf.sample(1, 0.4, &mut rng).is_err());
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = PrioritizedReplay::new(3, 0.6, 1e-3);
        for i in 0..5 {
            buf.push_with_td(i, 1.0);
        }
        assert_eq!(buf.len(), 3);
        assert_eq!((*buf.get(0), *buf.get(1), *buf.get(2)), (3, 4, 2));
    }

    #[test]
    fn new_items_get_max_priority() {
        let mut buf = PrioritizedReplay::new(4, 0.6, 1e-3);
        buf.push_with_td(0, 5.0);
        let j = buf.push(1);
        assert!((buf.priority(j) - 5.001).abs() < 1e-9);
    }
}
