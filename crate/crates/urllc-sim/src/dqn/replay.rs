//! Uniform replay memory with strict FIFO eviction.

use rand::Rng;

/// One stored interaction record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer of [`Transition`]s.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buf: Vec<Transition>,
    /// Next slot to overwrite once full.
    head: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self { capacity, buf: Vec::with_capacity(capacity.min(1 << 16)), head: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert_eq!(t.state.len(), t.next_state.len());
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.buf.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// Uniform sample of `k` transitions (with replacement).
    pub fn sample<'a, R: Rng>(&'a self, k: usize, rng: &mut R) -> Vec<&'a Transition> {
        assert!(!self.buf.is_empty(), "cannot sample from an empty replay memory");
        (0..k).map(|_| &self.buf[rng.random_range(0..self.buf.len())]).collect()
    }
}
