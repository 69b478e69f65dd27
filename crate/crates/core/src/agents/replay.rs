use rand::seq::index;

use crate::rng::RngStream;

use super::AgentError;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total insertions since creation.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Uniform sample of `batch` distinct transitions.
    pub fn sample(&self, batch: usize, rng: &mut RngStream) -> Result<Vec<&Transition>, AgentError> {
        if batch > self.items.len() || batch == 0 {
            return Err(AgentError::BufferTooSmall {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    fn t(tag: usize) -> Transition {
        Transition {
            state: vec![tag as f64],
            action: 0,
            reward: 0.0,
            next_state: vec![],
            terminal: false,
        }
    }

    #[test]
    fn ring_keeps_most_recent() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..10 {
            buf.push(t(i));
            assert!(buf.len() <= 3);
        }
        let mut tags: Vec<usize> = buf.iter().map(|x| x.state[0] as usize).collect();
        tags.sort_unstable();
        assert_eq!(tags, vec![7, 8, 9]);
        assert_eq!(buf.pushed(), 10);
    }

    #[test]
    fn sample_without_replacement() {
        let mut buf = ReplayBuffer::new(50);
        for i in 0..50 {
            buf.push(t(i));
        }
        let mut rng = make_rng(3);
        for _ in 0..100 {
            let mut tags: Vec<usize> = buf.sample(20, &mut rng).unwrap().iter().map(|x| x.state[0] as usize).collect();
            tags.sort_unstable();
            tags.dedup();
            assert_eq!(tags.len(), 20);
        }
    }

    #[test]
    fn too_small_rejected() {
        let mut buf = ReplayBuffer::new(5);
        buf.push(t(0));
        let mut rng = make_rng(0);
        assert!(matches!(buf.sample(2, &mut rng), Err(AgentError::BufferTooSmall { have: 1, need: 2 })));
    }
}
