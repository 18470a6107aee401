//! Fixed-capacity reservoir of representer samples.
//!
//! Every offered item ends up in the reservoir with probability `b / t` after
//! `t` offers. The returned [`InsertDecision`] tells the predictor which of its
//! three update paths applies this round.

use rand::Rng;

/// Outcome of offering one item to a [`ReservoirBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertDecision {
    /// The buffer had free capacity; the item was appended.
    AppendedDirect,
    /// The item overwrote the slot at this index.
    Replaced(usize),
    /// The reservoir declined the item.
    Skipped,
}

impl InsertDecision {
    pub fn label(&self) -> &'static str {
        match self {
            InsertDecision::AppendedDirect => "append",
            InsertDecision::Replaced(_) => "replace",
            InsertDecision::Skipped => "skip",
        }
    }
}

/// The two uniform draws consumed by one offer: acceptance and victim choice.
///
/// Exposed so several buffers can share one decision sequence per round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirDraw {
    pub accept: f64,
    pub victim: f64,
}

impl ReservoirDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            accept: rng.gen::<f64>(),
            victim: rng.gen::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirBuffer<T> {
    capacity: usize,
    slots: Vec<T>,
    seen: usize,
}

impl<T> ReservoirBuffer<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "reservoir capacity must be positive");
        Self {
            capacity,
            slots: Vec::with_capacity(capacity),
            seen: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    /// Number of items offered so far.
    pub fn seen_count(&self) -> usize {
        self.seen
    }

    /// Stored items in slot order.
    pub fn contents(&self) -> &[T] {
        &self.slots
    }

    /// Decides what would happen to the next offer without mutating the buffer.
    pub fn decide(&self, draw: ReservoirDraw) -> InsertDecision {
        if self.slots.len() < self.capacity {
            return InsertDecision::AppendedDirect;
        }
        let t = (self.seen + 1) as f64;
        if draw.accept < self.capacity as f64 / t {
            let idx = ((draw.victim * self.capacity as f64) as usize).min(self.capacity - 1);
            InsertDecision::Replaced(idx)
        } else {
            InsertDecision::Skipped
        }
    }

    /// Offers an item using pre-drawn uniforms.
    pub fn offer_with(&mut self, item: T, draw: ReservoirDraw) -> InsertDecision {
        let decision = self.decide(draw);
        self.apply(item, decision);
        decision
    }

    /// Offers an item, drawing the acceptance and victim uniforms from `rng`.
    pub fn offer<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) -> InsertDecision {
        let draw = ReservoirDraw::sample(rng);
        self.offer_with(item, draw)
    }

    /// Applies a decision obtained from [`decide`](Self::decide).
    pub(crate) fn apply(&mut self, item: T, decision: InsertDecision) {
        self.seen += 1;
        match decision {
            InsertDecision::AppendedDirect => self.slots.push(item),
            InsertDecision::Replaced(i) => self.slots[i] = item,
            InsertDecision::Skipped => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fills_before_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = ReservoirBuffer::new(10);
        assert_eq!(buf.occupancy(), 0);
        assert!(buf.contents().is_empty());
        for i in 0..10 {
            assert_eq!(buf.offer(i, &mut rng), InsertDecision::AppendedDirect);
        }
        assert_eq!(buf.contents(), &(0..10).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn occupancy_rule_not_probability() {
        let mut buf = ReservoirBuffer::new(5);
        // an acceptance draw of 1.0 would always be declined by the b/t rule
        let never = ReservoirDraw { accept: 1.0, victim: 0.0 };
        for i in 0..4 {
            buf.offer_with(i, never);
        }
        assert_eq!(buf.occupancy(), 4);
        assert_eq!(buf.offer_with(4, never), InsertDecision::AppendedDirect);
        assert_eq!(buf.offer_with(5, never), InsertDecision::Skipped);
        assert_eq!(buf.seen_count(), 6);
    }

    #[test]
    fn occupancy_clamps_at_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut buf = ReservoirBuffer::new(5);
        for i in 0..3 {
            buf.offer(i, &mut rng);
        }
        assert_eq!(buf.occupancy(), 3);
        for i in 3..100 {
            buf.offer(i, &mut rng);
            assert!(buf.occupancy() <= 5);
        }
        assert_eq!(buf.occupancy(), 5);
        assert_eq!(buf.seen_count(), 100);
    }

    #[test]
    fn victim_index_in_range() {
        let mut buf = ReservoirBuffer::new(3);
        for i in 0..3 {
            buf.offer_with(i, ReservoirDraw { accept: 0.0, victim: 0.0 });
        }
        let d = buf.offer_with(9, ReservoirDraw { accept: 0.0, victim: 1.0 });
        assert_eq!(d, InsertDecision::Replaced(2));
        assert_eq!(buf.contents(), &[0, 1, 9]);
    }

    #[test]
    fn deterministic_per_seed() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut buf = ReservoirBuffer::new(4);
            let decisions: Vec<_> = (0..200).map(|i| buf.offer(i, &mut rng)).collect();
            (decisions, buf.contents().to_vec())
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn last_sample_inclusion_rate() {
        // P(sample_100 in final buffer) = 5/100
        let runs = 10_000;
        let mut hits = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..runs {
            let mut buf = ReservoirBuffer::new(5);
            for i in 0..100 {
                buf.offer(i, &mut rng);
            }
            hits += buf.contents().contains(&99) as usize;
        }
        let p = 0.05;
        let se = (p * (1.0 - p) / runs as f64).sqrt();
        let est = hits as f64 / runs as f64;
        assert!((est - p).abs() <= 3.0 * se, "estimate {est}");
    }
}
