use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// A discrete-event queue over virtual time in nanoseconds. Events at the
/// same instant pop in scheduling order.
#[derive(Debug)]
pub struct Simulator<E> {
    now_ns: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<(u64, u64, Slot<E>)>>,
}

/// Orders by nothing so that `E` needs no `Ord`; `(time, seq)` is unique.
#[derive(Debug)]
struct Slot<E>(E);

impl<E> PartialEq for Slot<E> {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl<E> Eq for Slot<E> {}
impl<E> PartialOrd for Slot<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Slot<E> {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}

impl<E> Default for Simulator<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Simulator<E> {
    pub fn new() -> Self {
        Simulator {
            now_ns: 0,
            seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now_ns(&self) -> u64 {
        self.now_ns
    }

    pub fn schedule_in(&mut self, delay_ns: u64, event: E) {
        let at = self.now_ns + delay_ns;
        self.queue.push(Reverse((at, self.seq, Slot(event))));
        self.seq += 1;
    }

    /// Advances the clock to the next event.
    pub fn pop(&mut self) -> Option<E> {
        let Reverse((at, _, Slot(event))) = self.queue.pop()?;
        self.now_ns = at;
        Some(event)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Milliseconds to whole nanoseconds.
pub(crate) fn ms_to_ns(ms: f64) -> u64 {
    (ms * 1e6).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_then_fifo_order() {
        let mut sim = Simulator::new();
        sim.schedule_in(5, "c");
        sim.schedule_in(1, "a");
        sim.schedule_in(5, "d");
        sim.schedule_in(1, "b");
        let mut seen = Vec::new();
        while let Some(e) = sim.pop() {
            seen.push((sim.now_ns(), e));
        }
        assert_eq!(seen, vec![(1, "a"), (1, "b"), (5, "c"), (5, "d")]);
        assert!(sim.is_idle());
    }

    #[test]
    fn relative_scheduling() {
        let mut sim = Simulator::new();
        sim.schedule_in(10, 1);
        assert_eq!(sim.pop(), Some(1));
        sim.schedule_in(3, 2);
        assert_eq!(sim.pop(), Some(2));
        assert_eq!(sim.now_ns(), 13);
        assert_eq!(ms_to_ns(0.495), 495_000);
    }
}
