//! Virtual clock and event queue.

use alloc::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::Micros;

/// Identifies a scheduled event; used to cancel it before it fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    at: Micros,
    seq: u64,
}

impl EventHandle {
    pub fn at(&self) -> Micros {
        self.at
    }
}

/// Timestamp-ordered event queue. Ties fire in insertion order.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    now: Micros,
    next_seq: u64,
    pending: BTreeMap<(Micros, u64), E>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, at: Micros, event: E) -> Result<EventHandle> {
        if at < self.now {
            return Err(Error::TimeTravel { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((at, seq), event);
        Ok(EventHandle { at, seq })
    }

    /// Removes a pending event. Returns it if it had not fired yet.
    pub fn cancel(&mut self, handle: EventHandle) -> Option<E> {
        self.pending.remove(&(handle.at, handle.seq))
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.pending.keys().next().map(|k| k.0)
    }

    /// Pops the earliest event and advances the clock to its timestamp.
    pub fn pop(&mut self) -> Option<(Micros, E)> {
        let ((at, _), ev) = self.pending.pop_first()?;
        self.now = at;
        Some((at, ev))
    }

    /// Pops the earliest event only if it fires at or before `limit`.
    pub fn pop_until(&mut self, limit: Micros) -> Option<(Micros, E)> {
        match self.peek_time() {
            Some(t) if t <= limit => self.pop(),
            _ => None,
        }
    }

    /// Moves the clock forward without firing anything.
    pub fn advance_to(&mut self, t: Micros) {
        if t > self.now {
            self.now = t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn fires_at_zero() {
        let mut q = EventQueue::new();
        q.schedule(0, "a").unwrap();
        assert_eq!(q.pop(), Some((0, "a")));
    }

    #[test]
    fn ties_in_insertion_order() {
        let mut q = EventQueue::new();
        for i in 0..5 {
            q.schedule(10, i).unwrap();
        }
        q.schedule(5, 99).unwrap();
        let order: Vec<_> = core::iter::from_fn(|| q.pop()).map(|e| e.1).collect();
        assert_eq!(order, [99, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn cancel_before_fire() {
        let mut q = EventQueue::new();
        let h = q.schedule(7, 1).unwrap();
        q.schedule(8, 2).unwrap();
        assert_eq!(q.cancel(h), Some(1));
        assert_eq!(q.pop(), Some((8, 2)));
        assert!(q.pop().is_none());
        assert_eq!(q.cancel(h), None);
    }

    #[test]
    fn rejects_time_travel() {
        let mut q = EventQueue::new();
        q.schedule(100, ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(99, ()), Err(Error::TimeTravel { at: 99, now: 100 }));
        assert!(q.schedule(100, ()).is_ok());
    }
}
