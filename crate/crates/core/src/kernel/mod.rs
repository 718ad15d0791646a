//! Discrete-event kernel: event calendar, simulation clock, FIFO resources
//! and seedable random-variate streams.
//!
//! A [`Calendar`] is single-threaded. Independent replications each own
//! their own calendar, resources and streams, so they can run on separate
//! threads without sharing anything mutable.

mod resource;
mod rng;

pub use resource::{Completion, FifoResource, ResourceStats};
pub use rng::{splitmix64, RngStream, StreamId};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("event scheduled at t={at} but the clock is already at t={now}")]
    PastEvent { at: f64, now: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Simulated time in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn from_secs(secs: f64) -> Self {
        SimTime(secs)
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: f64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = f64;
    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.0)
    }
}

/// A timestamped action. Events with the same `fire_at` dispatch in
/// ascending `sequence_no`, which is the order they were scheduled.
#[derive(Debug, Clone)]
pub struct Event<A> {
    pub fire_at: SimTime,
    pub sequence_no: u64,
    pub action: A,
}

// BinaryHeap is a max-heap, so the comparison is reversed to pop the
// earliest (fire_at, sequence_no) first.
impl<A> Ord for Event<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.fire_at.total_cmp(&other.fire_at) {
            Ordering::Equal => self.sequence_no.cmp(&other.sequence_no),
            ord => ord,
        }
        .reverse()
    }
}

impl<A> PartialOrd for Event<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> PartialEq for Event<A> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at.0 == other.fire_at.0 && self.sequence_no == other.sequence_no
    }
}

impl<A> Eq for Event<A> {}

/// Future-event list plus the simulation clock.
#[derive(Debug)]
pub struct Calendar<A> {
    heap: BinaryHeap<Event<A>>,
    clock: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl<A> Default for Calendar<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> Calendar<A> {
    pub fn new() -> Self {
        Calendar {
            heap: BinaryHeap::new(),
            clock: SimTime::ZERO,
            next_seq: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Inserts an action to fire at `fire_at`; returns its sequence number.
    pub fn schedule(&mut self, fire_at: SimTime, action: A) -> Result<u64, KernelError> {
        if !(fire_at.0 >= self.clock.0) || !fire_at.0.is_finite() {
            return Err(KernelError::PastEvent {
                at: fire_at.0,
                now: self.clock.0,
            });
        }
        let sequence_no = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event {
            fire_at,
            sequence_no,
            action,
        });
        Ok(sequence_no)
    }

    pub fn schedule_in(&mut self, delay: f64, action: A) -> Result<u64, KernelError> {
        self.schedule(self.clock + delay, action)
    }

    /// Pops the next event if it fires no later than `until`, advancing the
    /// clock to its timestamp. Returns `None` once the horizon is reached, in
    /// which case the clock is moved to `until` if later events remain.
    pub fn next_event(&mut self, until: SimTime) -> Option<Event<A>> {
        match self.heap.peek() {
            Some(ev) if ev.fire_at.0 <= until.0 => {
                let ev = self.heap.pop().expect("peeked");
                self.clock = ev.fire_at;
                self.dispatched += 1;
                Some(ev)
            }
            Some(_) => {
                if self.clock.0 < until.0 {
                    self.clock = until;
                }
                None
            }
            None => None,
        }
    }

    /// Dispatches every event with `fire_at <= until` through `handler`.
    /// The handler may schedule further events.
    pub fn run<F>(&mut self, until: SimTime, mut handler: F)
    where
        F: FnMut(&mut Self, Event<A>),
    {
        while let Some(ev) = self.next_event(until) {
            handler(self, ev);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispatches_in_time_order() {
        let mut cal = Calendar::new();
        cal.schedule(SimTime::from_secs(3.0), 'a').unwrap();
        cal.run(SimTime::from_secs(3.0), |_, _| {});
        assert_eq!(cal.now().secs(), 3.0);
        cal.schedule(SimTime::from_secs(5.0), 'b').unwrap();
        let ev = cal.next_event(SimTime::from_secs(10.0)).unwrap();
        assert_eq!(ev.action, 'b');
        assert_eq!(cal.now().secs(), 5.0);
    }

    #[test]
    fn equal_times_break_ties_by_sequence() {
        let mut cal = Calendar::new();
        let mut seqs = Vec::new();
        for label in ["x", "y", "z"] {
            seqs.push(cal.schedule(SimTime::from_secs(5.0), label).unwrap());
        }
        let mut order = Vec::new();
        cal.run(SimTime::from_secs(10.0), |_, ev| {
            order.push((ev.sequence_no, ev.action))
        });
        assert_eq!(order, vec![(seqs[0], "x"), (seqs[1], "y"), (seqs[2], "z")]);
    }

    #[test]
    fn scheduling_into_the_past_is_an_error() {
        let mut cal = Calendar::new();
        cal.schedule(SimTime::from_secs(3.0), ()).unwrap();
        cal.run(SimTime::from_secs(3.0), |_, _| {});
        let err = cal.schedule(SimTime::from_secs(2.0), ()).unwrap_err();
        assert_eq!(err, KernelError::PastEvent { at: 2.0, now: 3.0 });
    }

    #[test]
    fn run_until_zero_dispatches_nothing_later() {
        let mut cal = Calendar::new();
        cal.schedule(SimTime::from_secs(1.0), ()).unwrap();
        let mut n = 0;
        cal.run(SimTime::ZERO, |_, _| n += 1);
        assert_eq!(n, 0);
        assert_eq!(cal.now().secs(), 0.0);
        assert_eq!(cal.pending(), 1);
    }

    #[test]
    fn empty_calendar_terminates_early() {
        let mut cal: Calendar<()> = Calendar::new();
        cal.schedule(SimTime::from_secs(2.0), ()).unwrap();
        cal.run(SimTime::from_secs(100.0), |_, _| {});
        assert_eq!(cal.now().secs(), 2.0);
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut cal = Calendar::new();
        cal.schedule(SimTime::ZERO, 0u32).unwrap();
        let mut seen = Vec::new();
        cal.run(SimTime::from_secs(4.5), |cal, ev| {
            seen.push(cal.now().secs());
            cal.schedule_in(1.0, ev.action + 1).unwrap();
        });
        assert_eq!(seen, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cal.now().secs(), 4.5);
    }

    #[test]
    fn clock_is_monotone() {
        let mut cal = Calendar::new();
        let mut rng = RngStream::new(11, StreamId::Arrivals);
        for _ in 0..500 {
            let t = rng.uniform() * 100.0;
            cal.schedule(SimTime::from_secs(t), ()).unwrap();
        }
        let mut last = 0.0;
        cal.run(SimTime::from_secs(1e9), |cal, _| {
            assert!(cal.now().secs() >= last);
            last = cal.now().secs();
        });
    }
}
