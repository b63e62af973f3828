//! Deterministic discrete-event engine.
//!
//! The clock is an integer millisecond counter. Events fire in `(fire_at, seq)`
//! order where `seq` is a per-engine insertion counter, so two events scheduled
//! for the same instant are processed in the order they were scheduled.
//! All randomness comes from [`RngStream`]s forked off a single master seed by
//! label, which keeps A/B comparisons on identical noise.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::ops::{Add, Sub};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Milliseconds since scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ms(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// `self - earlier`, saturating at zero.
    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub<u64> for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: u64) -> SimTime {
        SimTime(self.0.saturating_sub(rhs))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("event scheduled in the past: fire_at {fire_at} < clock {clock}")]
    ScheduledInPast { fire_at: SimTime, clock: SimTime },
    #[error("run_until target {target} is before the clock {clock}")]
    RunBackwards { target: SimTime, clock: SimTime },
    #[error("rng stream label must not be empty")]
    EmptyLabel,
    #[error("rng stream `{0}` was already forked in this run")]
    DuplicateLabel(String),
}

/// A scheduled event carrying a payload of type `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: P,
}

struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Queued<P> {}

impl<P> Queued<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.0.fire_at, self.0.seq)
    }
}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// Event queue plus clock.
pub struct Scheduler<P> {
    clock: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Queued<P>>,
    processed: u64,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Self {
            clock: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Total events handed out by [`Scheduler::pop_until`] so far.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Enqueue `payload` to fire at `fire_at`. Returns the assigned sequence number.
    pub fn schedule(&mut self, fire_at: SimTime, payload: P) -> Result<u64, SimError> {
        if fire_at < self.clock {
            return Err(SimError::ScheduledInPast {
                fire_at,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event {
            fire_at,
            seq,
            payload,
        }));
        Ok(seq)
    }

    /// Schedule `delay_ms` after the current clock. Never fails.
    pub fn schedule_in(&mut self, delay_ms: u64, payload: P) -> u64 {
        let at = self.clock + delay_ms;
        self.schedule(at, payload)
            .expect("relative schedule cannot be in the past")
    }

    /// Pops the next event with `fire_at <= t_end`, advancing the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<Event<P>> {
        match self.queue.peek() {
            Some(top) if top.0.fire_at <= t_end => {
                let Queued(ev) = self.queue.pop().expect("peeked");
                self.clock = ev.fire_at;
                self.processed += 1;
                Some(ev)
            }
            _ => None,
        }
    }

    /// Moves the clock forward to `t` once the queue holds nothing due before it.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), SimError> {
        if t < self.clock {
            return Err(SimError::RunBackwards {
                target: t,
                clock: self.clock,
            });
        }
        self.clock = t;
        Ok(())
    }

    /// Process every event due at or before `t_end` with `handler`, which may
    /// schedule further events. Leaves the clock at `t_end`.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, SimError>
    where
        F: FnMut(&mut Scheduler<P>, Event<P>),
    {
        if t_end < self.clock {
            return Err(SimError::RunBackwards {
                target: t_end,
                clock: self.clock,
            });
        }
        let mut count = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            count += 1;
        }
        self.clock = t_end;
        Ok(count)
    }
}

/// A labelled, reproducible random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    label: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Stream for `(seed, label)` without duplicate tracking. Prefer
    /// [`RngForks::fork`] inside a simulation run.
    pub fn derive(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self {
            label: label.to_owned(),
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Hands out one stream per label for a single run.
#[derive(Debug, Clone)]
pub struct RngForks {
    seed: u64,
    used: BTreeSet<String>,
}

impl RngForks {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            used: BTreeSet::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fork(&mut self, label: &str) -> Result<RngStream, SimError> {
        if label.is_empty() {
            return Err(SimError::EmptyLabel);
        }
        if !self.used.insert(label.to_owned()) {
            return Err(SimError::DuplicateLabel(label.to_owned()));
        }
        Ok(RngStream::derive(self.seed, label))
    }
}
