//! Virtual clock, future-event set and interrupt-line dispatch.
//!
//! Everything in the simulator runs on one [`Kernel`]. Time only moves
//! forward, and events that share a firing tick are delivered in insertion
//! order so that a run is a pure function of its inputs.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated time in ticks. One tick is one millisecond.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl std::ops::Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl std::ops::AddAssign<u64> for SimTime {
    fn add_assign(&mut self, rhs: u64) {
        self.0 += rhs;
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Broad class of an event, kept for tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Timer,
    BusCompletion,
    FaultInjection,
    Interrupt,
}

/// Handle returned by [`Kernel::schedule_event`]; equal to the event's sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u64);

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub kind: EventKind,
    pub payload: P,
    pub seq: u64,
}

impl<P> Event<P> {
    pub fn id(&self) -> EventId {
        EventId(self.seq)
    }
}

struct Queued<P>(Event<P>);

impl<P> Queued<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.0.fire_at, self.0.seq)
    }
}

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Identifier of a hardware interrupt line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub u8);

/// Opaque reference to the routine registered on a line. The owner of the
/// kernel decides what each id means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HandlerId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterruptLine {
    pub line_id: LineId,
    pub handler_id: HandlerId,
    pub pending: bool,
}

/// An interrupt ready for delivery.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery<P> {
    pub line: LineId,
    pub handler: HandlerId,
    pub payload: P,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("event scheduled in the past: requested {requested}, clock is {now}")]
    InPast { requested: SimTime, now: SimTime },
    #[error("interrupt line {0:?} already has a handler")]
    LineTaken(LineId),
}

pub struct Kernel<P> {
    now: SimTime,
    queue: BinaryHeap<Reverse<Queued<P>>>,
    cancelled: HashSet<u64>,
    next_seq: u64,
    lines: Vec<InterruptLine>,
    pending: Vec<(LineId, P)>,
    lost_interrupts: u64,
    fired: u64,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            next_seq: 0,
            lines: Vec::new(),
            pending: Vec::new(),
            lost_interrupts: 0,
            fired: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule_event(
        &mut self,
        fire_at: SimTime,
        kind: EventKind,
        payload: P,
    ) -> Result<EventId, KernelError> {
        if fire_at < self.now {
            return Err(KernelError::InPast {
                requested: fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued(Event {
            fire_at,
            kind,
            payload,
            seq,
        })));
        Ok(EventId(seq))
    }

    /// Schedules `delay` ticks from now. Never fails.
    pub fn schedule_in(&mut self, delay: u64, kind: EventKind, payload: P) -> EventId {
        let at = self.now + delay;
        self.schedule_event(at, kind, payload)
            .expect("relative schedule is never in the past")
    }

    /// Cancels a pending event. Returns `false` if it already fired or was cancelled.
    pub fn cancel(&mut self, id: EventId) -> bool {
        if id.0 >= self.next_seq {
            return false;
        }
        let live = self.queue.iter().any(|q| q.0 .0.seq == id.0);
        live && self.cancelled.insert(id.0)
    }

    fn drop_cancelled_front(&mut self) {
        while let Some(Reverse(front)) = self.queue.peek() {
            if self.cancelled.remove(&front.0.seq) {
                self.queue.pop();
            } else {
                break;
            }
        }
    }

    /// Firing time of the next live event.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.drop_cancelled_front();
        self.queue.peek().map(|q| q.0 .0.fire_at)
    }

    /// Number of live queued events.
    pub fn pending_events(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    /// Pops the next live event with `fire_at <= limit`, moving the clock to it.
    pub fn pop_next(&mut self, limit: SimTime) -> Option<Event<P>> {
        self.drop_cancelled_front();
        match self.queue.peek() {
            Some(Reverse(q)) if q.0.fire_at <= limit => {
                let Reverse(Queued(ev)) = self.queue.pop()?;
                debug_assert!(ev.fire_at >= self.now);
                self.now = ev.fire_at;
                self.fired += 1;
                Some(ev)
            }
            _ => None,
        }
    }

    /// Fires every event with `fire_at <= t` in `(fire_at, seq)` order and leaves
    /// the clock at `t`. A `t` earlier than the clock is treated as the clock.
    pub fn advance_until(&mut self, t: SimTime) -> Vec<Event<P>> {
        let mut out = Vec::new();
        while let Some(ev) = self.pop_next(t) {
            out.push(ev);
        }
        if t > self.now {
            self.now = t;
        }
        out
    }

    /// Total events fired so far.
    pub fn fired_count(&self) -> u64 {
        self.fired
    }

    pub fn register_line(&mut self, line_id: LineId, handler_id: HandlerId) -> Result<(), KernelError> {
        if self.lines.iter().any(|l| l.line_id == line_id) {
            return Err(KernelError::LineTaken(line_id));
        }
        self.lines.push(InterruptLine {
            line_id,
            handler_id,
            pending: false,
        });
        Ok(())
    }

    pub fn line(&self, line_id: LineId) -> Option<&InterruptLine> {
        self.lines.iter().find(|l| l.line_id == line_id)
    }

    /// Marks a line pending. The owner must call [`Kernel::take_interrupts`]
    /// before dispatching anything else at this tick. Unregistered lines
    /// only bump the lost-interrupt statistic.
    pub fn raise_interrupt(&mut self, line_id: LineId, payload: P) {
        match self.lines.iter_mut().find(|l| l.line_id == line_id) {
            Some(line) => {
                line.pending = true;
                self.pending.push((line_id, payload));
            }
            None => self.lost_interrupts += 1,
        }
    }

    pub fn has_pending_interrupts(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Drains raised interrupts in line-registration order; several raises on
    /// one line keep their raise order.
    pub fn take_interrupts(&mut self) -> Vec<Delivery<P>> {
        let mut raised = std::mem::take(&mut self.pending);
        let rank = |id: LineId, lines: &[InterruptLine]| {
            lines.iter().position(|l| l.line_id == id).unwrap_or(usize::MAX)
        };
        raised.sort_by_key(|(id, _)| rank(*id, &self.lines));
        let mut out = Vec::with_capacity(raised.len());
        for (line, payload) in raised {
            let entry = self
                .lines
                .iter_mut()
                .find(|l| l.line_id == line)
                .expect("pending interrupts always have a registered line");
            entry.pending = false;
            out.push(Delivery {
                line,
                handler: entry.handler_id,
                payload,
            });
        }
        out
    }

    pub fn lost_interrupts(&self) -> u64 {
        self.lost_interrupts
    }
}
