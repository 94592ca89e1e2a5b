//! Deterministic discrete-event engine.
//!
//! Events are kept in a binary heap ordered by `(fire_at, seq)`, where `seq` is
//! a global insertion counter. Ties at equal `fire_at` therefore pop in FIFO
//! order, which makes replays bit-identical. Cancellation marks a tombstone
//! that is skipped lazily when the event reaches the top of the heap.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot schedule event at t={fire_at} before current clock t={clock}")]
    SchedulingInPast { fire_at: f64, clock: f64 },
    #[error("invalid simulation time {0}: must be finite and non-negative")]
    InvalidTime(f64),
}

/// Simulated time in seconds. Always finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self, SimError> {
        if seconds.is_finite() && seconds >= 0.0 {
            // Adding 0.0 folds -0.0 into 0.0 so `total_cmp` agrees with `==`.
            Ok(SimTime(seconds + 0.0))
        } else {
            Err(SimError::InvalidTime(seconds))
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        // Both values are finite, so total_cmp agrees with numeric order.
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of a logical process (client, balancer, disk handler, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcessId(pub u32);

/// Handle returned by [`Engine::schedule`]; equal to the event's sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u64);

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: ProcessId,
    pub payload: P,
}

impl<P> Event<P> {
    pub fn id(&self) -> EventId {
        EventId(self.seq)
    }
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    // Reversed so that `BinaryHeap` (a max-heap) pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Time-ordered queue with lazy tombstone cancellation.
#[derive(Debug)]
pub struct EventQueue<P> {
    heap: BinaryHeap<Event<P>>,
    // Sequence numbers still in the heap and not cancelled.
    live: HashSet<u64>,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            live: HashSet::new(),
        }
    }
}

impl<P> EventQueue<P> {
    pub fn push(&mut self, event: Event<P>) {
        self.live.insert(event.seq);
        self.heap.push(event);
    }

    /// Marks `id` as cancelled. Returns false if it already fired, was
    /// already cancelled, or never existed.
    pub fn cancel(&mut self, id: EventId) -> bool {
        self.live.remove(&id.0)
    }

    fn discard_tombstones(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.live.contains(&top.seq) {
                break;
            }
            self.heap.pop();
        }
    }

    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.discard_tombstones();
        self.heap.peek().map(|e| e.fire_at)
    }

    pub fn pop(&mut self) -> Option<Event<P>> {
        self.discard_tombstones();
        let event = self.heap.pop()?;
        self.live.remove(&event.seq);
        Some(event)
    }

    /// Number of live (non-cancelled) events.
    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }
}

/// Reacts to events popped by the engine. Handlers may schedule further
/// events through the engine reference they receive.
pub trait Handler<P> {
    fn handle(&mut self, engine: &mut Engine<P>, event: Event<P>);
}

impl<P, F> Handler<P> for F
where
    F: FnMut(&mut Engine<P>, Event<P>),
{
    fn handle(&mut self, engine: &mut Engine<P>, event: Event<P>) {
        self(engine, event)
    }
}

/// One fired event as recorded by the optional trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub fire_at: f64,
    pub seq: u64,
    pub target: ProcessId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    pub scheduled: u64,
    pub fired: u64,
    pub cancelled: u64,
}

#[derive(Debug)]
pub struct Engine<P> {
    clock: SimTime,
    next_seq: u64,
    queue: EventQueue<P>,
    counters: EngineCounters,
    trace: Option<Vec<TraceEntry>>,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            clock: SimTime::ZERO,
            next_seq: 0,
            queue: EventQueue::default(),
            counters: EngineCounters::default(),
            trace: None,
        }
    }

    /// Records `(fire_at, seq, target)` of every fired event from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn counters(&self) -> EngineCounters {
        self.counters
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: ProcessId,
        payload: P,
    ) -> Result<EventId, SimError> {
        if fire_at < self.clock {
            return Err(SimError::SchedulingInPast {
                fire_at: fire_at.seconds(),
                clock: self.clock.seconds(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event {
            fire_at,
            seq,
            target,
            payload,
        });
        self.counters.scheduled += 1;
        Ok(EventId(seq))
    }

    /// Schedules `delay` seconds after the current clock.
    pub fn schedule_in(
        &mut self,
        delay: f64,
        target: ProcessId,
        payload: P,
    ) -> Result<EventId, SimError> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(SimError::InvalidTime(delay));
        }
        let at = SimTime::new(self.clock.seconds() + delay)?;
        self.schedule(at, target, payload)
    }

    pub fn cancel(&mut self, id: EventId) -> bool {
        let hit = self.queue.cancel(id);
        if hit {
            self.counters.cancelled += 1;
        }
        hit
    }

    fn fire<H: Handler<P>>(&mut self, handler: &mut H, event: Event<P>) {
        debug_assert!(event.fire_at >= self.clock);
        self.clock = event.fire_at;
        self.counters.fired += 1;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEntry {
                fire_at: event.fire_at.seconds(),
                seq: event.seq,
                target: event.target,
            });
        }
        handler.handle(self, event);
    }

    /// Processes every event with `fire_at <= t_end` in `(fire_at, seq)` order
    /// and leaves the clock at `t_end`. Returns the number of events fired.
    pub fn run_until<H: Handler<P>>(&mut self, t_end: SimTime, handler: &mut H) -> usize {
        let t_end = t_end.max(self.clock);
        let mut count = 0;
        while let Some(next) = self.queue.peek_time() {
            if next > t_end {
                break;
            }
            let event = self.queue.pop().expect("peeked event present");
            self.fire(handler, event);
            count += 1;
        }
        self.clock = t_end;
        count
    }

    /// Drains the queue completely. The clock stops at the last fire time.
    pub fn run_to_completion<H: Handler<P>>(&mut self, handler: &mut H) -> usize {
        let mut count = 0;
        while let Some(event) = self.queue.pop() {
            self.fire(handler, event);
            count += 1;
        }
        count
    }
}
