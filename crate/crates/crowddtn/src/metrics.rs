//! Event accounting and report computation.
//!
//! Every run produces an append-only [`EventLog`]; all reported metrics are
//! pure functions of that log, so a report recomputed from a persisted trace
//! matches the in-run report exactly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::scenario::NodeId;

/// Identifier of a created message; dense, in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MessageId(pub u64);

impl std::fmt::Display for MessageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// The artist created a message.
    Create,
    /// A transfer completed; the receiver got a copy.
    Relay,
    /// A completed transfer whose receiver was the destination.
    Deliver,
    /// A resident copy outlived its TTL and was removed.
    DropTtl,
    /// Admission at the source failed for lack of buffer space.
    DropBuffer,
    /// A transfer was cancelled: receiver full or message expired in flight.
    Abort,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Create => "CREATE",
            EventKind::Relay => "RELAY",
            EventKind::Deliver => "DELIVER",
            EventKind::DropTtl => "DROP_TTL",
            EventKind::DropBuffer => "DROP_BUFFER",
            EventKind::Abort => "ABORT",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        match s {
            "CREATE" => Some(EventKind::Create),
            "RELAY" => Some(EventKind::Relay),
            "DELIVER" => Some(EventKind::Deliver),
            "DROP_TTL" => Some(EventKind::DropTtl),
            "DROP_BUFFER" => Some(EventKind::DropBuffer),
            "ABORT" => Some(EventKind::Abort),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub message: MessageId,
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
}

/// Ordered record of everything that happened during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(
            self.events.last().is_none_or(|e| e.time <= event.time),
            "event times must be non-decreasing"
        );
        self.events.push(event);
    }

    pub fn record(
        &mut self,
        time: f64,
        kind: EventKind,
        message: MessageId,
        from: Option<NodeId>,
        to: Option<NodeId>,
    ) {
        self.push(Event {
            time,
            kind,
            message,
            from,
            to,
        });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> u64 {
        self.events.iter().filter(|e| e.kind == kind).count() as u64
    }
}

/// Computed metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// Messages created by the generator (admitted or not).
    pub created: u64,
    /// Messages delivered to their destination at least once.
    pub delivered_unique: u64,
    /// Completed transfers, deliveries included.
    pub relays: u64,
    /// Copies ever materialised: creations plus completed relays.
    pub copies_created: u64,
    /// `delivered_unique / created`; 0 when nothing was created.
    pub delivery_probability: f64,
    /// `(relays - deliveries) / deliveries`; absent without any delivery.
    pub overhead_ratio: Option<f64>,
    /// Mean first-delivery latency in seconds; absent without any delivery.
    pub latency_avg: Option<f64>,
    /// `created / audience_count`.
    pub messages_per_destination: f64,
    /// `delivered_unique / audience_count`.
    pub delivered_per_destination: f64,
    /// Set when the run created no messages at all.
    pub degenerate: bool,
}

/// Fraction of created messages that reached their destination at least
/// once. A log without creations reports 0 and is flagged degenerate.
pub fn delivery_probability(log: &EventLog) -> f64 {
    let created = log.count(EventKind::Create);
    if created == 0 {
        return 0.0;
    }
    unique_delivered(log) as f64 / created as f64
}

/// Relays that did not deliver, per delivering relay. Absent (not zero)
/// when nothing was delivered, so a collapsed protocol is distinguishable
/// from a costless one.
pub fn overhead_ratio(log: &EventLog) -> Option<f64> {
    let relays = log.count(EventKind::Relay);
    let deliveries = log.count(EventKind::Deliver);
    if deliveries == 0 {
        None
    } else {
        Some((relays - deliveries) as f64 / deliveries as f64)
    }
}

/// Mean over first deliveries of `deliver_time - create_time`.
pub fn latency_avg(log: &EventLog) -> Option<f64> {
    let mut created_at: BTreeMap<MessageId, f64> = BTreeMap::new();
    let mut first_delivery: BTreeMap<MessageId, f64> = BTreeMap::new();
    for e in log.events() {
        match e.kind {
            EventKind::Create => {
                created_at.entry(e.message).or_insert(e.time);
            }
            EventKind::Deliver => {
                first_delivery.entry(e.message).or_insert(e.time);
            }
            _ => {}
        }
    }
    if first_delivery.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    let mut n = 0u64;
    for (message, delivered) in &first_delivery {
        let created = created_at
            .get(message)
            .expect("delivery without a creation");
        sum += delivered - created;
        n += 1;
    }
    Some(sum / n as f64)
}

/// Created messages per audience member.
pub fn messages_per_destination(log: &EventLog, audience_count: u32) -> f64 {
    assert!(audience_count >= 1);
    log.count(EventKind::Create) as f64 / audience_count as f64
}

fn unique_delivered(log: &EventLog) -> u64 {
    let mut seen: BTreeMap<MessageId, ()> = BTreeMap::new();
    for e in log.events() {
        if e.kind == EventKind::Deliver {
            seen.entry(e.message).or_insert(());
        }
    }
    seen.len() as u64
}

/// Computes the full report for a finished log.
pub fn report(log: &EventLog, audience_count: u32) -> Report {
    assert!(audience_count >= 1);
    let created = log.count(EventKind::Create);
    let relays = log.count(EventKind::Relay);
    let delivered_unique = unique_delivered(log);
    Report {
        created,
        delivered_unique,
        relays,
        copies_created: created + relays,
        delivery_probability: delivery_probability(log),
        overhead_ratio: overhead_ratio(log),
        latency_avg: latency_avg(log),
        messages_per_destination: messages_per_destination(log, audience_count),
        delivered_per_destination: delivered_unique as f64 / audience_count as f64,
        degenerate: created == 0,
    }
}
