//! Deterministic time-stepped simulation loop.
//!
//! Each tick runs a fixed sequence of phases: message generation, TTL
//! expiry, transfer progress, contact refresh plus router scans, clock
//! advance. All iteration orders are fixed (ascending node and message
//! ids, transfer initiation order), so a run is a pure function of its
//! configuration and produces a bit-identical event log every time.
//!
//! Since nodes never move, the radio contacts formed at t = 0 never drop.
//! Routers sample these long-lived contacts once at start and then once per
//! aging interval (a re-encounter epoch), which is what drives predictability
//! aging and last-encounter dynamics in an otherwise static graph.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::metrics::{EventKind, EventLog, MessageId};
use crate::routing::{process_contact, ForwardAction, NodeRouter};
use crate::scenario::{place_scenario, InvalidConfig, NodeId, Scenario, ScenarioConfig, ARTIST};

/// Slack for comparing tick times against generation/epoch schedules.
const TIME_EPS: f64 = 1e-9;

/// A lighting-cue message. The artist is always the source; destinations
/// are audience nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub id: MessageId,
    pub source: NodeId,
    pub destination: NodeId,
    pub size: u64,
    pub created_at: f64,
    pub ttl: f64,
}

/// Admission outcome of [`Buffer::try_enqueue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufEntry {
    pub message: MessageId,
    pub size: u64,
    pub enqueued_at: f64,
}

/// A byte-capacity message store. Admission-only: a message that does not
/// fit is rejected, nothing is ever evicted to make room.
#[derive(Debug, Clone)]
pub struct Buffer {
    capacity: u64,
    used: u64,
    resident: Vec<BufEntry>,
}

impl Buffer {
    pub fn new(capacity: u64) -> Self {
        Buffer {
            capacity,
            used: 0,
            resident: Vec::new(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    pub fn contains(&self, message: MessageId) -> bool {
        self.resident.iter().any(|e| e.message == message)
    }

    /// Entries in arrival order.
    pub fn residents(&self) -> &[BufEntry] {
        &self.resident
    }

    /// Admits the message iff the free space covers it.
    pub fn try_enqueue(&mut self, message: MessageId, size: u64, now: f64) -> Admission {
        debug_assert!(size <= self.capacity, "rejected at config validation");
        debug_assert!(!self.contains(message), "duplicate message in buffer");
        if self.capacity - self.used < size {
            return Admission::Rejected;
        }
        self.used += size;
        self.resident.push(BufEntry {
            message,
            size,
            enqueued_at: now,
        });
        debug_assert!(self.used <= self.capacity);
        Admission::Admitted
    }

    fn remove(&mut self, message: MessageId) -> bool {
        match self.resident.iter().position(|e| e.message == message) {
            Some(idx) => {
                let entry = self.resident.remove(idx);
                self.used -= entry.size;
                true
            }
            None => false,
        }
    }
}

/// An in-progress transfer over one directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub message: MessageId,
    pub from: NodeId,
    pub to: NodeId,
    pub bytes_remaining: f64,
    pub action: ForwardAction,
}

/// Tick clock: starts at zero and advances by exactly one step per tick.
#[derive(Debug, Clone, Copy)]
struct SimClock {
    tick: u64,
    step: f64,
}

impl SimClock {
    fn new(step: f64) -> Self {
        SimClock { tick: 0, step }
    }

    fn now(&self) -> f64 {
        self.tick as f64 * self.step
    }

    fn advance(&mut self) {
        self.tick += 1;
    }
}

/// Result of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub log: EventLog,
    pub ticks: u64,
    pub warnings: Vec<String>,
}

struct LiveMessage {
    msg: Message,
    /// Buffer residency per node index.
    holders: Vec<bool>,
    holder_count: u32,
}

struct Sim {
    config: ScenarioConfig,
    scenario: Scenario,
    clock: SimClock,
    routers: Vec<NodeRouter>,
    buffers: Vec<Buffer>,
    live: std::collections::BTreeMap<MessageId, LiveMessage>,
    transfers: Vec<Transfer>,
    out_busy: Vec<bool>,
    in_busy: Vec<bool>,
    log: EventLog,
    rng: ChaCha12Rng,
    next_message: u64,
    next_generation: u64,
    next_epoch: u64,
    warnings: Vec<String>,
}

impl Sim {
    fn new(config: &ScenarioConfig) -> Self {
        let scenario = place_scenario(config);
        let n = config.node_count() as usize;
        let mut warnings = Vec::new();
        if scenario.artist_isolated() {
            warnings.push(
                "artist is out of radio range of every audience node; no message can leave the source"
                    .to_string(),
            );
        }
        Sim {
            routers: (0..n)
                .map(|_| NodeRouter::new(config.router_kind, n))
                .collect(),
            buffers: (0..n).map(|_| Buffer::new(config.buffer_capacity)).collect(),
            live: std::collections::BTreeMap::new(),
            transfers: Vec::new(),
            out_busy: vec![false; n],
            in_busy: vec![false; n],
            log: EventLog::new(),
            rng: ChaCha12Rng::seed_from_u64(config.rng_seed),
            next_message: 0,
            next_generation: 0,
            next_epoch: 0,
            clock: SimClock::new(config.step_size),
            scenario,
            config: config.clone(),
            warnings,
        }
    }

    /// Phase 1: the artist creates one message per elapsed generation
    /// instant, destination drawn uniformly from the audience.
    fn generate_messages(&mut self, now: f64) {
        while self.next_generation as f64 * self.config.generation_interval <= now + TIME_EPS {
            self.next_generation += 1;
            let id = MessageId(self.next_message);
            self.next_message += 1;
            let destination = NodeId(self.rng.random_range(1..=self.config.audience_count));
            let msg = Message {
                id,
                source: ARTIST,
                destination,
                size: self.config.message_size,
                created_at: now,
                ttl: self.config.message_ttl,
            };
            self.log
                .record(now, EventKind::Create, id, Some(ARTIST), Some(destination));
            let mut live = LiveMessage {
                msg,
                holders: vec![false; self.config.node_count() as usize],
                holder_count: 0,
            };
            match self.buffers[ARTIST.index()].try_enqueue(id, msg.size, now) {
                Admission::Admitted => {
                    live.holders[ARTIST.index()] = true;
                    live.holder_count = 1;
                    self.routers[ARTIST.index()]
                        .on_copies_received(id, self.config.router_params.copies_l);
                }
                Admission::Rejected => {
                    self.log
                        .record(now, EventKind::DropBuffer, id, Some(ARTIST), None);
                }
            }
            self.live.insert(id, live);
        }
    }

    /// Phase 2: drop every copy whose age strictly exceeds the TTL and
    /// cancel in-flight transfers of expired messages.
    fn expire_ttl(&mut self, now: f64) {
        let mut expired = Vec::new();
        for (&id, live) in &self.live {
            // Creation times are non-decreasing in id order.
            if now - live.msg.created_at > live.msg.ttl {
                expired.push(id);
            } else {
                break;
            }
        }
        if expired.is_empty() {
            return;
        }
        for &id in &expired {
            let live = self.live.remove(&id).expect("expired message is live");
            for (idx, held) in live.holders.iter().enumerate() {
                if !held {
                    continue;
                }
                let removed = self.buffers[idx].remove(id);
                debug_assert!(removed);
                self.routers[idx].on_copy_removed(id);
                self.log
                    .record(now, EventKind::DropTtl, id, Some(NodeId(idx as u32)), None);
            }
        }
        let transfers = std::mem::take(&mut self.transfers);
        for t in transfers {
            if expired.contains(&t.message) {
                self.out_busy[t.from.index()] = false;
                self.in_busy[t.to.index()] = false;
                self.log
                    .record(now, EventKind::Abort, t.message, Some(t.from), Some(t.to));
            } else {
                self.transfers.push(t);
            }
        }
    }

    /// Phase 3: progress active transfers by `bandwidth * step` bytes and
    /// settle the completed ones in initiation order.
    fn advance_transfers(&mut self, now: f64) {
        let progress = self.config.link_bandwidth * self.config.step_size;
        let transfers = std::mem::take(&mut self.transfers);
        for mut t in transfers {
            t.bytes_remaining = (t.bytes_remaining - progress).max(0.0);
            if t.bytes_remaining > 0.0 {
                self.transfers.push(t);
            } else {
                self.complete_transfer(t, now);
            }
        }
    }

    fn complete_transfer(&mut self, t: Transfer, now: f64) {
        self.out_busy[t.from.index()] = false;
        self.in_busy[t.to.index()] = false;
        let (destination, size) = {
            let live = &self.live[&t.message];
            (live.msg.destination, live.msg.size)
        };
        self.log
            .record(now, EventKind::Relay, t.message, Some(t.from), Some(t.to));
        if t.to == destination {
            // Delivery consumes the copy at the receiver and, the message
            // having arrived, the delivering hop drops its own copy too.
            self.log
                .record(now, EventKind::Deliver, t.message, Some(t.from), Some(t.to));
            self.remove_copy(t.message, t.from);
            return;
        }
        match self.buffers[t.to.index()].try_enqueue(t.message, size, now) {
            Admission::Admitted => {
                let live = self.live.get_mut(&t.message).expect("live message");
                debug_assert!(!live.holders[t.to.index()]);
                live.holders[t.to.index()] = true;
                live.holder_count += 1;
                match t.action {
                    ForwardAction::Replicate { copies } => {
                        self.routers[t.to.index()].on_copies_received(t.message, copies);
                    }
                    ForwardAction::Handoff => {
                        self.routers[t.to.index()].on_copies_received(t.message, 1);
                        self.remove_copy(t.message, t.from);
                    }
                    ForwardAction::Skip => unreachable!("skip never starts a transfer"),
                }
            }
            Admission::Rejected => {
                self.log
                    .record(now, EventKind::Abort, t.message, Some(t.from), Some(t.to));
                if let ForwardAction::Replicate { copies } = t.action {
                    // The copies ride the transfer; a failed hand-over puts
                    // them back where they came from.
                    self.routers[t.from.index()].on_copies_returned(t.message, copies);
                }
            }
        }
    }

    fn remove_copy(&mut self, message: MessageId, node: NodeId) {
        let live = self.live.get_mut(&message).expect("live message");
        debug_assert!(live.holders[node.index()]);
        live.holders[node.index()] = false;
        live.holder_count -= 1;
        let removed = self.buffers[node.index()].remove(message);
        debug_assert!(removed);
        self.routers[node.index()].on_copy_removed(message);
    }

    /// Phase 4a: at every re-encounter epoch the standing radio contacts are
    /// replayed so routers can refresh their encounter state.
    fn refresh_contacts(&mut self, now: f64) {
        if self.next_epoch as f64 * self.config.router_params.aging_interval > now + TIME_EPS {
            return;
        }
        self.next_epoch = (now / self.config.router_params.aging_interval).floor() as u64 + 1;
        let n = self.config.node_count() as usize;
        for a in 0..n {
            let a_id = NodeId(a as u32);
            for &b_id in self.scenario.graph.neighbors(a_id) {
                if b_id.index() <= a {
                    continue;
                }
                let (left, right) = self.routers.split_at_mut(b_id.index());
                process_contact(
                    &mut left[a],
                    &mut right[0],
                    a_id,
                    b_id,
                    now,
                    &self.config.router_params,
                );
            }
        }
    }

    /// Phase 4b: every idle node may start one transfer, scanning peers in
    /// ascending id order and its buffer in arrival order.
    fn scan_for_transfers(&mut self, now: f64) {
        let n = self.config.node_count() as usize;
        for a in 0..n {
            if self.out_busy[a] || self.buffers[a].is_empty() {
                continue;
            }
            let a_id = NodeId(a as u32);
            let Some((b_id, message, action)) = self.find_transfer(a_id, now) else {
                continue;
            };
            self.out_busy[a] = true;
            self.in_busy[b_id.index()] = true;
            if let ForwardAction::Replicate { copies } = action {
                self.routers[a].on_spray_initiated(message, copies);
            }
            self.transfers.push(Transfer {
                message,
                from: a_id,
                to: b_id,
                bytes_remaining: self.config.message_size as f64,
                action,
            });
        }
    }

    fn find_transfer(&self, from: NodeId, now: f64) -> Option<(NodeId, MessageId, ForwardAction)> {
        for &to in self.scenario.graph.neighbors(from) {
            if self.in_busy[to.index()] {
                continue;
            }
            for entry in self.buffers[from.index()].residents() {
                let live = &self.live[&entry.message];
                let action = if live.msg.destination == to {
                    // Direct delivery needs no router approval. The copy
                    // moves: the sender drops its own copy once delivered.
                    ForwardAction::Handoff
                } else if live.holders[to.index()] {
                    continue;
                } else {
                    self.routers[from.index()].decide(
                        &self.routers[to.index()],
                        entry.message,
                        live.msg.destination,
                        now,
                        &self.config.router_params,
                    )
                };
                if action.is_actionable() {
                    return Some((to, entry.message, action));
                }
            }
        }
        None
    }
}

/// Read-only view of the simulation handed to per-tick observers, after all
/// phases of the tick have run.
pub struct TickView<'a> {
    sim: &'a Sim,
    now: f64,
}

impl TickView<'_> {
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Messages created and not yet expired, ascending by id.
    pub fn live_messages(&self) -> impl Iterator<Item = &Message> + '_ {
        self.sim.live.values().map(|l| &l.msg)
    }

    /// Nodes currently buffering a copy.
    pub fn holder_count(&self, message: MessageId) -> u32 {
        self.sim.live.get(&message).map_or(0, |l| l.holder_count)
    }

    pub fn holds(&self, node: NodeId, message: MessageId) -> bool {
        self.sim
            .live
            .get(&message)
            .is_some_and(|l| l.holders[node.index()])
    }

    /// Spray copies sitting in buffers for `message`.
    pub fn spray_copies_buffered(&self, message: MessageId) -> u64 {
        let Some(live) = self.sim.live.get(&message) else {
            return 0;
        };
        live.holders
            .iter()
            .enumerate()
            .filter(|(_, &h)| h)
            .map(|(idx, _)| self.sim.routers[idx].spray_copies(message) as u64)
            .sum()
    }

    /// Spray copies riding active transfers for `message`.
    pub fn spray_copies_in_flight(&self, message: MessageId) -> u64 {
        self.sim
            .transfers
            .iter()
            .filter(|t| t.message == message)
            .map(|t| match t.action {
                ForwardAction::Replicate { copies } => copies as u64,
                _ => 0,
            })
            .sum()
    }

    pub fn active_transfers(&self) -> &[Transfer] {
        &self.sim.transfers
    }

    pub fn buffer_used(&self, node: NodeId) -> u64 {
        self.sim.buffers[node.index()].used()
    }

    pub fn buffer_capacity(&self) -> u64 {
        self.sim.config.buffer_capacity
    }

    /// Everything logged so far.
    pub fn events(&self) -> &[crate::metrics::Event] {
        self.sim.log.events()
    }
}

/// Runs the configured scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<SimResult, InvalidConfig> {
    run_observed(config, |_| {})
}

/// Runs the scenario, calling `observer` at the end of every tick.
pub fn run_observed(
    config: &ScenarioConfig,
    mut observer: impl FnMut(&TickView),
) -> Result<SimResult, InvalidConfig> {
    config.validate()?;
    let mut sim = Sim::new(config);
    let ticks = (config.sim_duration / config.step_size).ceil() as u64;
    for _ in 0..ticks {
        let now = sim.clock.now();
        sim.generate_messages(now);
        sim.expire_ttl(now);
        sim.advance_transfers(now);
        sim.refresh_contacts(now);
        sim.scan_for_transfers(now);
        observer(&TickView { sim: &sim, now });
        sim.clock.advance();
    }
    Ok(SimResult {
        log: sim.log,
        ticks,
        warnings: sim.warnings,
    })
}
