//! Per-node routing state and forwarding decisions.
//!
//! All four protocols are replication based: a forwarding decision never
//! moves a copy directly, it produces a [`ForwardDirective`] that the engine
//! turns into a bandwidth-limited transfer. Direct delivery to the
//! destination is not decided here; the engine performs it unconditionally.

mod prophet;
mod spray;

pub use prophet::ProphetNode;
pub use spray::{focus_decision, spray_split, SprayNode};

use crate::metrics::MessageId;
use crate::scenario::{NodeId, RouterKind, RouterParams};

/// What a router wants the engine to do with one message towards one peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardAction {
    /// Hand the peer `copies` fresh copies; the sender keeps custody.
    Replicate { copies: u32 },
    /// Move the single copy to the peer; the sender deletes it on completion.
    Handoff,
    /// Leave the message where it is.
    Skip,
}

impl ForwardAction {
    pub fn is_actionable(self) -> bool {
        !matches!(self, ForwardAction::Skip)
    }
}

/// A forwarding decision bound to a concrete message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardDirective {
    pub message: MessageId,
    pub action: ForwardAction,
}

/// Contact-interval-scaled boost: a peer seen long ago yields the full
/// `p_enc_max`, a peer seen `dt < i_typ` ago only `p_enc_max * dt / i_typ`.
/// A never-encountered peer also yields the full boost.
pub fn encounter_probability(
    now: f64,
    last_encounter: Option<f64>,
    p_enc_max: f64,
    i_typ: f64,
) -> f64 {
    match last_encounter {
        None => p_enc_max,
        Some(last) => {
            debug_assert!(now >= last);
            let interval = now - last;
            if interval < i_typ {
                p_enc_max * (interval / i_typ)
            } else {
                p_enc_max
            }
        }
    }
}

/// Moves a predictability towards 1 by the given boost:
/// `p_old + (1 - p_old) * boost`.
pub fn update_direct_pred(p_old: f64, boost: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_old));
    debug_assert!((0.0..=1.0).contains(&boost));
    p_old + (1.0 - p_old) * boost
}

/// Decay multiplier for `intervals` whole aging intervals.
fn decay_factor(gamma: f64, intervals: u64) -> f64 {
    if gamma == 1.0 || intervals == 0 {
        1.0
    } else if intervals <= i32::MAX as u64 {
        gamma.powi(intervals as i32)
    } else {
        // gamma < 1 raised to > 2^31 underflows to zero long before here.
        0.0
    }
}

fn whole_intervals(elapsed: f64, aging_interval: f64) -> u64 {
    debug_assert!(aging_interval > 0.0);
    if elapsed <= 0.0 {
        0
    } else {
        let k = (elapsed / aging_interval).floor();
        if k >= u64::MAX as f64 {
            u64::MAX
        } else {
            k as u64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitiveMode {
    /// Accumulate: `p_old + (1 - p_old) * candidate`.
    Additive,
    /// Keep the larger of the old value and the candidate.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PredEntry {
    p: f64,
    aged_at: f64,
}

/// Delivery predictabilities of one node for every other node.
///
/// Stored densely and indexed by node id; a zero entry is "absent". Decay is
/// applied lazily: whole elapsed aging intervals are consumed whenever an
/// entry is read with [`get_aged`](Self::get_aged) or brought up to date by
/// [`age_to`](Self::age_to), leaving any fractional remainder pending.
#[derive(Debug, Clone, PartialEq)]
pub struct PredVector {
    entries: Vec<PredEntry>,
}

impl PredVector {
    pub fn new(node_count: usize) -> Self {
        PredVector {
            entries: vec![PredEntry { p: 0.0, aged_at: 0.0 }; node_count],
        }
    }

    /// Stored predictability, without applying pending decay.
    pub fn get(&self, node: NodeId) -> f64 {
        self.entries[node.index()].p
    }

    /// Predictability as of `now`, with pending decay applied on the fly.
    pub fn get_aged(&self, node: NodeId, now: f64, gamma: f64, aging_interval: f64) -> f64 {
        let e = self.entries[node.index()];
        if e.p == 0.0 {
            return 0.0;
        }
        e.p * decay_factor(gamma, whole_intervals(now - e.aged_at, aging_interval))
    }

    /// Applies decay to every entry: each is multiplied by
    /// `gamma^k` with `k` the whole aging intervals elapsed since the entry
    /// was last aged, and its aging mark advances by exactly `k` intervals.
    pub fn age_to(&mut self, now: f64, gamma: f64, aging_interval: f64) {
        for e in &mut self.entries {
            if e.p == 0.0 {
                continue;
            }
            debug_assert!(e.aged_at <= now);
            let k = whole_intervals(now - e.aged_at, aging_interval);
            if k > 0 {
                e.p *= decay_factor(gamma, k);
                e.aged_at += k as f64 * aging_interval;
            }
        }
    }

    fn age_entry(&mut self, node: NodeId, now: f64, gamma: f64, aging_interval: f64) {
        let e = &mut self.entries[node.index()];
        if e.p == 0.0 {
            // Creating the entry: decay starts counting from now.
            e.aged_at = now;
            return;
        }
        let k = whole_intervals(now - e.aged_at, aging_interval);
        if k > 0 {
            e.p *= decay_factor(gamma, k);
            e.aged_at += k as f64 * aging_interval;
        }
    }

    /// Direct-contact update for `peer`: ages the entry, then boosts it.
    pub fn apply_direct(
        &mut self,
        peer: NodeId,
        boost: f64,
        now: f64,
        gamma: f64,
        aging_interval: f64,
    ) {
        self.age_entry(peer, now, gamma, aging_interval);
        let e = &mut self.entries[peer.index()];
        e.p = update_direct_pred(e.p, boost);
    }

    /// Folds a peer's vector into this one through the contact probability
    /// `p_peer` and transitivity weight `beta`. The peer's entry for `skip`
    /// (the owner of this vector) is ignored.
    pub fn apply_transitive(
        &mut self,
        p_peer: f64,
        peer: &PredVector,
        beta: f64,
        mode: TransitiveMode,
        skip: NodeId,
        now: f64,
        gamma: f64,
        aging_interval: f64,
    ) {
        for (idx, peer_entry) in peer.entries.iter().enumerate() {
            if peer_entry.p == 0.0 || idx == skip.index() {
                continue;
            }
            let candidate = p_peer * peer_entry.p * beta;
            if candidate == 0.0 {
                continue;
            }
            let node = NodeId(idx as u32);
            self.age_entry(node, now, gamma, aging_interval);
            let e = &mut self.entries[idx];
            e.p = match mode {
                TransitiveMode::Additive => update_direct_pred(e.p, candidate),
                TransitiveMode::Max => e.p.max(candidate),
            };
        }
    }

    /// Non-zero entries as `(node, stored predictability)` pairs.
    pub fn entries(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.p > 0.0)
            .map(|(i, e)| (NodeId(i as u32), e.p))
    }
}

/// Last time each other node was seen, directly or by inheritance.
/// A missing entry means "never encountered".
#[derive(Debug, Clone, PartialEq)]
pub struct EncounterTable {
    last: Vec<f64>, // NaN = never
}

impl EncounterTable {
    pub fn new(node_count: usize) -> Self {
        EncounterTable {
            last: vec![f64::NAN; node_count],
        }
    }

    pub fn last(&self, node: NodeId) -> Option<f64> {
        let v = self.last[node.index()];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    pub fn record(&mut self, node: NodeId, now: f64) {
        debug_assert!(self.last(node).is_none_or(|t| t <= now));
        self.last[node.index()] = now;
    }

    /// Adopts the peer's fresher sightings, shifted back by `offset`
    /// seconds. The peer's entry for `skip` (this table's owner) is ignored.
    pub fn inherit(&mut self, peer: &EncounterTable, skip: NodeId, offset: f64) {
        for (idx, &peer_last) in peer.last.iter().enumerate() {
            if peer_last.is_nan() || idx == skip.index() {
                continue;
            }
            let candidate = peer_last - offset;
            let own = self.last[idx];
            if own.is_nan() || candidate > own {
                self.last[idx] = candidate;
            }
        }
    }
}

/// Routing state of one node. All nodes of a run use the same variant.
#[derive(Debug, Clone)]
pub enum NodeRouter {
    Prophet(ProphetNode),
    Spray(SprayNode),
}

impl NodeRouter {
    pub fn new(kind: RouterKind, node_count: usize) -> NodeRouter {
        match kind {
            RouterKind::Prophet => NodeRouter::Prophet(ProphetNode::new(false, node_count)),
            RouterKind::ProphetV2 => NodeRouter::Prophet(ProphetNode::new(true, node_count)),
            RouterKind::SprayWait => NodeRouter::Spray(SprayNode::new(false, node_count)),
            RouterKind::SprayFocus => NodeRouter::Spray(SprayNode::new(true, node_count)),
        }
    }

    /// Forwarding decision for one held message towards one peer. The peer
    /// is known not to be the destination and not to hold a copy.
    pub fn decide(
        &self,
        peer: &NodeRouter,
        message: MessageId,
        destination: NodeId,
        now: f64,
        params: &RouterParams,
    ) -> ForwardAction {
        match (self, peer) {
            (NodeRouter::Prophet(a), NodeRouter::Prophet(b)) => {
                prophet::prophet_forward_decision(&a.preds, &b.preds, destination, now, params)
            }
            (NodeRouter::Spray(a), NodeRouter::Spray(b)) => {
                a.decide(b, message, destination, now, params)
            }
            _ => unreachable!("router families never mix within a run"),
        }
    }

    /// Copies handed over by a completed incoming transfer.
    pub fn on_copies_received(&mut self, message: MessageId, copies: u32) {
        if let NodeRouter::Spray(s) = self {
            s.insert_copies(message, copies);
        }
    }

    /// Copies committed to an outgoing replicate transfer.
    pub fn on_spray_initiated(&mut self, message: MessageId, give: u32) {
        if let NodeRouter::Spray(s) = self {
            s.remove_copies(message, give);
        }
    }

    /// Copies returned by an aborted replicate transfer.
    pub fn on_copies_returned(&mut self, message: MessageId, copies: u32) {
        if let NodeRouter::Spray(s) = self {
            s.insert_copies(message, copies);
        }
    }

    /// The node no longer holds the message at all.
    pub fn on_copy_removed(&mut self, message: MessageId) {
        if let NodeRouter::Spray(s) = self {
            s.drop_message(message);
        }
    }

    pub fn spray_copies(&self, message: MessageId) -> u32 {
        match self {
            NodeRouter::Spray(s) => s.copies(message),
            NodeRouter::Prophet(_) => 0,
        }
    }

    pub fn as_prophet(&self) -> Option<&ProphetNode> {
        match self {
            NodeRouter::Prophet(p) => Some(p),
            _ => None,
        }
    }
}

/// Symmetric contact processing between two distinct nodes.
///
/// Both sides first bring their own state up to `now`, apply the
/// direct-contact update, record the encounter, and then exchange state
/// snapshots so the two transitive updates are order independent.
pub fn process_contact(
    a: &mut NodeRouter,
    b: &mut NodeRouter,
    a_id: NodeId,
    b_id: NodeId,
    now: f64,
    params: &RouterParams,
) {
    assert_ne!(a_id, b_id, "contact of a node with itself");
    match (a, b) {
        (NodeRouter::Prophet(a), NodeRouter::Prophet(b)) => {
            prophet::contact(a, b, a_id, b_id, now, params);
        }
        (NodeRouter::Spray(a), NodeRouter::Spray(b)) => {
            spray::contact(a, b, a_id, b_id, now, params);
        }
        _ => unreachable!("router families never mix within a run"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 0.9998;
    const INTERVAL: f64 = 50.0;

    #[test]
    fn never_encountered_peer_gets_full_boost() {
        assert_eq!(encounter_probability(1000.0, None, 0.5, 1800.0), 0.5);
    }

    #[test]
    fn recent_encounter_scales_the_boost() {
        let p = encounter_probability(1000.0, Some(100.0), 0.5, 1800.0);
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn old_encounter_saturates_at_the_max() {
        assert_eq!(encounter_probability(3700.0, Some(100.0), 0.5, 1800.0), 0.5);
    }

    #[test]
    fn direct_update_examples() {
        assert_eq!(update_direct_pred(0.0, 0.5), 0.5);
        assert_eq!(update_direct_pred(0.5, 0.5), 0.75);
        assert_eq!(update_direct_pred(1.0, 0.3), 1.0);
    }

    #[test]
    fn aging_with_no_elapsed_interval_is_identity() {
        let mut v = PredVector::new(3);
        v.apply_direct(NodeId(1), 0.8, 100.0, GAMMA, INTERVAL);
        let before = v.get(NodeId(1));
        v.age_to(100.0, GAMMA, INTERVAL);
        assert_eq!(v.get(NodeId(1)), before);
    }

    #[test]
    fn one_interval_multiplies_by_gamma() {
        let mut v = PredVector::new(2);
        v.apply_direct(NodeId(1), 1.0, 0.0, GAMMA, INTERVAL);
        v.age_to(INTERVAL, GAMMA, INTERVAL);
        assert_eq!(v.get(NodeId(1)), GAMMA);
    }

    #[test]
    fn fractional_intervals_are_left_pending() {
        let mut v = PredVector::new(2);
        v.apply_direct(NodeId(1), 1.0, 0.0, GAMMA, INTERVAL);
        // 1.5 intervals: one is consumed, the half is kept for later.
        v.age_to(75.0, GAMMA, INTERVAL);
        assert_eq!(v.get(NodeId(1)), GAMMA);
        // The remaining half plus another half completes the second interval.
        v.age_to(100.0, GAMMA, INTERVAL);
        assert_eq!(v.get(NodeId(1)), GAMMA * GAMMA);
    }

    #[test]
    fn transitive_max_keeps_larger_old_value() {
        let mut own = PredVector::new(4);
        own.apply_direct(NodeId(3), 0.3, 0.0, GAMMA, INTERVAL);
        let mut peer = PredVector::new(4);
        peer.apply_direct(NodeId(3), 0.4, 0.0, GAMMA, INTERVAL);
        own.apply_transitive(
            0.5,
            &peer,
            0.9,
            TransitiveMode::Max,
            NodeId(0),
            0.0,
            GAMMA,
            INTERVAL,
        );
        // candidate 0.5 * 0.4 * 0.9 = 0.18 < 0.3
        assert_eq!(own.get(NodeId(3)), 0.3);
    }

    #[test]
    fn transitive_max_adopts_larger_candidate() {
        let mut own = PredVector::new(4);
        own.apply_direct(NodeId(3), 0.1, 0.0, GAMMA, INTERVAL);
        let mut peer = PredVector::new(4);
        peer.apply_direct(NodeId(3), 0.4, 0.0, GAMMA, INTERVAL);
        own.apply_transitive(
            0.5,
            &peer,
            0.9,
            TransitiveMode::Max,
            NodeId(0),
            0.0,
            GAMMA,
            INTERVAL,
        );
        assert!((own.get(NodeId(3)) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn transitive_additive_accumulates() {
        let mut own = PredVector::new(4);
        own.apply_direct(NodeId(3), 0.3, 0.0, GAMMA, INTERVAL);
        let mut peer = PredVector::new(4);
        peer.apply_direct(NodeId(3), 0.4, 0.0, GAMMA, INTERVAL);
        own.apply_transitive(
            0.5,
            &peer,
            0.9,
            TransitiveMode::Additive,
            NodeId(0),
            0.0,
            GAMMA,
            INTERVAL,
        );
        // 0.3 + 0.7 * 0.18 = 0.426
        assert!((own.get(NodeId(3)) - 0.426).abs() < 1e-15);
    }

    #[test]
    fn transitive_skips_the_owner_entry() {
        let mut own = PredVector::new(3);
        let mut peer = PredVector::new(3);
        peer.apply_direct(NodeId(0), 0.9, 0.0, GAMMA, INTERVAL);
        own.apply_transitive(
            1.0,
            &peer,
            1.0,
            TransitiveMode::Max,
            NodeId(0),
            0.0,
            GAMMA,
            INTERVAL,
        );
        assert_eq!(own.get(NodeId(0)), 0.0);
    }

    #[test]
    fn encounter_table_records_and_inherits() {
        let mut a = EncounterTable::new(4);
        let mut b = EncounterTable::new(4);
        assert_eq!(a.last(NodeId(2)), None);
        b.record(NodeId(2), 80.0);
        a.record(NodeId(2), 50.0);
        a.inherit(&b, NodeId(0), 0.0);
        assert_eq!(a.last(NodeId(2)), Some(80.0));
        // Own fresher sighting wins.
        b.record(NodeId(3), 10.0);
        a.record(NodeId(3), 90.0);
        a.inherit(&b, NodeId(0), 0.0);
        assert_eq!(a.last(NodeId(3)), Some(90.0));
        // The peer's entry for this node itself is ignored.
        b.record(NodeId(0), 100.0);
        a.inherit(&b, NodeId(0), 0.0);
        assert_eq!(a.last(NodeId(0)), None);
    }

    #[test]
    fn inherit_applies_the_timer_offset() {
        let mut a = EncounterTable::new(3);
        let mut b = EncounterTable::new(3);
        b.record(NodeId(2), 100.0);
        a.inherit(&b, NodeId(0), 15.0);
        assert_eq!(a.last(NodeId(2)), Some(85.0));
    }

    #[test]
    #[should_panic(expected = "contact of a node with itself")]
    fn self_contact_is_rejected() {
        let params = RouterParams::default();
        let mut a = NodeRouter::new(RouterKind::ProphetV2, 3);
        let mut b = NodeRouter::new(RouterKind::ProphetV2, 3);
        process_contact(&mut a, &mut b, NodeId(1), NodeId(1), 0.0, &params);
    }
}
