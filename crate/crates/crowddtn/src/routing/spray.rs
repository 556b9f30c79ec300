//! Spray & Wait and Spray & Focus state machines.
//!
//! Both start from a fixed budget of `L` copies at the source and halve the
//! budget at every spray hand-over. Once a custodian is down to a single
//! copy, Spray & Wait only waits for a direct contact with the destination,
//! while Spray & Focus keeps moving the copy towards custodians that have
//! seen the destination more recently.

use std::collections::BTreeMap;

use super::{EncounterTable, ForwardAction};
use crate::metrics::MessageId;
use crate::scenario::{NodeId, RouterParams};

#[derive(Debug, Clone)]
pub struct SprayNode {
    pub focus: bool,
    copies: BTreeMap<MessageId, u32>,
    pub encounters: EncounterTable,
}

impl SprayNode {
    pub fn new(focus: bool, node_count: usize) -> Self {
        SprayNode {
            focus,
            copies: BTreeMap::new(),
            encounters: EncounterTable::new(node_count),
        }
    }

    pub fn copies(&self, message: MessageId) -> u32 {
        self.copies.get(&message).copied().unwrap_or(0)
    }

    pub(super) fn insert_copies(&mut self, message: MessageId, copies: u32) {
        debug_assert!(copies >= 1);
        *self.copies.entry(message).or_insert(0) += copies;
    }

    pub(super) fn remove_copies(&mut self, message: MessageId, copies: u32) {
        let held = self.copies.get_mut(&message).expect("copies for held message");
        debug_assert!(*held > copies, "spray must keep at least one copy");
        *held -= copies;
    }

    pub(super) fn drop_message(&mut self, message: MessageId) {
        self.copies.remove(&message);
    }

    pub(super) fn decide(
        &self,
        peer: &SprayNode,
        message: MessageId,
        destination: NodeId,
        now: f64,
        params: &RouterParams,
    ) -> ForwardAction {
        let held = self.copies(message);
        debug_assert!(held >= 1, "deciding on a message this node does not hold");
        if held >= 2 {
            let (_, give) = spray_split(held);
            ForwardAction::Replicate { copies: give }
        } else if self.focus {
            focus_decision(
                &self.encounters,
                &peer.encounters,
                destination,
                now,
                params.focus_threshold,
            )
        } else {
            // Wait phase: only direct delivery, which the engine handles.
            ForwardAction::Skip
        }
    }
}

/// Binary split of a spray budget: the relay receives the floor half, the
/// sender keeps the ceiling half. Only valid while spraying (`copies >= 2`).
pub fn spray_split(copies: u32) -> (u32, u32) {
    assert!(copies >= 2, "spray_split outside the spray phase");
    let give = copies / 2;
    let keep = copies - give;
    (keep, give)
}

/// Focus-phase hand-off rule. Utility is the time since a node last saw the
/// destination (lower is better, never-seen is infinitely bad); the copy
/// moves only when the peer improves on the holder by more than `threshold`
/// seconds.
pub fn focus_decision(
    own: &EncounterTable,
    peer: &EncounterTable,
    destination: NodeId,
    now: f64,
    threshold: f64,
) -> ForwardAction {
    let Some(peer_last) = peer.last(destination) else {
        return ForwardAction::Skip;
    };
    let peer_utility = now - peer_last;
    match own.last(destination) {
        None => ForwardAction::Handoff,
        Some(own_last) => {
            let own_utility = now - own_last;
            if peer_utility + threshold < own_utility {
                ForwardAction::Handoff
            } else {
                ForwardAction::Skip
            }
        }
    }
}

pub(super) fn contact(
    a: &mut SprayNode,
    b: &mut SprayNode,
    a_id: NodeId,
    b_id: NodeId,
    now: f64,
    params: &RouterParams,
) {
    debug_assert_eq!(a.focus, b.focus);
    if !a.focus {
        return;
    }
    a.encounters.record(b_id, now);
    b.encounters.record(a_id, now);
    let snapshot_a = a.encounters.clone();
    let snapshot_b = b.encounters.clone();
    a.encounters
        .inherit(&snapshot_b, a_id, params.focus_timer_offset);
    b.encounters
        .inherit(&snapshot_a, b_id, params.focus_timer_offset);
}
