//! PRoPHET and PRoPHETv2 state machines.
//!
//! Both variants keep a delivery-predictability vector that is boosted on
//! contact, decays with age, and propagates transitively through peers. They
//! differ in two places: the direct boost (a fixed `p_init` for the classic
//! variant, the encounter-interval-scaled boost for v2) and the transitive
//! rule (additive for classic, max-based for v2, which suppresses the
//! inflation that repeated short reconnections cause).

use super::{
    encounter_probability, EncounterTable, ForwardAction, PredVector, TransitiveMode,
};
use crate::scenario::{NodeId, RouterParams};

#[derive(Debug, Clone)]
pub struct ProphetNode {
    pub v2: bool,
    pub preds: PredVector,
    pub encounters: EncounterTable,
}

impl ProphetNode {
    pub fn new(v2: bool, node_count: usize) -> Self {
        ProphetNode {
            v2,
            preds: PredVector::new(node_count),
            encounters: EncounterTable::new(node_count),
        }
    }
}

/// Replicate a single copy iff the peer's aged predictability for the
/// destination strictly exceeds our own. Ties do not forward.
pub fn prophet_forward_decision(
    self_preds: &PredVector,
    peer_preds: &PredVector,
    destination: NodeId,
    now: f64,
    params: &RouterParams,
) -> ForwardAction {
    let own = self_preds.get_aged(destination, now, params.gamma, params.aging_interval);
    let peer = peer_preds.get_aged(destination, now, params.gamma, params.aging_interval);
    if peer > own {
        ForwardAction::Replicate { copies: 1 }
    } else {
        ForwardAction::Skip
    }
}

pub(super) fn contact(
    a: &mut ProphetNode,
    b: &mut ProphetNode,
    a_id: NodeId,
    b_id: NodeId,
    now: f64,
    params: &RouterParams,
) {
    debug_assert_eq!(a.v2, b.v2);
    let gamma = params.gamma;
    let interval = params.aging_interval;

    a.preds.age_to(now, gamma, interval);
    b.preds.age_to(now, gamma, interval);

    let boost_a = direct_boost(a, b_id, now, params);
    let boost_b = direct_boost(b, a_id, now, params);
    a.preds.apply_direct(b_id, boost_a, now, gamma, interval);
    b.preds.apply_direct(a_id, boost_b, now, gamma, interval);

    a.encounters.record(b_id, now);
    b.encounters.record(a_id, now);

    // Exchange snapshots taken after the direct updates so that the two
    // transitive passes see the same state regardless of order.
    let snapshot_a = a.preds.clone();
    let snapshot_b = b.preds.clone();
    let mode = if a.v2 {
        TransitiveMode::Max
    } else {
        TransitiveMode::Additive
    };
    let p_ab = a.preds.get(b_id);
    let p_ba = b.preds.get(a_id);
    a.preds
        .apply_transitive(p_ab, &snapshot_b, params.beta, mode, a_id, now, gamma, interval);
    b.preds
        .apply_transitive(p_ba, &snapshot_a, params.beta, mode, b_id, now, gamma, interval);
}

fn direct_boost(node: &ProphetNode, peer: NodeId, now: f64, params: &RouterParams) -> f64 {
    if node.v2 {
        encounter_probability(
            now,
            node.encounters.last(peer),
            params.p_enc_max,
            params.i_typ,
        )
    } else {
        params.p_init
    }
}
