//! The per-peer protocol state machine.
//!
//! Each peer keeps its weighted input and, per neighbor, the last weighted
//! vector sent and received on that edge. Two derived quantities drive
//! everything:
//!
//! * the *agreement* with neighbor j — `sent_j ⊕ recv_j`, the edge's shared
//!   view of the data exchanged across it;
//! * the *state* — `input ⊕ ⊕_j (recv_j ⊖ sent_j)`, the peer's share of the
//!   global input mass. Summed over all peers with flushed channels, the
//!   states reproduce the global input average exactly.
//!
//! A peer may stay silent when, for every neighbor, both the agreement and
//! the state-minus-agreement residue either carry no weight or fall in the
//! same convex region as the state's own value. When the check fails the
//! peer rebalances: it recomputes the outgoing ledger entries of the
//! violating neighbors so that every corrected agreement acquires the value
//! of the new state, distributing half of the state's weight surplus above
//! the `beta` floor among them. Outgoing rounds are rate-limited to one per
//! `ell` cycles and stamped with a per-peer sequence number so that stale
//! deliveries can be ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use thiserror::Error;

use crate::regions::{Classifier, RegionId};
use crate::wvector::{WeightedVector, EPS_WEIGHT};
use crate::PeerId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    /// The rebalancing target has (near-)zero weight, so no outgoing values
    /// can be computed. The round is aborted without touching the ledgers.
    #[error("correction is degenerate: the rebalancing target has no weight")]
    DegenerateCorrection,
}

/// The only wire unit: one weighted vector plus the sender's round number.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub payload: WeightedVector,
    pub seq: u64,
}

/// Addressed outgoing message.
pub type Outbound = (PeerId, Message);

/// How a peer distributes weight when correcting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionPolicy {
    /// Rewrite every neighbor's outgoing entry.
    Uniform,
    /// Rewrite only violating neighbors, growing the set until the check
    /// passes; falls back to the whole neighbor set in the worst case.
    Selective,
}

impl FromStr for CorrectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(CorrectionPolicy::Uniform),
            "selective" => Ok(CorrectionPolicy::Selective),
            other => Err(format!("unknown policy {other:?} (expected uniform|selective)")),
        }
    }
}

/// Common run parameters shared by every handler invocation.
#[derive(Debug, Clone, Copy)]
pub struct Params<'a, C: Classifier> {
    pub classifier: &'a C,
    pub beta: f64,
    /// Minimum number of cycles between outgoing rounds.
    pub ell: i64,
    pub policy: CorrectionPolicy,
}

/// Send/receive bookkeeping for one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLedger {
    last_sent: WeightedVector,
    last_recv: WeightedVector,
    last_seq_recv: u64,
}

impl NeighborLedger {
    fn new(dim: usize) -> Self {
        NeighborLedger {
            last_sent: WeightedVector::zero(dim),
            last_recv: WeightedVector::zero(dim),
            last_seq_recv: 0,
        }
    }

    pub fn last_sent(&self) -> &WeightedVector {
        &self.last_sent
    }

    pub fn last_recv(&self) -> &WeightedVector {
        &self.last_recv
    }

    pub fn last_seq_recv(&self) -> u64 {
        self.last_seq_recv
    }

    /// The edge's shared view: last sent ⊕ last received.
    pub fn agreement(&self) -> WeightedVector {
        self.last_sent.add(&self.last_recv)
    }
}

/// One peer: input, per-neighbor ledgers, sequence counter, and the
/// rate-limit clock.
#[derive(Debug, Clone)]
pub struct PeerState {
    id: PeerId,
    input: WeightedVector,
    ledgers: BTreeMap<PeerId, NeighborLedger>,
    seq: u64,
    last_send_time: i64,
    timer: Option<i64>,
    dim: usize,
}

impl PeerState {
    /// A fresh peer: unit-weight input, zeroed ledgers, and a send clock far
    /// enough in the past that the first round is never rate-limited.
    pub fn new<I>(id: PeerId, input_value: &[f64], neighbors: I, ell: i64) -> Self
    where
        I: IntoIterator<Item = PeerId>,
    {
        let dim = input_value.len();
        PeerState {
            id,
            input: WeightedVector::new(input_value, 1.0),
            ledgers: neighbors
                .into_iter()
                .map(|j| (j, NeighborLedger::new(dim)))
                .collect(),
            seq: 0,
            last_send_time: -ell,
            timer: None,
            dim,
        }
    }

    pub fn id(&self) -> PeerId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self) -> &WeightedVector {
        &self.input
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn timer(&self) -> Option<i64> {
        self.timer
    }

    pub fn last_send_time(&self) -> i64 {
        self.last_send_time
    }

    pub fn neighbor_ids(&self) -> impl Iterator<Item = PeerId> + '_ {
        self.ledgers.keys().copied()
    }

    pub fn neighbor_count(&self) -> usize {
        self.ledgers.len()
    }

    pub fn ledger(&self, j: PeerId) -> Option<&NeighborLedger> {
        self.ledgers.get(&j)
    }

    /// Overwrites one edge's ledger. Scenario and fixture construction only;
    /// the protocol itself never needs it.
    pub fn set_ledger(&mut self, j: PeerId, sent: WeightedVector, recv: WeightedVector) {
        let entry = self
            .ledgers
            .get_mut(&j)
            .unwrap_or_else(|| panic!("set_ledger: {j} is not a neighbor"));
        entry.last_sent = sent;
        entry.last_recv = recv;
    }

    /// The agreement with neighbor `j`. Panics if `j` is not a neighbor;
    /// that is a usage error.
    pub fn agreement(&self, j: PeerId) -> WeightedVector {
        self.ledgers
            .get(&j)
            .unwrap_or_else(|| panic!("agreement: {j} is not a neighbor"))
            .agreement()
    }

    /// The peer's state: `input ⊕ ⊕_j (recv_j ⊖ sent_j)`, evaluated in
    /// moment form so it is total even when individual terms cancel.
    pub fn state(&self) -> WeightedVector {
        self.state_with(None)
    }

    fn state_with(&self, staged: Option<&BTreeMap<PeerId, WeightedVector>>) -> WeightedVector {
        let mut moment = self.input.moment().to_vec();
        let mut weight = self.input.weight();
        for (&j, ledger) in &self.ledgers {
            let sent = staged
                .and_then(|s| s.get(&j))
                .unwrap_or(&ledger.last_sent);
            for (m, (r, s)) in moment
                .iter_mut()
                .zip(ledger.last_recv.moment().iter().zip(sent.moment()))
            {
                *m += r - s;
            }
            weight += ledger.last_recv.weight() - sent.weight();
        }
        WeightedVector::from_moment(moment, weight)
    }

    /// The peer's decision: the region of the state's value, or
    /// [`RegionId::Nil`] while the state carries no weight.
    pub fn output<C: Classifier>(&self, classifier: &C) -> RegionId {
        match self.state().value() {
            Ok(v) => classifier.classify(&v),
            Err(_) => RegionId::Nil,
        }
    }

    /// Evaluates the stopping rule and returns the set of violating
    /// neighbors. Empty means the peer may stay silent.
    ///
    /// For each neighbor both conditions must hold: the agreement, and the
    /// state-minus-agreement residue, are each either weightless or in the
    /// same region as the state's value. A weightless term imposes no
    /// constraint, and a residue whose weight cancels without its moment
    /// (an ill-conditioned difference) is treated the same way.
    pub fn check_stopping<C: Classifier>(&self, classifier: &C) -> BTreeSet<PeerId> {
        self.stopping_violators(classifier, None)
    }

    fn stopping_violators(
        &self,
        classifier: &dyn Classifier,
        staged: Option<&BTreeMap<PeerId, WeightedVector>>,
    ) -> BTreeSet<PeerId> {
        let mut violating = BTreeSet::new();
        let state = self.state_with(staged);
        if state.is_zero() {
            return violating; // a weightless state constrains nothing
        }
        let state_region = classifier.classify(&state.value().expect("nonzero weight"));
        for (&j, ledger) in &self.ledgers {
            let sent = staged
                .and_then(|s| s.get(&j))
                .unwrap_or(&ledger.last_sent);
            let agreement = sent.add(&ledger.last_recv);
            if !agreement.is_zero()
                && classifier.classify(&agreement.value().expect("nonzero weight")) != state_region
            {
                violating.insert(j);
                continue;
            }
            let residue = state.diff(&agreement);
            if residue.weight().abs() > EPS_WEIGHT
                && classifier.classify(&residue.value().expect("nonzero weight")) != state_region
            {
                violating.insert(j);
            }
        }
        violating
    }

    /// The rebalancing normalizer: `input ⊕ ⊕_k 2 ⊙ recv_k`.
    fn correction_normalizer(&self) -> WeightedVector {
        let mut moment = self.input.moment().to_vec();
        let mut weight = self.input.weight();
        for ledger in self.ledgers.values() {
            for (m, r) in moment.iter_mut().zip(ledger.last_recv.moment()) {
                *m += 2.0 * r;
            }
            weight += 2.0 * ledger.last_recv.weight();
        }
        WeightedVector::from_moment(moment, weight)
    }

    /// The agreement value that aligns edge `j` with the peer's post-round
    /// state, rescaled to `new_agreement_weight`: once every outgoing entry
    /// is rewritten this way, all agreements and the state share one value.
    pub fn perfect_target(
        &self,
        j: PeerId,
        new_agreement_weight: f64,
    ) -> Result<WeightedVector, ProtocolError> {
        assert!(
            self.ledgers.contains_key(&j),
            "perfect_target: {j} is not a neighbor"
        );
        debug_assert!(new_agreement_weight > 0.0);
        let normalizer = self.correction_normalizer();
        if normalizer.weight().abs() <= EPS_WEIGHT {
            return Err(ProtocolError::DegenerateCorrection);
        }
        Ok(normalizer.scale(new_agreement_weight / normalizer.weight()))
    }

    /// Rebalances toward every neighbor, handing each an equal share of half
    /// the state's weight surplus above `beta`. Afterwards the stopping
    /// check passes and the state weight is `(old + beta) / 2`.
    pub fn correct_uniform(&mut self, beta: f64) -> Result<Vec<Outbound>, ProtocolError> {
        let all: BTreeSet<PeerId> = self.ledgers.keys().copied().collect();
        self.correction_round(all, None, beta)
    }

    /// Rebalances toward the currently violating neighbors only, iteratively
    /// adding neighbors that the rewrite itself tips into violation; sends
    /// one message per member of the final set. With every neighbor
    /// violating this coincides with [`PeerState::correct_uniform`].
    pub fn correct_selective<C: Classifier>(
        &mut self,
        classifier: &C,
        beta: f64,
    ) -> Result<Vec<Outbound>, ProtocolError> {
        let violating = self.check_stopping(classifier);
        self.correction_round(violating, Some(classifier), beta)
    }

    /// One correction round over `initial`. The agreements and state weight
    /// entering the round are frozen: every iteration rewrites the outgoing
    /// entries of the current set from those constants, so re-running with a
    /// grown set overwrites (rather than compounds) the previous iteration.
    /// Nothing is committed until the set stops growing; a degenerate
    /// target aborts with the ledgers untouched.
    fn correction_round(
        &mut self,
        initial: BTreeSet<PeerId>,
        grow: Option<&dyn Classifier>,
        beta: f64,
    ) -> Result<Vec<Outbound>, ProtocolError> {
        if initial.is_empty() {
            return Ok(Vec::new());
        }
        let old_state = self.state();
        let old_weight = old_state.weight();
        let frozen: BTreeMap<PeerId, WeightedVector> = self
            .ledgers
            .iter()
            .map(|(&j, l)| (j, l.agreement()))
            .collect();
        let mut violating = initial;
        loop {
            let mut target = old_state.clone();
            for j in &violating {
                target.accumulate(&frozen[j]);
            }
            if target.weight().abs() <= EPS_WEIGHT {
                return Err(ProtocolError::DegenerateCorrection);
            }
            let share = (old_weight - beta) / (2.0 * violating.len() as f64);
            let mut staged: BTreeMap<PeerId, WeightedVector> = BTreeMap::new();
            for &j in &violating {
                let new_agreement = target.scale((share + frozen[&j].weight()) / target.weight());
                staged.insert(j, new_agreement.diff(&self.ledgers[&j].last_recv));
            }
            let grew = match grow {
                None => false,
                Some(classifier) => {
                    let now_violating = self.stopping_violators(classifier, Some(&staged));
                    let before = violating.len();
                    violating.extend(now_violating);
                    violating.len() > before
                }
            };
            if !grew {
                self.seq += 1;
                let seq = self.seq;
                let mut out = Vec::with_capacity(staged.len());
                for (j, sent) in staged {
                    self.ledgers.get_mut(&j).expect("violator is a neighbor").last_sent =
                        sent.clone();
                    out.push((j, Message { payload: sent, seq }));
                }
                return Ok(out);
            }
        }
    }

    /// Reacts to a change: rate-limit gate, stopping check, correction.
    fn react<C: Classifier>(&mut self, params: &Params<C>, now: i64) -> Vec<Outbound> {
        if now - self.last_send_time < params.ell {
            self.timer = Some(self.last_send_time + params.ell);
            return Vec::new();
        }
        self.timer = None;
        let violating = self.check_stopping(params.classifier);
        if violating.is_empty() {
            return Vec::new();
        }
        let result = match params.policy {
            CorrectionPolicy::Uniform => self.correct_uniform(params.beta),
            CorrectionPolicy::Selective => {
                self.correction_round(violating, Some(params.classifier), params.beta)
            }
        };
        match result {
            Ok(out) => {
                self.last_send_time = now;
                out
            }
            Err(ProtocolError::DegenerateCorrection) => {
                // retry after the cooldown; incoming traffic usually moves
                // the state off the degenerate point by then
                self.timer = Some(now + params.ell);
                Vec::new()
            }
        }
    }

    /// The initialization trigger. Fresh ledgers carry no weight, so every
    /// stopping condition is vacuously satisfied and no information would
    /// ever flow; the opening round therefore rebalances toward the whole
    /// neighbor set unconditionally, handing each neighbor a share of the
    /// peer's input. From then on the checks are informative.
    pub fn initial_round<C: Classifier>(&mut self, params: &Params<C>, now: i64) -> Vec<Outbound> {
        if self.ledgers.is_empty() {
            return Vec::new();
        }
        match self.correct_uniform(params.beta) {
            Ok(out) => {
                self.last_send_time = now;
                out
            }
            // unreachable in practice: the normalizer weight is the input's
            Err(ProtocolError::DegenerateCorrection) => Vec::new(),
        }
    }

    /// Delivery of one message. Late messages from removed neighbors and
    /// messages older than the newest accepted one are dropped silently.
    pub fn handle_message<C: Classifier>(
        &mut self,
        from: PeerId,
        msg: &Message,
        params: &Params<C>,
        now: i64,
    ) -> Vec<Outbound> {
        let Some(ledger) = self.ledgers.get_mut(&from) else {
            return Vec::new();
        };
        if msg.seq < ledger.last_seq_recv {
            return Vec::new();
        }
        debug_assert_eq!(msg.payload.dim(), self.dim);
        ledger.last_seq_recv = msg.seq;
        ledger.last_recv = msg.payload.clone();
        self.react(params, now)
    }

    /// Replaces the input (weight stays 1) and reacts.
    pub fn handle_input_change<C: Classifier>(
        &mut self,
        new_value: &[f64],
        params: &Params<C>,
        now: i64,
    ) -> Vec<Outbound> {
        debug_assert_eq!(new_value.len(), self.dim);
        self.input = WeightedVector::new(new_value, 1.0);
        self.react(params, now)
    }

    /// Fires the pending timer if it is due.
    pub fn handle_timer<C: Classifier>(&mut self, params: &Params<C>, now: i64) -> Vec<Outbound> {
        match self.timer {
            Some(due) if due <= now => {
                self.timer = None;
                self.react(params, now)
            }
            _ => Vec::new(),
        }
    }

    /// Applies neighbor-set changes: removed edges drop their ledgers (their
    /// entries leave the state immediately), added edges start zeroed.
    pub fn handle_neighbor_change<C: Classifier>(
        &mut self,
        added: &[PeerId],
        removed: &[PeerId],
        params: &Params<C>,
        now: i64,
    ) -> Vec<Outbound> {
        for j in removed {
            self.ledgers.remove(j);
        }
        for &j in added {
            self.ledgers
                .entry(j)
                .or_insert_with(|| NeighborLedger::new(self.dim));
        }
        self.react(params, now)
    }
}
