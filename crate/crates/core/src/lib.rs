//! Local source selection (LSS) over general network graphs.
//!
//! Peers hold weighted input vectors and must all decide which of `k`
//! candidate source vectors is nearest to the global input average, talking
//! only to their immediate neighbors. The protocol works on arbitrary
//! connected graphs (cycles included): each peer keeps per-edge send/receive
//! ledgers, checks a local stopping rule against the convex decision cell of
//! its own state vector, and when the rule fails rebalances its outgoing
//! ledgers so every local agreement aligns with its state.
//!
//! The crate is organized as:
//!
//! * [`wvector`] — exact arithmetic for ⟨vector, weight⟩ pairs in moment form.
//! * [`regions`] — convex region classifiers; nearest-source (Voronoi) cells.
//! * [`protocol`] — the per-peer state machine: ledgers, stopping checks, and
//!   balance-correction policies.
//! * [`topology`] — deterministic Barabási–Albert, symmetric Chord, and grid
//!   generators plus graph utilities.
//! * [`simulator`] — a deterministic cycle-driven engine with message loss,
//!   input churn, and peer departures.
//! * [`harness`] — data generation, run metrics, parameter sweeps, and CSV
//!   output backing the `lss` command-line tool.

pub mod harness;
pub mod protocol;
pub mod regions;
pub mod simulator;
pub mod topology;
pub mod wvector;

pub use protocol::{CorrectionPolicy, Message, PeerState};
pub use regions::{Classifier, RegionId, SourceSet};
pub use topology::Topology;
pub use wvector::WeightedVector;

use std::fmt;

/// Identifier of a peer. Topology builders assign dense indices `0..n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PeerId(pub usize);

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for PeerId {
    fn from(i: usize) -> Self {
        PeerId(i)
    }
}
