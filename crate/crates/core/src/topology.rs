//! Deterministic topology generators and graph utilities.
//!
//! All generators produce simple, undirected, connected graphs over the peer
//! ids `0..n`, and the same parameters plus seed always reproduce the same
//! adjacency.

use std::collections::{BTreeSet, VecDeque};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::PeerId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("edge ({0}, {1}) is out of range or a self-loop")]
    BadEdge(usize, usize),
    #[error("malformed topology text: {0}")]
    Parse(String),
}

/// An undirected simple connected graph over dense peer ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adj: Vec<BTreeSet<PeerId>>,
}

impl Topology {
    /// Builds a topology from an edge list. Rejects self-loops and
    /// out-of-range endpoints; duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let mut adj = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u == v || u >= n || v >= n {
                return Err(TopologyError::BadEdge(u, v));
            }
            adj[u].insert(PeerId(v));
            adj[v].insert(PeerId(u));
        }
        Ok(Topology { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, id: PeerId) -> impl Iterator<Item = PeerId> + '_ {
        self.adj[id.0].iter().copied()
    }

    pub fn degree(&self, id: PeerId) -> usize {
        self.adj[id.0].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    /// All edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(PeerId, PeerId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, nbrs) in self.adj.iter().enumerate() {
            for &v in nbrs {
                if u < v.0 {
                    out.push((PeerId(u), v));
                }
            }
        }
        out
    }

    pub fn avg_degree(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / self.n() as f64
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([PeerId(0)]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if !seen[v.0] {
                    seen[v.0] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// BFS spanning tree rooted at `root`, as a parent map
    /// (`parent[root] = None`). Errors if the graph is disconnected.
    pub fn spanning_tree(&self, root: PeerId) -> Result<Vec<Option<PeerId>>, TopologyError> {
        let n = self.n();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[root.0] = true;
        let mut queue = VecDeque::from([root]);
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if !seen[v.0] {
                    seen[v.0] = true;
                    parent[v.0] = Some(u);
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        if count != n {
            return Err(TopologyError::Disconnected);
        }
        Ok(parent)
    }

    /// Serializes as an edge list: a `n=<count>` header, then one `u v` pair
    /// per line with `u < v`.
    pub fn dump(&self) -> String {
        let mut out = format!("n={}\n", self.n());
        for (u, v) in self.edges() {
            out.push_str(&format!("{} {}\n", u.0, v.0));
        }
        out
    }

    /// Parses the [`Topology::dump`] format.
    pub fn load(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| TopologyError::Parse("empty input".into()))?;
        let n: usize = header
            .trim()
            .strip_prefix("n=")
            .ok_or_else(|| TopologyError::Parse(format!("bad header: {header}")))?
            .parse()
            .map_err(|e| TopologyError::Parse(format!("bad header: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let (u, v) = match (it.next(), it.next(), it.next()) {
                (Some(u), Some(v), None) => (u, v),
                _ => return Err(TopologyError::Parse(format!("bad edge line: {line}"))),
            };
            let u: usize = u
                .parse()
                .map_err(|e| TopologyError::Parse(format!("bad endpoint: {e}")))?;
            let v: usize = v
                .parse()
                .map_err(|e| TopologyError::Parse(format!("bad endpoint: {e}")))?;
            edges.push((u, v));
        }
        Topology::from_edges(n, &edges)
    }
}

/// Barabási–Albert preferential attachment: a seed clique on `m + 1` nodes,
/// then each arriving node attaches `m` edges to distinct existing nodes
/// with probability proportional to their degree. Average degree ≈ `2m`.
pub fn gen_ba(n: usize, m: usize, seed: u64) -> Result<Topology, TopologyError> {
    if m < 1 || n <= m {
        return Err(TopologyError::InvalidParameters(format!(
            "gen_ba requires n > m >= 1, got n={n}, m={m}"
        )));
    }
    // Connected by construction; the retry loop guards the (zero-probability)
    // event that floating/sampling pathologies ever produce otherwise.
    for attempt in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut adj: Vec<BTreeSet<PeerId>> = vec![BTreeSet::new(); n];
        // one entry per edge endpoint; sampling from it is degree-proportional
        let mut endpoints: Vec<usize> = Vec::with_capacity(2 * (m * n));
        for u in 0..=m {
            for v in (u + 1)..=m {
                adj[u].insert(PeerId(v));
                adj[v].insert(PeerId(u));
                endpoints.push(u);
                endpoints.push(v);
            }
        }
        for u in (m + 1)..n {
            let mut targets = BTreeSet::new();
            while targets.len() < m {
                let t = endpoints[rng.gen_range(0..endpoints.len())];
                targets.insert(t); // collisions resampled
            }
            for t in targets {
                adj[u].insert(PeerId(t));
                adj[t].insert(PeerId(u));
                endpoints.push(u);
                endpoints.push(t);
            }
        }
        let topo = Topology { adj };
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(TopologyError::Disconnected)
}

/// Symmetric Chord: a ring over `0..n` with every node additionally linked
/// to `(i + 2^j) mod n` for `j = 0..⌊log2 n⌋-1`, all links bidirectional.
/// The layout is deterministic; `_seed` is accepted for generator-signature
/// uniformity.
pub fn gen_chord(n: usize, _seed: u64) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::InvalidParameters(format!(
            "gen_chord requires n >= 2, got n={n}"
        )));
    }
    let mut adj: Vec<BTreeSet<PeerId>> = vec![BTreeSet::new(); n];
    let levels = (n as f64).log2().floor() as u32;
    for i in 0..n {
        let next = (i + 1) % n;
        if next != i {
            adj[i].insert(PeerId(next));
            adj[next].insert(PeerId(i));
        }
        for j in 0..levels {
            let f = (i + (1usize << j)) % n;
            if f != i {
                adj[i].insert(PeerId(f));
                adj[f].insert(PeerId(i));
            }
        }
    }
    Ok(Topology { adj })
}

/// Non-wrapping two-dimensional lattice with 4-neighborhoods.
pub fn gen_grid(rows: usize, cols: usize) -> Result<Topology, TopologyError> {
    if rows * cols < 2 {
        return Err(TopologyError::InvalidParameters(format!(
            "gen_grid requires rows*cols >= 2, got {rows}x{cols}"
        )));
    }
    let n = rows * cols;
    let mut adj: Vec<BTreeSet<PeerId>> = vec![BTreeSet::new(); n];
    let at = |r: usize, c: usize| r * cols + c;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                adj[at(r, c)].insert(PeerId(at(r, c + 1)));
                adj[at(r, c + 1)].insert(PeerId(at(r, c)));
            }
            if r + 1 < rows {
                adj[at(r, c)].insert(PeerId(at(r + 1, c)));
                adj[at(r + 1, c)].insert(PeerId(at(r, c)));
            }
        }
    }
    Ok(Topology { adj })
}
