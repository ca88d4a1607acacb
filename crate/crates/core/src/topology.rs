//! Network topology: node placement, the peer adjacency graph, unsafe-pair
//! analysis, and cooperation coverage.
//!
//! Two adjacent peers form an *unsafe pair* (UP) when their local graph
//! structure permits a multi-channel coordination problem between them — a
//! sender picking an in-use data channel, or addressing a receiver that is
//! away on one. Which structures qualify depends on whether idle nodes stay
//! awake and overhear (`MccMode::NoPsm`) or sleep (`MccMode::PsmDeafTerminal`).
//! An unsafe pair is *covered* when some altruist stands within transmit range
//! of both endpoints and can veto a doomed handshake on their behalf.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

// ============================================================================
// Basic geometry and node types
// ============================================================================

/// A position in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Unique node identifier. Ids need not be contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Role of a node in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Regular traffic-carrying node.
    Peer,
    /// Dedicated cooperative node: no traffic of its own, always awake on the
    /// control channel.
    Altruist,
}

/// One placed node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub pos: Point,
}

/// Which idle-listening regime the unsafe-pair analysis assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MccMode {
    /// Idle peers stay awake and overhear: only channel conflicts threaten a
    /// pair, and only when both endpoints can be left under-informed.
    NoPsm,
    /// Idle peers sleep: a receiver busy on a data channel is deaf, so almost
    /// every adjacent pair is at risk.
    PsmDeafTerminal,
}

/// A canonically ordered unsafe pair of peer ids (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnsafePair {
    pub a: NodeId,
    pub b: NodeId,
}

impl UnsafePair {
    pub fn new(i: NodeId, j: NodeId) -> Self {
        if i <= j {
            UnsafePair { a: i, b: j }
        } else {
            UnsafePair { a: j, b: i }
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node {0} has a non-finite coordinate")]
    NonFiniteCoordinate(NodeId),
    #[error("transmit range must be finite and positive (got {0})")]
    InvalidTxRange(f64),
    #[error("interference range must be finite and at least the transmit range (got {0})")]
    InvalidInterferenceRange(f64),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a peer")]
    NotAPeer(NodeId),
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(NodeId, NodeId),
    #[error("topology file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

// ============================================================================
// Peer graph
// ============================================================================

/// Undirected adjacency over peers, addressed by dense peer index.
///
/// Unsafe-pair analysis is purely graph-theoretic, so it lives here; the
/// geometric layer above ([`NetworkTopology`]) produces one of these from
/// positions, and tests can construct arbitrary graphs directly.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerGraph {
    adj: Vec<Vec<usize>>,
}

impl PeerGraph {
    /// Builds a graph on `n` vertices from an edge list. Self-loops are
    /// rejected; duplicate edges are collapsed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> PeerGraph {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            assert!(u != v, "self-loop {u}");
            assert!(u < n && v < n, "edge ({u},{v}) out of range");
            if !adj[u].contains(&v) {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        PeerGraph { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn are_adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// True when `u` and `v` lie on a common three-cycle.
    pub fn have_common_neighbor(&self, u: usize, v: usize) -> bool {
        // Merge scan over the two sorted neighbor lists.
        let (mut a, mut b) = (self.adj[u].iter().peekable(), self.adj[v].iter().peekable());
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn is_connected(&self) -> bool {
        if self.adj.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adj.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.adj.len()
    }

    /// Unsafe-pair test for an adjacent vertex pair.
    ///
    /// No-PSM regime: both endpoints need a second neighbor before either side
    /// of a handshake can be left under-informed, and the degree-2/degree-2
    /// case is exempt exactly when the pair sits on a shared three-cycle
    /// (their only other neighbors watch both of them).
    ///
    /// PSM regime: any extra neighbor on either side can lure that endpoint
    /// away onto a data channel, so only an isolated edge is safe.
    pub fn is_unsafe_pair(&self, u: usize, v: usize, mode: MccMode) -> bool {
        debug_assert!(self.are_adjacent(u, v));
        let (du, dv) = (self.degree(u), self.degree(v));
        match mode {
            MccMode::NoPsm => {
                let both_two = du == 2 && dv == 2;
                if du >= 2 && dv >= 2 && !both_two {
                    true
                } else {
                    both_two && !self.have_common_neighbor(u, v)
                }
            }
            MccMode::PsmDeafTerminal => du >= 1 && dv >= 1 && !(du == 1 && dv == 1),
        }
    }

    /// All unsafe pairs, as canonically ordered index pairs (ascending).
    pub fn unsafe_pairs(&self, mode: MccMode) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.adj.len() {
            for &v in &self.adj[u] {
                if u < v && self.is_unsafe_pair(u, v, mode) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

// ============================================================================
// Geometric topology
// ============================================================================

/// Coverage tally for a topology's unsafe pairs.
///
/// `fraction()` is `None` when the topology has no unsafe pairs at all: that
/// situation needs no cooperation, but it is not the same claim as "every
/// pair that needed help has it", so callers must branch rather than read 1.0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    pub unsafe_pairs: usize,
    pub covered_pairs: usize,
}

impl CoverageStats {
    pub fn is_vacuous(&self) -> bool {
        self.unsafe_pairs == 0
    }

    pub fn fraction(&self) -> Option<f64> {
        if self.is_vacuous() {
            None
        } else {
            Some(self.covered_pairs as f64 / self.unsafe_pairs as f64)
        }
    }
}

/// A placed network: nodes, ranges, and the derived peer adjacency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    nodes: Vec<Node>,
    tx_range: f64,
    interference_range: f64,
    /// Node indices of peers, ascending by id; peer index `p` in the graph is
    /// `nodes[peers[p]]`.
    peers: Vec<usize>,
    graph: PeerGraph,
    index_of: HashMap<NodeId, usize>,
}

impl NetworkTopology {
    /// Validates the node set and builds the peer adjacency graph.
    ///
    /// Adjacency is the closed disk: peers at distance exactly `tx_range` are
    /// adjacent. Coincident nodes are allowed (distance 0).
    pub fn build(
        nodes: Vec<Node>,
        tx_range: f64,
        interference_range: f64,
    ) -> Result<NetworkTopology, TopologyError> {
        if !(tx_range.is_finite() && tx_range > 0.0) {
            return Err(TopologyError::InvalidTxRange(tx_range));
        }
        if !(interference_range.is_finite() && interference_range >= tx_range) {
            return Err(TopologyError::InvalidInterferenceRange(interference_range));
        }
        let mut index_of = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if !node.pos.is_finite() {
                return Err(TopologyError::NonFiniteCoordinate(node.id));
            }
            if index_of.insert(node.id, i).is_some() {
                return Err(TopologyError::DuplicateId(node.id));
            }
        }
        let mut peers: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].kind == NodeKind::Peer)
            .collect();
        peers.sort_by_key(|&i| nodes[i].id);

        let r_sq = tx_range * tx_range;
        let mut edges = Vec::new();
        for p in 0..peers.len() {
            for q in (p + 1)..peers.len() {
                if nodes[peers[p]].pos.dist_sq(&nodes[peers[q]].pos) <= r_sq {
                    edges.push((p, q));
                }
            }
        }
        let graph = PeerGraph::from_edges(peers.len(), &edges);
        Ok(NetworkTopology { nodes, tx_range, interference_range, peers, graph, index_of })
    }

    pub fn tx_range(&self) -> f64 {
        self.tx_range
    }

    pub fn interference_range(&self) -> f64 {
        self.interference_range
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TopologyError> {
        self.index_of
            .get(&id)
            .map(|&i| &self.nodes[i])
            .ok_or(TopologyError::UnknownNode(id))
    }

    /// The peer adjacency graph; peer index `p` corresponds to `peer_ids()[p]`.
    pub fn peer_graph(&self) -> &PeerGraph {
        &self.graph
    }

    pub fn peer_ids(&self) -> Vec<NodeId> {
        self.peers.iter().map(|&i| self.nodes[i].id).collect()
    }

    pub fn peer_count(&self) -> usize {
        self.peers.len()
    }

    pub fn altruists(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Altruist)
    }

    pub fn altruist_count(&self) -> usize {
        self.altruists().count()
    }

    fn peer_index(&self, id: NodeId) -> Result<usize, TopologyError> {
        let &i = self.index_of.get(&id).ok_or(TopologyError::UnknownNode(id))?;
        if self.nodes[i].kind != NodeKind::Peer {
            return Err(TopologyError::NotAPeer(id));
        }
        // Peers are sorted by id, so binary search over the id view works.
        self.peers
            .binary_search_by_key(&id, |&k| self.nodes[k].id)
            .map_err(|_| TopologyError::UnknownNode(id))
    }

    /// Unsafe-pair test for two adjacent peers (errors if they are not).
    pub fn is_unsafe_pair(
        &self,
        i: NodeId,
        j: NodeId,
        mode: MccMode,
    ) -> Result<bool, TopologyError> {
        let (u, v) = (self.peer_index(i)?, self.peer_index(j)?);
        if u == v || !self.graph.are_adjacent(u, v) {
            return Err(TopologyError::NotAdjacent(i, j));
        }
        Ok(self.graph.is_unsafe_pair(u, v, mode))
    }

    /// All unsafe pairs under `mode`, in canonical ascending-id order.
    pub fn enumerate_ups(&self, mode: MccMode) -> Vec<UnsafePair> {
        self.graph
            .unsafe_pairs(mode)
            .into_iter()
            .map(|(u, v)| UnsafePair::new(self.nodes[self.peers[u]].id, self.nodes[self.peers[v]].id))
            .collect()
    }

    /// True when some altruist stands within transmit range of both endpoints.
    pub fn covered(&self, pair: &UnsafePair) -> Result<bool, TopologyError> {
        let a = self.node(pair.a)?.pos;
        let b = self.node(pair.b)?.pos;
        Ok(self.position_covers_both(&a, &b))
    }

    fn position_covers_both(&self, a: &Point, b: &Point) -> bool {
        let r_sq = self.tx_range * self.tx_range;
        self.altruists()
            .any(|alt| alt.pos.dist_sq(a) <= r_sq && alt.pos.dist_sq(b) <= r_sq)
    }

    /// Counts covered unsafe pairs under `mode`.
    pub fn cooperation_coverage(&self, mode: MccMode) -> CoverageStats {
        let ups = self.enumerate_ups(mode);
        let covered = ups
            .iter()
            .filter(|p| self.covered(p).expect("pair endpoints exist"))
            .count();
        CoverageStats { unsafe_pairs: ups.len(), covered_pairs: covered }
    }

    /// Builds a peers-only topology from bare positions, with ids `0..n`.
    pub fn from_peer_points(
        points: &[Point],
        tx_range: f64,
        interference_range: f64,
    ) -> Result<NetworkTopology, TopologyError> {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(i, &pos)| Node { id: NodeId(i as u32), kind: NodeKind::Peer, pos })
            .collect();
        NetworkTopology::build(nodes, tx_range, interference_range)
    }

    /// A copy of this topology with altruists appended at the given
    /// positions; their ids continue after the current maximum.
    pub fn with_altruists(&self, positions: &[Point]) -> Result<NetworkTopology, TopologyError> {
        let mut nodes = self.nodes.clone();
        let mut next = nodes.iter().map(|n| n.id.0).max().map_or(0, |m| m + 1);
        for &pos in positions {
            nodes.push(Node { id: NodeId(next), kind: NodeKind::Altruist, pos });
            next += 1;
        }
        NetworkTopology::build(nodes, self.tx_range, self.interference_range)
    }
}

/// `n` points placed independently and uniformly over a `width x height`
/// rectangle.
pub fn uniform_layout<R: rand::Rng>(
    n: usize,
    width: f64,
    height: f64,
    rng: &mut R,
) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..=width), rng.random_range(0.0..=height)))
        .collect()
}

/// Peers-only topology with uniformly random placement, reproducible from the
/// master seed via the placement stream.
pub fn random_peers(
    n: usize,
    width: f64,
    height: f64,
    tx_range: f64,
    interference_range: f64,
    master_seed: u64,
) -> Result<NetworkTopology, TopologyError> {
    let mut rng = crate::rng::stream(master_seed, &[crate::rng::STREAM_PLACEMENT]);
    let points = uniform_layout(n, width, height, &mut rng);
    NetworkTopology::from_peer_points(&points, tx_range, interference_range)
}

// ============================================================================
// Topology file format
// ============================================================================

/// On-disk form of a scenario: ranges, area, and node records.
///
/// The format is line-oriented text. `#` starts a comment; the header lines
/// `tx_range`, `interference_range`, and `area` may appear in any order before
/// or between `node` records:
///
/// ```text
/// tx_range 250
/// interference_range 500
/// area 1500 1500
/// node 0 peer 12.5 700.25
/// node 1 altruist 300 415.75
/// ```
///
/// Coordinates are written with Rust's shortest-round-trip float formatting,
/// so emit → parse reproduces every value bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyFile {
    pub tx_range: f64,
    pub interference_range: f64,
    pub area_w: f64,
    pub area_h: f64,
    pub nodes: Vec<Node>,
}

impl TopologyFile {
    pub fn to_topology(&self) -> Result<NetworkTopology, TopologyError> {
        NetworkTopology::build(self.nodes.clone(), self.tx_range, self.interference_range)
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("tx_range {}\n", self.tx_range));
        out.push_str(&format!("interference_range {}\n", self.interference_range));
        out.push_str(&format!("area {} {}\n", self.area_w, self.area_h));
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKind::Peer => "peer",
                NodeKind::Altruist => "altruist",
            };
            out.push_str(&format!("node {} {} {} {}\n", n.id, kind, n.pos.x, n.pos.y));
        }
        out
    }

    pub fn parse(text: &str) -> Result<TopologyFile, TopologyError> {
        let mut tx_range = None;
        let mut interference_range = None;
        let mut area = None;
        let mut nodes = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let parse_f64 = |s: &str, what: &str| -> Result<f64, TopologyError> {
                s.parse::<f64>().map_err(|_| TopologyError::Parse {
                    line,
                    reason: format!("bad {what} value {s:?}"),
                })
            };
            match fields[0] {
                "tx_range" if fields.len() == 2 => {
                    tx_range = Some(parse_f64(fields[1], "tx_range")?);
                }
                "interference_range" if fields.len() == 2 => {
                    interference_range = Some(parse_f64(fields[1], "interference_range")?);
                }
                "area" if fields.len() == 3 => {
                    area = Some((parse_f64(fields[1], "area")?, parse_f64(fields[2], "area")?));
                }
                "node" if fields.len() == 5 => {
                    let id = fields[1].parse::<u32>().map_err(|_| TopologyError::Parse {
                        line,
                        reason: format!("bad node id {:?}", fields[1]),
                    })?;
                    let kind = match fields[2] {
                        "peer" => NodeKind::Peer,
                        "altruist" => NodeKind::Altruist,
                        other => {
                            return Err(TopologyError::Parse {
                                line,
                                reason: format!("unknown node kind {other:?}"),
                            })
                        }
                    };
                    let x = parse_f64(fields[3], "coordinate")?;
                    let y = parse_f64(fields[4], "coordinate")?;
                    nodes.push(Node { id: NodeId(id), kind, pos: Point::new(x, y) });
                }
                other => {
                    return Err(TopologyError::Parse {
                        line,
                        reason: format!("unrecognized record {other:?}"),
                    })
                }
            }
        }
        let missing = |what: &str| TopologyError::Parse { line: 0, reason: format!("missing {what} header") };
        let (area_w, area_h) = area.ok_or_else(|| missing("area"))?;
        Ok(TopologyFile {
            tx_range: tx_range.ok_or_else(|| missing("tx_range"))?,
            interference_range: interference_range.ok_or_else(|| missing("interference_range"))?,
            area_w,
            area_h,
            nodes,
        })
    }
}
