//! Helpers shared by the integration-test targets: an independent restatement
//! of the unsafe-pair conditions, and an exhaustive minimum-cover search used
//! to audit the greedy placement.

#![allow(dead_code)] // each test target uses its own subset

use dishsim_core::topology::{MccMode, NetworkTopology, NodeKind, PeerGraph, Point};

/// Literal restatement of the unsafe-pair conditions in terms of degrees and
/// common neighbors, written independently of the library's control flow.
///
/// Always-awake regime: an adjacent pair is unsafe iff
///   (d_i >= 2 and d_j >= 2 and not (d_i = d_j = 2))
///   or (d_i = d_j = 2 and i,j have no common neighbor).
/// Sleeping regime: an adjacent pair is unsafe iff not (d_i = d_j = 1).
pub fn oracle_unsafe(adj: &[Vec<bool>], i: usize, j: usize, mode: MccMode) -> bool {
    let n = adj.len();
    if i == j || !adj[i][j] {
        return false;
    }
    let deg = |v: usize| adj[v].iter().filter(|&&e| e).count();
    let (di, dj) = (deg(i), deg(j));
    match mode {
        MccMode::PsmDeafTerminal => di >= 1 && dj >= 1 && !(di == 1 && dj == 1),
        MccMode::NoPsm => {
            let both_two = di == 2 && dj == 2;
            let branch_high = di >= 2 && dj >= 2 && !both_two;
            let common = (0..n).any(|k| k != i && k != j && adj[i][k] && adj[j][k]);
            let branch_two = both_two && !common;
            branch_high || branch_two
        }
    }
}

/// Decodes an edge bitmask (upper-triangle order) into a graph plus its
/// adjacency matrix.
pub fn graph_from_mask(n: usize, mask: u32) -> (PeerGraph, Vec<Vec<bool>>) {
    let mut adj = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    let mut bit = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            if mask >> bit & 1 == 1 {
                adj[u][v] = true;
                adj[v][u] = true;
                edges.push((u, v));
            }
            bit += 1;
        }
    }
    (PeerGraph::from_edges(n, &edges), adj)
}

/// Independent candidate-site generator: peer positions, pair midpoints, and
/// radius-r circle intersections around unsafe-pair endpoints.
pub fn independent_candidates(topo: &NetworkTopology, mode: MccMode) -> Vec<Point> {
    let r = topo.tx_range();
    let mut sites: Vec<Point> = topo
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::Peer)
        .map(|n| n.pos)
        .collect();
    let ups = topo.enumerate_ups(mode);
    let mut ends: Vec<Point> = Vec::new();
    for p in &ups {
        let a = topo.node(p.a).unwrap().pos;
        let b = topo.node(p.b).unwrap().pos;
        sites.push(Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0));
        ends.push(a);
        ends.push(b);
    }
    for i in 0..ends.len() {
        for j in (i + 1)..ends.len() {
            let (a, b) = (ends[i], ends[j]);
            let d = a.dist(&b);
            if d == 0.0 || d > 2.0 * r {
                continue;
            }
            let mid = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
            let half = (r * r - d * d / 4.0).max(0.0).sqrt();
            let (ux, uy) = ((b.y - a.y) / d, (a.x - b.x) / d);
            for s in [1.0f64, -1.0] {
                let p = Point::new(mid.x + s * half * ux, mid.y + s * half * uy);
                // Nudge inward so the constructed tangency survives rounding.
                sites.push(Point::new(p.x + (mid.x - p.x) * 1e-9, p.y + (mid.y - p.y) * 1e-9));
            }
        }
    }
    sites
}

/// Smallest number of candidate sites covering all unsafe pairs, by
/// exhaustive search over subset sizes. Returns `cap + 1` if no cover of size
/// `<= cap` exists.
pub fn exhaustive_minimum_cover(topo: &NetworkTopology, mode: MccMode, cap: usize) -> usize {
    let ups = topo.enumerate_ups(mode);
    if ups.is_empty() {
        return 0;
    }
    assert!(ups.len() <= 64, "oracle uses a single-word bitmask");
    let r_sq = topo.tx_range() * topo.tx_range();
    let full: u64 = if ups.len() == 64 { !0 } else { (1u64 << ups.len()) - 1 };
    let mut masks: Vec<u64> = Vec::new();
    for site in independent_candidates(topo, mode) {
        let mut m = 0u64;
        for (k, pair) in ups.iter().enumerate() {
            let a = topo.node(pair.a).unwrap().pos;
            let b = topo.node(pair.b).unwrap().pos;
            if site.dist_sq(&a) <= r_sq && site.dist_sq(&b) <= r_sq {
                m |= 1 << k;
            }
        }
        if m != 0 {
            masks.push(m);
        }
    }
    masks.sort_unstable();
    masks.dedup();
    // Drop masks dominated by a superset mask (keeps the search tiny).
    let snapshot = masks.clone();
    masks.retain(|&m| !snapshot.iter().any(|&o| o != m && o & m == m));

    fn search(masks: &[u64], acc: u64, full: u64, k: usize, start: usize) -> bool {
        if acc == full {
            return true;
        }
        if k == 0 {
            return false;
        }
        for i in start..masks.len() {
            if masks[i] & !acc != 0 && search(masks, acc | masks[i], full, k - 1, i + 1) {
                return true;
            }
        }
        false
    }
    for k in 1..=cap {
        if search(&masks, 0, full, k, 0) {
            return k;
        }
    }
    cap + 1
}
