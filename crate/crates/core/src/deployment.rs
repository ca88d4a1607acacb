//! Altruist deployment planning: how many cooperative nodes a region needs and
//! where to put them.
//!
//! The quantitative backbone is the coverage law for random deployment. An
//! unsafe pair at distance `d` is covered exactly when some altruist lands in
//! the lens where the two endpoint disks of radius `r` overlap. Under a
//! Poisson point process of density `rho` the miss probability of a region of
//! area `A` is `exp(-rho * A)`, and the lens is smallest — `(2π/3 − √3/2)·r²`
//! — when the endpoints sit at full range `d = r`. Requiring the worst-case
//! pair to be covered with probability `p` and solving for the density gives
//! [`min_altruist_density`].
//!
//! For deliberate placement, [`greedy_set_cover_deploy`] covers an explicit
//! unsafe-pair list with a finite candidate-site set (minimum cover is
//! NP-hard; greedy is the classical `1 + ln n` approximation), and
//! [`grid_cover_count`] prices the blunt alternative of blanketing the whole
//! region with disks regardless of where the pairs actually are.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::topology::{MccMode, NetworkTopology, Point, UnsafePair};

/// Lens area shrink factor at the worst-case pair distance `d = r`, in units
/// of `r²`: `2π/3 − √3/2`.
pub const WORST_CASE_LENS_FACTOR: f64 =
    2.0 * std::f64::consts::FRAC_PI_3 - 0.866_025_403_784_438_6;

#[derive(Debug, Error, PartialEq)]
pub enum DeploymentError {
    #[error("coverage target must lie in [0, 1) (got {0})")]
    InvalidCoverageTarget(f64),
    #[error("range must be finite and positive (got {0})")]
    InvalidRange(f64),
    #[error("pair distance {d} is invalid for range {r} (need 0 <= d <= 2r)")]
    InvalidPairDistance { d: f64, r: f64 },
    #[error("density must be finite and non-negative (got {0})")]
    InvalidDensity(f64),
    #[error("area {w} x {h} is invalid")]
    InvalidArea { w: f64, h: f64 },
}

// ============================================================================
// Coverage law
// ============================================================================

/// Area of the intersection lens of two radius-`r` disks whose centers are
/// `d` apart: `2r²θ − r²·sin 2θ` with `θ = arccos(d / 2r)`.
pub fn lens_area(d: f64, r: f64) -> Result<f64, DeploymentError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(DeploymentError::InvalidRange(r));
    }
    if !(d.is_finite() && (0.0..=2.0 * r).contains(&d)) {
        return Err(DeploymentError::InvalidPairDistance { d, r });
    }
    let theta = (d / (2.0 * r)).acos();
    Ok(2.0 * r * r * theta - r * r * (2.0 * theta).sin())
}

/// Minimum altruist density (nodes per unit area) for random deployment to
/// cover any unsafe pair with probability at least `p_cov`:
/// `−ln(1 − p_cov) / ((2π/3 − √3/2)·r²)`.
pub fn min_altruist_density(p_cov: f64, r: f64) -> Result<f64, DeploymentError> {
    if !(p_cov.is_finite() && (0.0..1.0).contains(&p_cov)) {
        return Err(DeploymentError::InvalidCoverageTarget(p_cov));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(DeploymentError::InvalidRange(r));
    }
    Ok(-(1.0 - p_cov).ln() / (WORST_CASE_LENS_FACTOR * r * r))
}

/// Probability that a pair at distance `d` is covered by at least one point
/// of a Poisson process of density `rho`: `1 − exp(−rho·A(d, r))`.
pub fn pair_coverage_probability(rho: f64, d: f64, r: f64) -> Result<f64, DeploymentError> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(DeploymentError::InvalidDensity(rho));
    }
    Ok(1.0 - (-rho * lens_area(d, r)?).exp())
}

// ============================================================================
// Random deployment
// ============================================================================

/// Samples a Poisson point process of density `rho` on `[0, w] × [0, h]`:
/// a Poisson-distributed count with mean `rho·w·h`, positions i.i.d. uniform.
pub fn poisson_deploy<R: Rng>(
    w: f64,
    h: f64,
    rho: f64,
    rng: &mut R,
) -> Result<Vec<Point>, DeploymentError> {
    if !(w.is_finite() && h.is_finite() && w >= 0.0 && h >= 0.0) {
        return Err(DeploymentError::InvalidArea { w, h });
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(DeploymentError::InvalidDensity(rho));
    }
    let mean = rho * w * h;
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    Ok((0..count)
        .map(|_| Point::new(rng.random_range(0.0..=w), rng.random_range(0.0..=h)))
        .collect())
}

// ============================================================================
// Deliberate placement
// ============================================================================

/// How a placement plan was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMethod {
    Random,
    GreedySetCover,
    Grid,
}

impl PlacementMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PlacementMethod::Random => "random",
            PlacementMethod::GreedySetCover => "greedy_set_cover",
            PlacementMethod::Grid => "grid",
        }
    }
}

/// Candidate-site generation for the greedy cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateStrategy {
    /// Peer positions ∪ unsafe-pair midpoints ∪ pairwise intersections of the
    /// radius-`r` circles around unsafe-pair endpoints. Midpoints guarantee
    /// every pair is individually coverable; the circle intersections are the
    /// extreme sites where coverage sets change.
    Arrangement,
    /// Peer positions and pair midpoints only (cheaper, possibly worse).
    PeersAndMidpoints,
}

/// Altruist positions chosen for a topology, with the coverage they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPlan {
    pub method: PlacementMethod,
    pub altruists: Vec<Point>,
    pub covered: Vec<UnsafePair>,
    pub uncovered: Vec<UnsafePair>,
}

/// Evaluates an arbitrary altruist position set against a topology's unsafe
/// pairs, producing a plan record with exact covered/uncovered splits.
pub fn plan_from_positions(
    topo: &NetworkTopology,
    mode: MccMode,
    positions: Vec<Point>,
    method: PlacementMethod,
) -> PlacementPlan {
    let r_sq = topo.tx_range() * topo.tx_range();
    let mut covered = Vec::new();
    let mut uncovered = Vec::new();
    for pair in topo.enumerate_ups(mode) {
        let a = topo.node(pair.a).expect("endpoint exists").pos;
        let b = topo.node(pair.b).expect("endpoint exists").pos;
        if positions.iter().any(|p| p.dist_sq(&a) <= r_sq && p.dist_sq(&b) <= r_sq) {
            covered.push(pair);
        } else {
            uncovered.push(pair);
        }
    }
    PlacementPlan { method, altruists: positions, covered, uncovered }
}

fn dedup_key(p: &Point) -> (i64, i64) {
    ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)
}

/// Candidate sites for covering the given unsafe pairs.
fn candidate_sites(
    topo: &NetworkTopology,
    ups: &[UnsafePair],
    strategy: CandidateStrategy,
) -> Vec<Point> {
    let r = topo.tx_range();
    let mut sites: Vec<Point> = Vec::new();
    for n in topo.nodes() {
        if n.kind == crate::topology::NodeKind::Peer {
            sites.push(n.pos);
        }
    }
    let mut endpoints: Vec<Point> = Vec::new();
    for pair in ups {
        let a = topo.node(pair.a).expect("endpoint exists").pos;
        let b = topo.node(pair.b).expect("endpoint exists").pos;
        sites.push(Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0));
        endpoints.push(a);
        endpoints.push(b);
    }
    endpoints.sort_by(|p, q| (p.x, p.y).partial_cmp(&(q.x, q.y)).expect("finite"));
    endpoints.dedup_by_key(|p| dedup_key(p));

    if strategy == CandidateStrategy::Arrangement {
        for i in 0..endpoints.len() {
            for j in (i + 1)..endpoints.len() {
                let (c1, c2) = (endpoints[i], endpoints[j]);
                let d = c1.dist(&c2);
                if d == 0.0 || d > 2.0 * r {
                    continue;
                }
                let mid = Point::new((c1.x + c2.x) / 2.0, (c1.y + c2.y) / 2.0);
                let half = (r * r - d * d / 4.0).max(0.0).sqrt();
                // Unit perpendicular to the center line.
                let (ux, uy) = ((c2.y - c1.y) / d, -(c2.x - c1.x) / d);
                for sign in [1.0, -1.0] {
                    let p = Point::new(mid.x + sign * half * ux, mid.y + sign * half * uy);
                    // Pull the point a hair toward the chord midpoint so the
                    // distance-r coverage checks it was constructed to satisfy
                    // survive floating-point rounding.
                    let eps = 1e-9;
                    sites.push(Point::new(p.x + (mid.x - p.x) * eps, p.y + (mid.y - p.y) * eps));
                }
            }
        }
    }

    sites.sort_by(|p, q| (p.x, p.y).partial_cmp(&(q.x, q.y)).expect("finite"));
    sites.dedup_by_key(|p| dedup_key(p));
    sites
}

/// Greedy set-cover placement: repeatedly adds the candidate site covering the
/// most still-uncovered unsafe pairs (ties: lowest index in the sorted site
/// list) until everything reachable is covered. Deterministic.
pub fn greedy_set_cover_deploy(
    topo: &NetworkTopology,
    mode: MccMode,
    strategy: CandidateStrategy,
) -> PlacementPlan {
    let ups = topo.enumerate_ups(mode);
    if ups.is_empty() {
        return PlacementPlan {
            method: PlacementMethod::GreedySetCover,
            altruists: Vec::new(),
            covered: Vec::new(),
            uncovered: Vec::new(),
        };
    }
    let r_sq = topo.tx_range() * topo.tx_range();
    let ends: Vec<(Point, Point)> = ups
        .iter()
        .map(|p| {
            (
                topo.node(p.a).expect("endpoint exists").pos,
                topo.node(p.b).expect("endpoint exists").pos,
            )
        })
        .collect();

    let sites = candidate_sites(topo, &ups, strategy);
    let words = ups.len().div_ceil(64);
    // Coverage bitmask per candidate, over the unsafe-pair list.
    let masks: Vec<(Point, Vec<u64>)> = sites
        .into_iter()
        .filter_map(|site| {
            let mut mask = vec![0u64; words];
            let mut any = false;
            for (k, (a, b)) in ends.iter().enumerate() {
                if site.dist_sq(a) <= r_sq && site.dist_sq(b) <= r_sq {
                    mask[k / 64] |= 1 << (k % 64);
                    any = true;
                }
            }
            any.then_some((site, mask))
        })
        .collect();

    let mut uncovered = vec![0u64; words];
    for k in 0..ups.len() {
        uncovered[k / 64] |= 1 << (k % 64);
    }
    let mut remaining = ups.len() as u32;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let mut best: Option<(usize, u32)> = None;
        for (idx, (_, mask)) in masks.iter().enumerate() {
            let gain: u32 =
                mask.iter().zip(&uncovered).map(|(m, u)| (m & u).count_ones()).sum();
            if gain > 0 && best.map_or(true, |(_, g)| gain > g) {
                best = Some((idx, gain));
            }
        }
        let Some((idx, gain)) = best else { break };
        chosen.push(masks[idx].0);
        for (u, m) in uncovered.iter_mut().zip(&masks[idx].1) {
            *u &= !m;
        }
        remaining -= gain;
    }

    let mut covered = Vec::new();
    let mut uncovered_pairs = Vec::new();
    for (k, pair) in ups.iter().enumerate() {
        if uncovered[k / 64] >> (k % 64) & 1 == 1 {
            uncovered_pairs.push(*pair);
        } else {
            covered.push(*pair);
        }
    }
    PlacementPlan {
        method: PlacementMethod::GreedySetCover,
        altruists: chosen,
        covered,
        uncovered: uncovered_pairs,
    }
}

// ============================================================================
// Grid cover
// ============================================================================

/// Number of altruists needed to blanket a `w × h` region with radius-`r`
/// disks laid out on a square grid of cell side `√2·r` (each disk
/// circumscribes its cell): `⌈w/(√2·r)⌉ · ⌈h/(√2·r)⌉`.
pub fn grid_cover_count(w: f64, h: f64, r: f64) -> Result<u64, DeploymentError> {
    if !(r.is_finite() && r > 0.0) {
        return Err(DeploymentError::InvalidRange(r));
    }
    if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
        return Err(DeploymentError::InvalidArea { w, h });
    }
    let s = std::f64::consts::SQRT_2 * r;
    Ok((w / s).ceil() as u64 * (h / s).ceil() as u64)
}

/// Cell-center positions realizing the [`grid_cover_count`] layout.
pub fn grid_deploy(w: f64, h: f64, r: f64) -> Result<Vec<Point>, DeploymentError> {
    grid_cover_count(w, h, r)?; // validate
    let s = std::f64::consts::SQRT_2 * r;
    let (nx, ny) = ((w / s).ceil() as usize, (h / s).ceil() as usize);
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Point::new((i as f64 + 0.5) * s, (j as f64 + 0.5) * s));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::topology::{Node, NodeId, NodeKind};

    #[test]
    fn lens_area_anchors() {
        let r: f64 = 2.0;
        // Fully overlapping disks: the lens is the whole disk.
        let a0 = lens_area(0.0, r).unwrap();
        assert!((a0 - std::f64::consts::PI * r * r).abs() < 1e-12);
        // Full-range pair: the classic worst admissible case.
        let ar = lens_area(r, r).unwrap();
        assert!((ar - WORST_CASE_LENS_FACTOR * r * r).abs() < 1e-12);
        assert!((WORST_CASE_LENS_FACTOR - 1.228_369_698_608_757).abs() < 1e-12);
        // Tangent disks: empty lens.
        assert!(lens_area(2.0 * r, r).unwrap().abs() < 1e-9);
        assert_eq!(
            lens_area(4.1, r),
            Err(DeploymentError::InvalidPairDistance { d: 4.1, r: 2.0 })
        );
    }

    #[test]
    fn lens_area_strictly_decreasing() {
        let r = 1.0;
        let mut prev = lens_area(0.0, r).unwrap();
        for k in 1..=200 {
            let d = 2.0 * r * k as f64 / 200.0;
            let a = lens_area(d, r).unwrap();
            assert!(a < prev, "lens area must shrink with distance (d={d})");
            prev = a;
        }
    }

    /// Required density per coverage target, in units of r⁻²: the reference
    /// table for deployment sizing.
    #[test]
    fn density_table_anchors() {
        let cases = [
            (0.50, 0.56),
            (0.60, 0.75),
            (0.70, 0.98),
            (0.80, 1.31),
            (0.90, 1.87),
            (0.95, 2.44),
            (0.99, 3.75),
        ];
        for (p, expected) in cases {
            let rho = min_altruist_density(p, 1.0).unwrap();
            assert!(
                (rho - expected).abs() <= 0.01,
                "p_cov={p}: got {rho:.4}, expected {expected}"
            );
        }
        // Scale invariance: density carries the 1/r² factor.
        let rho250 = min_altruist_density(0.80, 250.0).unwrap();
        assert!((rho250 * 250.0 * 250.0 - 1.31).abs() <= 0.01);
    }

    #[test]
    fn density_rejects_bad_inputs() {
        assert!(matches!(
            min_altruist_density(1.0, 1.0),
            Err(DeploymentError::InvalidCoverageTarget(_))
        ));
        assert!(matches!(
            min_altruist_density(-0.1, 1.0),
            Err(DeploymentError::InvalidCoverageTarget(_))
        ));
        assert!(matches!(min_altruist_density(0.5, 0.0), Err(DeploymentError::InvalidRange(_))));
    }

    /// Density and coverage probability invert each other at the worst-case
    /// distance d = r.
    #[test]
    fn density_probability_roundtrip() {
        for r in [1.0, 77.0, 250.0] {
            for k in 0..=999 {
                let p = k as f64 / 1000.0;
                let rho = min_altruist_density(p, r).unwrap();
                let back = pair_coverage_probability(rho, r, r).unwrap();
                assert!((back - p).abs() <= 1e-9, "r={r} p={p}: got {back}");
            }
        }
    }

    #[test]
    fn poisson_deploy_is_seeded_and_calibrated() {
        let mut rng_a = rng::stream(7, &[rng::STREAM_ALTRUISTS]);
        let mut rng_b = rng::stream(7, &[rng::STREAM_ALTRUISTS]);
        let a = poisson_deploy(10.0, 10.0, 0.1, &mut rng_a).unwrap();
        let b = poisson_deploy(10.0, 10.0, 0.1, &mut rng_b).unwrap();
        assert_eq!(a, b, "same seed, same deployment");
        assert!(a.iter().all(|p| (0.0..=10.0).contains(&p.x) && (0.0..=10.0).contains(&p.y)));

        // Mean count over a fixed seed set ≈ rho·area = 10.
        let total: usize = (0..2000u64)
            .map(|s| {
                let mut r = rng::stream(s, &[rng::STREAM_ALTRUISTS]);
                poisson_deploy(10.0, 10.0, 0.1, &mut r).unwrap().len()
            })
            .sum();
        let mean = total as f64 / 2000.0;
        assert!((mean - 10.0).abs() < 0.25, "mean count {mean}");

        assert!(poisson_deploy(0.0, 10.0, 0.1, &mut rng_a).unwrap().is_empty());
        assert!(poisson_deploy(10.0, 10.0, 0.0, &mut rng_a).unwrap().is_empty());
    }

    fn peer(id: u32, x: f64, y: f64) -> Node {
        Node { id: NodeId(id), kind: NodeKind::Peer, pos: Point::new(x, y) }
    }

    /// Single-hop clique: one altruist suffices, and greedy finds that.
    #[test]
    fn greedy_single_hop_needs_one() {
        let nodes: Vec<Node> = (0..6)
            .map(|i| {
                let ang = i as f64 * std::f64::consts::TAU / 6.0;
                peer(i, 50.0 + 20.0 * ang.cos(), 50.0 + 20.0 * ang.sin())
            })
            .collect();
        let topo = NetworkTopology::build(nodes, 250.0, 500.0).unwrap();
        assert!(!topo.enumerate_ups(MccMode::PsmDeafTerminal).is_empty());
        let plan =
            greedy_set_cover_deploy(&topo, MccMode::PsmDeafTerminal, CandidateStrategy::Arrangement);
        assert_eq!(plan.altruists.len(), 1);
        assert!(plan.uncovered.is_empty());
    }

    /// A path of five peers has two unsafe pairs sharing peer 2; one altruist
    /// near peer 2 covers both.
    #[test]
    fn greedy_exploits_shared_endpoint() {
        let nodes: Vec<Node> = (0..5).map(|i| peer(i, i as f64, 0.0)).collect();
        let topo = NetworkTopology::build(nodes, 1.0, 2.0).unwrap();
        assert_eq!(topo.enumerate_ups(MccMode::NoPsm).len(), 2);
        let plan = greedy_set_cover_deploy(&topo, MccMode::NoPsm, CandidateStrategy::Arrangement);
        assert_eq!(plan.altruists.len(), 1, "one site covers both pairs");
        assert!(plan.uncovered.is_empty());
        // Deterministic: same inputs, same plan.
        let again = greedy_set_cover_deploy(&topo, MccMode::NoPsm, CandidateStrategy::Arrangement);
        assert_eq!(plan, again);
    }

    #[test]
    fn grid_cover_anchors() {
        assert_eq!(grid_cover_count(100.0, 100.0, 250.0).unwrap(), 1);
        assert_eq!(grid_cover_count(1500.0, 1500.0, 250.0).unwrap(), 25);
        let s = std::f64::consts::SQRT_2 * 250.0;
        assert_eq!(grid_cover_count(s, s, 250.0).unwrap(), 1, "exactly one cell");
        assert_eq!(grid_deploy(1500.0, 1500.0, 250.0).unwrap().len(), 25);
    }

    /// Blanketing the region is not the same thing as covering every unsafe
    /// pair: a pair straddling two grid cells can be missed even though every
    /// point of the region lies within r of some grid altruist.
    #[test]
    fn grid_region_cover_can_miss_pairs() {
        let r = 1.0;
        let s = std::f64::consts::SQRT_2; // cell side
        let (w, h) = (2.0 * s, s);
        // Unsafe pair straddling the cell boundary at x = s, near the top edge.
        let (iy, d) = (1.364, 1.0);
        let i = Point::new(s - 0.5 + 0.086, iy); // ≈ (0.914, 1.364)
        let j = Point::new(i.x + d, iy);
        let nodes = vec![
            peer(0, i.x, i.y),
            peer(1, j.x, j.y),
            // Pendant neighbors to give both endpoints degree 2 (unsafe, no
            // shared triangle).
            peer(2, i.x, iy - 0.994),
            peer(3, j.x, iy - 0.994),
        ];
        let topo = NetworkTopology::build(nodes, r, 2.0 * r).unwrap();
        let ups = topo.enumerate_ups(MccMode::NoPsm);
        assert!(ups.contains(&UnsafePair::new(NodeId(0), NodeId(1))));

        let grid = grid_deploy(w, h, r).unwrap();
        // Every point of the region is within r of some grid site...
        for gx in 0..=40 {
            for gy in 0..=20 {
                let p = Point::new(w * gx as f64 / 40.0, h * gy as f64 / 20.0);
                assert!(grid.iter().any(|g| g.dist(&p) <= r + 1e-12));
            }
        }
        // ...yet the straddling pair is not covered by any single site.
        let plan = plan_from_positions(&topo, MccMode::NoPsm, grid, PlacementMethod::Grid);
        assert!(
            plan.uncovered.contains(&UnsafePair::new(NodeId(0), NodeId(1))),
            "straddling pair must be uncovered: {plan:?}"
        );
    }
}
