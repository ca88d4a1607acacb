//! Acceptance gates for the whole crate: closed-form planning math, geometry
//! Monte-Carlo, analysis oracles, placement quality, cross-variant simulation
//! trends, energy accounting, determinism, and variant-reduction equivalence.
//!
//! Each gate prints one `ACCEPTANCE NN PASS|FAIL` line directly to the
//! process stdout (bypassing test-harness capture, so the checklist shows up
//! in plain `cargo test` output too), then enforces the verdict.

use std::io::Write as _;
use std::sync::OnceLock;

use dishsim_core::deployment::{
    greedy_set_cover_deploy, lens_area, min_altruist_density, poisson_deploy, CandidateStrategy,
};
use dishsim_core::engine::{run, run_replications, FlowSpec, ScenarioConfig, TrafficModel};
use dishsim_core::metrics::{bmp, network_capacity_bps, summarize, BmpInputs};
use dishsim_core::protocol::ProtocolVariant;
use dishsim_core::rng::{derive_seed, stream, STREAM_ALTRUISTS, STREAM_CAMPAIGN};
use dishsim_core::topology::{
    random_peers, uniform_layout, MccMode, NetworkTopology, NodeId, Point,
};
use rand::Rng;

mod common;
use common::{exhaustive_minimum_cover, graph_from_mask, oracle_unsafe};

/// Prints the per-gate verdict line, then enforces it.
fn gate(n: u8, label: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("ACCEPTANCE {n:02} {verdict} — {label}: {detail}\n");
    // One atomic write to the real stdout: the harness only captures the
    // print macros, so the checklist survives without --nocapture.
    std::io::stdout().lock().write_all(line.as_bytes()).expect("stdout");
    assert!(pass, "ACCEPTANCE {n:02} FAIL — {label}: {detail}");
}

// ---------------------------------------------------------------------------
// 01 — closed-form density table
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_altruist_density_table() {
    let r = 250.0;
    let table = [
        (0.50, 0.56),
        (0.60, 0.75),
        (0.70, 0.98),
        (0.80, 1.31),
        (0.90, 1.87),
        (0.95, 2.44),
        (0.99, 3.75),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (p_cov, want) in table {
        let rho_r2 = min_altruist_density(p_cov, r).unwrap() * r * r;
        pass &= (rho_r2 - want).abs() <= 0.01;
        detail.push_str(&format!("p={p_cov}: {rho_r2:.3} (want {want}); "));
    }
    gate(1, "minimum altruist density per r^2", pass, detail);
}

// ---------------------------------------------------------------------------
// 02 — random-deployment coverage Monte-Carlo
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_random_deployment_coverage_monte_carlo() {
    let r = 250.0;
    let side = 20.0 * r;
    let rho = 1.31 / (r * r);
    let margin = 1.5 * r; // keeps every pair's coverage lens fully interior
    let bins = [0.25 * r, 0.5 * r, 0.75 * r, r];
    let realizations = 100usize;
    let pairs_per_bin = 100usize; // per realization; 10,000 per bin overall

    let mut covered = [0u64; 4];
    for real in 0..realizations {
        let mut dep_rng = stream(90_210, &[2, real as u64]);
        let alts = poisson_deploy(side, side, rho, &mut dep_rng).unwrap();
        let mut pair_rng = stream(90_210, &[3, real as u64]);
        for (bi, &d) in bins.iter().enumerate() {
            for _ in 0..pairs_per_bin {
                let mx = pair_rng.random_range(margin..side - margin);
                let my = pair_rng.random_range(margin..side - margin);
                let th = pair_rng.random_range(0.0..std::f64::consts::TAU);
                let (dx, dy) = (0.5 * d * th.cos(), 0.5 * d * th.sin());
                let a = Point::new(mx + dx, my + dy);
                let b = Point::new(mx - dx, my - dy);
                let hit = alts
                    .iter()
                    .any(|p| p.dist_sq(&a) <= r * r && p.dist_sq(&b) <= r * r);
                if hit {
                    covered[bi] += 1;
                }
            }
        }
    }

    let n = (realizations * pairs_per_bin) as f64;
    let mut pass = true;
    let mut detail = String::new();
    let mut last_phat = 0.0;
    for (bi, &d) in bins.iter().enumerate() {
        let expect = 1.0 - (-rho * lens_area(d, r).unwrap()).exp();
        let phat = covered[bi] as f64 / n;
        let se = (expect * (1.0 - expect) / n).sqrt();
        let z = (phat - expect).abs() / se;
        pass &= z <= 3.0;
        detail.push_str(&format!("d={:.2}r: {phat:.4} vs {expect:.4} (z={z:.2}); ", d / r));
        last_phat = phat;
    }
    // The worst-case separation bin must land on the design point.
    pass &= (last_phat - 0.80).abs() <= 0.02;
    detail.push_str(&format!("d=r bin {last_phat:.4} within 0.80±0.02"));
    gate(2, "poisson deployment coverage vs closed form", pass, detail);
}

// ---------------------------------------------------------------------------
// 03 — unsafe-pair classifier vs clause oracle on all connected small graphs
// ---------------------------------------------------------------------------

#[test]
fn acceptance_03_unsafe_pair_oracle_on_connected_graphs() {
    // Connected labeled graph counts per vertex count, as an independent
    // check that the connectivity filter enumerates the right universe.
    let expected_counts = [0u64, 0, 1, 4, 38, 728, 26704];
    let mut counts = [0u64; 7];
    let mut compared = 0u64;
    let mut agree = 0u64;
    for n in 2..=6usize {
        let pair_bits = (n * (n - 1) / 2) as u32;
        for mask in 0..(1u32 << pair_bits) {
            let (graph, adj) = graph_from_mask(n, mask);
            if !graph.is_connected() {
                continue;
            }
            counts[n] += 1;
            for i in 0..n {
                for j in (i + 1)..n {
                    if !adj[i][j] {
                        continue;
                    }
                    for mode in [MccMode::NoPsm, MccMode::PsmDeafTerminal] {
                        compared += 1;
                        if graph.is_unsafe_pair(i, j, mode) == oracle_unsafe(&adj, i, j, mode) {
                            agree += 1;
                        }
                    }
                }
            }
        }
    }
    let pass = counts == expected_counts && agree == compared && compared > 0;
    gate(
        3,
        "classifier agrees with clause oracle on every connected graph ≤ 6 vertices",
        pass,
        format!("{agree}/{compared} verdicts agree across {} graphs, both regimes", counts.iter().sum::<u64>()),
    );
}

// ---------------------------------------------------------------------------
// 04 — greedy placement vs exhaustive optimum
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_greedy_placement_near_optimal() {
    let mode = MccMode::PsmDeafTerminal;
    let mut pass = true;
    let mut audited_pairs = 0usize;
    let mut worst = (0.0f64, 0usize, 0usize, 0u64); // (ratio/bound, greedy, opt, seed)
    for seed in 0..50u64 {
        let mut rng = stream(seed, &[404]);
        let pts = uniform_layout(8, 700.0, 700.0, &mut rng);
        let topo = NetworkTopology::from_peer_points(&pts, 250.0, 500.0).unwrap();
        let ups = topo.enumerate_ups(mode);
        let plan = greedy_set_cover_deploy(&topo, mode, CandidateStrategy::Arrangement);

        // Validity: every pair the plan claims covered must audit clean
        // against the geometry, via the topology's own coverage predicate.
        pass &= plan.uncovered.is_empty();
        pass &= plan.covered.len() == ups.len();
        if !plan.altruists.is_empty() {
            let audited = topo.with_altruists(&plan.altruists).unwrap();
            for pair in &plan.covered {
                pass &= audited.covered(pair).unwrap();
                audited_pairs += 1;
            }
        }

        // Quality: within the classical logarithmic factor of the optimum.
        if ups.is_empty() {
            pass &= plan.altruists.is_empty();
            continue;
        }
        let greedy = plan.altruists.len();
        let opt = exhaustive_minimum_cover(&topo, mode, greedy);
        pass &= opt <= greedy;
        let bound = (1.0 + (ups.len() as f64).ln()) * opt as f64;
        pass &= greedy as f64 <= bound + 1e-9;
        let tightness = greedy as f64 / bound;
        if tightness > worst.0 {
            worst = (tightness, greedy, opt, seed);
        }
    }
    gate(
        4,
        "greedy cover within (1+ln N) of exhaustive optimum on 50 layouts",
        pass,
        format!(
            "{audited_pairs} covered pairs audited; tightest case seed {}: greedy {} vs opt {} ({:.0}% of bound)",
            worst.3, worst.1, worst.2, worst.0 * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------
// 05/06 — multi-hop cross-variant campaign (shared)
// ---------------------------------------------------------------------------

const CAMPAIGN_VARIANTS: [ProtocolVariant; 5] = [
    ProtocolVariant::NonDishPsm,
    ProtocolVariant::NonDish,
    ProtocolVariant::DishP,
    ProtocolVariant::GenieInSitu,
    ProtocolVariant::Altruistic,
];

struct CampaignStats {
    /// Mean end-to-end throughput per variant, bps.
    tput_mean: [f64; 5],
    /// Mean whole-deployment power draw per variant, W (all radios summed).
    power_mean: [f64; 5],
}

/// One shared five-variant, five-replication campaign at the frozen
/// operating point: 360 peers (density 10/r^2) in 1500 m x 1500 m, altruists
/// at 1.31/r^2, one flow per peer at 3 packets/s, three data channels, 5 s.
fn campaign() -> &'static CampaignStats {
    static STATS: OnceLock<CampaignStats> = OnceLock::new();
    STATS.get_or_init(|| {
        let (base_seed, n_peers, area, rate, reps) = (42u64, 360usize, 1500.0f64, 3.0, 5usize);
        let r = 250.0;
        let rho_alt = 1.31 / (r * r);
        let mut tput = vec![Vec::new(); 5];
        let mut power = vec![Vec::new(); 5];
        for rep in 0..reps {
            let seed = derive_seed(base_seed, &[STREAM_CAMPAIGN, rep as u64]);
            let peers = random_peers(n_peers, area, area, r, 2.0 * r, seed).unwrap();
            let alts: Vec<Point> = {
                let mut rng = stream(seed, &[STREAM_ALTRUISTS]);
                poisson_deploy(area, area, rho_alt, &mut rng).unwrap()
            };
            for (vi, &variant) in CAMPAIGN_VARIANTS.iter().enumerate() {
                let topo = if variant == ProtocolVariant::Altruistic {
                    peers.with_altruists(&alts).unwrap()
                } else {
                    peers.clone()
                };
                let mut cfg = ScenarioConfig::new(topo, variant);
                cfg.n_data_channels = 3;
                cfg.flows = FlowSpec::Random { n: n_peers };
                cfg.traffic = TrafficModel::Poisson { pkts_per_sec: rate };
                cfg.duration_us = 5_000_000;
                cfg.master_seed = seed;
                let res = run(&cfg).unwrap();
                tput[vi].push(res.throughput_bps);
                // Whole-deployment draw: every radio, peers and altruists.
                let mut all = res.peer_energy;
                all.merge(&res.altruist_energy);
                power[vi].push(all.energy_joules(&cfg.power) / (res.duration_us as f64 / 1e6));
            }
        }
        let mut stats =
            CampaignStats { tput_mean: [0.0; 5], power_mean: [0.0; 5] };
        for vi in 0..5 {
            stats.tput_mean[vi] = summarize(&tput[vi]).mean;
            stats.power_mean[vi] = summarize(&power[vi]).mean;
        }
        stats
    })
}

#[test]
fn acceptance_05_throughput_ordering_across_variants() {
    let s = campaign();
    let [psm, nd, dish, genie, alt] = s.tput_mean;
    let cooperative_min = dish.min(genie).min(alt);
    let ordered = psm < nd && nd < cooperative_min;
    let gaps = nd >= 1.3 * psm && dish >= 1.3 * nd && genie >= 1.3 * nd && alt >= 1.3 * nd;
    gate(
        5,
        "mean throughput ordering and ≥30% gaps over 5 replications",
        ordered && gaps,
        format!(
            "kbps: psm {:.0}, nd {:.0}, dish {:.0}, genie {:.0}, alt {:.0}; ratios nd/psm {:.2}, dish/nd {:.2}, genie/nd {:.2}, alt/nd {:.2}",
            psm / 1e3, nd / 1e3, dish / 1e3, genie / 1e3, alt / 1e3,
            nd / psm, dish / nd, genie / nd, alt / nd
        ),
    );
}

#[test]
fn acceptance_06_power_savings_of_sleeping_variants() {
    let s = campaign();
    let (dish, genie, alt) = (s.power_mean[2], s.power_mean[3], s.power_mean[4]);
    let pass = alt <= 0.7 * dish && genie <= 0.7 * dish;
    gate(
        6,
        "altruist-assisted and idealized sleeping each cut ≥30% of fleet power",
        pass,
        format!(
            "aggregate W: dish {dish:.1}, genie {genie:.1} ({:.2}x), alt {alt:.1} ({:.2}x)",
            genie / dish,
            alt / dish
        ),
    );
}

// ---------------------------------------------------------------------------
// 07 — saturation bound and attainment
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_saturation_bound_and_attainment() {
    let r = 250.0;
    let mut pass = true;
    let mut detail = String::new();
    for (n_peers, n_flows) in [(6usize, 3usize), (8, 4), (10, 5)] {
        // Compact single-hop cluster, one central altruist, disjoint
        // saturated flows, five data channels plus the control channel.
        let pts: Vec<Point> = (0..n_peers)
            .map(|i| {
                let a = i as f64 / n_peers as f64 * std::f64::consts::TAU;
                Point::new(500.0 + 40.0 * a.cos(), 500.0 + 40.0 * a.sin())
            })
            .collect();
        let peers = NetworkTopology::from_peer_points(&pts, r, 2.0 * r).unwrap();
        let topo = peers.with_altruists(&[Point::new(490.0, 500.0)]).unwrap();
        let flows: Vec<(NodeId, NodeId)> = (0..n_flows)
            .map(|i| (NodeId(2 * i as u32), NodeId(2 * i as u32 + 1)))
            .collect();
        let mut fracs = Vec::new();
        for rep in 0..10u64 {
            let mut cfg = ScenarioConfig::new(topo.clone(), ProtocolVariant::Altruistic);
            cfg.n_data_channels = 5;
            cfg.flows = FlowSpec::Explicit(flows.clone());
            cfg.master_seed = derive_seed(7, &[STREAM_CAMPAIGN, rep]);
            let smax =
                network_capacity_bps(&cfg.timings(), cfg.payload_bytes, 5, n_flows);
            let res = run(&cfg).unwrap();
            // Hard invariant: the theoretical ceiling is never exceeded.
            pass &= res.throughput_bps <= smax;
            fracs.push(res.throughput_bps / smax);
        }
        let worst = fracs.iter().cloned().fold(f64::INFINITY, f64::min);
        pass &= worst >= 0.70;
        detail.push_str(&format!(
            "{n_peers} peers: frac mean {:.3} min {worst:.3}; ",
            summarize(&fracs).mean
        ));
    }
    gate(
        7,
        "saturated single-hop runs stay under the ceiling and reach ≥70% of it",
        pass,
        detail,
    );
}

// ---------------------------------------------------------------------------
// 08 — cost-efficiency arithmetic
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_cost_efficiency_arithmetic() {
    // Worked endpoints: an all-awake 360-node fleet moving 3826 Mbit·m/s at a
    // worst draw of 0.718 W, and a 407-node sleeping fleet moving 3822
    // Mbit·m/s at 0.301 W.
    let endpoint = |fd: f64, n_peers: usize, n_alts: usize, p_max: f64| BmpInputs {
        flow_throughputs_bps: vec![fd],
        flow_distances_m: vec![1.0],
        n_peers,
        n_altruists: n_alts,
        peer_max_power_w: p_max,
        altruist_max_power_w: 0.0,
        b0_joules_per_dollar: 1.0,
    };
    let a = bmp(&endpoint(3.826e9, 360, 0, 0.718)).unwrap() / 1e6;
    let b = bmp(&endpoint(3.822e9, 360, 47, 0.301)).unwrap() / 1e6;
    let mut pass = (a - 14.8).abs() <= 0.1 && (b - 31.2).abs() <= 0.1;

    // Homogeneity under randomized scaling: value scales linearly with
    // distance-weighted throughput and inversely with power.
    let mut rng = stream(808, &[8]);
    let mut max_rel = 0.0f64;
    for _ in 0..200 {
        let nf = rng.random_range(1..6usize);
        let base = BmpInputs {
            flow_throughputs_bps: (0..nf).map(|_| rng.random_range(1e3..1e8)).collect(),
            flow_distances_m: (0..nf).map(|_| rng.random_range(1.0..5e3)).collect(),
            n_peers: rng.random_range(1..500usize),
            n_altruists: rng.random_range(0..100usize),
            peer_max_power_w: rng.random_range(0.05..2.0),
            altruist_max_power_w: rng.random_range(0.0..2.0),
            b0_joules_per_dollar: rng.random_range(0.1..10.0),
        };
        let v = bmp(&base).unwrap();
        let c: f64 = rng.random_range(0.01..100.0);

        let mut scaled_f = base.clone();
        scaled_f.flow_throughputs_bps.iter_mut().for_each(|f| *f *= c);
        let rel_f = (bmp(&scaled_f).unwrap() / (c * v) - 1.0).abs();

        let mut scaled_p = base.clone();
        scaled_p.peer_max_power_w *= c;
        scaled_p.altruist_max_power_w *= c;
        let rel_p = (bmp(&scaled_p).unwrap() * c / v - 1.0).abs();

        max_rel = max_rel.max(rel_f).max(rel_p);
    }
    pass &= max_rel < 1e-9;
    gate(
        8,
        "cost-efficiency endpoints and scaling laws",
        pass,
        format!("endpoints {a:.2} and {b:.2} Mbit·m/$; worst scaling error {max_rel:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 09 — bit-identical determinism
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_bit_identical_determinism() {
    let seed = 777u64;
    let peers = random_peers(40, 900.0, 900.0, 250.0, 500.0, seed).unwrap();
    let alts: Vec<Point> = {
        let mut rng = stream(seed, &[STREAM_ALTRUISTS]);
        poisson_deploy(900.0, 900.0, 1.31 / (250.0 * 250.0), &mut rng).unwrap()
    };
    let topo = peers.with_altruists(&alts).unwrap();
    let mut cfg = ScenarioConfig::new(topo, ProtocolVariant::Altruistic);
    cfg.n_data_channels = 3;
    cfg.flows = FlowSpec::Random { n: 40 };
    cfg.traffic = TrafficModel::Poisson { pkts_per_sec: 2.0 };
    cfg.duration_us = 2_000_000;
    cfg.master_seed = seed;
    cfg.record_trace = true;

    let first = run(&cfg).unwrap();
    let second = run(&cfg).unwrap();
    let identical = first == second;

    // A replication replays bit-identically from its recorded derived seed.
    let mut quiet = cfg.clone();
    quiet.record_trace = false;
    let reps = run_replications(&quiet, 3).unwrap();
    let mut replay_cfg = quiet.clone();
    replay_cfg.master_seed = derive_seed(seed, &[STREAM_CAMPAIGN, 2]);
    let replay = run(&replay_cfg).unwrap();
    let replays = reps[2] == replay;

    gate(
        9,
        "two executions and a seed replay are field-for-field identical",
        identical && replays,
        format!(
            "{} trace records, {} deliveries; rerun identical: {identical}, replication replay identical: {replays}",
            first.trace.len(),
            first.delivered
        ),
    );
}

// ---------------------------------------------------------------------------
// 10 — variant reduction with no altruists
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_altruistic_without_altruists_reduces_to_psm() {
    let mut pass = true;
    let mut events = 0usize;
    for k in 0..10u64 {
        let seed = derive_seed(31_337, &[STREAM_CAMPAIGN, k]);
        let peers = random_peers(30, 800.0, 800.0, 250.0, 500.0, seed).unwrap();
        let mut results = Vec::new();
        for variant in [ProtocolVariant::Altruistic, ProtocolVariant::NonDishPsm] {
            let mut cfg = ScenarioConfig::new(peers.clone(), variant);
            cfg.n_data_channels = 3;
            cfg.flows = FlowSpec::Random { n: 30 };
            cfg.traffic = TrafficModel::Poisson { pkts_per_sec: 2.0 };
            cfg.duration_us = 2_000_000;
            cfg.master_seed = seed;
            cfg.record_trace = true;
            results.push(run(&cfg).unwrap());
        }
        let (alt, psm) = (&results[0], &results[1]);
        events += alt.trace.len();
        // Everything but the variant label must coincide, trace included.
        let mut relabeled = alt.clone();
        relabeled.variant = psm.variant;
        pass &= relabeled == *psm;
        pass &= !alt.trace.is_empty();
    }
    gate(
        10,
        "altruist-capable variant with zero altruists is trace-identical to its sleeping baseline",
        pass,
        format!("10 seeds, {events} trace records compared"),
    );
}
