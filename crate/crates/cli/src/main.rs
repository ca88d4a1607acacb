//! Command-line front end for the simulator and planner.
//!
//! Verbs:
//! * `run` — simulate one scenario for one or more replications;
//! * `campaign` — sweep a parameter grid from a config file and emit one
//!   aggregated row per point;
//! * `plan size` — closed-form altruist density and expected count;
//! * `plan place` — greedy altruist placement for a topology file;
//! * `topo gen` — generate a random topology file.
//!
//! All output is deterministic for a fixed seed: no timestamps, no
//! machine-dependent content, stable float formatting. Campaign output is
//! therefore byte-stable, and every row records the derived seed that
//! reproduces it via `run --seed`.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dishsim_core::deployment::{
    greedy_set_cover_deploy, min_altruist_density, poisson_deploy, CandidateStrategy,
};
use dishsim_core::engine::{run, FlowSpec, RunResult, ScenarioConfig, TrafficModel};
use dishsim_core::metrics::summarize;
use dishsim_core::protocol::ProtocolVariant;
use dishsim_core::rng::{derive_seed, stream, STREAM_ALTRUISTS, STREAM_CAMPAIGN};
use dishsim_core::topology::{random_peers, MccMode, NetworkTopology, TopologyFile};

// ---------------------------------------------------------------------------
// Argument types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Cooperative: idle peers overhear and veto doomed handshakes.
    DishP,
    /// No cooperation; idle peers stay awake and keep learning.
    NonDish,
    /// No cooperation; idle peers sleep.
    NonDishPsm,
    /// Idealized rotation: peers billed as sleeping, best neighbor vetoes.
    GenieInSitu,
    /// Peers sleep; dedicated always-on altruists do the vetoing.
    Altruistic,
}

impl From<VariantArg> for ProtocolVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::DishP => ProtocolVariant::DishP,
            VariantArg::NonDish => ProtocolVariant::NonDish,
            VariantArg::NonDishPsm => ProtocolVariant::NonDishPsm,
            VariantArg::GenieInSitu => ProtocolVariant::GenieInSitu,
            VariantArg::Altruistic => ProtocolVariant::Altruistic,
        }
    }
}

fn variant_slug(v: ProtocolVariant) -> &'static str {
    match v {
        ProtocolVariant::DishP => "dish-p",
        ProtocolVariant::NonDish => "non-dish",
        ProtocolVariant::NonDishPsm => "non-dish-psm",
        ProtocolVariant::GenieInSitu => "genie-in-situ",
        ProtocolVariant::Altruistic => "altruistic",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Idle peers sleep; only mutually isolated pairs are safe.
    Psm,
    /// Everyone stays awake; triangles and low degrees create safety.
    Awake,
}

impl From<ModeArg> for MccMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Psm => MccMode::PsmDeafTerminal,
            ModeArg::Awake => MccMode::NoPsm,
        }
    }
}

/// Rectangular deployment area in meters, parsed from `WxH` or a single
/// square side.
#[derive(Debug, Clone, Copy)]
struct Area {
    w: f64,
    h: f64,
}

impl FromStr for Area {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
                .ok_or_else(|| format!("invalid area dimension {t:?}"))
        };
        let (w, h) = match s.split_once(['x', 'X']) {
            Some((w, h)) => (parse(w)?, parse(h)?),
            None => {
                let side = parse(s)?;
                (side, side)
            }
        };
        Ok(Area { w, h })
    }
}

impl std::fmt::Display for Area {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.w, self.h)
    }
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "dishsim",
    version,
    about = "Simulator and deployment planner for cooperative multi-channel MAC networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario for one or more replications.
    Run(RunArgs),
    /// Sweep a parameter grid from a config file; one aggregated row per point.
    Campaign(CampaignArgs),
    /// Altruist deployment planning.
    #[command(subcommand)]
    Plan(PlanCmd),
    /// Topology files.
    #[command(subcommand)]
    Topo(TopoCmd),
}

#[derive(Subcommand)]
enum PlanCmd {
    /// How dense must randomly scattered altruists be for a coverage target?
    Size(SizeArgs),
    /// Where exactly should altruists go for a given topology?
    Place(PlaceArgs),
}

#[derive(Subcommand)]
enum TopoCmd {
    /// Generate a random topology file.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Protocol variant to simulate.
    #[arg(long, value_enum)]
    variant: VariantArg,
    /// Load a topology file instead of generating one per replication.
    #[arg(long, conflicts_with_all = ["peers", "area", "alt_density", "range", "interference"])]
    topo: Option<PathBuf>,
    /// Peers in each generated topology.
    #[arg(long, default_value_t = 30)]
    peers: usize,
    /// Deployment area in meters, as WxH or a square side.
    #[arg(long, default_value = "1500x1500")]
    area: Area,
    /// Altruists per r^2 of area, scattered as a Poisson process
    /// (only for variants that field altruists).
    #[arg(long)]
    alt_density: Option<f64>,
    /// Data channels (the control channel is separate).
    #[arg(long, default_value_t = 5)]
    channels: usize,
    /// Per-flow Poisson packet rate, packets/second.
    #[arg(long, conflicts_with = "saturated")]
    rate: Option<f64>,
    /// Sources always have the next packet ready (default when --rate is absent).
    #[arg(long)]
    saturated: bool,
    /// Directed flows to sample (default: one per peer).
    #[arg(long)]
    flows: Option<usize>,
    /// Master seed; replication k runs under mix(seed; [6, k]).
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replications. Generated topologies are re-drawn per replication.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// End each replication early after this many delivered packets.
    #[arg(long)]
    stop_after: Option<u64>,
    /// Simulated seconds per replication.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    /// Radio transmission range, meters.
    #[arg(long, default_value_t = 250.0)]
    range: f64,
    /// Interference range, meters.
    #[arg(long, default_value_t = 500.0)]
    interference: f64,
    /// Write the result table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record event traces and write them to this file (one section per
    /// replication; diagnostic format, subject to change).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CampaignArgs {
    /// Campaign config file: flat `key = value` lines, `#` comments.
    /// Keys: master_seed, reps, duration_s, area, tx_range,
    /// interference_range, data_channels, flows_per_peer, payload_bytes,
    /// variant (list), peers (list), alt_density_r2 (list),
    /// rate_pps (list of numbers and/or `saturated`).
    #[arg(long)]
    config: PathBuf,
    /// Write the result table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for computing sweep points (output order is unaffected).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct SizeArgs {
    /// Coverage probability target, in [0, 1).
    #[arg(long)]
    pcov: f64,
    /// Radio transmission range, meters.
    #[arg(long, visible_alias = "r", default_value_t = 250.0)]
    range: f64,
    /// Optional area (WxH meters) for an expected-count estimate.
    #[arg(long)]
    area: Option<Area>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlaceArgs {
    /// Topology file to plan for.
    #[arg(long)]
    topo: PathBuf,
    /// Which idle-listening regime defines the unsafe pairs.
    #[arg(long, value_enum, default_value_t = ModeArg::Psm)]
    mode: ModeArg,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Number of peers.
    #[arg(long)]
    peers: usize,
    /// Deployment area in meters, as WxH or a square side.
    #[arg(long, default_value = "1500x1500")]
    area: Area,
    /// Altruists per r^2 of area, scattered as a Poisson process.
    #[arg(long)]
    alt_density: Option<f64>,
    /// Master seed for the layout.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Radio transmission range, meters.
    #[arg(long, default_value_t = 250.0)]
    range: f64,
    /// Interference range, meters.
    #[arg(long, default_value_t = 500.0)]
    interference: f64,
    /// Write the topology file here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Shared scenario plumbing
// ---------------------------------------------------------------------------

/// Where a replication's topology comes from.
enum TopoSource {
    /// A fixed, user-supplied topology, shared by all replications.
    Fixed(Box<NetworkTopology>),
    /// Re-drawn per replication from the replication's seed.
    Random { peers: usize, area: Area, range: f64, interference: f64, alt_density_r2: f64 },
}

struct PointSpec {
    variant: ProtocolVariant,
    topo: TopoSource,
    data_channels: usize,
    flows: usize,
    traffic: TrafficModel,
    payload_bytes: u64,
    duration_us: u64,
    stop_after: Option<u64>,
    record_trace: bool,
}

/// Runs replication `rep` of a point whose base seed is `point_seed`.
///
/// Seed derivation (the mixing function is the library rng module's
/// label-chained splitmix64): `rep_seed = mix(point_seed; [6, rep])`; random
/// topologies draw peers from `rep_seed` and altruists from
/// `mix(rep_seed; [2])`.
fn run_rep(spec: &PointSpec, point_seed: u64, rep: u64) -> Result<RunResult> {
    let rep_seed = derive_seed(point_seed, &[STREAM_CAMPAIGN, rep]);
    let topo = match &spec.topo {
        TopoSource::Fixed(t) => (**t).clone(),
        TopoSource::Random { peers, area, range, interference, alt_density_r2 } => {
            let base = random_peers(*peers, area.w, area.h, *range, *interference, rep_seed)
                .context("generating peer layout")?;
            if *alt_density_r2 > 0.0 {
                let rho = alt_density_r2 / (range * range);
                let mut rng = stream(rep_seed, &[STREAM_ALTRUISTS]);
                let alts = poisson_deploy(area.w, area.h, rho, &mut rng)
                    .context("scattering altruists")?;
                base.with_altruists(&alts).context("adding altruists")?
            } else {
                base
            }
        }
    };
    let mut cfg = ScenarioConfig::new(topo, spec.variant);
    cfg.n_data_channels = spec.data_channels;
    cfg.flows = FlowSpec::Random { n: spec.flows };
    cfg.traffic = spec.traffic;
    cfg.payload_bytes = spec.payload_bytes;
    cfg.duration_us = spec.duration_us;
    cfg.stop_after_delivered = spec.stop_after;
    cfg.master_seed = rep_seed;
    cfg.record_trace = spec.record_trace;
    Ok(run(&cfg)?)
}

/// Whole-deployment power draw: every radio, peers and altruists summed.
fn fleet_power_w(res: &RunResult) -> f64 {
    let mut all = res.peer_energy;
    all.merge(&res.altruist_energy);
    all.energy_joules(&dishsim_core::metrics::PowerProfile::default())
        / (res.duration_us as f64 / 1e6)
}

fn duration_to_us(seconds: f64) -> Result<u64> {
    if !(seconds.is_finite() && seconds > 0.0) {
        bail!("duration must be positive, got {seconds}");
    }
    Ok((seconds * 1e6).round() as u64)
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

const SEED_NOTE: &str = "# seeds: rep_seed = mix(point_seed; [6, rep]); for campaigns point_seed = mix(master_seed; [6, point]); mix = label-chained splitmix64 (library rng module)\n";

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(a: RunArgs) -> Result<()> {
    let variant: ProtocolVariant = a.variant.into();
    if a.alt_density.is_some() && !variant.allows_altruists() {
        bail!("--alt-density only applies to variants that field altruists (got {})", variant_slug(variant));
    }
    let topo = match &a.topo {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file = TopologyFile::parse(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            TopoSource::Fixed(Box::new(file.to_topology()?))
        }
        None => TopoSource::Random {
            peers: a.peers,
            area: a.area,
            range: a.range,
            interference: a.interference,
            alt_density_r2: a.alt_density.unwrap_or(0.0),
        },
    };
    let flows = a.flows.unwrap_or(match &topo {
        TopoSource::Fixed(t) => t.peer_count(),
        TopoSource::Random { peers, .. } => *peers,
    });
    let traffic = match a.rate {
        Some(pkts_per_sec) => TrafficModel::Poisson { pkts_per_sec },
        None => TrafficModel::Saturated,
    };
    let spec = PointSpec {
        variant,
        topo,
        data_channels: a.channels,
        flows,
        traffic,
        payload_bytes: 2048,
        duration_us: duration_to_us(a.duration)?,
        stop_after: a.stop_after,
        record_trace: a.trace.is_some(),
    };

    let mut table = String::new();
    let traffic_desc = match a.rate {
        Some(r) => format!("poisson:{r}"),
        None => "saturated".into(),
    };
    writeln!(
        table,
        "# run variant={} topology={} channels={} flows={} traffic={} seed={} reps={} duration_s={}",
        variant_slug(variant),
        a.topo.as_ref().map_or_else(
            || format!("random:{}peers:{}", a.peers, a.area),
            |p| p.display().to_string()
        ),
        a.channels,
        flows,
        traffic_desc,
        a.seed,
        a.reps,
        a.duration
    )?;
    table.push_str(SEED_NOTE);
    writeln!(
        table,
        "rep\tseed\tsim_s\tarrivals\tdelivered\tdropped\tresidual\ttput_bps\tfleet_power_w\tbmp_bit_m_per_j\thandshakes\tvetoes\tfailed_attempts"
    )?;

    let mut traces = String::new();
    let (mut tputs, mut powers, mut bmps) = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..a.reps as u64 {
        let res = run_rep(&spec, a.seed, rep).with_context(|| format!("replication {rep}"))?;
        let power = fleet_power_w(&res);
        writeln!(
            table,
            "{rep}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{}\t{}\t{}",
            res.master_seed,
            res.duration_us as f64 / 1e6,
            res.arrivals,
            res.delivered,
            res.dropped,
            res.residual,
            res.throughput_bps,
            power,
            res.bit_meters_per_joule,
            res.handshakes_started,
            res.vetoes_sent,
            res.failed_attempts
        )?;
        tputs.push(res.throughput_bps);
        powers.push(power);
        bmps.push(res.bit_meters_per_joule);
        if a.trace.is_some() {
            writeln!(traces, "# rep {rep} seed {}", res.master_seed)?;
            for rec in &res.trace {
                writeln!(traces, "{rec:?}")?;
            }
        }
    }
    let (t, p, b) = (summarize(&tputs), summarize(&powers), summarize(&bmps));
    writeln!(
        table,
        "# mean\ttput_bps={:.3} sd={:.3}\tfleet_power_w={:.3} sd={:.3}\tbmp={:.3} sd={:.3}",
        t.mean, t.std_dev, p.mean, p.std_dev, b.mean, b.std_dev
    )?;

    if let Some(trace_path) = &a.trace {
        fs::write(trace_path, traces)
            .with_context(|| format!("writing {}", trace_path.display()))?;
    }
    write_out(&a.out, &table)
}

// ---------------------------------------------------------------------------
// campaign
// ---------------------------------------------------------------------------

/// Per-flow load for one sweep-axis entry.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RateSpec {
    Saturated,
    Poisson(f64),
}

impl RateSpec {
    fn traffic(self) -> TrafficModel {
        match self {
            RateSpec::Saturated => TrafficModel::Saturated,
            RateSpec::Poisson(r) => TrafficModel::Poisson { pkts_per_sec: r },
        }
    }
    fn label(self) -> String {
        match self {
            RateSpec::Saturated => "saturated".into(),
            RateSpec::Poisson(r) => format!("{r}"),
        }
    }
}

struct CampaignConfig {
    master_seed: u64,
    reps: usize,
    duration_s: f64,
    area: Area,
    tx_range: f64,
    interference_range: f64,
    data_channels: usize,
    flows_per_peer: usize,
    payload_bytes: u64,
    variants: Vec<ProtocolVariant>,
    peers: Vec<usize>,
    alt_density_r2: Vec<f64>,
    rates: Vec<RateSpec>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            master_seed: 1,
            reps: 5,
            duration_s: 10.0,
            area: Area { w: 1500.0, h: 1500.0 },
            tx_range: 250.0,
            interference_range: 500.0,
            data_channels: 5,
            flows_per_peer: 1,
            payload_bytes: 2048,
            variants: vec![
                ProtocolVariant::NonDishPsm,
                ProtocolVariant::NonDish,
                ProtocolVariant::DishP,
                ProtocolVariant::GenieInSitu,
                ProtocolVariant::Altruistic,
            ],
            peers: vec![360],
            alt_density_r2: vec![1.31],
            rates: vec![RateSpec::Saturated],
        }
    }
}

fn parse_campaign_config(text: &str) -> Result<CampaignConfig> {
    let mut cfg = CampaignConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .with_context(|| format!("line {}: expected `key = value`, got {raw:?}", ln + 1))?;
        if seen.iter().any(|k| k == key) {
            bail!("line {}: duplicate key {key:?}", ln + 1);
        }
        seen.push(key.to_string());
        let items = || -> Vec<&str> {
            if value.is_empty() {
                Vec::new()
            } else {
                value.split(',').map(str::trim).collect()
            }
        };
        let ctx = |what: &str| format!("line {}: invalid {what} {value:?}", ln + 1);
        match key {
            "master_seed" => cfg.master_seed = value.parse().with_context(|| ctx("seed"))?,
            "reps" => cfg.reps = value.parse().with_context(|| ctx("count"))?,
            "duration_s" => cfg.duration_s = value.parse().with_context(|| ctx("duration"))?,
            "area" => cfg.area = value.parse().map_err(anyhow::Error::msg).with_context(|| ctx("area"))?,
            "tx_range" => cfg.tx_range = value.parse().with_context(|| ctx("range"))?,
            "interference_range" => {
                cfg.interference_range = value.parse().with_context(|| ctx("range"))?
            }
            "data_channels" => {
                cfg.data_channels = value.parse().with_context(|| ctx("count"))?
            }
            "flows_per_peer" => {
                cfg.flows_per_peer = value.parse().with_context(|| ctx("count"))?
            }
            "payload_bytes" => cfg.payload_bytes = value.parse().with_context(|| ctx("size"))?,
            "variant" => {
                cfg.variants = items()
                    .iter()
                    .map(|t| {
                        <VariantArg as ValueEnum>::from_str(t, true)
                            .map(ProtocolVariant::from)
                            .map_err(|_| anyhow::anyhow!("line {}: unknown variant {t:?}", ln + 1))
                    })
                    .collect::<Result<_>>()?
            }
            "peers" => {
                cfg.peers = items()
                    .iter()
                    .map(|t| t.parse().with_context(|| ctx("peer count")))
                    .collect::<Result<_>>()?
            }
            "alt_density_r2" => {
                cfg.alt_density_r2 = items()
                    .iter()
                    .map(|t| t.parse().with_context(|| ctx("density")))
                    .collect::<Result<_>>()?
            }
            "rate_pps" => {
                cfg.rates = items()
                    .iter()
                    .map(|t| {
                        if t.eq_ignore_ascii_case("saturated") {
                            Ok(RateSpec::Saturated)
                        } else {
                            t.parse().map(RateSpec::Poisson).with_context(|| ctx("rate"))
                        }
                    })
                    .collect::<Result<_>>()?
            }
            other => bail!("line {}: unknown key {other:?}", ln + 1),
        }
    }
    Ok(cfg)
}

struct CampaignPoint {
    variant: ProtocolVariant,
    peers: usize,
    alt_density_r2: f64,
    rate: RateSpec,
}

/// Cross product of the sweep axes, in deterministic order. The altruist
/// density axis applies only to variants that field altruists; other
/// variants contribute one point per (peers, rate) combination.
fn enumerate_points(cfg: &CampaignConfig) -> Vec<CampaignPoint> {
    let mut points = Vec::new();
    for &variant in &cfg.variants {
        let densities: Vec<f64> =
            if variant.allows_altruists() { cfg.alt_density_r2.clone() } else { vec![0.0] };
        for &peers in &cfg.peers {
            for &rate in &cfg.rates {
                for &alt_density_r2 in &densities {
                    points.push(CampaignPoint { variant, peers, alt_density_r2, rate });
                }
            }
        }
    }
    points
}

struct CampaignRow {
    line: String,
    warnings: Vec<String>,
}

fn campaign_row(cfg: &CampaignConfig, index: usize, point: &CampaignPoint) -> CampaignRow {
    let point_seed = derive_seed(cfg.master_seed, &[STREAM_CAMPAIGN, index as u64]);
    let spec = PointSpec {
        variant: point.variant,
        topo: TopoSource::Random {
            peers: point.peers,
            area: cfg.area,
            range: cfg.tx_range,
            interference: cfg.interference_range,
            alt_density_r2: point.alt_density_r2,
        },
        data_channels: cfg.data_channels,
        flows: point.peers * cfg.flows_per_peer,
        traffic: point.rate.traffic(),
        payload_bytes: cfg.payload_bytes,
        duration_us: (cfg.duration_s * 1e6).round() as u64,
        stop_after: None,
        record_trace: false,
    };
    let mut warnings = Vec::new();
    let (mut tputs, mut powers, mut bmps) = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..cfg.reps as u64 {
        match run_rep(&spec, point_seed, rep) {
            Ok(res) => {
                tputs.push(res.throughput_bps);
                powers.push(fleet_power_w(&res));
                bmps.push(res.bit_meters_per_joule);
            }
            Err(e) => warnings.push(format!("point {index} rep {rep} failed: {e:#}")),
        }
    }
    let stats = |xs: &[f64]| {
        if xs.is_empty() {
            "NA\tNA".to_string()
        } else {
            let s = summarize(xs);
            format!("{:.3}\t{:.3}", s.mean, s.std_dev)
        }
    };
    let line = format!(
        "{index}\t{}\t{}\t{}\t{}\t{}\t{point_seed}\t{}\t{}\t{}\t{}",
        variant_slug(point.variant),
        point.peers,
        point.alt_density_r2,
        point.rate.label(),
        point.peers * cfg.flows_per_peer,
        tputs.len(),
        stats(&tputs),
        stats(&powers),
        stats(&bmps),
    );
    CampaignRow { line, warnings }
}

fn cmd_campaign(a: CampaignArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = parse_campaign_config(&text)?;
    duration_to_us(cfg.duration_s)?;
    let points = enumerate_points(&cfg);

    // Points are computed by up to --workers threads pulling from a shared
    // queue; rows land in their slots, so output order and content never
    // depend on scheduling.
    let slots: Vec<Mutex<Option<CampaignRow>>> =
        (0..points.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = a.workers.clamp(1, points.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let row = campaign_row(&cfg, i, &points[i]);
                *slots[i].lock().expect("slot lock") = Some(row);
            });
        }
    });

    let mut out = String::new();
    writeln!(
        out,
        "# campaign master_seed={} reps={} duration_s={} area={} tx_range={} interference_range={} data_channels={} flows_per_peer={} payload_bytes={}",
        cfg.master_seed,
        cfg.reps,
        cfg.duration_s,
        cfg.area,
        cfg.tx_range,
        cfg.interference_range,
        cfg.data_channels,
        cfg.flows_per_peer,
        cfg.payload_bytes
    )?;
    out.push_str(SEED_NOTE);
    writeln!(
        out,
        "point\tvariant\tpeers\talt_per_r2\trate_pps\tflows\tpoint_seed\treps_ok\ttput_mean_bps\ttput_sd_bps\tfleet_power_mean_w\tfleet_power_sd_w\tbmp_mean\tbmp_sd"
    )?;
    for slot in slots {
        let row = slot.into_inner().expect("slot lock").expect("row computed");
        for w in &row.warnings {
            eprintln!("warning: {w}");
        }
        out.push_str(&row.line);
        out.push('\n');
    }
    write_out(&a.out, &out)
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

fn cmd_plan_size(a: SizeArgs) -> Result<()> {
    let density = min_altruist_density(a.pcov, a.range)?;
    let mut out = String::new();
    writeln!(out, "p_cov = {}", a.pcov)?;
    writeln!(out, "tx_range_m = {}", a.range)?;
    writeln!(out, "density_per_r2 = {:.4}", density * a.range * a.range)?;
    writeln!(out, "density_per_m2 = {:.6e}", density)?;
    if let Some(area) = a.area {
        writeln!(out, "area_m2 = {}", area.w * area.h)?;
        writeln!(out, "expected_altruists = {:.1}", density * area.w * area.h)?;
    }
    write_out(&a.out, &out)
}

fn cmd_plan_place(a: PlaceArgs) -> Result<()> {
    let text =
        fs::read_to_string(&a.topo).with_context(|| format!("reading {}", a.topo.display()))?;
    let file =
        TopologyFile::parse(&text).with_context(|| format!("parsing {}", a.topo.display()))?;
    let topo = file.to_topology()?;
    let mode: MccMode = a.mode.into();
    let ups = topo.enumerate_ups(mode);
    let plan = greedy_set_cover_deploy(&topo, mode, CandidateStrategy::Arrangement);

    let mut out = String::new();
    writeln!(out, "# placement plan method={}", plan.method.name())?;
    writeln!(
        out,
        "# peers={} existing_altruists={} mode={} unsafe_pairs={} covered={} uncovered={}",
        topo.peer_count(),
        topo.altruist_count(),
        match mode {
            MccMode::PsmDeafTerminal => "psm",
            MccMode::NoPsm => "awake",
        },
        ups.len(),
        plan.covered.len(),
        plan.uncovered.len()
    )?;
    writeln!(out, "alt\tx\ty")?;
    for (i, p) in plan.altruists.iter().enumerate() {
        writeln!(out, "{i}\t{:.3}\t{:.3}", p.x, p.y)?;
    }
    for pair in &plan.uncovered {
        writeln!(out, "# uncovered\t{}\t{}", pair.a.0, pair.b.0)?;
    }
    write_out(&a.out, &out)
}

// ---------------------------------------------------------------------------
// topo
// ---------------------------------------------------------------------------

fn cmd_topo_gen(a: GenArgs) -> Result<()> {
    let base = random_peers(a.peers, a.area.w, a.area.h, a.range, a.interference, a.seed)?;
    let topo = match a.alt_density {
        Some(d) if d > 0.0 => {
            let mut rng = stream(a.seed, &[STREAM_ALTRUISTS]);
            let alts = poisson_deploy(a.area.w, a.area.h, d / (a.range * a.range), &mut rng)?;
            base.with_altruists(&alts)?
        }
        _ => base,
    };
    let file = TopologyFile {
        tx_range: a.range,
        interference_range: a.interference,
        area_w: a.area.w,
        area_h: a.area.h,
        nodes: topo.nodes().to_vec(),
    };
    write_out(&a.out, &file.emit())
}

// ---------------------------------------------------------------------------

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Campaign(a) => cmd_campaign(a),
        Cmd::Plan(PlanCmd::Size(a)) => cmd_plan_size(a),
        Cmd::Plan(PlanCmd::Place(a)) => cmd_plan_place(a),
        Cmd::Topo(TopoCmd::Gen(a)) => cmd_topo_gen(a),
    };
    match result {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
