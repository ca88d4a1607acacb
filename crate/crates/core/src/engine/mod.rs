//! Deterministic discrete-event simulation of the multi-channel MAC.
//!
//! One control channel carries handshakes, vetoes, and retractions; `m` data
//! channels carry payload exchanges. Radios are half-duplex with a
//! distance^-4 path loss and a capture threshold, so concurrent frames either
//! survive by spatial separation or the stronger one wins. All randomness
//! flows from one master seed through labeled streams, which makes every run
//! bit-reproducible.

mod sim;
mod trace;

pub use trace::TraceRecord;

use thiserror::Error;

use crate::metrics::{EnergyLedger, PowerProfile};
use crate::protocol::{FrameTimings, ProtocolVariant, SimTime};
use crate::rng::{derive_seed, STREAM_CAMPAIGN};
use crate::topology::{NetworkTopology, NodeId, NodeKind, TopologyError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scenario needs at least two peers, got {0}")]
    TooFewPeers(usize),
    #[error("scenario needs at least one data channel")]
    NoDataChannels,
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("payload and bandwidth must be positive")]
    BadLink,
    #[error("variant {0} fields no altruists, but the topology deploys {1}")]
    AltruistsForbidden(ProtocolVariant, usize),
    #[error("requested {requested} flows but the topology has only {available} adjacent ordered peer pairs")]
    NotEnoughFlows { requested: usize, available: usize },
    #[error("flow endpoints {0} -> {1} are not adjacent peers")]
    FlowNotAdjacent(NodeId, NodeId),
    #[error("flow endpoints must be two distinct peers, got {0} -> {1}")]
    BadFlowEndpoints(NodeId, NodeId),
    #[error("poisson packet rate must be positive and finite, got {0}")]
    BadTrafficRate(f64),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// How flows (directed src -> dst traffic relations) are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowSpec {
    /// Sample `n` distinct ordered adjacent peer pairs from the flow stream.
    Random { n: usize },
    /// Exactly these pairs, validated against the topology.
    Explicit(Vec<(NodeId, NodeId)>),
}

/// Per-flow offered load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficModel {
    /// The source always has the next packet ready.
    Saturated,
    /// Poisson arrivals at `pkts_per_sec` per flow.
    Poisson { pkts_per_sec: f64 },
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub variant: ProtocolVariant,
    pub topology: NetworkTopology,
    pub n_data_channels: usize,
    pub flows: FlowSpec,
    pub traffic: TrafficModel,
    pub payload_bytes: u64,
    pub plcp_bytes: u64,
    pub bandwidth_bps: u64,
    pub difs_us: u64,
    pub sifs_us: u64,
    pub ccap_us: u64,
    pub switch_us: u64,
    pub slot_us: u64,
    pub retry_limit: u32,
    pub capture_db: f64,
    pub power: PowerProfile,
    pub duration_us: SimTime,
    /// End the run early once this many packets have been delivered.
    pub stop_after_delivered: Option<u64>,
    pub master_seed: u64,
    pub record_trace: bool,
}

impl ScenarioConfig {
    pub fn new(topology: NetworkTopology, variant: ProtocolVariant) -> Self {
        ScenarioConfig {
            variant,
            topology,
            n_data_channels: 6,
            flows: FlowSpec::Random { n: 1 },
            traffic: TrafficModel::Saturated,
            payload_bytes: 2048,
            plcp_bytes: 15,
            bandwidth_bps: 1_000_000,
            difs_us: 50,
            sifs_us: 10,
            ccap_us: 35,
            switch_us: 0,
            slot_us: 20,
            retry_limit: 7,
            capture_db: 6.0,
            power: PowerProfile::default(),
            duration_us: 10_000_000,
            stop_after_delivered: None,
            master_seed: 1,
            record_trace: false,
        }
    }

    pub fn timings(&self) -> FrameTimings {
        FrameTimings::new(
            self.bandwidth_bps,
            self.payload_bytes,
            self.plcp_bytes,
            self.difs_us,
            self.sifs_us,
            self.ccap_us,
            self.switch_us,
        )
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.topology.peer_count() < 2 {
            return Err(EngineError::TooFewPeers(self.topology.peer_count()));
        }
        if self.n_data_channels == 0 {
            return Err(EngineError::NoDataChannels);
        }
        if self.duration_us == 0 {
            return Err(EngineError::ZeroDuration);
        }
        if self.payload_bytes == 0 || self.bandwidth_bps == 0 {
            return Err(EngineError::BadLink);
        }
        let n_alt = self.topology.altruist_count();
        if n_alt > 0 && !self.variant.allows_altruists() {
            return Err(EngineError::AltruistsForbidden(self.variant, n_alt));
        }
        Ok(())
    }
}

/// Energy and activity of one node over the run.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub id: NodeId,
    pub kind: NodeKind,
    pub ledger: EnergyLedger,
    pub avg_power_w: f64,
    pub inv_sent: u64,
}

/// Everything measured in one run. Two runs of the same config are
/// field-for-field identical.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: ProtocolVariant,
    pub master_seed: u64,
    /// Wall-clock span actually simulated (may undercut the configured
    /// duration when an early-stop condition fires).
    pub duration_us: SimTime,

    pub arrivals: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Packets still queued or in flight at the end.
    pub residual: u64,
    pub delivered_payload_bits: u64,
    pub bit_meters: f64,
    pub throughput_bps: f64,

    pub handshakes_started: u64,
    pub vetoes_sent: u64,
    pub vetoes_suppressed: u64,
    pub aborted_by_veto: u64,
    pub ncf_sent: u64,
    pub failed_attempts: u64,
    pub decode_failures: u64,

    pub peer_energy: EnergyLedger,
    pub altruist_energy: EnergyLedger,
    /// Class average: total class energy over (class size x duration).
    pub peer_avg_power_w: f64,
    pub altruist_avg_power_w: f64,
    pub max_class_power_w: f64,
    /// Delivered bit-meters per joule at the worst-class power draw.
    pub bit_meters_per_joule: f64,

    pub per_node: Vec<NodeReport>,
    pub trace: Vec<TraceRecord>,
}

/// Runs one scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<RunResult, EngineError> {
    config.validate()?;
    sim::Sim::new(config)?.run()
}

/// Runs `reps` independent replications, re-deriving each replication's
/// master seed from the campaign stream so results are reproducible and
/// uncorrelated.
pub fn run_replications(
    config: &ScenarioConfig,
    reps: usize,
) -> Result<Vec<RunResult>, EngineError> {
    let mut out = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut c = config.clone();
        c.master_seed = derive_seed(config.master_seed, &[STREAM_CAMPAIGN, rep as u64]);
        out.push(run(&c)?);
    }
    Ok(out)
}
