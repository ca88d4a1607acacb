//! The discrete-event core: frames in flight, per-node MAC state machines,
//! radio energy billing, and the veto machinery.
//!
//! Ordering and reproducibility rules:
//! - the event heap orders by (time, insertion sequence), so simultaneous
//!   events process in the order they were scheduled;
//! - every random draw comes from a per-node or per-flow labeled stream and
//!   happens inside a handler, so the draw order is itself deterministic;
//! - node scans always run in ascending node index.

use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::cmp::Reverse;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::metrics::{aggregate_throughput_bps, bit_meters_per_joule, EnergyLedger};
use crate::protocol::{
    best_neighbor, confirm_channel, cooperation_policy, on_inv_received, select_channel,
    ChannelChoice, ChannelId, ChannelUsageTable, ControlFrame, FrameKind, FrameTimings, FsmPhase,
    InvResponse, MccProblem, ProtocolVariant, RadioState, SimTime, UsageEntry,
};
use crate::rng::{stream, STREAM_FLOWS, STREAM_MAC, STREAM_TRAFFIC};
use crate::topology::{NodeId, NodeKind, Point};

use super::trace::TraceRecord;
use super::{EngineError, FlowSpec, NodeReport, RunResult, ScenarioConfig, TrafficModel};

/// Engine channel index: 0 is the control channel, 1 + c is data channel c.
const CONTROL: usize = 0;

fn data_ch(c: ChannelId) -> usize {
    1 + c
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Ev {
    time: SimTime,
    seq: u64,
    payload: Payload,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug)]
enum Payload {
    PacketArrival { flow: usize },
    FrameTxStart { src: usize, channel: usize, frame: AirFrame },
    FrameTxEnd { frame_id: u64 },
    Timer { node: usize, gen: u64, kind: TimerKind },
    ChannelSwitchDone { node: usize, to: usize, then: SwitchThen },
    StateTransition { node: usize, gen: u64 },
}

#[derive(Debug, Clone, PartialEq)]
enum TimerKind {
    /// Carrier sense (DIFS plus any backoff slots) completed: transmit PRA.
    SenseDone,
    /// No PRB and no decoded veto by the end of the response window.
    PrbWindowEnd,
    SendPrb { channel: ChannelId },
    /// The veto window has elapsed: transmit CFA if the channel is still
    /// quiet.
    SendCfa,
    CfaTimeout,
    SendCfb,
    CfbTimeout,
    SendAck,
    AckTimeout,
    DataTimeout,
    /// A scheduled veto transmission; unlike every other timer it survives
    /// the detector's own phase changes and re-checks eligibility when it
    /// fires.
    InvFire { dst: usize, usage: UsageEntry },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SwitchThen {
    SenderStartData,
    ReceiverAwaitData,
    BackSuccess,
    BackFail,
    BackReceiver,
}

// ---------------------------------------------------------------------------
// Frames in flight
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum AirFrame {
    Control(ControlFrame),
    Data { sender: usize, receiver: usize, flow: usize },
    Ack { sender: usize, receiver: usize },
}

impl AirFrame {
    fn kind_name(&self) -> &'static str {
        match self {
            AirFrame::Control(f) => f.kind.name(),
            AirFrame::Data { .. } => "DATA",
            AirFrame::Ack { .. } => "ACK",
        }
    }
}

#[derive(Debug)]
struct Flight {
    src: usize,
    ch: usize,
    end: SimTime,
    frame: AirFrame,
    /// Nodes that were tuned, awake, and quiet when the frame started and
    /// have stayed that way; reception is decided among these at the end.
    candidates: Vec<usize>,
    /// Sources of every transmission that overlapped this one on its channel.
    interferers: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Per-node state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Micro {
    Idle,
    /// DIFS (+ backoff slots) running; SenseDone pending.
    SenseWait,
    /// Channel was busy; a retry is scheduled at the observed busy horizon.
    RestartWait,
    /// All data channels believed busy; retry at the earliest release.
    Deferred,
    Backoff,
    AwaitPrb,
    /// PRB received; CFA scheduled after the veto window.
    CcapSender,
    /// Veto energy sensed in the CCAP window: the handshake is torn down, but
    /// the radio holds in receive until the alarm frame ends, hoping to decode
    /// the exact blocking reservation instead of backing off blind.
    AwaitVeto,
    AwaitCfa,
    AwaitCfb,
    /// CFA received; CFB scheduled (the receiver's commit point is CFB's end).
    CommitReceiver,
    /// CFB unanswered; NCF retraction in the air.
    CleanupNcf,
    Switching,
    AwaitData,
    AwaitAck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Sender,
    Receiver,
}

#[derive(Debug, Clone, Copy)]
struct Exchange {
    role: Role,
    peer: usize,
    /// Sender side only: the flow whose packet is being moved.
    flow: Option<usize>,
    channel: ChannelId,
    release: SimTime,
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: usize,
}

struct SimNode {
    id: NodeId,
    kind: NodeKind,
    pos: Point,
    micro: Micro,
    /// Bumped on every phase change; stale timers carry the old value.
    gen: u64,
    /// None while retuning between channels.
    tuned: Option<usize>,
    /// Frame id currently radiating from this node.
    tx: Option<u64>,
    ctx: Option<Exchange>,
    queue: VecDeque<Packet>,
    retries: u32,
    /// Next carrier sense must include a backoff draw.
    pending_backoff: bool,
    table: ChannelUsageTable,
    /// Wake-on-request horizon for power-saving peers.
    forced_awake_until: SimTime,
    ledger: EnergyLedger,
    last_bill: SimTime,
    inv_sent: u64,
}

struct Flow {
    src: usize,
    dst: usize,
    dist_m: f64,
    exp: Option<Exp<f64>>,
    delivered: u64,
    dropped: u64,
}

// ---------------------------------------------------------------------------
// The simulator
// ---------------------------------------------------------------------------

pub(super) struct Sim<'c> {
    cfg: &'c ScenarioConfig,
    t: FrameTimings,
    capture_ratio: f64,
    tx_range_sq: f64,
    int_range_sq: f64,
    estimated_backoff: u64,

    now: SimTime,
    heap: BinaryHeap<Reverse<Ev>>,
    next_seq: u64,
    next_frame_id: u64,

    nodes: Vec<SimNode>,
    mac_rngs: Vec<ChaCha8Rng>,
    traffic_rngs: Vec<ChaCha8Rng>,
    flows: Vec<Flow>,
    flights: HashMap<u64, Flight>,
    /// Flight ids per engine channel, in start order.
    ongoing: Vec<Vec<u64>>,

    arrivals: u64,
    delivered: u64,
    dropped: u64,
    delivered_bits: u64,
    bit_meters: f64,
    handshakes_started: u64,
    vetoes_sent: u64,
    vetoes_suppressed: u64,
    aborted_by_veto: u64,
    ncf_sent: u64,
    failed_attempts: u64,
    decode_failures: u64,

    stop_at: Option<SimTime>,
    trace: Vec<TraceRecord>,
}

impl<'c> Sim<'c> {
    pub(super) fn new(cfg: &'c ScenarioConfig) -> Result<Self, EngineError> {
        let topo = &cfg.topology;
        let nodes: Vec<SimNode> = topo
            .nodes()
            .iter()
            .map(|n| SimNode {
                id: n.id,
                kind: n.kind,
                pos: n.pos,
                micro: Micro::Idle,
                gen: 0,
                tuned: Some(CONTROL),
                tx: None,
                ctx: None,
                queue: VecDeque::new(),
                retries: 0,
                pending_backoff: false,
                table: ChannelUsageTable::new(),
                forced_awake_until: 0,
                ledger: EnergyLedger::new(),
                last_bill: 0,
                inv_sent: 0,
            })
            .collect();

        let mac_rngs = (0..nodes.len())
            .map(|i| stream(cfg.master_seed, &[STREAM_MAC, i as u64]))
            .collect();

        let flows = build_flows(cfg)?;
        let traffic_rngs = (0..flows.len())
            .map(|f| stream(cfg.master_seed, &[STREAM_TRAFFIC, f as u64]))
            .collect();

        Ok(Sim {
            cfg,
            t: cfg.timings(),
            capture_ratio: 10f64.powf(cfg.capture_db / 10.0),
            tx_range_sq: topo.tx_range() * topo.tx_range(),
            int_range_sq: topo.interference_range() * topo.interference_range(),
            // A garbled alarm names no release time. The blocker was observed
            // at a uniformly random point of its exchange, so its expected
            // residual is half a maximal data exchange.
            estimated_backoff: cfg.timings().t_data_exchange() / 2,
            now: 0,
            heap: BinaryHeap::new(),
            next_seq: 0,
            next_frame_id: 0,
            nodes,
            mac_rngs,
            traffic_rngs,
            flows,
            flights: HashMap::new(),
            ongoing: vec![Vec::new(); 1 + cfg.n_data_channels],
            arrivals: 0,
            delivered: 0,
            dropped: 0,
            delivered_bits: 0,
            bit_meters: 0.0,
            handshakes_started: 0,
            vetoes_sent: 0,
            vetoes_suppressed: 0,
            aborted_by_veto: 0,
            ncf_sent: 0,
            failed_attempts: 0,
            decode_failures: 0,
            stop_at: None,
            trace: Vec::new(),
        })
    }

    pub(super) fn run(mut self) -> Result<RunResult, EngineError> {
        for f in 0..self.flows.len() {
            match self.cfg.traffic {
                TrafficModel::Saturated => self.schedule(0, Payload::PacketArrival { flow: f }),
                TrafficModel::Poisson { .. } => {
                    let gap = self.draw_interarrival(f);
                    self.schedule(gap, Payload::PacketArrival { flow: f });
                }
            }
        }

        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.time > self.cfg.duration_us || self.stop_at.is_some() {
                break;
            }
            self.now = ev.time;
            match ev.payload {
                Payload::PacketArrival { flow } => self.handle_arrival(flow),
                Payload::FrameTxStart { src, channel, frame } => {
                    self.handle_tx_start(src, channel, frame)
                }
                Payload::FrameTxEnd { frame_id } => self.handle_tx_end(frame_id),
                Payload::Timer { node, gen, kind } => self.handle_timer(node, gen, kind),
                Payload::ChannelSwitchDone { node, to, then } => {
                    self.handle_switch_done(node, to, then)
                }
                Payload::StateTransition { node, gen } => self.handle_transition(node, gen),
            }
        }

        let end = self.stop_at.unwrap_or(self.cfg.duration_us);
        for i in 0..self.nodes.len() {
            self.bill_to(i, end);
        }
        Ok(self.finish(end))
    }

    // -- plumbing ----------------------------------------------------------

    fn schedule(&mut self, at: SimTime, payload: Payload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Ev { time: at, seq, payload }));
    }

    fn timer(&mut self, node: usize, at: SimTime, kind: TimerKind) {
        let gen = self.nodes[node].gen;
        self.schedule(at, Payload::Timer { node, gen, kind });
    }

    fn dist_sq(&self, a: usize, b: usize) -> f64 {
        self.nodes[a].pos.dist_sq(&self.nodes[b].pos)
    }

    fn in_tx_range(&self, a: usize, b: usize) -> bool {
        self.dist_sq(a, b) <= self.tx_range_sq
    }

    fn in_int_range(&self, a: usize, b: usize) -> bool {
        self.dist_sq(a, b) <= self.int_range_sq
    }

    /// Received power under distance^-4 loss with unit transmit power; the
    /// distance is clamped below at 1 mm.
    fn gain(&self, from: usize, to: usize) -> f64 {
        let d2 = self.dist_sq(from, to).max(1e-6);
        1.0 / (d2 * d2)
    }

    fn frame_duration(&self, frame: &AirFrame) -> u64 {
        match frame {
            AirFrame::Control(f) => match f.kind {
                FrameKind::Inv => self.t.t_inv,
                _ => self.t.t_pra,
            },
            AirFrame::Data { .. } => self.t.t_data,
            AirFrame::Ack { .. } => self.t.t_ack,
        }
    }

    fn psm_peer(&self, idx: usize) -> bool {
        self.nodes[idx].kind == NodeKind::Peer && self.cfg.variant.peers_sleep_when_idle()
    }

    /// A power-saving peer in a state its sleep schedule puts to bed: nothing
    /// of its own in flight and no wake-on-request holding it up.
    fn dozing(&self, idx: usize) -> bool {
        let n = &self.nodes[idx];
        self.psm_peer(idx)
            && n.tx.is_none()
            && n.forced_awake_until <= self.now
            && matches!(n.micro, Micro::Idle | Micro::Backoff | Micro::Deferred)
    }

    /// Radio reachability: an asleep node cannot sense, decode, or be counted
    /// a reception candidate except through wake-on-request. Variants whose
    /// peers overhear keep the receiver running through scheduled sleep — for
    /// them only the energy ledger naps (see `radio_of`).
    fn is_awake(&self, idx: usize) -> bool {
        !self.dozing(idx) || self.cfg.variant.peers_overhear()
    }

    /// Any foreign transmission audible on the node's tuned channel.
    fn energy_audible(&self, idx: usize) -> bool {
        let Some(ch) = self.nodes[idx].tuned else { return false };
        self.ongoing[ch].iter().any(|fid| {
            let f = &self.flights[fid];
            f.src != idx && self.in_int_range(f.src, idx)
        })
    }

    fn radio_of(&self, idx: usize) -> RadioState {
        if self.nodes[idx].tx.is_some() {
            RadioState::Tx
        } else if self.dozing(idx) {
            // Scheduled sleep. For overhearing power savers the receiver
            // actually stays up and keeps learning while the ledger naps —
            // information for free is exactly the idealization being priced.
            RadioState::Sleep
        } else if self.energy_audible(idx) {
            RadioState::Rx
        } else {
            RadioState::Idle
        }
    }

    /// Charges the node's current radio state from its last billing mark to
    /// now. Must be called *before* any mutation that changes that state.
    fn bill(&mut self, idx: usize) {
        self.bill_to(idx, self.now);
    }

    fn bill_to(&mut self, idx: usize, t: SimTime) {
        let state = self.radio_of(idx);
        let n = &mut self.nodes[idx];
        if t > n.last_bill {
            n.ledger.add(state, t - n.last_bill);
            n.last_bill = t;
        }
    }

    fn bill_listeners(&mut self, ch: usize) {
        for i in 0..self.nodes.len() {
            if self.nodes[i].tuned == Some(ch) {
                self.bill(i);
            }
        }
    }

    /// Drops a node from candidate sets it no longer qualifies for (after it
    /// retuned, started transmitting, or fell asleep).
    fn revalidate_candidacy(&mut self, idx: usize) {
        let tuned = self.nodes[idx].tuned;
        let transmitting = self.nodes[idx].tx.is_some();
        let awake = self.is_awake(idx);
        for list in &self.ongoing {
            for fid in list {
                let f = self.flights.get_mut(fid).expect("ongoing flight");
                if f.candidates.contains(&idx)
                    && (transmitting || !awake || tuned != Some(f.ch))
                {
                    f.candidates.retain(|&c| c != idx);
                }
            }
        }
    }

    fn channel_busy(&self, idx: usize, ch: usize) -> bool {
        self.ongoing[ch].iter().any(|fid| {
            let f = &self.flights[fid];
            f.src != idx && self.in_int_range(f.src, idx)
        })
    }

    fn busy_until(&self, idx: usize, ch: usize) -> SimTime {
        self.ongoing[ch]
            .iter()
            .filter_map(|fid| {
                let f = &self.flights[fid];
                (f.src != idx && self.in_int_range(f.src, idx)).then_some(f.end)
            })
            .max()
            .unwrap_or(self.now)
    }

    fn phase_of(&self, idx: usize) -> FsmPhase {
        match self.nodes[idx].micro {
            Micro::Idle | Micro::SenseWait | Micro::RestartWait | Micro::Deferred => {
                FsmPhase::ControlIdle
            }
            Micro::Backoff | Micro::AwaitVeto => FsmPhase::Backoff,
            Micro::AwaitPrb => FsmPhase::AwaitPrb,
            Micro::CcapSender | Micro::AwaitCfa => FsmPhase::CcapWait,
            Micro::AwaitCfb | Micro::CommitReceiver => FsmPhase::AwaitCfb,
            Micro::CleanupNcf => FsmPhase::ControlIdle,
            Micro::Switching | Micro::AwaitData | Micro::AwaitAck => FsmPhase::DataExchange,
        }
    }

    fn genie(&self) -> bool {
        self.cfg.variant == ProtocolVariant::GenieInSitu
    }

    // -- traffic -----------------------------------------------------------

    fn draw_interarrival(&mut self, flow: usize) -> SimTime {
        let exp = self.flows[flow].exp.expect("poisson flow");
        let us = exp.sample(&mut self.traffic_rngs[flow]);
        (us.max(1.0)) as SimTime
    }

    fn handle_arrival(&mut self, flow: usize) {
        let src = self.flows[flow].src;
        self.arrivals += 1;
        self.nodes[src].queue.push_back(Packet { flow });
        if matches!(self.cfg.traffic, TrafficModel::Poisson { .. }) {
            let gap = self.draw_interarrival(flow);
            self.schedule(self.now + gap, Payload::PacketArrival { flow });
        }
        let n = &self.nodes[src];
        if n.micro == Micro::Idle && n.ctx.is_none() && n.tx.is_none() {
            self.try_access(src);
        }
    }

    /// Delivered or dropped; pops the head packet and keeps saturated sources
    /// topped up.
    fn resolve_front(&mut self, idx: usize, delivered: bool) {
        let pkt = self.nodes[idx].queue.pop_front().expect("resolving head packet");
        let flow = pkt.flow;
        self.nodes[idx].retries = 0;
        if delivered {
            self.delivered += 1;
            self.flows[flow].delivered += 1;
            let bits = self.cfg.payload_bytes * 8;
            self.delivered_bits += bits;
            self.bit_meters += bits as f64 * self.flows[flow].dist_m;
            if self.cfg.record_trace {
                self.trace.push(TraceRecord::Delivered {
                    time: self.now,
                    flow,
                    src: self.nodes[self.flows[flow].src].id,
                    dst: self.nodes[self.flows[flow].dst].id,
                });
            }
            if let Some(stop) = self.cfg.stop_after_delivered {
                if self.delivered >= stop {
                    self.stop_at = Some(self.now);
                }
            }
        } else {
            self.dropped += 1;
            self.flows[flow].dropped += 1;
            if self.cfg.record_trace {
                self.trace.push(TraceRecord::Dropped {
                    time: self.now,
                    flow,
                    src: self.nodes[self.flows[flow].src].id,
                });
            }
        }
        if matches!(self.cfg.traffic, TrafficModel::Saturated) {
            self.schedule(self.now, Payload::PacketArrival { flow });
        }
    }

    // -- control-channel access --------------------------------------------

    fn cw(&self, retries: u32) -> u64 {
        (32u64 << retries.min(10)).min(1024)
    }

    fn try_access(&mut self, idx: usize) {
        debug_assert_eq!(self.nodes[idx].micro, Micro::Idle);
        if self.nodes[idx].queue.is_empty() {
            return;
        }
        self.bill(idx);
        if self.channel_busy(idx, CONTROL) {
            let until = self.busy_until(idx, CONTROL);
            let n = &mut self.nodes[idx];
            n.micro = Micro::RestartWait;
            n.pending_backoff = true;
            n.gen += 1;
            let gen = n.gen;
            self.schedule(until, Payload::StateTransition { node: idx, gen });
            self.revalidate_candidacy(idx);
            return;
        }
        let slots = if self.nodes[idx].pending_backoff {
            self.nodes[idx].pending_backoff = false;
            let cw = self.cw(self.nodes[idx].retries);
            self.mac_rngs[idx].random_range(0..cw)
        } else {
            0
        };
        let deadline = self.now + self.cfg.difs_us + slots * self.cfg.slot_us;
        self.nodes[idx].micro = Micro::SenseWait;
        self.timer(idx, deadline, TimerKind::SenseDone);
        self.revalidate_candidacy(idx);
    }

    fn handle_transition(&mut self, idx: usize, gen: u64) {
        if self.nodes[idx].gen != gen {
            return;
        }
        match self.nodes[idx].micro {
            Micro::AwaitVeto => {
                // The sensed alarm never resolved into a decodable veto:
                // back off by the blind estimate.
                self.bill(idx);
                let until = self.now + self.estimated_backoff;
                let n = &mut self.nodes[idx];
                n.micro = Micro::Backoff;
                n.gen += 1;
                let g = n.gen;
                self.schedule(until, Payload::StateTransition { node: idx, gen: g });
                self.revalidate_candidacy(idx);
                if self.cfg.record_trace {
                    self.trace.push(TraceRecord::Aborted {
                        time: self.now,
                        node: self.nodes[idx].id,
                        backoff_until: until,
                    });
                }
            }
            Micro::Backoff | Micro::Deferred | Micro::RestartWait => {
                self.bill(idx);
                self.nodes[idx].micro = Micro::Idle;
                self.try_access(idx);
            }
            _ => {}
        }
    }

    fn sense_done(&mut self, idx: usize) {
        if self.nodes[idx].micro != Micro::SenseWait {
            return;
        }
        debug_assert!(!self.channel_busy(idx, CONTROL), "sense should have been interrupted");
        let pkt = *self.nodes[idx].queue.front().expect("sensing with a packet");
        let dst = self.flows[pkt.flow].dst;
        let m = self.cfg.n_data_channels;

        // A node acts on its own knowledge first: no point hailing a receiver
        // its table says is away on a data channel. Cooperation exists for the
        // gaps this check cannot see.
        let engaged_until = self.nodes[idx]
            .table
            .find_engagement(self.nodes[dst].id, self.now)
            .map(|e| e.release_time);
        if let Some(until) = engaged_until {
            self.defer(idx, until);
            return;
        }

        let choice = select_channel(
            self.cfg.variant,
            &self.nodes[idx].table,
            m,
            self.now,
            &mut self.mac_rngs[idx],
        );
        match choice {
            ChannelChoice::Choose(c) => {
                self.nodes[idx].ctx = Some(Exchange {
                    role: Role::Sender,
                    peer: dst,
                    flow: Some(pkt.flow),
                    channel: c,
                    release: 0,
                });
                self.nodes[idx].micro = Micro::AwaitPrb;
                self.nodes[idx].gen += 1;
                self.handshakes_started += 1;
                // The answer window admits either outcome of the hail: the
                // receiver's PRB, or — when the receiver is away — a deaf-
                // terminal veto sent in the PRB's empty slot (vetoes run a
                // little longer than a PRB, plus their carrier-sense jitter).
                let window_end = self.now
                    + self.t.t_pra
                    + self.t.sifs
                    + self.t.t_prb.max(self.t.t_inv)
                    + self.t.ccap
                    + 1;
                self.timer(idx, window_end, TimerKind::PrbWindowEnd);
                let frame = ControlFrame {
                    kind: FrameKind::Pra,
                    src: self.nodes[idx].id,
                    dst: Some(self.nodes[dst].id),
                    proposed_channel: Some(c),
                    reservation_until: None,
                    usage: None,
                };
                self.queue_tx(idx, CONTROL, AirFrame::Control(frame));
            }
            ChannelChoice::Defer { until } => self.defer(idx, until),
        }
    }

    fn defer(&mut self, idx: usize, until: SimTime) {
        self.bill(idx);
        let n = &mut self.nodes[idx];
        n.micro = Micro::Deferred;
        n.gen += 1;
        let gen = n.gen;
        self.schedule(until.max(self.now), Payload::StateTransition { node: idx, gen });
        self.revalidate_candidacy(idx);
    }

    /// Handshake attempt failed outright: back off exponentially or give the
    /// packet up.
    fn fail_attempt(&mut self, idx: usize) {
        self.failed_attempts += 1;
        self.bill(idx);
        self.nodes[idx].ctx = None;
        self.nodes[idx].gen += 1;
        self.nodes[idx].retries += 1;
        if self.nodes[idx].retries > self.cfg.retry_limit {
            self.resolve_front(idx, false);
            self.nodes[idx].micro = Micro::Idle;
            if !self.nodes[idx].queue.is_empty() {
                self.try_access(idx);
            } else {
                self.revalidate_candidacy(idx);
            }
            return;
        }
        let cw = self.cw(self.nodes[idx].retries);
        let slots = self.mac_rngs[idx].random_range(0..cw);
        let until = self.now + slots * self.cfg.slot_us;
        let n = &mut self.nodes[idx];
        n.micro = Micro::Backoff;
        let gen = n.gen;
        self.schedule(until, Payload::StateTransition { node: idx, gen });
        self.revalidate_candidacy(idx);
    }

    /// A veto (decoded or garbled) tears the handshake down. A veto that
    /// merely lengthens an existing backoff counts as information, not as an
    /// aborted handshake.
    fn abort_handshake(&mut self, idx: usize, until: SimTime) {
        if self.nodes[idx].ctx.is_some() {
            self.aborted_by_veto += 1;
        }
        self.bill(idx);
        let role = self.nodes[idx].ctx.map(|c| c.role);
        self.nodes[idx].ctx = None;
        self.nodes[idx].gen += 1;
        self.nodes[idx].pending_backoff = true;
        if self.cfg.record_trace {
            self.trace.push(TraceRecord::Aborted {
                time: self.now,
                node: self.nodes[idx].id,
                backoff_until: until,
            });
        }
        match role {
            Some(Role::Receiver) => {
                self.nodes[idx].micro = Micro::Idle;
                self.revalidate_candidacy(idx);
                if !self.nodes[idx].queue.is_empty() {
                    self.try_access(idx);
                }
            }
            _ => {
                let n = &mut self.nodes[idx];
                n.micro = Micro::Backoff;
                let gen = n.gen;
                let at = until.max(self.now);
                self.schedule(at, Payload::StateTransition { node: idx, gen });
                self.revalidate_candidacy(idx);
            }
        }
    }

    // -- transmissions -----------------------------------------------------

    fn queue_tx(&mut self, src: usize, channel: usize, frame: AirFrame) {
        self.schedule(self.now, Payload::FrameTxStart { src, channel, frame });
    }

    fn handle_tx_start(&mut self, src: usize, channel: usize, frame: AirFrame) {
        debug_assert_eq!(self.nodes[src].tuned, Some(channel), "transmit on the tuned channel");
        let dur = self.frame_duration(&frame);
        let end = self.now + dur;
        let id = self.next_frame_id;
        self.next_frame_id += 1;

        // Close out the billing period that the new energy is about to end.
        self.bill_listeners(channel);
        self.bill(src);

        // Ideal wake-on-request: a power-saving peer addressed by this frame
        // comes up for the frame's duration (through the end instant, so the
        // final reception bill sees it awake).
        if let AirFrame::Control(cf) = &frame {
            if let Some(dst_id) = cf.dst {
                if let Some(d) = self.index_of(dst_id) {
                    if self.psm_peer(d) && self.nodes[d].tuned == Some(channel) {
                        self.bill(d);
                        let until = self.nodes[d].forced_awake_until.max(end + 1);
                        self.nodes[d].forced_awake_until = until;
                    }
                }
            }
        }

        // A transmission tramples the transmitter's own carrier sense.
        if self.nodes[src].micro == Micro::SenseWait {
            let n = &mut self.nodes[src];
            n.micro = Micro::RestartWait;
            n.pending_backoff = true;
            n.gen += 1;
            let gen = n.gen;
            self.schedule(end, Payload::StateTransition { node: src, gen });
        }

        // Anyone mid-sense who can hear this restarts their attempt after it.
        for i in 0..self.nodes.len() {
            if i != src
                && self.nodes[i].micro == Micro::SenseWait
                && self.nodes[i].tuned == Some(channel)
                && self.in_int_range(src, i)
            {
                let n = &mut self.nodes[i];
                n.micro = Micro::RestartWait;
                n.pending_backoff = true;
                n.gen += 1;
                let gen = n.gen;
                self.schedule(end, Payload::StateTransition { node: i, gen });
            }
        }

        let dst_idx = match &frame {
            AirFrame::Control(cf) => cf.dst.and_then(|d| self.index_of(d)),
            AirFrame::Data { receiver, .. } | AirFrame::Ack { receiver, .. } => Some(*receiver),
        };
        let candidates: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| {
                i != src
                    && self.nodes[i].tuned == Some(channel)
                    && self.nodes[i].tx.is_none()
                    && self.is_awake(i)
                    && self.in_tx_range(src, i)
            })
            .collect();

        let interferers: Vec<usize> = self.ongoing[channel]
            .iter()
            .map(|fid| self.flights[fid].src)
            .collect();
        for fid in &self.ongoing[channel] {
            let f = self.flights.get_mut(fid).expect("ongoing flight");
            f.interferers.push(src);
        }

        if self.cfg.record_trace {
            self.trace.push(TraceRecord::FrameStart {
                time: self.now,
                frame_id: id,
                channel,
                kind: frame.kind_name(),
                src: self.nodes[src].id,
                dst: dst_idx.map(|d| self.nodes[d].id),
            });
        }

        self.flights.insert(
            id,
            Flight { src, ch: channel, end, frame, candidates, interferers },
        );
        self.ongoing[channel].push(id);
        self.nodes[src].tx = Some(id);
        // The transmitter can no longer receive anything overlapping.
        self.revalidate_candidacy(src);
        self.schedule(end, Payload::FrameTxEnd { frame_id: id });
    }

    fn handle_tx_end(&mut self, frame_id: u64) {
        // Billing boundary: energy is about to disappear.
        let ch = self.flights[&frame_id].ch;
        self.bill_listeners(ch);

        let flight = self.flights.remove(&frame_id).expect("ending flight");
        self.ongoing[ch].retain(|&f| f != frame_id);
        let src = flight.src;
        self.bill(src);
        self.nodes[src].tx = None;

        // Reception: among surviving candidates, the frame is decodable when
        // its power beats the capture threshold over the sum of overlappers.
        let mut decoders = Vec::new();
        for &cand in &flight.candidates {
            let sig = self.gain(src, cand);
            let interf: f64 =
                flight.interferers.iter().map(|&i| self.gain(i, cand)).sum();
            if interf == 0.0 || sig >= self.capture_ratio * interf {
                decoders.push(cand);
            } else {
                self.decode_failures += 1;
            }
        }

        if self.cfg.record_trace {
            let mut ids: Vec<NodeId> = decoders.iter().map(|&d| self.nodes[d].id).collect();
            ids.sort();
            self.trace.push(TraceRecord::FrameEnd {
                time: self.now,
                frame_id,
                decoded_by: ids,
            });
        }

        // The transmitter moves on.
        self.after_own_tx(src, &flight.frame);

        // Receivers react in ascending node order.
        for &d in &decoders {
            self.on_decoded(d, src, &flight.frame);
        }

        // The idealized oracle sees every handshake frame regardless of who
        // decoded it.
        if self.genie() {
            if let AirFrame::Control(cf) = &flight.frame {
                self.genie_oracle(cf);
            }
        }
    }

    /// Transmitter-side continuation once its own frame has left the air.
    fn after_own_tx(&mut self, src: usize, frame: &AirFrame) {
        match frame {
            AirFrame::Control(cf) => match cf.kind {
                FrameKind::Pra | FrameKind::Prb => {}
                FrameKind::Cfa => {}
                FrameKind::Cfb => {
                    // Receiver commit point: the exchange is on.
                    if self.nodes[src].micro == Micro::CommitReceiver {
                        let ctx = self.nodes[src].ctx.expect("receiver context");
                        if self.cfg.record_trace {
                            self.trace.push(TraceRecord::Commit {
                                time: self.now,
                                sender: self.nodes[ctx.peer].id,
                                receiver: self.nodes[src].id,
                                channel: data_ch(ctx.channel),
                                release: ctx.release,
                            });
                        }
                        let timeout = self.now
                            + self.cfg.switch_us
                            + self.t.t_data
                            + self.t.sifs
                            + self.t.t_ack
                            + 100;
                        self.timer(src, timeout, TimerKind::DataTimeout);
                        self.begin_switch(src, data_ch(ctx.channel), SwitchThen::ReceiverAwaitData);
                    }
                }
                FrameKind::Inv => {
                    // Detector resumes whatever it was doing.
                }
                FrameKind::Ncf => {
                    if self.nodes[src].micro == Micro::CleanupNcf {
                        self.fail_attempt(src);
                    }
                }
            },
            AirFrame::Data { .. } => {
                // AckTimeout is already armed.
            }
            AirFrame::Ack { .. } => {
                // Receiver heads home.
                if self.nodes[src].micro == Micro::AwaitData {
                    self.nodes[src].gen += 1;
                    self.begin_switch(src, CONTROL, SwitchThen::BackReceiver);
                }
            }
        }
    }

    fn begin_switch(&mut self, idx: usize, to: usize, then: SwitchThen) {
        self.bill(idx);
        self.nodes[idx].micro = Micro::Switching;
        self.nodes[idx].tuned = None;
        self.revalidate_candidacy(idx);
        self.schedule(
            self.now + self.cfg.switch_us,
            Payload::ChannelSwitchDone { node: idx, to, then },
        );
    }

    fn handle_switch_done(&mut self, idx: usize, to: usize, then: SwitchThen) {
        self.bill(idx);
        self.nodes[idx].tuned = Some(to);
        match then {
            SwitchThen::SenderStartData => {
                let ctx = self.nodes[idx].ctx.expect("sender context");
                self.nodes[idx].micro = Micro::AwaitAck;
                let timeout = self.now + self.t.t_data + self.t.sifs + self.t.t_ack + 1;
                self.timer(idx, timeout, TimerKind::AckTimeout);
                self.queue_tx(
                    idx,
                    to,
                    AirFrame::Data {
                        sender: idx,
                        receiver: ctx.peer,
                        flow: ctx.flow.expect("sender flow"),
                    },
                );
            }
            SwitchThen::ReceiverAwaitData => {
                self.nodes[idx].micro = Micro::AwaitData;
            }
            SwitchThen::BackSuccess => {
                self.nodes[idx].ctx = None;
                self.nodes[idx].micro = Micro::Idle;
                if !self.nodes[idx].queue.is_empty() {
                    self.try_access(idx);
                }
            }
            SwitchThen::BackFail => {
                self.nodes[idx].micro = Micro::Idle;
                self.fail_attempt(idx);
            }
            SwitchThen::BackReceiver => {
                self.nodes[idx].ctx = None;
                self.nodes[idx].micro = Micro::Idle;
                if !self.nodes[idx].queue.is_empty() {
                    self.try_access(idx);
                }
            }
        }
    }

    // -- timers --------------------------------------------------------------

    fn handle_timer(&mut self, node: usize, gen: u64, kind: TimerKind) {
        if let TimerKind::InvFire { dst, usage } = kind {
            self.inv_fire(node, dst, usage);
            return;
        }
        if self.nodes[node].gen != gen {
            return;
        }
        match kind {
            TimerKind::SenseDone => self.sense_done(node),
            TimerKind::PrbWindowEnd => {
                if self.nodes[node].micro == Micro::AwaitPrb {
                    self.fail_attempt(node);
                }
            }
            TimerKind::SendPrb { channel } => {
                if self.nodes[node].micro == Micro::AwaitCfa {
                    let ctx = self.nodes[node].ctx.expect("receiver context");
                    let frame = ControlFrame {
                        kind: FrameKind::Prb,
                        src: self.nodes[node].id,
                        dst: Some(self.nodes[ctx.peer].id),
                        proposed_channel: Some(channel),
                        reservation_until: None,
                        usage: None,
                    };
                    self.queue_tx(node, CONTROL, AirFrame::Control(frame));
                }
            }
            TimerKind::SendCfa => {
                if self.nodes[node].micro != Micro::CcapSender {
                    return;
                }
                if self.channel_busy(node, CONTROL) {
                    // Energy inside the veto window is an alarm: only a veto
                    // can legally occupy it, since every handshake waits out a
                    // full DIFS, which is longer than the window. Tear the
                    // handshake down but hold the radio in receive until the
                    // alarm ends; decoding it yields the exact blocking
                    // reservation, garble falls back to the blind estimate.
                    self.aborted_by_veto += 1;
                    self.bill(node);
                    self.nodes[node].ctx = None;
                    self.nodes[node].gen += 1;
                    self.nodes[node].pending_backoff = true;
                    self.nodes[node].micro = Micro::AwaitVeto;
                    let verdict = self.busy_until(node, CONTROL) + 1;
                    let gen = self.nodes[node].gen;
                    self.schedule(verdict, Payload::StateTransition { node, gen });
                    if self.cfg.record_trace {
                        self.trace.push(TraceRecord::Aborted {
                            time: self.now,
                            node: self.nodes[node].id,
                            backoff_until: verdict,
                        });
                    }
                    return;
                }
                let release = self.now
                    + self.t.t_cfa
                    + self.t.sifs
                    + self.t.t_cfb
                    + self.cfg.switch_us
                    + self.t.t_data
                    + self.t.sifs
                    + self.t.t_ack
                    + self.cfg.switch_us;
                let ctx = self.nodes[node].ctx.as_mut().expect("sender context");
                ctx.release = release;
                let (peer, channel) = (ctx.peer, ctx.channel);
                self.nodes[node].micro = Micro::AwaitCfb;
                let timeout = self.now + self.t.t_cfa + self.t.sifs + self.t.t_cfb + 1;
                self.timer(node, timeout, TimerKind::CfbTimeout);
                let frame = ControlFrame {
                    kind: FrameKind::Cfa,
                    src: self.nodes[node].id,
                    dst: Some(self.nodes[peer].id),
                    proposed_channel: Some(channel),
                    reservation_until: Some(release),
                    usage: None,
                };
                self.queue_tx(node, CONTROL, AirFrame::Control(frame));
            }
            TimerKind::CfaTimeout => {
                if self.nodes[node].micro == Micro::AwaitCfa {
                    // Seat empty: the sender was vetoed or lost. Quietly stand
                    // down.
                    self.bill(node);
                    self.nodes[node].ctx = None;
                    self.nodes[node].gen += 1;
                    self.nodes[node].micro = Micro::Idle;
                    self.revalidate_candidacy(node);
                    if !self.nodes[node].queue.is_empty() {
                        self.try_access(node);
                    }
                }
            }
            TimerKind::SendCfb => {
                if self.nodes[node].micro == Micro::CommitReceiver {
                    let ctx = self.nodes[node].ctx.expect("receiver context");
                    let frame = ControlFrame {
                        kind: FrameKind::Cfb,
                        src: self.nodes[node].id,
                        dst: Some(self.nodes[ctx.peer].id),
                        proposed_channel: Some(ctx.channel),
                        reservation_until: Some(ctx.release),
                        usage: None,
                    };
                    self.queue_tx(node, CONTROL, AirFrame::Control(frame));
                }
            }
            TimerKind::CfbTimeout => {
                if self.nodes[node].micro == Micro::AwaitCfb {
                    let ctx = self.nodes[node].ctx.expect("sender context");
                    let usage = UsageEntry {
                        channel: ctx.channel,
                        sender: self.nodes[node].id,
                        receiver: self.nodes[ctx.peer].id,
                        release_time: ctx.release,
                    };
                    self.ncf_sent += 1;
                    self.nodes[node].micro = Micro::CleanupNcf;
                    let frame = ControlFrame {
                        kind: FrameKind::Ncf,
                        src: self.nodes[node].id,
                        dst: None,
                        proposed_channel: None,
                        reservation_until: None,
                        usage: Some(usage),
                    };
                    self.queue_tx(node, CONTROL, AirFrame::Control(frame));
                }
            }
            TimerKind::SendAck => {
                if self.nodes[node].micro == Micro::AwaitData {
                    let ctx = self.nodes[node].ctx.expect("receiver context");
                    let ch = self.nodes[node].tuned.expect("on data channel");
                    self.queue_tx(
                        node,
                        ch,
                        AirFrame::Ack { sender: node, receiver: ctx.peer },
                    );
                }
            }
            TimerKind::AckTimeout => {
                if self.nodes[node].micro == Micro::AwaitAck {
                    self.nodes[node].gen += 1;
                    self.begin_switch(node, CONTROL, SwitchThen::BackFail);
                }
            }
            TimerKind::DataTimeout => {
                if self.nodes[node].micro == Micro::AwaitData {
                    self.nodes[node].gen += 1;
                    self.begin_switch(node, CONTROL, SwitchThen::BackReceiver);
                }
            }
            TimerKind::InvFire { .. } => unreachable!("handled above"),
        }
    }

    // -- reception ----------------------------------------------------------

    fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Does this node's MAC accept and process a frame not addressed to it?
    fn promiscuous(&self, idx: usize) -> bool {
        match self.nodes[idx].kind {
            NodeKind::Altruist => true,
            NodeKind::Peer => self.cfg.variant.peers_overhear(),
        }
    }

    fn on_decoded(&mut self, idx: usize, src: usize, frame: &AirFrame) {
        match frame {
            AirFrame::Control(cf) => self.on_control_decoded(idx, src, cf),
            AirFrame::Data { sender, receiver, .. } => {
                if idx == *receiver
                    && self.nodes[idx].micro == Micro::AwaitData
                    && self.nodes[idx].ctx.map(|c| c.peer) == Some(*sender)
                {
                    self.nodes[idx].gen += 1;
                    self.timer(idx, self.now + self.t.sifs, TimerKind::SendAck);
                }
            }
            AirFrame::Ack { sender, receiver } => {
                if idx == *receiver
                    && self.nodes[idx].micro == Micro::AwaitAck
                    && self.nodes[idx].ctx.map(|c| c.peer) == Some(*sender)
                {
                    self.nodes[idx].gen += 1;
                    self.resolve_front(idx, true);
                    self.begin_switch(idx, CONTROL, SwitchThen::BackSuccess);
                }
            }
        }
    }

    fn on_control_decoded(&mut self, idx: usize, src: usize, cf: &ControlFrame) {
        let addressed = cf.dst == Some(self.nodes[idx].id);
        // A veto is protocol traffic for the handshake it dooms, not third-
        // party gossip: a node holding in receive for one, and a node with an
        // exchange of its own in progress (whose control window exists to
        // admit exactly this frame), read it no matter whom it names.
        // Everyone else applies the MAC filter.
        let heeds_veto = cf.kind == FrameKind::Inv
            && (self.nodes[idx].micro == Micro::AwaitVeto || self.nodes[idx].ctx.is_some());
        if !addressed && !self.promiscuous(idx) && !heeds_veto {
            return;
        }

        // Update local knowledge. Frames of the node's own exchange never
        // feed its table (it tracks *other* pairs' reservations); a veto does,
        // since the usage it carries is somebody else's.
        let own_exchange = cf.src == self.nodes[idx].id || addressed;
        if !own_exchange || cf.kind == FrameKind::Inv {
            self.nodes[idx].table.observe_frame(cf, self.now);
        }

        match cf.kind {
            FrameKind::Pra => {
                if addressed {
                    self.on_pra_addressed(idx, src, cf);
                }
                self.consider_veto(idx, src, cf);
            }
            FrameKind::Prb => {
                if addressed && self.nodes[idx].micro == Micro::AwaitPrb {
                    let ctx = self.nodes[idx].ctx.as_mut().expect("sender context");
                    if ctx.peer == src {
                        ctx.channel = cf.proposed_channel.expect("PRB names a channel");
                        self.nodes[idx].gen += 1;
                        self.nodes[idx].micro = Micro::CcapSender;
                        self.timer(idx, self.now + self.t.ccap, TimerKind::SendCfa);
                    }
                }
                self.consider_veto(idx, src, cf);
            }
            FrameKind::Cfa => {
                if addressed
                    && self.nodes[idx].micro == Micro::AwaitCfa
                    && self.nodes[idx].ctx.map(|c| c.peer) == Some(src)
                {
                    let release = cf.reservation_until.expect("CFA carries the release");
                    let channel = cf.proposed_channel.expect("CFA names the channel");
                    {
                        let ctx = self.nodes[idx].ctx.as_mut().expect("receiver context");
                        ctx.release = release;
                        ctx.channel = channel;
                    }
                    self.nodes[idx].gen += 1;
                    self.nodes[idx].micro = Micro::CommitReceiver;
                    self.timer(idx, self.now + self.t.sifs, TimerKind::SendCfb);
                }
            }
            FrameKind::Cfb => {
                if addressed
                    && self.nodes[idx].micro == Micro::AwaitCfb
                    && self.nodes[idx].ctx.map(|c| c.peer) == Some(src)
                {
                    self.nodes[idx].gen += 1;
                    let ctx = self.nodes[idx].ctx.expect("sender context");
                    self.begin_switch(idx, data_ch(ctx.channel), SwitchThen::SenderStartData);
                }
            }
            FrameKind::Inv => {
                if let Some(usage) = cf.usage {
                    self.on_inv_decoded(idx, addressed, usage);
                }
            }
            FrameKind::Ncf => {}
        }
    }

    fn on_pra_addressed(&mut self, idx: usize, src: usize, cf: &ControlFrame) {
        // Receiver role preempts a not-yet-started attempt of our own.
        let preemptible = matches!(
            self.nodes[idx].micro,
            Micro::Idle | Micro::SenseWait | Micro::RestartWait | Micro::Backoff | Micro::Deferred
        );
        if !preemptible || self.nodes[idx].ctx.is_some() || self.nodes[idx].tx.is_some() {
            return;
        }
        let proposal = cf.proposed_channel.expect("PRA names a channel");
        let m = self.cfg.n_data_channels;
        let confirmed = confirm_channel(
            self.cfg.variant,
            &self.nodes[idx].table,
            proposal,
            m,
            self.now,
            &mut self.mac_rngs[idx],
        );
        self.bill(idx);
        self.nodes[idx].gen += 1;
        self.nodes[idx].pending_backoff = true;
        match confirmed {
            Some(ch) => {
                self.nodes[idx].ctx = Some(Exchange {
                    role: Role::Receiver,
                    peer: src,
                    flow: None,
                    channel: ch,
                    release: 0,
                });
                self.nodes[idx].micro = Micro::AwaitCfa;
                self.timer(idx, self.now + self.t.sifs, TimerKind::SendPrb { channel: ch });
                let timeout =
                    self.now + self.t.sifs + self.t.t_prb + self.t.ccap + self.t.t_cfa + 1;
                self.timer(idx, timeout, TimerKind::CfaTimeout);
            }
            None => {
                // Nothing believed free: let the sender time out.
                self.nodes[idx].micro = Micro::Idle;
                if !self.nodes[idx].queue.is_empty() {
                    self.try_access(idx);
                }
            }
        }
    }

    fn on_inv_decoded(&mut self, idx: usize, addressed: bool, usage: UsageEntry) {
        let relevant = if self.nodes[idx].micro == Micro::AwaitVeto {
            // This node tore its handshake down on this veto's energy and
            // kept the radio on precisely to read it.
            true
        } else if let Some(ctx) = self.nodes[idx].ctx {
            addressed
                || usage.channel == ctx.channel
                || usage.involves(self.nodes[ctx.peer].id)
                || usage.involves(self.nodes[idx].id)
        } else if !self.nodes[idx].queue.is_empty() {
            // Contending but not yet engaged: only deafness of our own target
            // matters.
            let pkt = self.nodes[idx].queue.front().expect("nonempty queue");
            let target = self.nodes[self.flows[pkt.flow].dst].id;
            usage.involves(target)
                && matches!(
                    self.nodes[idx].micro,
                    Micro::SenseWait | Micro::RestartWait | Micro::Backoff | Micro::Deferred
                )
        } else {
            false
        };
        if !relevant {
            return;
        }
        // Who this node is trying to reach decides the stand-down: a blocked
        // counterpart means waiting out the reservation, a blocked channel
        // only means picking again.
        let own_target = if let Some(ctx) = self.nodes[idx].ctx {
            Some(self.nodes[ctx.peer].id)
        } else if let Some(pkt) = self.nodes[idx].queue.front() {
            Some(self.nodes[self.flows[pkt.flow].dst].id)
        } else {
            None
        };
        match on_inv_received(self.phase_of(idx), &usage, own_target, self.now) {
            InvResponse::Abort { until } => self.abort_handshake(idx, until),
            InvResponse::Ignore => {}
        }
    }

    // -- cooperation ---------------------------------------------------------

    /// Start of the veto window for a handshake frame ending now. A deaf-
    /// terminal veto (triggered by the PRA) claims the slot where the PRB
    /// would have been: one SIFS after the hail. SIFS plus the full
    /// carrier-sense jitter still undercuts DIFS, so the veto owns the
    /// channel before any ordinary contender may start, and the hailing
    /// sender is still inside its answer window when the veto lands. A
    /// conflict veto (triggered by the PRB) starts right after it.
    fn veto_window_start(&self, kind: FrameKind) -> SimTime {
        match kind {
            FrameKind::Pra => self.now + self.t.sifs,
            _ => self.now,
        }
    }

    /// A bystander that decoded a handshake frame checks its table. Deafness
    /// must be caught on the PRA (a deaf addressee never answers); channel
    /// conflicts are judged on the PRB, whose channel choice is the final one.
    fn consider_veto(&mut self, idx: usize, src: usize, cf: &ControlFrame) {
        let eligible = match (self.cfg.variant, self.nodes[idx].kind) {
            (ProtocolVariant::DishP, NodeKind::Peer) => true,
            (ProtocolVariant::Altruistic, NodeKind::Altruist) => true,
            _ => false,
        };
        if !eligible
            || self.nodes[idx].ctx.is_some()
            || self.nodes[idx].tx.is_some()
            || !matches!(
                self.nodes[idx].micro,
                Micro::Idle
                    | Micro::SenseWait
                    | Micro::RestartWait
                    | Micro::Backoff
                    | Micro::Deferred
            )
        {
            return;
        }
        let problem = self.nodes[idx].table.detect_mcc(cf, self.now);
        let usage = match (cf.kind, problem) {
            (FrameKind::Pra, Some(MccProblem::DeafTerminal { blocking, .. })) => blocking,
            (FrameKind::Prb, Some(MccProblem::ChannelConflict { blocking, .. })) => blocking,
            _ => return,
        };
        let action = cooperation_policy(
            self.cfg.variant,
            self.nodes[idx].kind,
            self.t.ccap,
            &mut self.mac_rngs[idx],
        )
        .expect("eligible detector")
        .expect("cooperative variant");
        let fire_at = self.veto_window_start(cf.kind) + action.wait;
        if self.cfg.record_trace {
            self.trace.push(TraceRecord::VetoScheduled {
                time: self.now,
                detector: self.nodes[idx].id,
                target: cf.src,
                fire_at,
            });
        }
        let gen = self.nodes[idx].gen;
        self.schedule(
            fire_at,
            Payload::Timer { node: idx, gen, kind: TimerKind::InvFire { dst: src, usage } },
        );
    }

    /// The idealized in-situ election: every unengaged neighbor is assumed to
    /// have kept gathering while its ledger slept, and the one whose table
    /// knows the longest-lived blocking reservation is nominated to answer.
    /// Exactly one detector speaks per problem; everyone else stays silent.
    fn genie_oracle(&mut self, cf: &ControlFrame) {
        if !matches!(cf.kind, FrameKind::Pra | FrameKind::Prb) {
            return;
        }
        let Some(target) = self.index_of(cf.src) else { return };
        let participant_b = cf.dst.and_then(|d| self.index_of(d));
        let verdicts: Vec<(NodeId, UsageEntry)> = (0..self.nodes.len())
            .filter(|&i| {
                self.nodes[i].kind == NodeKind::Peer
                    && i != target
                    && Some(i) != participant_b
                    && self.nodes[i].ctx.is_none()
                    && self.nodes[i].tx.is_none()
                    && self.nodes[i].tuned == Some(CONTROL)
                    && matches!(
                        self.nodes[i].micro,
                        Micro::Idle
                            | Micro::SenseWait
                            | Micro::RestartWait
                            | Micro::Backoff
                            | Micro::Deferred
                    )
                    && self.in_tx_range(i, target)
            })
            .filter_map(|i| {
                let problem = self.nodes[i].table.detect_mcc(cf, self.now);
                match (cf.kind, problem) {
                    (FrameKind::Pra, Some(MccProblem::DeafTerminal { blocking, .. }))
                    | (FrameKind::Prb, Some(MccProblem::ChannelConflict { blocking, .. })) => {
                        Some((self.nodes[i].id, blocking))
                    }
                    _ => None,
                }
            })
            .collect();
        let knowledge: Vec<(NodeId, SimTime)> =
            verdicts.iter().map(|(id, u)| (*id, u.release_time)).collect();
        let Some(best) = best_neighbor(&knowledge) else { return };
        let usage = verdicts
            .iter()
            .find(|(id, _)| *id == best)
            .map(|(_, u)| *u)
            .expect("nominee came from the verdict list");
        let det = self.index_of(best).expect("nominated detector exists");
        let action = cooperation_policy(
            self.cfg.variant,
            NodeKind::Peer,
            self.t.ccap,
            &mut self.mac_rngs[det],
        )
        .expect("peer detector")
        .expect("genie cooperates");
        let fire_at = self.veto_window_start(cf.kind) + action.wait;
        if self.cfg.record_trace {
            self.trace.push(TraceRecord::VetoScheduled {
                time: self.now,
                detector: best,
                target: cf.src,
                fire_at,
            });
        }
        let gen = self.nodes[det].gen;
        self.schedule(
            fire_at,
            Payload::Timer { node: det, gen, kind: TimerKind::InvFire { dst: target, usage } },
        );
    }

    fn inv_fire(&mut self, det: usize, dst: usize, usage: UsageEntry) {
        let eligible = self.nodes[det].ctx.is_none()
            && self.nodes[det].tx.is_none()
            && self.nodes[det].tuned == Some(CONTROL)
            && matches!(
                self.nodes[det].micro,
                Micro::Idle
                    | Micro::SenseWait
                    | Micro::RestartWait
                    | Micro::Backoff
                    | Micro::Deferred
            );
        if !eligible || usage.release_time <= self.now {
            self.vetoes_suppressed += 1;
            return;
        }
        if self.channel_busy(det, CONTROL) {
            // Someone else's veto (or other traffic) is already in the air.
            self.vetoes_suppressed += 1;
            return;
        }
        self.vetoes_sent += 1;
        self.nodes[det].inv_sent += 1;
        let frame = ControlFrame {
            kind: FrameKind::Inv,
            src: self.nodes[det].id,
            dst: Some(self.nodes[dst].id),
            proposed_channel: None,
            reservation_until: None,
            usage: Some(usage),
        };
        self.queue_tx(det, CONTROL, AirFrame::Control(frame));
    }

    // -- wrap-up -------------------------------------------------------------

    fn finish(self, end: SimTime) -> RunResult {
        let dur_s = end as f64 / 1e6;
        let mut peer_energy = EnergyLedger::new();
        let mut altruist_energy = EnergyLedger::new();
        let mut n_peers = 0usize;
        let mut n_alts = 0usize;
        let mut per_node = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            match n.kind {
                NodeKind::Peer => {
                    peer_energy.merge(&n.ledger);
                    n_peers += 1;
                }
                NodeKind::Altruist => {
                    altruist_energy.merge(&n.ledger);
                    n_alts += 1;
                }
            }
            per_node.push(NodeReport {
                id: n.id,
                kind: n.kind,
                ledger: n.ledger,
                avg_power_w: n.ledger.average_power_w(&self.cfg.power),
                inv_sent: n.inv_sent,
            });
        }
        let residual: u64 = self.nodes.iter().map(|n| n.queue.len() as u64).sum();
        debug_assert_eq!(self.arrivals, self.delivered + self.dropped + residual);

        let peer_avg_power_w = if n_peers > 0 && dur_s > 0.0 {
            peer_energy.energy_joules(&self.cfg.power) / (n_peers as f64 * dur_s)
        } else {
            0.0
        };
        let altruist_avg_power_w = if n_alts > 0 && dur_s > 0.0 {
            altruist_energy.energy_joules(&self.cfg.power) / (n_alts as f64 * dur_s)
        } else {
            0.0
        };
        let max_class_power_w = if n_alts > 0 {
            peer_avg_power_w.max(altruist_avg_power_w)
        } else {
            peer_avg_power_w
        };
        let bm_per_s = if dur_s > 0.0 { self.bit_meters / dur_s } else { 0.0 };

        RunResult {
            variant: self.cfg.variant,
            master_seed: self.cfg.master_seed,
            duration_us: end,
            arrivals: self.arrivals,
            delivered: self.delivered,
            dropped: self.dropped,
            residual,
            delivered_payload_bits: self.delivered_bits,
            bit_meters: self.bit_meters,
            throughput_bps: aggregate_throughput_bps(self.delivered_bits, end),
            handshakes_started: self.handshakes_started,
            vetoes_sent: self.vetoes_sent,
            vetoes_suppressed: self.vetoes_suppressed,
            aborted_by_veto: self.aborted_by_veto,
            ncf_sent: self.ncf_sent,
            failed_attempts: self.failed_attempts,
            decode_failures: self.decode_failures,
            peer_energy,
            altruist_energy,
            peer_avg_power_w,
            altruist_avg_power_w,
            max_class_power_w,
            bit_meters_per_joule: bit_meters_per_joule(
                bm_per_s,
                n_peers + n_alts,
                max_class_power_w,
            ),
            per_node,
            trace: self.trace,
        }
    }
}

// ---------------------------------------------------------------------------
// Flow construction
// ---------------------------------------------------------------------------

fn build_flows(cfg: &ScenarioConfig) -> Result<Vec<Flow>, EngineError> {
    let topo = &cfg.topology;
    let peer_ids = topo.peer_ids();
    let graph = topo.peer_graph();
    // Global node index per peer-graph index.
    let mut peer_global = Vec::with_capacity(peer_ids.len());
    for id in &peer_ids {
        let g = topo
            .nodes()
            .iter()
            .position(|n| n.id == *id)
            .expect("peer listed in topology");
        peer_global.push(g);
    }

    let exp = match cfg.traffic {
        TrafficModel::Saturated => None,
        TrafficModel::Poisson { pkts_per_sec } => {
            if !(pkts_per_sec > 0.0) || !pkts_per_sec.is_finite() {
                return Err(EngineError::BadTrafficRate(pkts_per_sec));
            }
            Some(Exp::new(pkts_per_sec / 1e6).expect("positive finite rate"))
        }
    };

    let make = |src: usize, dst: usize| -> Flow {
        let d = topo.nodes()[src].pos.dist(&topo.nodes()[dst].pos);
        Flow { src, dst, dist_m: d, exp, delivered: 0, dropped: 0 }
    };

    match &cfg.flows {
        FlowSpec::Explicit(pairs) => {
            let mut flows = Vec::with_capacity(pairs.len());
            for &(a, b) in pairs {
                if a == b {
                    return Err(EngineError::BadFlowEndpoints(a, b));
                }
                let (Some(pa), Some(pb)) = (
                    peer_ids.iter().position(|id| *id == a),
                    peer_ids.iter().position(|id| *id == b),
                ) else {
                    return Err(EngineError::BadFlowEndpoints(a, b));
                };
                if !graph.are_adjacent(pa, pb) {
                    return Err(EngineError::FlowNotAdjacent(a, b));
                }
                flows.push(make(peer_global[pa], peer_global[pb]));
            }
            Ok(flows)
        }
        FlowSpec::Random { n } => {
            let mut pairs: Vec<(usize, usize)> = Vec::new();
            for u in 0..peer_ids.len() {
                for &v in graph.neighbors(u) {
                    pairs.push((u, v));
                }
            }
            pairs.sort_unstable();
            if *n > pairs.len() {
                return Err(EngineError::NotEnoughFlows {
                    requested: *n,
                    available: pairs.len(),
                });
            }
            let mut rng = stream(cfg.master_seed, &[STREAM_FLOWS]);
            // Partial Fisher-Yates: the first n slots become the sample.
            for i in 0..*n {
                let j = rng.random_range(i..pairs.len());
                pairs.swap(i, j);
            }
            Ok(pairs[..*n]
                .iter()
                .map(|&(u, v)| make(peer_global[u], peer_global[v]))
                .collect())
        }
    }
}
