//! Control-plane protocol: frame vocabulary, channel usage tables, MCC problem
//! detection, and the per-variant cooperation/radio policies.
//!
//! A data exchange is arranged on the control channel by a four-way handshake
//! (PRA/PRB propose and settle a data channel, CFA/CFB confirm it and publish
//! the reservation), after which the pair leaves for the agreed data channel.
//! Between PRB and CFA sits a short vulnerable window in which any neighbor
//! that knows better — the proposed channel is taken, or the addressed
//! receiver is away on a data channel — may interject an INV frame to abort
//! the doomed exchange. NCF retracts a CFA whose exchange never started.
//!
//! Everything in this module is pure bookkeeping and policy; the discrete-event
//! machinery that calls it lives in [`crate::engine`].

use rand::Rng;
use thiserror::Error;

use crate::topology::{NodeId, NodeKind};

/// Simulation clock, in microseconds.
pub type SimTime = u64;

/// Data channel index, `0..n_data_channels`.
pub type ChannelId = usize;

/// Size of PRA/PRB/CFA/CFB/NCF frames, excluding the PHY preamble.
pub const CONTROL_FRAME_BYTES: u64 = 20;
/// Size of an INV frame (it carries a full usage entry), excluding preamble.
pub const INV_FRAME_BYTES: u64 = 30;
/// Size of a data-channel acknowledgment, excluding preamble.
pub const ACK_FRAME_BYTES: u64 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("variant {0:?} fields no altruists")]
    AltruistForbidden(ProtocolVariant),
}

// ============================================================================
// Variants
// ============================================================================

/// The cooperation/power-management regimes under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolVariant {
    /// Full cooperation: every idle peer overhears and vetoes doomed
    /// handshakes.
    DishP,
    /// Peers overhear for their own channel selection but never help others.
    NonDish,
    /// Peers sleep when idle: no overhearing, blind channel selection.
    NonDishPsm,
    /// Idealized reference: peers sleep for energy accounting, yet tables stay
    /// perfectly maintained and an oracle picks the single best-informed
    /// neighbor to send each veto.
    GenieInSitu,
    /// Peers sleep when idle; dedicated always-on altruists supply all
    /// cooperation.
    Altruistic,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 5] = [
        ProtocolVariant::DishP,
        ProtocolVariant::NonDish,
        ProtocolVariant::NonDishPsm,
        ProtocolVariant::GenieInSitu,
        ProtocolVariant::Altruistic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProtocolVariant::DishP => "dish-p",
            ProtocolVariant::NonDish => "non-dish",
            ProtocolVariant::NonDishPsm => "non-dish-psm",
            ProtocolVariant::GenieInSitu => "genie-in-situ",
            ProtocolVariant::Altruistic => "altruistic",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolVariant> {
        Self::ALL.iter().copied().find(|v| v.name() == s)
    }

    /// Do idle peers power down instead of overhearing?
    pub fn peers_sleep_when_idle(&self) -> bool {
        matches!(
            self,
            ProtocolVariant::NonDishPsm | ProtocolVariant::Altruistic | ProtocolVariant::GenieInSitu
        )
    }

    /// Do peer usage tables receive third-party control traffic?
    ///
    /// GenieInSitu peers are billed as sleeping but their tables update anyway
    /// (that is the idealization being priced).
    pub fn peers_overhear(&self) -> bool {
        matches!(
            self,
            ProtocolVariant::DishP | ProtocolVariant::NonDish | ProtocolVariant::GenieInSitu
        )
    }

    /// Does channel selection consult the usage table? The blind variant
    /// always draws from the full channel set.
    pub fn selects_from_table(&self) -> bool {
        !matches!(self, ProtocolVariant::NonDishPsm)
    }

    /// Only the altruist deployment variant fields altruist nodes.
    pub fn allows_altruists(&self) -> bool {
        matches!(self, ProtocolVariant::Altruistic)
    }
}

impl std::fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// ============================================================================
// Frames
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    /// Sender's channel proposal (opens a handshake).
    Pra,
    /// Receiver's answer; its channel choice is final.
    Prb,
    /// Sender's confirmation, publishing the reservation to its neighborhood.
    Cfa,
    /// Receiver's confirmation, publishing the reservation to its neighborhood.
    Cfb,
    /// Neighbor veto: carries the usage entry that dooms the handshake.
    Inv,
    /// Retraction broadcast after an unanswered CFA.
    Ncf,
}

impl FrameKind {
    pub fn name(&self) -> &'static str {
        match self {
            FrameKind::Pra => "PRA",
            FrameKind::Prb => "PRB",
            FrameKind::Cfa => "CFA",
            FrameKind::Cfb => "CFB",
            FrameKind::Inv => "INV",
            FrameKind::Ncf => "NCF",
        }
    }
}

/// One record of "that data channel is in use by that pair until then".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UsageEntry {
    pub channel: ChannelId,
    /// Data sender of the reserved exchange.
    pub sender: NodeId,
    /// Data receiver of the reserved exchange.
    pub receiver: NodeId,
    /// When the pair is back on the control channel.
    pub release_time: SimTime,
}

impl UsageEntry {
    /// Unordered endpoint comparison: a reservation involves the same pair
    /// whichever side published it.
    pub fn same_pair(&self, a: NodeId, b: NodeId) -> bool {
        (self.sender == a && self.receiver == b) || (self.sender == b && self.receiver == a)
    }

    pub fn involves(&self, n: NodeId) -> bool {
        self.sender == n || self.receiver == n
    }
}

/// A control-channel frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlFrame {
    pub kind: FrameKind,
    pub src: NodeId,
    /// `None` is broadcast (NCF).
    pub dst: Option<NodeId>,
    /// PRA/PRB/CFA/CFB: the proposed or settled data channel.
    pub proposed_channel: Option<ChannelId>,
    /// CFA/CFB: when the announced exchange will release its channel.
    pub reservation_until: Option<SimTime>,
    /// INV/NCF: the usage entry being shared or retracted.
    pub usage: Option<UsageEntry>,
}

impl ControlFrame {
    pub fn payload_bytes(&self) -> u64 {
        match self.kind {
            FrameKind::Inv => INV_FRAME_BYTES,
            _ => CONTROL_FRAME_BYTES,
        }
    }
}

// ============================================================================
// Channel usage table
// ============================================================================

/// What one node currently believes about data-channel occupancy.
///
/// Entries come only from control frames the node actually received: CFA/CFB
/// insert or refresh a reservation, INV shares one secondhand, NCF retracts
/// one. At most one entry exists per (channel, pair); expired entries are
/// pruned opportunistically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelUsageTable {
    entries: Vec<UsageEntry>,
}

impl ChannelUsageTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[UsageEntry] {
        &self.entries
    }

    pub fn prune(&mut self, now: SimTime) {
        self.entries.retain(|e| e.release_time > now);
    }

    /// Inserts a reservation directly, replacing any entry for the same
    /// channel and pair. Normal nodes learn through [`Self::observe_frame`];
    /// direct insertion exists for tables maintained by fiat.
    pub fn insert(&mut self, entry: UsageEntry) {
        self.upsert(entry);
    }

    fn upsert(&mut self, entry: UsageEntry) {
        match self
            .entries
            .iter_mut()
            .find(|e| e.channel == entry.channel && e.same_pair(entry.sender, entry.receiver))
        {
            Some(existing) => *existing = entry,
            None => self.entries.push(entry),
        }
    }

    /// Folds an observed control frame into the table.
    pub fn observe_frame(&mut self, frame: &ControlFrame, now: SimTime) {
        self.prune(now);
        match frame.kind {
            FrameKind::Cfa | FrameKind::Cfb => {
                let (Some(channel), Some(release)) =
                    (frame.proposed_channel, frame.reservation_until)
                else {
                    return;
                };
                if release <= now {
                    return;
                }
                // CFA travels sender→receiver, CFB the reverse; normalize so
                // the entry's sender is the data sender.
                let Some(dst) = frame.dst else { return };
                let (sender, receiver) = match frame.kind {
                    FrameKind::Cfa => (frame.src, dst),
                    _ => (dst, frame.src),
                };
                self.upsert(UsageEntry { channel, sender, receiver, release_time: release });
            }
            FrameKind::Inv => {
                if let Some(usage) = frame.usage {
                    if usage.release_time > now {
                        self.upsert(usage);
                    }
                }
            }
            FrameKind::Ncf => {
                if let Some(usage) = frame.usage {
                    self.entries.retain(|e| {
                        !(e.channel == usage.channel && e.same_pair(usage.sender, usage.receiver))
                    });
                }
            }
            FrameKind::Pra | FrameKind::Prb => {}
        }
    }

    /// Unexpired entry blocking `channel` for an exchange between `a` and `b`
    /// (an entry for the same pair does not block it).
    pub fn find_conflict(
        &self,
        channel: ChannelId,
        a: NodeId,
        b: NodeId,
        now: SimTime,
    ) -> Option<&UsageEntry> {
        self.entries
            .iter()
            .find(|e| e.release_time > now && e.channel == channel && !e.same_pair(a, b))
    }

    /// Unexpired entry showing `node` engaged in a data exchange.
    pub fn find_engagement(&self, node: NodeId, now: SimTime) -> Option<&UsageEntry> {
        self.entries.iter().find(|e| e.release_time > now && e.involves(node))
    }

    /// True when `channel` has no unexpired entry at all.
    pub fn channel_free(&self, channel: ChannelId, now: SimTime) -> bool {
        !self.entries.iter().any(|e| e.release_time > now && e.channel == channel)
    }

    /// Earliest unexpired release time, if any entry exists.
    pub fn earliest_release(&self, now: SimTime) -> Option<SimTime> {
        self.entries.iter().filter(|e| e.release_time > now).map(|e| e.release_time).min()
    }

    /// Inspects a PRA/PRB against this table for a coordination problem.
    ///
    /// A PRA is first checked for a deaf terminal (its addressee is recorded
    /// as away on a data channel — it will never answer), then both PRA and
    /// PRB for a channel conflict (the named channel is reserved by a
    /// different pair). Other frame kinds never constitute a problem.
    pub fn detect_mcc(&self, frame: &ControlFrame, now: SimTime) -> Option<MccProblem> {
        match frame.kind {
            FrameKind::Pra => {
                let dst = frame.dst?;
                if let Some(e) = self.find_engagement(dst, now) {
                    // An engagement with the PRA's own source is no obstacle:
                    // the source is audibly on the control channel, so that
                    // reservation is finished or being renewed.
                    if !e.involves(frame.src) {
                        return Some(MccProblem::DeafTerminal { target: dst, blocking: *e });
                    }
                }
                let ch = frame.proposed_channel?;
                self.find_conflict(ch, frame.src, dst, now)
                    .map(|e| MccProblem::ChannelConflict { channel: ch, blocking: *e })
            }
            FrameKind::Prb => {
                let dst = frame.dst?;
                let ch = frame.proposed_channel?;
                self.find_conflict(ch, frame.src, dst, now)
                    .map(|e| MccProblem::ChannelConflict { channel: ch, blocking: *e })
            }
            _ => None,
        }
    }
}

/// A multi-channel coordination problem a neighbor can veto.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MccProblem {
    /// The handshake names a data channel another pair has reserved.
    ChannelConflict { channel: ChannelId, blocking: UsageEntry },
    /// The handshake addresses a node that is away on a data channel.
    DeafTerminal { target: NodeId, blocking: UsageEntry },
}

impl MccProblem {
    pub fn blocking(&self) -> &UsageEntry {
        match self {
            MccProblem::ChannelConflict { blocking, .. } => blocking,
            MccProblem::DeafTerminal { blocking, .. } => blocking,
        }
    }
}

// ============================================================================
// Node state
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RadioState {
    Tx,
    Rx,
    Idle,
    Sleep,
}

/// Coarse MAC phase of a node, as visible to policies and state reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FsmPhase {
    /// On the control channel with no handshake of its own in flight.
    ControlIdle,
    /// Sent PRA, awaiting the receiver's PRB.
    AwaitPrb,
    /// In the veto window: sender waiting out CCAP before CFA, or receiver
    /// waiting for the CFA.
    CcapWait,
    /// Sent CFA, awaiting CFB.
    AwaitCfb,
    /// Away on a data channel moving the payload.
    DataExchange,
    /// Waiting out a backoff before retrying.
    Backoff,
    /// Powered down.
    Asleep,
}

/// Protocol-visible state block of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub radio: RadioState,
    pub current_channel: Option<ChannelId>,
    pub phase: FsmPhase,
    pub table: ChannelUsageTable,
}

impl NodeState {
    pub fn new() -> Self {
        NodeState {
            radio: RadioState::Idle,
            current_channel: None,
            phase: FsmPhase::ControlIdle,
            table: ChannelUsageTable::new(),
        }
    }
}

impl Default for NodeState {
    fn default() -> Self {
        Self::new()
    }
}

// ============================================================================
// Handshake timing
// ============================================================================

/// All air times and gaps, in microseconds, derived from a link configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTimings {
    pub difs: u64,
    pub sifs: u64,
    /// Veto window between PRB and CFA; also the upper bound of the veto
    /// carrier-sense delay.
    pub ccap: u64,
    pub switch: u64,
    pub t_pra: u64,
    pub t_prb: u64,
    pub t_cfa: u64,
    pub t_cfb: u64,
    pub t_inv: u64,
    pub t_ncf: u64,
    pub t_data: u64,
    pub t_ack: u64,
}

/// Air time of a frame of `payload + plcp` bytes at `bandwidth` bits/s,
/// rounded up to whole microseconds.
pub fn frame_duration_us(payload_bytes: u64, plcp_bytes: u64, bandwidth_bps: u64) -> u64 {
    let bits = (payload_bytes + plcp_bytes) * 8;
    (bits * 1_000_000).div_ceil(bandwidth_bps)
}

impl FrameTimings {
    pub fn new(
        bandwidth_bps: u64,
        payload_bytes: u64,
        plcp_bytes: u64,
        difs: u64,
        sifs: u64,
        ccap: u64,
        switch: u64,
    ) -> FrameTimings {
        let ctrl = frame_duration_us(CONTROL_FRAME_BYTES, plcp_bytes, bandwidth_bps);
        FrameTimings {
            difs,
            sifs,
            ccap,
            switch,
            t_pra: ctrl,
            t_prb: ctrl,
            t_cfa: ctrl,
            t_cfb: ctrl,
            t_inv: frame_duration_us(INV_FRAME_BYTES, plcp_bytes, bandwidth_bps),
            t_ncf: ctrl,
            t_data: frame_duration_us(payload_bytes, plcp_bytes, bandwidth_bps),
            t_ack: frame_duration_us(ACK_FRAME_BYTES, plcp_bytes, bandwidth_bps),
        }
    }

    /// Control-channel cost of one handshake, DIFS through CFB.
    pub fn t_ctrl(&self) -> u64 {
        self.difs
            + self.t_pra
            + self.sifs
            + self.t_prb
            + self.ccap
            + self.t_cfa
            + self.sifs
            + self.t_cfb
    }

    /// Data-channel cost of one exchange, DATA through ACK.
    pub fn t_data_exchange(&self) -> u64 {
        self.t_data + self.sifs + self.t_ack
    }
}

/// Phases of an uninterrupted handshake-plus-exchange, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandshakePhase {
    DifsSense,
    Pra,
    SifsAfterPra,
    Prb,
    CcapWindow,
    Cfa,
    SifsAfterCfa,
    Cfb,
    SwitchToData,
    Data,
    SifsAfterData,
    Ack,
}

/// The ideal timeline of one exchange: ordered phases with durations.
/// The sum equals `t_ctrl() + switch + t_data_exchange()`.
pub fn handshake_timeline(t: &FrameTimings) -> Vec<(HandshakePhase, u64)> {
    vec![
        (HandshakePhase::DifsSense, t.difs),
        (HandshakePhase::Pra, t.t_pra),
        (HandshakePhase::SifsAfterPra, t.sifs),
        (HandshakePhase::Prb, t.t_prb),
        (HandshakePhase::CcapWindow, t.ccap),
        (HandshakePhase::Cfa, t.t_cfa),
        (HandshakePhase::SifsAfterCfa, t.sifs),
        (HandshakePhase::Cfb, t.t_cfb),
        (HandshakePhase::SwitchToData, t.switch),
        (HandshakePhase::Data, t.t_data),
        (HandshakePhase::SifsAfterData, t.sifs),
        (HandshakePhase::Ack, t.t_ack),
    ]
}

// ============================================================================
// Policies
// ============================================================================

/// A scheduled veto: transmit INV after sensing the control channel free for
/// `wait` microseconds from the window start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvAction {
    pub wait: u64,
}

/// Whether — and after how long a carrier-sense delay — a detector sends INV.
///
/// Full cooperation lets every idle peer veto; the non-cooperative variants
/// never do; the altruist deployment reserves vetoes for altruists; the genie
/// reference nominates exactly one peer externally (this policy prices the
/// nominated detector, the selection itself is [`best_neighbor`]).
pub fn cooperation_policy<R: Rng>(
    variant: ProtocolVariant,
    detector: NodeKind,
    ccap: u64,
    rng: &mut R,
) -> Result<Option<InvAction>, ProtocolError> {
    if detector == NodeKind::Altruist && !variant.allows_altruists() {
        return Err(ProtocolError::AltruistForbidden(variant));
    }
    let cooperates = match (variant, detector) {
        (ProtocolVariant::DishP, NodeKind::Peer) => true,
        (ProtocolVariant::GenieInSitu, NodeKind::Peer) => true,
        (ProtocolVariant::Altruistic, NodeKind::Altruist) => true,
        _ => false,
    };
    Ok(cooperates.then(|| InvAction { wait: rng.random_range(0..=ccap) }))
}

/// Genie selection: the knowledgeable neighbor whose blocking entry lasts
/// longest (ties to the lowest id); `None` if nobody knows anything relevant.
pub fn best_neighbor(knowledge: &[(NodeId, SimTime)]) -> Option<NodeId> {
    knowledge
        .iter()
        .copied()
        .max_by(|(ida, ra), (idb, rb)| ra.cmp(rb).then(idb.cmp(ida)))
        .map(|(id, _)| id)
}

/// Reaction of a handshake participant to an INV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvResponse {
    /// Tear down the handshake and stay off the channel until `until`.
    Abort { until: SimTime },
    /// Too late (or not engaged): the exchange proceeds.
    Ignore,
}

/// Participant reaction to a decodable INV: a veto is always negative, and it
/// aborts any handshake still short of the committed data exchange. How long
/// to stand down depends on what the shared usage record blocks. If it names
/// the node's own counterpart, nothing can succeed before that reservation
/// releases, so the node parks until then. Otherwise the problem is only the
/// channel choice: the record is cached (steering the next selection away)
/// and the node re-contends at once.
pub fn on_inv_received(
    phase: FsmPhase,
    usage: &UsageEntry,
    own_target: Option<NodeId>,
    now: SimTime,
) -> InvResponse {
    let until = match own_target {
        Some(t) if usage.involves(t) => usage.release_time.max(now),
        _ => now,
    };
    match phase {
        FsmPhase::ControlIdle
        | FsmPhase::AwaitPrb
        | FsmPhase::CcapWait
        | FsmPhase::AwaitCfb
        | FsmPhase::Backoff => InvResponse::Abort { until },
        FsmPhase::DataExchange | FsmPhase::Asleep => InvResponse::Ignore,
    }
}

/// Participant reaction to a *collided* INV: undecodable, but garble inside
/// the veto window still reads as an alarm. Lacking the release time, the
/// participant backs off by `estimated_backoff` (the expected residual of an
/// exchange observed at a uniformly random moment: half its maximum length).
pub fn on_inv_collided(phase: FsmPhase, now: SimTime, estimated_backoff: u64) -> InvResponse {
    match phase {
        FsmPhase::CcapWait | FsmPhase::AwaitCfb => {
            InvResponse::Abort { until: now + estimated_backoff }
        }
        _ => InvResponse::Ignore,
    }
}

/// Outcome of data-channel selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelChoice {
    Choose(ChannelId),
    /// Every channel is believed busy; retry when the earliest reservation
    /// releases.
    Defer { until: SimTime },
}

/// Sender-side channel selection: uniform over the channels the table deems
/// free. The blind variant ignores the table and draws from all channels; a
/// fully booked table defers to the earliest release.
pub fn select_channel<R: Rng>(
    variant: ProtocolVariant,
    table: &ChannelUsageTable,
    n_data_channels: usize,
    now: SimTime,
    rng: &mut R,
) -> ChannelChoice {
    debug_assert!(n_data_channels > 0);
    if !variant.selects_from_table() {
        return ChannelChoice::Choose(rng.random_range(0..n_data_channels));
    }
    let free: Vec<ChannelId> =
        (0..n_data_channels).filter(|&c| table.channel_free(c, now)).collect();
    if free.is_empty() {
        let until = table.earliest_release(now).expect("busy table has entries");
        ChannelChoice::Defer { until }
    } else {
        ChannelChoice::Choose(free[rng.random_range(0..free.len())])
    }
}

/// Receiver-side confirmation of a proposed channel: keep the proposal if the
/// receiver's own table deems it free, otherwise re-select from the receiver's
/// free list (the PRB choice is final). `None` means the receiver believes
/// nothing is available and stays silent.
pub fn confirm_channel<R: Rng>(
    variant: ProtocolVariant,
    table: &ChannelUsageTable,
    proposal: ChannelId,
    n_data_channels: usize,
    now: SimTime,
    rng: &mut R,
) -> Option<ChannelId> {
    if !variant.selects_from_table() || table.channel_free(proposal, now) {
        return Some(proposal);
    }
    let free: Vec<ChannelId> =
        (0..n_data_channels).filter(|&c| c != proposal && table.channel_free(c, now)).collect();
    if free.is_empty() {
        None
    } else {
        Some(free[rng.random_range(0..free.len())])
    }
}

/// What a node is up to, for radio-state accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    /// Radiating a frame of its own.
    Transmitting,
    /// Energy arriving on its channel while awake.
    Receiving,
    /// Awake inside its own handshake or veto window, channel quiet.
    EngagedIdle,
    /// Nothing of its own going on.
    Unengaged,
}

/// Radio state a node occupies for a given activity under a variant's
/// power-management rules. Altruists never sleep; sleeping-variant peers
/// (including genie peers, whose listening is priced as sleep) power down
/// whenever unengaged.
pub fn psm_radio_policy(
    variant: ProtocolVariant,
    kind: NodeKind,
    activity: Activity,
) -> Result<RadioState, ProtocolError> {
    if kind == NodeKind::Altruist && !variant.allows_altruists() {
        return Err(ProtocolError::AltruistForbidden(variant));
    }
    Ok(match activity {
        Activity::Transmitting => RadioState::Tx,
        Activity::Receiving => RadioState::Rx,
        Activity::EngagedIdle => RadioState::Idle,
        Activity::Unengaged => match kind {
            NodeKind::Altruist => RadioState::Idle,
            NodeKind::Peer => {
                if variant.peers_sleep_when_idle() {
                    RadioState::Sleep
                } else {
                    RadioState::Idle
                }
            }
        },
    })
}
