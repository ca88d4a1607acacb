//! Structured run trace for behavioral audits.
//!
//! Recording is off by default; tests switch it on to check ordering,
//! causality, and channel-exclusivity properties against the raw event
//! stream rather than against aggregated counters.

use crate::protocol::SimTime;
use crate::topology::NodeId;

/// One audited occurrence. `channel` is the engine channel index: 0 is the
/// control channel, `1 + c` is data channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    FrameStart {
        time: SimTime,
        frame_id: u64,
        channel: usize,
        kind: &'static str,
        src: NodeId,
        dst: Option<NodeId>,
    },
    FrameEnd {
        time: SimTime,
        frame_id: u64,
        decoded_by: Vec<NodeId>,
    },
    /// A pair committed to a data exchange (receiver confirmed).
    Commit {
        time: SimTime,
        sender: NodeId,
        receiver: NodeId,
        /// Engine channel index of the data channel.
        channel: usize,
        release: SimTime,
    },
    VetoScheduled {
        time: SimTime,
        detector: NodeId,
        target: NodeId,
        fire_at: SimTime,
    },
    Aborted {
        time: SimTime,
        node: NodeId,
        backoff_until: SimTime,
    },
    Delivered {
        time: SimTime,
        flow: usize,
        src: NodeId,
        dst: NodeId,
    },
    Dropped {
        time: SimTime,
        flow: usize,
        src: NodeId,
    },
}

impl TraceRecord {
    pub fn time(&self) -> SimTime {
        match *self {
            TraceRecord::FrameStart { time, .. }
            | TraceRecord::FrameEnd { time, .. }
            | TraceRecord::Commit { time, .. }
            | TraceRecord::VetoScheduled { time, .. }
            | TraceRecord::Aborted { time, .. }
            | TraceRecord::Delivered { time, .. }
            | TraceRecord::Dropped { time, .. } => time,
        }
    }
}
