//! Simulation and planning library for cooperative multi-channel MAC networks.
//!
//! A network of single-radio nodes shares one control channel and several data
//! channels. Because a node cannot listen to the control channel while it is
//! exchanging data elsewhere, senders routinely act on incomplete knowledge and
//! run into multi-channel coordination (MCC) problems: picking a data channel
//! that is already in use, or addressing a receiver that is currently away on
//! another channel. Idle neighbors that overheard the relevant reservations can
//! veto such doomed handshakes with a short invalidation frame — and a small
//! population of always-on "altruist" nodes can supply that service while every
//! regular node sleeps through its idle time.
//!
//! The crate is organized around that storyline:
//!
//! * [`topology`] — node/graph types, unsafe-pair analysis, cooperation coverage;
//! * [`deployment`] — how many altruists are needed and where to put them;
//! * [`protocol`] — control-plane frames, channel usage tables, per-variant policies;
//! * [`engine`] — deterministic discrete-event simulator for whole networks;
//! * [`metrics`] — energy ledgers, throughput, and cost/benefit figures.

pub mod deployment;
pub mod engine;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod topology;

pub use engine::{RunResult, ScenarioConfig};
pub use protocol::ProtocolVariant;
pub use topology::{MccMode, NetworkTopology, NodeId, NodeKind, Point};
