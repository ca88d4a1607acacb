//! Energy accounting and performance metrics.
//!
//! The radio billing model is four-state: transmit, receive, idle listen, and
//! sleep, at a 25 : 18 : 15 : 1 power ratio. Simulation code accumulates
//! microseconds per state into an [`EnergyLedger`]; everything else here is
//! closed-form arithmetic over delivered traffic and consumed energy.

use thiserror::Error;

use crate::protocol::{FrameTimings, RadioState};

/// Rejected inputs to the closed-form metrics.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("flow throughput and distance vectors differ in length ({0} vs {1})")]
    MismatchedFlows(usize, usize),
    #[error("negative {0}")]
    Negative(&'static str),
    #[error("at least one peer is required")]
    NoPeers,
    #[error("maximum node power must be positive")]
    ZeroPower,
}

/// Transmit power draw, watts.
pub const P_TX_W: f64 = 1.25;
/// Receive/decode power draw, watts.
pub const P_RX_W: f64 = 0.90;
/// Awake-but-quiet listening power draw, watts.
pub const P_IDLE_W: f64 = 0.75;
/// Sleep power draw, watts.
pub const P_SLEEP_W: f64 = 0.05;

/// Per-state power draws, watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProfile {
    pub tx_w: f64,
    pub rx_w: f64,
    pub idle_w: f64,
    pub sleep_w: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        PowerProfile { tx_w: P_TX_W, rx_w: P_RX_W, idle_w: P_IDLE_W, sleep_w: P_SLEEP_W }
    }
}

impl PowerProfile {
    pub fn draw(&self, state: RadioState) -> f64 {
        match state {
            RadioState::Tx => self.tx_w,
            RadioState::Rx => self.rx_w,
            RadioState::Idle => self.idle_w,
            RadioState::Sleep => self.sleep_w,
        }
    }
}

/// Cumulative time one radio spent in each state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnergyLedger {
    pub tx_us: u64,
    pub rx_us: u64,
    pub idle_us: u64,
    pub sleep_us: u64,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, state: RadioState, duration_us: u64) {
        match state {
            RadioState::Tx => self.tx_us += duration_us,
            RadioState::Rx => self.rx_us += duration_us,
            RadioState::Idle => self.idle_us += duration_us,
            RadioState::Sleep => self.sleep_us += duration_us,
        }
    }

    pub fn merge(&mut self, other: &EnergyLedger) {
        self.tx_us += other.tx_us;
        self.rx_us += other.rx_us;
        self.idle_us += other.idle_us;
        self.sleep_us += other.sleep_us;
    }

    pub fn total_us(&self) -> u64 {
        self.tx_us + self.rx_us + self.idle_us + self.sleep_us
    }

    pub fn energy_joules(&self, profile: &PowerProfile) -> f64 {
        (self.tx_us as f64 * profile.tx_w
            + self.rx_us as f64 * profile.rx_w
            + self.idle_us as f64 * profile.idle_w
            + self.sleep_us as f64 * profile.sleep_w)
            / 1e6
    }

    /// Energy over accounted time; zero for an empty ledger.
    pub fn average_power_w(&self, profile: &PowerProfile) -> f64 {
        let total = self.total_us();
        if total == 0 {
            0.0
        } else {
            self.energy_joules(profile) / (total as f64 / 1e6)
        }
    }
}

/// Delivered payload bits over wall-clock duration, in bits per second.
pub fn aggregate_throughput_bps(delivered_payload_bits: u64, duration_us: u64) -> f64 {
    if duration_us == 0 {
        return 0.0;
    }
    delivered_payload_bits as f64 * 1e6 / duration_us as f64
}

/// Throughput of one saturated flow running alone: payload bits per full
/// handshake-plus-exchange cycle.
pub fn single_flow_throughput_bps(t: &FrameTimings, payload_bytes: u64) -> f64 {
    let cycle = t.t_ctrl() + t.switch + t.t_data_exchange();
    aggregate_throughput_bps(payload_bytes * 8, cycle)
}

/// Upper bound on aggregate throughput: concurrency is capped by both the
/// number of data channels and the number of flows, and each concurrent flow
/// moves one payload per cycle.
pub fn network_capacity_bps(
    t: &FrameTimings,
    payload_bytes: u64,
    n_data_channels: usize,
    n_flows: usize,
) -> f64 {
    let concurrency = n_data_channels.min(n_flows);
    concurrency as f64 * single_flow_throughput_bps(t, payload_bytes)
}

/// Traffic-volume-times-distance credit for delivered payload.
pub fn bit_meters(delivered_payload_bits: u64, mean_flow_distance_m: f64) -> f64 {
    delivered_payload_bits as f64 * mean_flow_distance_m
}

/// Bit·meters moved per joule drawn by the network's hungriest node class:
/// `bit_meters / (n_nodes × max_node_power × seconds)` collapses to
/// `bit_meters / (n_nodes × max_node_power)` per second of operation, so the
/// caller passes bit·meters accumulated per second (or divides by duration).
///
/// The conservative denominator prices every node at the worst class's draw:
/// a deployment only wins by lowering the *maximum* sustained power, which is
/// what battery provisioning cares about.
pub fn bit_meters_per_joule(
    bit_meters_per_second: f64,
    n_nodes: usize,
    max_node_power_w: f64,
) -> f64 {
    if n_nodes == 0 || max_node_power_w <= 0.0 {
        return 0.0;
    }
    bit_meters_per_second / (n_nodes as f64 * max_node_power_w)
}

/// How much longer the same battery lasts at the lower draw.
pub fn lifetime_extension(power_before_w: f64, power_after_w: f64) -> f64 {
    if power_after_w <= 0.0 {
        return f64::INFINITY;
    }
    power_before_w / power_after_w
}

/// Whole-network inputs for the cost-efficiency figure.
///
/// Per-flow delivered throughput is paired with the flow's straight-line
/// source-to-destination distance (not path length — relaying is overhead,
/// not value). The node census is split into peers and altruists, each class
/// contributing its worst sustained power draw; `b0` converts battery energy
/// into dollars (initial energy per unit node cost). Networks without
/// altruists set the altruist count and power to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BmpInputs {
    pub flow_throughputs_bps: Vec<f64>,
    pub flow_distances_m: Vec<f64>,
    pub n_peers: usize,
    pub n_altruists: usize,
    pub peer_max_power_w: f64,
    pub altruist_max_power_w: f64,
    pub b0_joules_per_dollar: f64,
}

impl BmpInputs {
    fn validate(&self) -> Result<(), MetricsError> {
        let (nf, nd) = (self.flow_throughputs_bps.len(), self.flow_distances_m.len());
        if nf != nd {
            return Err(MetricsError::MismatchedFlows(nf, nd));
        }
        if self.flow_throughputs_bps.iter().any(|&f| f < 0.0) {
            return Err(MetricsError::Negative("flow throughput"));
        }
        if self.flow_distances_m.iter().any(|&d| d < 0.0) {
            return Err(MetricsError::Negative("flow distance"));
        }
        if self.peer_max_power_w < 0.0 || self.altruist_max_power_w < 0.0 {
            return Err(MetricsError::Negative("power"));
        }
        if self.b0_joules_per_dollar < 0.0 {
            return Err(MetricsError::Negative("b0"));
        }
        if self.n_peers == 0 {
            return Err(MetricsError::NoPeers);
        }
        if self.peer_max_power_w.max(self.altruist_max_power_w) <= 0.0 {
            return Err(MetricsError::ZeroPower);
        }
        Ok(())
    }
}

/// Bit-meter-price ratio, in bit·meters per dollar: distance-weighted
/// delivered throughput, times the battery's value in operating time,
/// normalized by what the fleet costs. The denominator prices every node at
/// the hungriest class's draw because the first dead battery ends the
/// network's life.
pub fn bmp(inputs: &BmpInputs) -> Result<f64, MetricsError> {
    inputs.validate()?;
    let traffic_value: f64 = inputs
        .flow_throughputs_bps
        .iter()
        .zip(&inputs.flow_distances_m)
        .map(|(f, d)| f * d)
        .sum();
    let max_power = inputs.peer_max_power_w.max(inputs.altruist_max_power_w);
    Ok(bit_meters_per_joule(
        traffic_value * inputs.b0_joules_per_dollar,
        inputs.n_peers + inputs.n_altruists,
        max_power,
    ))
}

/// Time until the first battery dies: initial energy over the worst sustained
/// draw in either node class.
pub fn lifetime_s(
    e0_joules: f64,
    peer_max_power_w: f64,
    altruist_max_power_w: f64,
) -> Result<f64, MetricsError> {
    let max_power = peer_max_power_w.max(altruist_max_power_w);
    if peer_max_power_w < 0.0 || altruist_max_power_w < 0.0 {
        return Err(MetricsError::Negative("power"));
    }
    if max_power <= 0.0 {
        return Err(MetricsError::ZeroPower);
    }
    Ok(e0_joules / max_power)
}

/// Mean, sample standard deviation, and 95% confidence half-width of a set of
/// replication results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub ci95: f64,
}

pub fn summarize(samples: &[f64]) -> MetricSummary {
    let n = samples.len();
    if n == 0 {
        return MetricSummary { n: 0, mean: 0.0, std_dev: 0.0, ci95: 0.0 };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MetricSummary { n, mean, std_dev: 0.0, ci95: 0.0 };
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std_dev = var.sqrt();
    MetricSummary { n, mean, std_dev, ci95: 1.96 * std_dev / (n as f64).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_timings() -> FrameTimings {
        FrameTimings::new(1_000_000, 2048, 15, 50, 10, 35, 0)
    }

    #[test]
    fn power_profile_ratios() {
        let p = PowerProfile::default();
        assert_eq!(p.tx_w / p.sleep_w, 25.0);
        assert_eq!(p.rx_w / p.sleep_w, 18.0);
        assert_eq!(p.idle_w / p.sleep_w, 15.0);
        assert_eq!(p.sleep_w, 0.05);
        assert_eq!(p.draw(RadioState::Tx), 1.25);
    }

    #[test]
    fn ledger_accumulates_and_averages() {
        let mut l = EnergyLedger::new();
        l.add(RadioState::Tx, 1_000_000);
        l.add(RadioState::Rx, 1_000_000);
        l.add(RadioState::Idle, 1_000_000);
        l.add(RadioState::Sleep, 1_000_000);
        let p = PowerProfile::default();
        assert!((l.energy_joules(&p) - 2.95).abs() < 1e-12);
        assert!((l.average_power_w(&p) - 0.7375).abs() < 1e-12);
        assert_eq!(l.total_us(), 4_000_000);

        assert_eq!(EnergyLedger::new().average_power_w(&p), 0.0);

        let mut m = EnergyLedger::new();
        m.add(RadioState::Tx, 500);
        m.merge(&l);
        assert_eq!(m.tx_us, 1_000_500);
    }

    #[test]
    fn always_on_idle_node_draws_idle_power() {
        let mut l = EnergyLedger::new();
        l.add(RadioState::Idle, 123_456_789);
        assert!((l.average_power_w(&PowerProfile::default()) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn throughput_closed_form() {
        let t = default_timings();
        // One cycle: 1225 control + 0 switch + 16794 data = 18019 us.
        assert_eq!(t.t_ctrl() + t.switch + t.t_data_exchange(), 18019);
        let s = single_flow_throughput_bps(&t, 2048);
        assert!((s - 16384.0 * 1e6 / 18019.0).abs() < 1e-9);
        // Equivalent to measuring exactly one delivered payload per cycle.
        assert!((aggregate_throughput_bps(16384, 18019) - s).abs() < 1e-9);
        assert_eq!(aggregate_throughput_bps(16384, 0), 0.0);
    }

    #[test]
    fn capacity_caps_by_channels_and_flows() {
        let t = default_timings();
        let one = single_flow_throughput_bps(&t, 2048);
        assert!((network_capacity_bps(&t, 2048, 2, 5) - 2.0 * one).abs() < 1e-9);
        assert!((network_capacity_bps(&t, 2048, 5, 2) - 2.0 * one).abs() < 1e-9);
        assert!((network_capacity_bps(&t, 2048, 6, 5) - 5.0 * one).abs() < 1e-9);
        // Five concurrent saturated flows top out just above 4.5 Mbps.
        let five = network_capacity_bps(&t, 2048, 6, 5);
        assert!((4.5e6..4.6e6).contains(&five), "got {five}");
    }

    #[test]
    fn bit_meters_per_joule_reference_points() {
        // All-awake deployment: dense network, every node at idle-class draw.
        let a = bit_meters_per_joule(3.826e9, 360, 0.718);
        assert!((a / 1e6 - 14.80).abs() < 0.01, "got {a}");
        // Sleep-capable deployment with altruists: slightly more nodes, less
        // than half the per-node draw, roughly double the delivered value.
        let b = bit_meters_per_joule(3.822e9, 407, 0.301);
        assert!((b / 1e6 - 31.19).abs() < 0.01, "got {b}");
        assert!(b / a > 2.0);
        assert_eq!(bit_meters_per_joule(1.0, 0, 1.0), 0.0);
        assert!((bit_meters(16384, 2.5) - 40960.0).abs() < 1e-12);
    }

    #[test]
    fn lifetime_ratio() {
        let r = lifetime_extension(0.718, 0.301);
        assert!((r - 2.385).abs() < 0.001, "got {r}");
        assert_eq!(lifetime_extension(1.0, 0.0), f64::INFINITY);
    }

    fn reference_inputs(fd: f64, n_peers: usize, n_alts: usize, pp: f64, pa: f64) -> BmpInputs {
        // One synthetic flow carrying the aggregate traffic value at 1 m.
        BmpInputs {
            flow_throughputs_bps: vec![fd],
            flow_distances_m: vec![1.0],
            n_peers,
            n_altruists: n_alts,
            peer_max_power_w: pp,
            altruist_max_power_w: pa,
            b0_joules_per_dollar: 1.0,
        }
    }

    #[test]
    fn bmp_reference_points_and_errors() {
        // All-awake fleet: 360 peers, hungriest node draws 0.718 W.
        let a = bmp(&reference_inputs(3.826e9, 360, 0, 0.718, 0.0)).unwrap();
        assert!((a / 1e6 - 14.80).abs() < 0.01, "got {a}");
        // Sleep-capable fleet plus 47 altruists, worst class at 0.301 W.
        let b = bmp(&reference_inputs(3.822e9, 360, 47, 0.295, 0.301)).unwrap();
        assert!((b / 1e6 - 31.19).abs() < 0.01, "got {b}");

        // Distance weighting is a true dot product, not a sum of products
        // with a shared distance.
        let two = BmpInputs {
            flow_throughputs_bps: vec![1e6, 3e6],
            flow_distances_m: vec![200.0, 100.0],
            ..reference_inputs(0.0, 10, 0, 1.0, 0.0)
        };
        assert!((bmp(&two).unwrap() - (1e6 * 200.0 + 3e6 * 100.0) / 10.0).abs() < 1e-9);

        assert_eq!(bmp(&reference_inputs(0.0, 360, 0, 0.718, 0.0)).unwrap(), 0.0);
        assert_eq!(
            bmp(&reference_inputs(1.0, 360, 0, 0.0, 0.0)),
            Err(MetricsError::ZeroPower)
        );
        assert_eq!(bmp(&reference_inputs(1.0, 0, 0, 0.7, 0.0)), Err(MetricsError::NoPeers));
        assert_eq!(
            bmp(&BmpInputs {
                flow_distances_m: vec![1.0, 2.0],
                ..reference_inputs(1.0, 5, 0, 0.7, 0.0)
            }),
            Err(MetricsError::MismatchedFlows(1, 2))
        );
        assert_eq!(
            bmp(&reference_inputs(-1.0, 5, 0, 0.7, 0.0)),
            Err(MetricsError::Negative("flow throughput"))
        );
    }

    #[test]
    fn lifetime_from_energy_and_power() {
        assert_eq!(lifetime_s(1.0, 0.5, 0.0).unwrap(), 2.0);
        // The hungrier class bounds the network's life, whichever it is.
        assert_eq!(lifetime_s(10.0, 0.2, 0.5).unwrap(), 20.0);
        let ratio = lifetime_s(1.0, 0.301, 0.0).unwrap() / lifetime_s(1.0, 0.718, 0.0).unwrap();
        assert!((ratio - 2.385).abs() < 0.001);
        assert_eq!(lifetime_s(1.0, 0.0, 0.0), Err(MetricsError::ZeroPower));
        assert_eq!(lifetime_s(1.0, -0.1, 0.2), Err(MetricsError::Negative("power")));
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.n, 4);
        assert!((s.mean - 2.5).abs() < 1e-12);
        assert!((s.std_dev - 1.2909944487358056).abs() < 1e-12);
        assert!((s.ci95 - 1.96 * 1.2909944487358056 / 2.0).abs() < 1e-12);
        assert_eq!(summarize(&[]).n, 0);
        let one = summarize(&[7.0]);
        assert_eq!((one.mean, one.ci95), (7.0, 0.0));
    }
}
