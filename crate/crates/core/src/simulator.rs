//! Discrete-event uplink simulator.
//!
//! Every node generates messages on its own RNG stream and passes them
//! through a duty-cycle gate. A monotonic event queue of transmission
//! starts and ends drives per-gateway reception. Two transmissions
//! interfere at a gateway only when both are heard there on the same SF
//! and channel and overlap in time. A transmission survives an
//! interference set only if it is at least `capture_threshold_db` stronger
//! than every other member.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::airtime::{airtime, ChannelParams, SpreadingFactor};
use crate::allocation::{Assignment, LinkBudget};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Single configured carrier, Hz.
pub const DEFAULT_CHANNEL_HZ: u32 = 869_500_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalProcess {
    /// Exponential inter-arrival times with mean equal to the message period.
    #[default]
    Exponential,
    /// Fixed period with a uniformly random phase per node.
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub message_period_s: f64,
    /// Maximum on-air fraction per node.
    pub duty_cycle: f64,
    pub sim_duration_s: f64,
    pub arrival: ArrivalProcess,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            message_period_s: 10.0,
            duty_cycle: 0.1,
            sim_duration_s: 3600.0,
            arrival: ArrivalProcess::Exponential,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.message_period_s > 0.0 && self.message_period_s.is_finite()) {
            return Err(Error::Invariant(format!("message period must be > 0, got {}", self.message_period_s)));
        }
        if !(0.001..=0.1).contains(&self.duty_cycle) {
            return Err(Error::Invariant(format!(
                "duty cycle must lie in [0.001, 0.1], got {}",
                self.duty_cycle
            )));
        }
        if !(self.sim_duration_s >= 0.0 && self.sim_duration_s.is_finite()) {
            return Err(Error::Invariant(format!("simulation duration must be >= 0, got {}", self.sim_duration_s)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionConfig {
    pub capture_threshold_db: f64,
    /// Only interference that reaches past the first `n_preamble - 5`
    /// preamble symbols of a frame can destroy it.
    pub preamble_critical: bool,
    /// Set from the radio carrier when a scenario is built.
    #[serde(skip)]
    pub channel_hz: u32,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig { capture_threshold_db: 6.0, preamble_critical: false, channel_hz: DEFAULT_CHANNEL_HZ }
    }
}

/// Earliest start allowed after a transmission of `airtime_s` that began at
/// `start_s`: the frame plus a silence of `airtime * (1/limit - 1)`.
pub fn next_allowed_start(start_s: f64, airtime_s: f64, limit: f64) -> f64 {
    start_s + airtime_s / limit
}

/// Defers `candidate_s` past the silence that follows the previous
/// transmission `(start_s, airtime_s)`, if any.
pub fn duty_cycle_gate(previous: Option<(f64, f64)>, candidate_s: f64, limit: f64) -> Result<f64> {
    if !(limit > 0.0 && limit <= 1.0) {
        return Err(Error::param(format!("duty-cycle limit must lie in (0, 1], got {limit}")));
    }
    Ok(match previous {
        Some((start, airtime)) => candidate_s.max(next_allowed_start(start, airtime, limit)),
        None => candidate_s,
    })
}

/// Gated transmission start times of one node, in seconds.
pub struct NodeTraffic {
    rng: ChaCha8Rng,
    arrival: ArrivalProcess,
    period_s: f64,
    exp: Exp<f64>,
    next_arrival_s: f64,
    next_allowed_s: f64,
    airtime_s: f64,
    duty_cycle: f64,
    horizon_s: f64,
}

impl NodeTraffic {
    pub fn new(node: usize, airtime_ms: f64, traffic: &TrafficConfig, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, Purpose::Traffic, node as u64);
        let exp = Exp::new(1.0 / traffic.message_period_s)
            .map_err(|e| Error::param(format!("inter-arrival distribution: {e}")))?;
        let first = match traffic.arrival {
            ArrivalProcess::Exponential => exp.sample(&mut rng),
            ArrivalProcess::Periodic => rng.random::<f64>() * traffic.message_period_s,
        };
        Ok(NodeTraffic {
            rng,
            arrival: traffic.arrival,
            period_s: traffic.message_period_s,
            exp,
            next_arrival_s: first,
            next_allowed_s: 0.0,
            airtime_s: airtime_ms / 1000.0,
            duty_cycle: traffic.duty_cycle,
            horizon_s: traffic.sim_duration_s,
        })
    }
}

impl Iterator for NodeTraffic {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let start = self.next_arrival_s.max(self.next_allowed_s);
        if start >= self.horizon_s {
            return None;
        }
        self.next_allowed_s = next_allowed_start(start, self.airtime_s, self.duty_cycle);
        self.next_arrival_s += match self.arrival {
            ArrivalProcess::Exponential => self.exp.sample(&mut self.rng),
            ArrivalProcess::Periodic => self.period_s,
        };
        Some(start)
    }
}

/// One scheduled uplink message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduledTx {
    pub node: usize,
    pub start_s: f64,
    pub airtime_ms: f64,
}

/// Gated message schedule for all nodes, sorted by start time then node.
pub fn generate_traffic(airtimes_ms: &[f64], traffic: &TrafficConfig, seed: u64) -> Result<Vec<ScheduledTx>> {
    traffic.validate()?;
    let mut all = Vec::new();
    for (node, &airtime_ms) in airtimes_ms.iter().enumerate() {
        for start_s in NodeTraffic::new(node, airtime_ms, traffic, seed)? {
            all.push(ScheduledTx { node, start_s, airtime_ms });
        }
    }
    all.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.node.cmp(&b.node)));
    Ok(all)
}

/// A transmission as processed by the simulator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transmission {
    pub node: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub airtime_ms: f64,
    pub sf: SpreadingFactor,
    pub channel_hz: u32,
    /// Start of the collision-sensitive part of the frame.
    pub critical_start_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reception {
    /// Below sensitivity at this gateway.
    NotHeard,
    Received,
    Lost,
}

impl Reception {
    pub fn as_str(self) -> &'static str {
        match self {
            Reception::NotHeard => "not_heard",
            Reception::Received => "received",
            Reception::Lost => "lost",
        }
    }
}

/// Full per-transmission, per-gateway outcome of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub n_gateways: usize,
    pub transmissions: Vec<Transmission>,
    /// Row-major `[transmission][gateway]`.
    pub receptions: Vec<Reception>,
    /// Row-major `[transmission][gateway]`, dBm.
    pub rx_power_dbm: Vec<f64>,
}

impl EventLog {
    pub fn reception(&self, tx: usize, gateway: usize) -> Reception {
        self.receptions[tx * self.n_gateways + gateway]
    }

    pub fn rx_power(&self, tx: usize, gateway: usize) -> f64 {
        self.rx_power_dbm[tx * self.n_gateways + gateway]
    }

    /// CSV with header `time,node,sf,gateway,rssi_dbm,verdict`, one row per
    /// transmission and gateway.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "node", "sf", "gateway", "rssi_dbm", "verdict"])?;
        for (i, tx) in self.transmissions.iter().enumerate() {
            for gw in 0..self.n_gateways {
                w.write_record([
                    tx.start_s.to_string(),
                    tx.node.to_string(),
                    tx.sf.value().to_string(),
                    gw.to_string(),
                    self.rx_power(i, gw).to_string(),
                    self.reception(i, gw).as_str().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimMetrics {
    pub sent: u64,
    /// Unique messages received by at least one gateway.
    pub delivered: u64,
    pub per_gw_heard: Vec<u64>,
    pub per_gw_received: Vec<u64>,
    pub der: f64,
    /// `received / heard` per gateway; 1.0 where nothing was heard.
    pub per_gw_der: Vec<f64>,
    /// Delivered payload, bit/s.
    pub throughput_bps: f64,
    /// Receptions lost to interference, counted per (transmission, gateway).
    pub collisions: u64,
    /// Total on-air time of all transmissions, s.
    pub airtime_s: f64,
}

/// Delivered payload rate in bit/s.
pub fn throughput(delivered: u64, payload_bytes: u16, sim_duration_s: f64) -> Result<f64> {
    if sim_duration_s.is_nan() || sim_duration_s <= 0.0 {
        return Err(Error::param(format!("simulation duration must be > 0, got {sim_duration_s}")));
    }
    Ok(delivered as f64 * f64::from(payload_bytes) * 8.0 / sim_duration_s)
}

/// Everything a run needs besides the seed.
#[derive(Clone, Copy, Debug)]
pub struct SimInput<'a> {
    pub links: LinkBudget<'a>,
    pub params: &'a [ChannelParams],
    pub assignment: &'a Assignment,
    pub traffic: &'a TrafficConfig,
    pub collision: &'a CollisionConfig,
}

#[derive(Clone, Debug)]
pub struct SimReport {
    pub metrics: SimMetrics,
    pub log: Option<EventLog>,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    kind: EventKind,
    key: usize,
}

// ends sort before starts at the same instant, so touching frames do not
// overlap
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    End,
    Start,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.key.cmp(&other.key))
    }
}

/// Whether `victim` is destroyed by `interferer` given both overlap in time
/// and share SF and channel.
fn destroys(victim_power: f64, victim: &Transmission, interferer_power: f64, interferer: &Transmission, cfg: &CollisionConfig) -> bool {
    let captured = victim_power - interferer_power >= cfg.capture_threshold_db;
    let reaches = !cfg.preamble_critical || interferer.end_s > victim.critical_start_s;
    !captured && reaches
}

pub fn run_simulation(input: &SimInput<'_>, seed: u64, keep_log: bool) -> Result<SimReport> {
    let links = input.links;
    let n_nodes = links.n_nodes();
    let n_gw = links.n_gateways();
    input.traffic.validate()?;
    input.assignment.check_feasible(&links)?;
    if input.params.len() != n_nodes {
        return Err(Error::Consistency(format!(
            "{} channel configurations for {} nodes",
            input.params.len(),
            n_nodes
        )));
    }
    let cfg = input.collision;

    // disconnected nodes still transmit, at SF12
    let node_params: Vec<ChannelParams> = (0..n_nodes)
        .map(|n| input.params[n].with_sf(input.assignment.sf(n).unwrap_or(SpreadingFactor::SF12)))
        .collect();
    let timings = node_params.iter().map(airtime).collect::<Result<Vec<_>>>()?;
    let mut sources = (0..n_nodes)
        .map(|n| NodeTraffic::new(n, timings[n].airtime, input.traffic, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut queue = BinaryHeap::new();
    for (node, source) in sources.iter_mut().enumerate() {
        if let Some(t) = source.next() {
            queue.push(Reverse(Event { time: t, kind: EventKind::Start, key: node }));
        }
    }

    let mut log = EventLog { n_gateways: n_gw, ..Default::default() };
    let mut active: Vec<Vec<usize>> = vec![Vec::new(); n_gw];
    let mut metrics = SimMetrics {
        per_gw_heard: vec![0; n_gw],
        per_gw_received: vec![0; n_gw],
        ..Default::default()
    };
    let mut delivered_bits = 0.0;

    while let Some(Reverse(event)) = queue.pop() {
        match event.kind {
            EventKind::Start => {
                let node = event.key;
                let timing = &timings[node];
                let params = &node_params[node];
                let id = log.transmissions.len();
                let critical_symbols = f64::from(params.n_preamble.saturating_sub(5));
                let tx = Transmission {
                    node,
                    start_s: event.time,
                    end_s: event.time + timing.airtime / 1000.0,
                    airtime_ms: timing.airtime,
                    sf: params.sf,
                    channel_hz: cfg.channel_hz,
                    critical_start_s: event.time + critical_symbols * timing.t_sym / 1000.0,
                };
                log.transmissions.push(tx);
                metrics.sent += 1;
                metrics.airtime_s += timing.airtime / 1000.0;

                for (gw, in_flight) in active.iter_mut().enumerate() {
                    let power = links.rssi.get(gw, node);
                    log.rx_power_dbm.push(power);
                    if !links.hears(gw, node, tx.sf) {
                        log.receptions.push(Reception::NotHeard);
                        continue;
                    }
                    metrics.per_gw_heard[gw] += 1;
                    let mut verdict = Reception::Received;
                    for &other in in_flight.iter() {
                        let o = log.transmissions[other];
                        if o.sf != tx.sf || o.channel_hz != tx.channel_hz {
                            continue;
                        }
                        let o_power = links.rssi.get(gw, o.node);
                        if destroys(power, &tx, o_power, &o, cfg) {
                            verdict = Reception::Lost;
                        }
                        if destroys(o_power, &o, power, &tx, cfg) {
                            log.receptions[other * n_gw + gw] = Reception::Lost;
                        }
                    }
                    log.receptions.push(verdict);
                    in_flight.push(id);
                }

                queue.push(Reverse(Event { time: tx.end_s, kind: EventKind::End, key: id }));
                if let Some(t) = sources[node].next() {
                    queue.push(Reverse(Event { time: t, kind: EventKind::Start, key: node }));
                }
            }
            EventKind::End => {
                let id = event.key;
                let mut delivered = false;
                for (gw, list) in active.iter_mut().enumerate() {
                    let Some(pos) = list.iter().position(|&t| t == id) else { continue };
                    list.swap_remove(pos);
                    match log.receptions[id * n_gw + gw] {
                        Reception::Received => {
                            metrics.per_gw_received[gw] += 1;
                            delivered = true;
                        }
                        Reception::Lost => metrics.collisions += 1,
                        Reception::NotHeard => {}
                    }
                }
                if delivered {
                    metrics.delivered += 1;
                    let node = log.transmissions[id].node;
                    delivered_bits += f64::from(node_params[node].payload_bytes) * 8.0;
                }
            }
        }
    }

    metrics.der = if metrics.sent == 0 { 1.0 } else { metrics.delivered as f64 / metrics.sent as f64 };
    metrics.per_gw_der = metrics
        .per_gw_heard
        .iter()
        .zip(&metrics.per_gw_received)
        .map(|(&h, &r)| if h == 0 { 1.0 } else { r as f64 / h as f64 })
        .collect();
    metrics.throughput_bps = if input.traffic.sim_duration_s > 0.0 {
        delivered_bits / input.traffic.sim_duration_s
    } else {
        0.0
    };

    Ok(SimReport { metrics, log: keep_log.then_some(log) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{adr_mgw, Allocator};
    use crate::radio::{RssiMatrix, SensitivityTable};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gate_examples() {
        let sf12 = 1.31858432;
        let next = duty_cycle_gate(Some((0.0, sf12)), 0.5, 0.1).unwrap();
        assert_abs_diff_eq!(next - sf12, 9.0 * sf12, epsilon = 1e-12);
        assert_eq!(duty_cycle_gate(Some((0.0, 1.0)), 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(duty_cycle_gate(None, 3.0, 0.1).unwrap(), 3.0);
        let silence = next_allowed_start(0.0, 0.05656576, 0.1) - 0.05656576;
        assert_abs_diff_eq!(silence, 0.50909184, epsilon = 1e-12);
        assert!(duty_cycle_gate(None, 0.0, 0.0).is_err());
        assert!(duty_cycle_gate(None, 0.0, 1.5).is_err());
    }

    #[test]
    fn empty_schedule_for_zero_duration() {
        let traffic = TrafficConfig { sim_duration_s: 0.0, ..Default::default() };
        assert!(generate_traffic(&[56.0, 56.0], &traffic, 1).unwrap().is_empty());
    }

    #[test]
    fn schedules_are_seeded() {
        let traffic = TrafficConfig { sim_duration_s: 600.0, ..Default::default() };
        let a = generate_traffic(&[56.0, 100.0], &traffic, 1).unwrap();
        let b = generate_traffic(&[56.0, 100.0], &traffic, 1).unwrap();
        let c = generate_traffic(&[56.0, 100.0], &traffic, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0].start_s <= w[1].start_s));
    }

    #[test]
    fn periodic_arrivals_keep_the_period() {
        let traffic = TrafficConfig { arrival: ArrivalProcess::Periodic, sim_duration_s: 100.0, ..Default::default() };
        let starts: Vec<f64> = NodeTraffic::new(0, 56.0, &traffic, 9).unwrap().collect();
        assert_eq!(starts.len(), 10);
        for w in starts.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], 10.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn traffic_config_validation() {
        assert!(TrafficConfig { message_period_s: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrafficConfig { duty_cycle: 0.5, ..Default::default() }.validate().is_err());
        assert!(TrafficConfig { sim_duration_s: -1.0, ..Default::default() }.validate().is_err());
        TrafficConfig { duty_cycle: 0.001, ..Default::default() }.validate().unwrap();
    }

    #[test]
    fn throughput_examples() {
        assert_abs_diff_eq!(throughput(360, 20, 3600.0).unwrap(), 16.0, epsilon = 1e-12);
        assert_eq!(throughput(0, 20, 3600.0).unwrap(), 0.0);
        assert_abs_diff_eq!(throughput(720, 20, 3600.0).unwrap(), 32.0, epsilon = 1e-12);
        assert!(throughput(1, 20, 0.0).is_err());
    }

    fn run(rows: Vec<Vec<f64>>, traffic: TrafficConfig, seed: u64) -> SimReport {
        let rssi = RssiMatrix::from_rows(rows).unwrap();
        let s = SensitivityTable::default();
        let links = LinkBudget::new(&rssi, &s, crate::airtime::Bandwidth::Khz125);
        let assignment = adr_mgw(&links);
        let params = vec![ChannelParams::default(); links.n_nodes()];
        let collision = CollisionConfig::default();
        let input = SimInput { links, params: &params, assignment: &assignment, traffic: &traffic, collision: &collision };
        run_simulation(&input, seed, true).unwrap()
    }

    #[test]
    fn lone_node_delivers_everything() {
        let r = run(vec![vec![-110.0]], TrafficConfig::default(), 4);
        assert!(r.metrics.sent > 300);
        assert_eq!(r.metrics.der, 1.0);
        assert_eq!(r.metrics.per_gw_der, vec![1.0]);
    }

    #[test]
    fn empty_network_has_unit_der() {
        let r = run(vec![vec![]], TrafficConfig::default(), 4);
        assert_eq!(r.metrics.sent, 0);
        assert_eq!(r.metrics.der, 1.0);
    }

    #[test]
    fn disconnected_nodes_send_but_never_deliver() {
        let r = run(vec![vec![-200.0, -110.0]], TrafficConfig::default(), 4);
        let log = r.log.unwrap();
        let lost_node_msgs = log.transmissions.iter().filter(|t| t.node == 0).count() as u64;
        assert!(lost_node_msgs > 0);
        assert_eq!(r.metrics.delivered, r.metrics.sent - lost_node_msgs);
        assert!(log.transmissions.iter().filter(|t| t.node == 0).all(|t| t.sf == SpreadingFactor::SF12));
    }

    #[test]
    fn infeasible_assignment_is_rejected() {
        let rssi = RssiMatrix::from_rows(vec![vec![-127.0]]).unwrap();
        let s = SensitivityTable::default();
        let links = LinkBudget::new(&rssi, &s, crate::airtime::Bandwidth::Khz125);
        let assignment = Assignment::new(vec![Some(SpreadingFactor::SF7)], Allocator::AdrMgw);
        let params = vec![ChannelParams::default()];
        let input = SimInput {
            links,
            params: &params,
            assignment: &assignment,
            traffic: &TrafficConfig::default(),
            collision: &CollisionConfig::default(),
        };
        assert!(matches!(run_simulation(&input, 1, false), Err(Error::Consistency(_))));
    }

    fn tx(start: f64, end: f64) -> Transmission {
        Transmission {
            node: 0,
            start_s: start,
            end_s: end,
            airtime_ms: (end - start) * 1000.0,
            sf: SpreadingFactor::SF7,
            channel_hz: DEFAULT_CHANNEL_HZ,
            critical_start_s: start + 0.003,
        }
    }

    #[test]
    fn capture_rule() {
        let cfg = CollisionConfig::default();
        let a = tx(0.0, 1.0);
        let b = tx(0.5, 1.5);
        // equal power: both lost
        assert!(destroys(-100.0, &a, -100.0, &b, &cfg));
        assert!(destroys(-100.0, &b, -100.0, &a, &cfg));
        // 10 dB apart with a 6 dB threshold: only the weaker one is lost
        assert!(!destroys(-100.0, &a, -110.0, &b, &cfg));
        assert!(destroys(-110.0, &b, -100.0, &a, &cfg));
        // exactly at the threshold survives
        assert!(!destroys(-100.0, &a, -106.0, &b, &cfg));
    }

    #[test]
    fn preamble_critical_mode_spares_early_overlap() {
        let cfg = CollisionConfig { preamble_critical: true, ..Default::default() };
        let victim = tx(1.0, 2.0);
        let early = tx(0.0, 1.001); // ends inside the victim's first preamble symbols
        assert!(!destroys(-100.0, &victim, -100.0, &early, &cfg));
        let late = tx(0.0, 1.5);
        assert!(destroys(-100.0, &victim, -100.0, &late, &cfg));
    }
}
