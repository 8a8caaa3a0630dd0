//! Single runs, sweeps and their CSV reports.

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::airtime::{airtime_ms, sf_cost_vector, SpreadingFactor};
use crate::allocation::{
    ad_maiora, adr_mgw, per_node_loads, probabilistic_adr, AdMaioraOptions, Allocator, Assignment, SfHistogram,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::scenario::{Scenario, ScenarioConfig, Topology};
use crate::simulator::{run_simulation, EventLog, SimInput, SimMetrics};
use crate::stats::Summary;

/// Runs the requested allocator on a built scenario.
pub fn allocate(scenario: &Scenario, allocator: Allocator, seed: u64) -> Result<Assignment> {
    let links = scenario.links();
    let reference = scenario.config.radio.channel_params();
    let sf_cost = sf_cost_vector(scenario.config.allocation.cost_mode, &reference)?;
    let assignment = match allocator {
        Allocator::AdrMgw => adr_mgw(&links),
        Allocator::ProbAdr => probabilistic_adr(&links, &sf_cost, &mut stream(seed, Purpose::Allocation, 0))?,
        Allocator::AdMaiora => {
            let loads = per_node_loads(&scenario.params, None)?;
            let options = AdMaioraOptions { sf_cost, policy: scenario.config.allocation.slack_policy };
            ad_maiora(&links, &loads, &options)?
        }
    };
    assignment.check_feasible(&links)?;
    Ok(assignment)
}

/// Whether any connected node's offered on-air fraction exceeds the duty
/// cycle at the configured message period.
pub fn duty_cycle_violation(scenario: &Scenario, assignment: &Assignment) -> Result<bool> {
    let traffic = &scenario.config.traffic;
    for (node, sf) in assignment.sfs().iter().enumerate() {
        if let Some(sf) = sf {
            let at_s = airtime_ms(&scenario.params[node].with_sf(*sf))? / 1000.0;
            if at_s / traffic.message_period_s > traffic.duty_cycle {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub allocator: Allocator,
    pub seed: u64,
    pub metrics: SimMetrics,
    pub histogram: SfHistogram,
    pub dc_violation: bool,
    pub assignment: Assignment,
    pub log: Option<EventLog>,
}

/// Allocates and simulates an already built scenario.
pub fn run_scenario(scenario: &Scenario, allocator: Allocator, keep_log: bool) -> Result<RunOutcome> {
    let seed = scenario.config.seed;
    let assignment = allocate(scenario, allocator, seed)?;
    let collision = scenario.collision();
    let input = SimInput {
        links: scenario.links(),
        params: &scenario.params,
        assignment: &assignment,
        traffic: &scenario.config.traffic,
        collision: &collision,
    };
    let report = run_simulation(&input, seed, keep_log)?;
    Ok(RunOutcome {
        config: scenario.config.clone(),
        allocator,
        seed,
        metrics: report.metrics,
        histogram: assignment.histogram(),
        dc_violation: duty_cycle_violation(scenario, &assignment)?,
        assignment,
        log: report.log,
    })
}

/// Builds the scenario for `seed` and runs `allocator` on it.
pub fn run_once(config: &ScenarioConfig, allocator: Allocator, seed: u64) -> Result<RunOutcome> {
    let scenario = Scenario::build(ScenarioConfig { seed, ..config.clone() })?;
    run_scenario(&scenario, allocator, false)
}

/// Flat CSV record of one run. Every input a command-line run can set is
/// echoed next to the metrics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRow {
    pub nodes: usize,
    pub gateways: usize,
    pub topology: Topology,
    pub allocator: String,
    pub mp_s: f64,
    pub duty_cycle: f64,
    pub payload_bytes: u16,
    pub sim_time_s: f64,
    pub seed: u64,
    pub sent: u64,
    pub delivered: u64,
    pub der: f64,
    pub throughput_bps: f64,
    pub collisions: u64,
    pub dc_violation: bool,
    pub sf7: usize,
    pub sf8: usize,
    pub sf9: usize,
    pub sf10: usize,
    pub sf11: usize,
    pub sf12: usize,
    pub disconnected: usize,
}

impl RunOutcome {
    pub fn row(&self) -> RunRow {
        let c = &self.histogram.counts;
        RunRow {
            nodes: self.config.n_nodes,
            gateways: self.config.n_gateways,
            topology: self.config.topology,
            allocator: self.allocator.to_string(),
            mp_s: self.config.traffic.message_period_s,
            duty_cycle: self.config.traffic.duty_cycle,
            payload_bytes: self.config.radio.payload_bytes,
            sim_time_s: self.config.traffic.sim_duration_s,
            seed: self.seed,
            sent: self.metrics.sent,
            delivered: self.metrics.delivered,
            der: self.metrics.der,
            throughput_bps: self.metrics.throughput_bps,
            collisions: self.metrics.collisions,
            dc_violation: self.dc_violation,
            sf7: c[0],
            sf8: c[1],
            sf9: c[2],
            sf10: c[3],
            sf11: c[4],
            sf12: c[5],
            disconnected: self.histogram.disconnected,
        }
    }

    /// One row per gateway: heard, received and partial DER.
    pub fn per_gateway(&self) -> Vec<GatewayRow> {
        (0..self.metrics.per_gw_heard.len())
            .map(|gw| GatewayRow {
                nodes: self.config.n_nodes,
                gateways: self.config.n_gateways,
                topology: self.config.topology,
                allocator: self.allocator.to_string(),
                mp_s: self.config.traffic.message_period_s,
                seed: self.seed,
                gateway: gw,
                heard: self.metrics.per_gw_heard[gw],
                received: self.metrics.per_gw_received[gw],
                partial_der: self.metrics.per_gw_der[gw],
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GatewayRow {
    pub nodes: usize,
    pub gateways: usize,
    pub topology: Topology,
    pub allocator: String,
    pub mp_s: f64,
    pub seed: u64,
    pub gateway: usize,
    pub heard: u64,
    pub received: u64,
    pub partial_der: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    MessagePeriod,
    Nodes,
    Gateways,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::MessagePeriod => "mp",
            Axis::Nodes => "nodes",
            Axis::Gateways => "gateways",
        }
    }

    /// Applies one axis value to a base configuration. A single-gateway
    /// point of a gateway sweep uses the single-gateway topology.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::param(format!("{} must be a positive integer, got {v}", self.name())))
            }
        };
        match self {
            Axis::MessagePeriod => c.traffic.message_period_s = value,
            Axis::Nodes => c.n_nodes = as_count(value)?,
            Axis::Gateways => {
                c.n_gateways = as_count(value)?;
                if c.n_gateways == 1 {
                    c.topology = Topology::Single;
                } else if c.topology == Topology::Single {
                    c.topology = Topology::Balanced;
                }
            }
        }
        Ok(c)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mp" | "message_period" | "message-period" => Ok(Axis::MessagePeriod),
            "nodes" | "n_nodes" => Ok(Axis::Nodes),
            "gateways" | "n_gateways" => Ok(Axis::Gateways),
            other => Err(Error::param(format!("unknown sweep axis '{other}' (expected mp, nodes or gateways)"))),
        }
    }
}

/// Parses `axis=v1,v2,...`.
pub fn parse_sweep(text: &str) -> Result<(Axis, Vec<f64>)> {
    let (axis, values) = text
        .split_once('=')
        .ok_or_else(|| Error::param(format!("sweep '{text}' is not of the form axis=v1,v2,...")))?;
    let axis: Axis = axis.trim().parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::param(format!("bad sweep value '{v}'"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::param("sweep needs at least one value"));
    }
    Ok((axis, values))
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    /// `None` runs the base configuration as a single point.
    pub axis: Option<(Axis, Vec<f64>)>,
    pub allocators: Vec<Allocator>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.allocators.is_empty() {
            return Err(Error::param("a sweep needs at least one allocator"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("a sweep needs at least one seed"));
        }
        if let Some((_, values)) = &self.axis {
            if values.is_empty() {
                return Err(Error::param("a sweep needs at least one axis value"));
            }
        }
        Ok(())
    }

    fn axis_values(&self) -> Vec<Option<f64>> {
        match &self.axis {
            Some((_, values)) => values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }

    /// All (axis value, allocator, seed) points in canonical order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for value in self.axis_values() {
            for &allocator in &self.allocators {
                for &seed in &self.seeds {
                    out.push(SweepPoint { value, allocator, seed });
                }
            }
        }
        out
    }

    fn config_for(&self, value: Option<f64>) -> Result<ScenarioConfig> {
        match (&self.axis, value) {
            (Some((axis, _)), Some(v)) => axis.apply(&self.base, v),
            _ => Ok(self.base.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: Option<f64>,
    pub allocator: Allocator,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct PointFailure {
    pub point: SweepPoint,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub axis: String,
    pub value: Option<f64>,
    pub allocator: String,
    pub seeds: usize,
    pub der_mean: f64,
    /// Half-width of the 95% Student-t interval; empty with one seed.
    pub der_ci95: Option<f64>,
    pub throughput_mean: f64,
    pub throughput_ci95: Option<f64>,
    pub dc_violation: bool,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axis: Option<Axis>,
    /// Successful runs in canonical order.
    pub outcomes: Vec<(SweepPoint, RunOutcome)>,
    pub failures: Vec<PointFailure>,
    pub aggregates: Vec<AggregateRow>,
}

/// Full factorial sweep over axis values, allocators and seeds. Points run
/// on up to `jobs` threads; failed points are reported and skipped.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| spec.config_for(p.value).and_then(|c| run_once(&c, p.allocator, p.seed)))
            .collect()
    });

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (point, result) in points.into_iter().zip(results) {
        match result {
            Ok(o) => outcomes.push((point, o)),
            Err(e) => failures.push(PointFailure { point, error: e.to_string() }),
        }
    }

    let axis = spec.axis.as_ref().map(|(a, _)| *a);
    let mut aggregates = Vec::new();
    for value in spec.axis_values() {
        for &allocator in &spec.allocators {
            let group: Vec<&RunOutcome> = outcomes
                .iter()
                .filter(|(p, _)| p.value == value && p.allocator == allocator)
                .map(|(_, o)| o)
                .collect();
            if group.is_empty() {
                continue;
            }
            let der: Vec<f64> = group.iter().map(|o| o.metrics.der).collect();
            let thr: Vec<f64> = group.iter().map(|o| o.metrics.throughput_bps).collect();
            let der_s = Summary::of(&der);
            let thr_s = Summary::of(&thr);
            aggregates.push(AggregateRow {
                axis: axis.map_or_else(|| "none".to_string(), |a| a.to_string()),
                value,
                allocator: allocator.to_string(),
                seeds: group.len(),
                der_mean: der_s.mean,
                der_ci95: der_s.ci95,
                throughput_mean: thr_s.mean,
                throughput_ci95: thr_s.ci95,
                dc_violation: group.iter().any(|o| o.dc_violation),
            });
        }
    }

    Ok(SweepResult { axis, outcomes, failures, aggregates })
}

fn write_rows<W: io::Write, T: Serialize>(writer: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs_csv<'a, W: io::Write>(writer: W, outcomes: impl IntoIterator<Item = &'a RunOutcome>) -> Result<()> {
    write_rows(writer, outcomes.into_iter().map(RunOutcome::row))
}

pub fn write_aggregate_csv<W: io::Write>(writer: W, rows: &[AggregateRow]) -> Result<()> {
    write_rows(writer, rows)
}

pub fn write_per_gw_csv<'a, W: io::Write>(writer: W, outcomes: impl IntoIterator<Item = &'a RunOutcome>) -> Result<()> {
    write_rows(writer, outcomes.into_iter().flat_map(RunOutcome::per_gateway))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SfCountRow {
    pub nodes: usize,
    pub gateways: usize,
    pub topology: Topology,
    pub allocator: String,
    pub seed: u64,
    /// `7`..`12`, or `disconnected`.
    pub sf: String,
    pub count: usize,
}

pub fn sf_count_rows(outcome: &RunOutcome) -> Vec<SfCountRow> {
    let row = |sf: String, count| SfCountRow {
        nodes: outcome.config.n_nodes,
        gateways: outcome.config.n_gateways,
        topology: outcome.config.topology,
        allocator: outcome.allocator.to_string(),
        seed: outcome.seed,
        sf,
        count,
    };
    let mut rows: Vec<SfCountRow> = SpreadingFactor::ALL
        .iter()
        .map(|sf| row(sf.value().to_string(), outcome.histogram.count(*sf)))
        .collect();
    rows.push(row("disconnected".to_string(), outcome.histogram.disconnected));
    rows
}

pub fn write_sf_histogram_csv<'a, W: io::Write>(writer: W, outcomes: impl IntoIterator<Item = &'a RunOutcome>) -> Result<()> {
    write_rows(writer, outcomes.into_iter().flat_map(sf_count_rows))
}
