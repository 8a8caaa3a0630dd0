//! Spreading-factor allocators.
//!
//! Three allocators share one [`Assignment`] output type:
//!
//! - [`adr_mgw`]: every node gets the lowest SF at which at least one
//!   gateway hears it.
//! - [`probabilistic_adr`]: every node draws an SF at or above its ADR_MGW
//!   SF with probability inversely proportional to the SF cost.
//! - [`ad_maiora`]: starting from ADR_MGW, repeatedly takes a node off the
//!   most loaded (SF, gateway) cell of the pressure table and promotes it
//!   to the higher SF with the most remaining air-time headroom across the
//!   gateways that would hear it.
//!
//! Pressure is accumulated per-message air time in milliseconds. A node
//! counts towards `(sf, gw)` only if `gw` can demodulate it at `sf`.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::airtime::{airtime_ms, Bandwidth, ChannelParams, SpreadingFactor, N_SF};
use crate::error::{Error, Result};
use crate::radio::{RssiMatrix, SensitivityTable};

/// Which allocator produced an [`Assignment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Allocator {
    #[serde(rename = "adr")]
    AdrMgw,
    #[serde(rename = "prob-adr")]
    ProbAdr,
    #[serde(rename = "admaiora")]
    AdMaiora,
}

impl Allocator {
    pub const ALL: [Allocator; 3] = [Allocator::AdrMgw, Allocator::ProbAdr, Allocator::AdMaiora];

    pub fn name(self) -> &'static str {
        match self {
            Allocator::AdrMgw => "adr",
            Allocator::ProbAdr => "prob-adr",
            Allocator::AdMaiora => "admaiora",
        }
    }
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Allocator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adr" | "adr-mgw" => Ok(Allocator::AdrMgw),
            "prob-adr" => Ok(Allocator::ProbAdr),
            "admaiora" | "ad-maiora" => Ok(Allocator::AdMaiora),
            other => Err(Error::param(format!("unknown allocator '{other}' (expected adr, prob-adr or admaiora)"))),
        }
    }
}

/// RSSI matrix plus the thresholds that turn it into audibility.
#[derive(Clone, Copy, Debug)]
pub struct LinkBudget<'a> {
    pub rssi: &'a RssiMatrix,
    pub sensitivity: &'a SensitivityTable,
    pub bw: Bandwidth,
}

impl<'a> LinkBudget<'a> {
    pub fn new(rssi: &'a RssiMatrix, sensitivity: &'a SensitivityTable, bw: Bandwidth) -> Self {
        LinkBudget { rssi, sensitivity, bw }
    }

    pub fn n_nodes(&self) -> usize {
        self.rssi.n_nodes()
    }

    pub fn n_gateways(&self) -> usize {
        self.rssi.n_gateways()
    }

    /// Whether `gateway` demodulates `node` transmitting at `sf`.
    pub fn hears(&self, gateway: usize, node: usize, sf: SpreadingFactor) -> bool {
        self.rssi.get(gateway, node) >= self.sensitivity.get(sf, self.bw)
    }

    /// Whether any gateway hears `node` at `sf`.
    pub fn heard_anywhere(&self, node: usize, sf: SpreadingFactor) -> bool {
        (0..self.n_gateways()).any(|gw| self.hears(gw, node, sf))
    }

    /// Lowest SF heard by at least one gateway.
    pub fn min_sf(&self, node: usize) -> Option<SpreadingFactor> {
        SpreadingFactor::ALL.into_iter().find(|&sf| self.heard_anywhere(node, sf))
    }
}

/// Per-node SF choice. `None` marks a disconnected node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    sfs: Vec<Option<SpreadingFactor>>,
    provenance: Allocator,
}

impl Assignment {
    pub fn new(sfs: Vec<Option<SpreadingFactor>>, provenance: Allocator) -> Self {
        Assignment { sfs, provenance }
    }

    pub fn sf(&self, node: usize) -> Option<SpreadingFactor> {
        self.sfs[node]
    }

    pub fn sfs(&self) -> &[Option<SpreadingFactor>] {
        &self.sfs
    }

    pub fn len(&self) -> usize {
        self.sfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sfs.is_empty()
    }

    pub fn provenance(&self) -> Allocator {
        self.provenance
    }

    pub fn connected(&self) -> usize {
        self.sfs.iter().flatten().count()
    }

    /// Every connected node must be heard by at least one gateway at its SF.
    pub fn check_feasible(&self, links: &LinkBudget<'_>) -> Result<()> {
        if self.len() != links.n_nodes() {
            return Err(Error::Consistency(format!(
                "assignment covers {} nodes but the RSSI matrix has {}",
                self.len(),
                links.n_nodes()
            )));
        }
        for (node, sf) in self.sfs.iter().enumerate() {
            if let Some(sf) = *sf {
                if !links.heard_anywhere(node, sf) {
                    return Err(Error::Consistency(format!("node {node} assigned {sf} but no gateway hears it there")));
                }
            }
        }
        Ok(())
    }

    pub fn histogram(&self) -> SfHistogram {
        sf_histogram(self)
    }

    /// CSV with header `node,sf,provenance`; disconnected nodes have an
    /// empty `sf` field.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["node", "sf", "provenance"])?;
        for (node, sf) in self.sfs.iter().enumerate() {
            let sf = sf.map(|s| s.value().to_string()).unwrap_or_default();
            w.write_record([node.to_string(), sf, self.provenance.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut sfs = Vec::new();
        let mut provenance = None;
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let field = |k: usize| record.get(k).ok_or_else(|| Error::param(format!("row {i}: missing column {k}")));
            let node: usize = field(0)?.parse().map_err(|_| Error::param(format!("row {i}: bad node id")))?;
            if node != i {
                return Err(Error::param(format!("row {i}: node ids must be dense and ordered, got {node}")));
            }
            let sf = match field(1)? {
                "" => None,
                s => Some(SpreadingFactor::new(s.parse().map_err(|_| Error::param(format!("row {i}: bad sf '{s}'")))?)?),
            };
            let p: Allocator = field(2)?.parse()?;
            if provenance.is_some_and(|q| q != p) {
                return Err(Error::param(format!("row {i}: mixed provenance")));
            }
            provenance = Some(p);
            sfs.push(sf);
        }
        Ok(Assignment { sfs, provenance: provenance.unwrap_or(Allocator::AdrMgw) })
    }
}

/// Node count per SF, SF7 first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SfHistogram {
    pub counts: [usize; N_SF],
    pub disconnected: usize,
}

impl SfHistogram {
    pub fn count(&self, sf: SpreadingFactor) -> usize {
        self.counts[sf.index()]
    }

    pub fn connected(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn sf_histogram(assignment: &Assignment) -> SfHistogram {
    let mut h = SfHistogram::default();
    for sf in assignment.sfs() {
        match sf {
            Some(sf) => h.counts[sf.index()] += 1,
            None => h.disconnected += 1,
        }
    }
    h
}

/// Accumulated air time (ms) per SF and gateway.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureTable {
    n_gateways: usize,
    // [sf][gateway]
    cells: Vec<f64>,
}

impl PressureTable {
    pub fn zeros(n_gateways: usize) -> Self {
        PressureTable { n_gateways, cells: vec![0.0; N_SF * n_gateways] }
    }

    pub fn n_gateways(&self) -> usize {
        self.n_gateways
    }

    pub fn get(&self, sf: SpreadingFactor, gateway: usize) -> f64 {
        self.cells[sf.index() * self.n_gateways + gateway]
    }

    fn add(&mut self, sf: SpreadingFactor, gateway: usize, value: f64) {
        self.cells[sf.index() * self.n_gateways + gateway] += value;
    }

    /// Highest pressure over all SFs at `gateway`.
    pub fn gateway_max(&self, gateway: usize) -> f64 {
        SpreadingFactor::ALL.iter().map(|&sf| self.get(sf, gateway)).fold(0.0, f64::max)
    }

    pub fn gateway_maxima(&self) -> Vec<f64> {
        (0..self.n_gateways).map(|g| self.gateway_max(g)).collect()
    }

    /// The most loaded cell. Ties go to the lowest gateway, then the
    /// lowest SF.
    pub fn max_cell(&self) -> Option<(SpreadingFactor, usize, f64)> {
        let mut best: Option<(SpreadingFactor, usize, f64)> = None;
        for gw in 0..self.n_gateways {
            for sf in SpreadingFactor::ALL {
                let p = self.get(sf, gw);
                if best.is_none_or(|(_, _, b)| p > b) {
                    best = Some((sf, gw, p));
                }
            }
        }
        best
    }
}

/// Per-node load in ms at each SF: air time of one message, optionally
/// scaled by a per-node rate weight (messages per reference period).
pub fn per_node_loads(params: &[ChannelParams], rate_weights: Option<&[f64]>) -> Result<Vec<[f64; N_SF]>> {
    if let Some(w) = rate_weights {
        if w.len() != params.len() {
            return Err(Error::param("rate weights must match the number of nodes"));
        }
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::param("rate weights must be finite and non-negative"));
        }
    }
    params
        .iter()
        .enumerate()
        .map(|(n, p)| {
            let weight = rate_weights.map_or(1.0, |w| w[n]);
            let mut loads = [0.0; N_SF];
            for sf in SpreadingFactor::ALL {
                loads[sf.index()] = airtime_ms(&p.with_sf(sf))? * weight;
            }
            Ok(loads)
        })
        .collect()
}

pub fn compute_pressure(
    assignment: &Assignment,
    links: &LinkBudget<'_>,
    loads: &[[f64; N_SF]],
) -> Result<PressureTable> {
    assignment.check_feasible(links)?;
    pressure_of(assignment.sfs(), links, loads)
}

fn pressure_of(sfmap: &[Option<SpreadingFactor>], links: &LinkBudget<'_>, loads: &[[f64; N_SF]]) -> Result<PressureTable> {
    if loads.len() != sfmap.len() {
        return Err(Error::Consistency(format!(
            "{} node loads for {} assigned nodes",
            loads.len(),
            sfmap.len()
        )));
    }
    let mut table = PressureTable::zeros(links.n_gateways());
    for (node, sf) in sfmap.iter().enumerate() {
        let Some(sf) = *sf else { continue };
        for gw in 0..links.n_gateways() {
            if links.hears(gw, node, sf) {
                table.add(sf, gw, loads[node][sf.index()]);
            }
        }
    }
    Ok(table)
}

/// A node selected for promotion off the most loaded cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateMove {
    pub node: usize,
    /// SF of the most loaded cell; the node currently uses it.
    pub current_sf: SpreadingFactor,
    pub worst_gateway: usize,
    /// Sum over gateways of the smallest headroom at a higher SF, ms.
    pub weight: f64,
}

/// Picks the node to promote.
///
/// The candidates are the nodes on the most loaded `(sf, gw)` cell that are
/// not `frozen`. For each candidate and gateway, the headroom at a higher
/// SF is `max_pressure(gw) - pressure[sf, gw]`, taken only over SFs the
/// gateway hears the node at and where the headroom is positive. The
/// smallest such headroom per gateway (0 when there is none) is summed over
/// gateways. The largest sum wins, ties to the lowest node id.
pub fn best_node(
    links: &LinkBudget<'_>,
    sfmap: &[Option<SpreadingFactor>],
    frozen: &[bool],
    pressure: &PressureTable,
) -> Option<CandidateMove> {
    let (worst_sf, worst_gw, _) = pressure.max_cell()?;
    let maxima = pressure.gateway_maxima();
    let mut best: Option<CandidateMove> = None;
    for node in 0..sfmap.len() {
        if frozen[node] || sfmap[node] != Some(worst_sf) || !links.hears(worst_gw, node, worst_sf) {
            continue;
        }
        let weight: f64 = (0..links.n_gateways())
            .map(|gw| {
                let lambda = maxima[gw];
                worst_sf
                    .higher()
                    .filter(|&sf| links.hears(gw, node, sf) && lambda > pressure.get(sf, gw))
                    .map(|sf| lambda - pressure.get(sf, gw))
                    .reduce(f64::min)
                    .unwrap_or(0.0)
            })
            .sum();
        if best.is_none_or(|b| weight > b.weight) {
            best = Some(CandidateMove { node, current_sf: worst_sf, worst_gateway: worst_gw, weight });
        }
    }
    best
}

/// Which gateways constrain the target-SF search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlackPolicy {
    /// Only gateways whose maximum exceeds the pressure at the target SF
    /// are considered; a gateway already at its maximum on that SF is
    /// ignored.
    Literal,
    /// Every gateway that hears the node at the target SF is considered,
    /// so a positive result guarantees no gateway maximum grows.
    #[default]
    Strict,
}

/// Outcome of the target-SF search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SfChoice {
    /// Best smallest headroom after paying the SF cost, ms. Zero when no SF
    /// qualifies.
    pub next_at: f64,
    pub sf: Option<SpreadingFactor>,
}

/// Picks the SF to promote `candidate` to.
///
/// For each SF above the candidate's current one, the headroom at every
/// gateway hearing the node there is
/// `max_pressure(gw) - pressure[sf, gw] - cost[sf]`; the SF is scored by its smallest headroom. The best score
/// wins if it is positive, ties to the lower SF. An SF with no qualifying
/// gateway is skipped.
pub fn best_sf(
    links: &LinkBudget<'_>,
    candidate: &CandidateMove,
    pressure: &PressureTable,
    sf_cost: &[f64; N_SF],
    policy: SlackPolicy,
) -> SfChoice {
    let maxima = pressure.gateway_maxima();
    let mut choice = SfChoice { next_at: 0.0, sf: None };
    for sf in candidate.current_sf.higher() {
        let min_slack = (0..links.n_gateways())
            .filter(|&gw| links.hears(gw, candidate.node, sf))
            .filter(|&gw| policy == SlackPolicy::Strict || maxima[gw] > pressure.get(sf, gw))
            .map(|gw| maxima[gw] - pressure.get(sf, gw) - sf_cost[sf.index()])
            .reduce(f64::min);
        if let Some(slack) = min_slack {
            if choice.next_at < slack {
                choice = SfChoice { next_at: slack, sf: Some(sf) };
            }
        }
    }
    choice
}

pub fn adr_mgw(links: &LinkBudget<'_>) -> Assignment {
    let sfs = (0..links.n_nodes()).map(|n| links.min_sf(n)).collect();
    Assignment::new(sfs, Allocator::AdrMgw)
}

/// Samples each connected node's SF from its ADR_MGW SF upwards, with
/// probability proportional to `1 / sf_cost[sf]`.
pub fn probabilistic_adr<R: Rng + ?Sized>(links: &LinkBudget<'_>, sf_cost: &[f64; N_SF], rng: &mut R) -> Result<Assignment> {
    if sf_cost.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::param("SF costs must be positive and finite"));
    }
    let base = adr_mgw(links);
    let sfs = base
        .sfs()
        .iter()
        .map(|sf| {
            let Some(min) = *sf else { return Ok(None) };
            let support: Vec<SpreadingFactor> = min.at_least().collect();
            let dist = WeightedIndex::new(support.iter().map(|s| 1.0 / sf_cost[s.index()]))
                .map_err(|e| Error::param(format!("SF weights: {e}")))?;
            Ok(Some(support[dist.sample(rng)]))
        })
        .collect::<Result<_>>()?;
    Ok(Assignment::new(sfs, Allocator::ProbAdr))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdMaioraOptions {
    pub sf_cost: [f64; N_SF],
    pub policy: SlackPolicy,
}

/// One processed candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Commit {
        node: usize,
        from: SpreadingFactor,
        to: SpreadingFactor,
        next_at: f64,
    },
    /// No SF with free air time, or the best one would have raised some
    /// gateway's maximum pressure.
    Freeze { node: usize, sf: SpreadingFactor, next_at: f64 },
}

#[derive(Clone, Debug)]
pub struct AdMaioraRun {
    pub initial: Assignment,
    pub assignment: Assignment,
    pub steps: Vec<Step>,
}

pub fn ad_maiora(links: &LinkBudget<'_>, loads: &[[f64; N_SF]], options: &AdMaioraOptions) -> Result<Assignment> {
    ad_maiora_traced(links, loads, options).map(|run| run.assignment)
}

/// Runs AD MAIORA and keeps every step for inspection.
///
/// Each node is processed at most once: it is either moved or frozen, and
/// then never considered again. The loop stops once the most loaded cell
/// has no unprocessed node left.
pub fn ad_maiora_traced(links: &LinkBudget<'_>, loads: &[[f64; N_SF]], options: &AdMaioraOptions) -> Result<AdMaioraRun> {
    let initial = adr_mgw(links);
    let n = initial.len();
    let mut sfmap = initial.sfs().to_vec();
    let mut frozen = vec![false; n];
    let mut pressure = pressure_of(&sfmap, links, loads)?;
    let mut steps = Vec::new();

    while let Some(candidate) = best_node(links, &sfmap, &frozen, &pressure) {
        if steps.len() >= n {
            return Err(Error::Invariant(format!("allocation loop exceeded {n} steps")));
        }
        let node = candidate.node;
        let from = candidate.current_sf;
        frozen[node] = true;

        let choice = best_sf(links, &candidate, &pressure, &options.sf_cost, options.policy);
        let committed = match choice.sf {
            Some(to) if choice.next_at > 0.0 => {
                sfmap[node] = Some(to);
                let moved = pressure_of(&sfmap, links, loads)?;
                let before = pressure.gateway_maxima();
                if moved.gateway_maxima().iter().zip(&before).all(|(a, b)| a <= b) {
                    pressure = moved;
                    steps.push(Step::Commit { node, from, to, next_at: choice.next_at });
                    true
                } else {
                    sfmap[node] = Some(from);
                    false
                }
            }
            _ => false,
        };
        if !committed {
            steps.push(Step::Freeze { node, sf: from, next_at: choice.next_at });
        }
    }

    Ok(AdMaioraRun { initial, assignment: Assignment::new(sfmap, Allocator::AdMaiora), steps })
}
