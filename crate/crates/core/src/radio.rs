//! Path loss, received power and reachability.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::airtime::{Bandwidth, SpreadingFactor, N_SF};
use crate::error::{Error, Result};

/// Distances below this are clamped before evaluating the log-distance model.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Default transmit power, dBm.
pub const DEFAULT_TX_POWER_DBM: f64 = 14.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Log-distance path loss with optional log-normal shadowing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    /// Mean loss at the reference distance, dB.
    pub l0_db: f64,
    pub d0_m: f64,
    pub gamma: f64,
    /// Shadowing variance, dB^2.
    pub sigma2: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel { l0_db: 127.41, d0_m: 40.0, gamma: 2.08, sigma2: 0.0 }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0_m > 0.0 && self.d0_m.is_finite()) {
            return Err(Error::Invariant(format!("path loss d0 must be > 0, got {}", self.d0_m)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Invariant(format!("path loss gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Invariant(format!("shadowing variance must be >= 0, got {}", self.sigma2)));
        }
        if !self.l0_db.is_finite() {
            return Err(Error::Invariant("path loss l0 must be finite".into()));
        }
        Ok(())
    }

    /// Loss without the shadowing term.
    pub fn mean_loss(&self, distance_m: f64) -> Result<f64> {
        if !distance_m.is_finite() || distance_m <= 0.0 {
            return Err(Error::param(format!("distance must be > 0, got {distance_m}")));
        }
        Ok(self.l0_db + 10.0 * self.gamma * (distance_m / self.d0_m).log10())
    }

    /// Loss including a shadowing draw from `rng`. No draw is made when
    /// `sigma2` is zero.
    pub fn path_loss<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R) -> Result<f64> {
        let mean = self.mean_loss(distance_m)?;
        if self.sigma2 == 0.0 {
            return Ok(mean);
        }
        let normal = Normal::new(0.0, self.sigma2.sqrt())
            .map_err(|e| Error::param(format!("shadowing distribution: {e}")))?;
        Ok(mean + normal.sample(rng))
    }
}

pub fn rssi<R: Rng + ?Sized>(tx_power_dbm: f64, model: &PathLossModel, distance_m: f64, rng: &mut R) -> Result<f64> {
    Ok(tx_power_dbm - model.path_loss(distance_m, rng)?)
}

/// Demodulation thresholds in dBm, indexed `[sf][bw]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SensitivityColumns", into = "SensitivityColumns")]
pub struct SensitivityTable {
    values: [[f64; 3]; N_SF],
}

/// Column-major on-disk form of [`SensitivityTable`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitivityColumns {
    pub bw125: [f64; N_SF],
    pub bw250: [f64; N_SF],
    pub bw500: [f64; N_SF],
}

impl Default for SensitivityTable {
    fn default() -> Self {
        SensitivityTable::from_columns([
            [-123.0, -126.0, -129.0, -132.0, -134.5, -137.0],
            [-120.0, -123.0, -126.0, -129.0, -131.5, -134.0],
            [-117.0, -120.0, -123.0, -126.0, -128.5, -131.0],
        ])
        .expect("default sensitivity table is monotone")
    }
}

impl SensitivityTable {
    /// Builds a table from one SF7..SF12 column per bandwidth
    /// (125, 250, 500 kHz). Each column must strictly decrease with SF.
    pub fn from_columns(columns: [[f64; N_SF]; 3]) -> Result<Self> {
        for (bw, column) in Bandwidth::ALL.iter().zip(columns.iter()) {
            if column.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invariant(format!("sensitivity column {} Hz has a non-finite entry", bw.hz())));
            }
            if let Some(i) = column.windows(2).position(|w| w[1] >= w[0]) {
                return Err(Error::Invariant(format!(
                    "sensitivity must strictly decrease with SF (monotonicity): {} Hz column has SF{} = {} and SF{} = {}",
                    bw.hz(),
                    i + 7,
                    column[i],
                    i + 8,
                    column[i + 1]
                )));
            }
        }
        let mut values = [[0.0; 3]; N_SF];
        for (b, column) in columns.iter().enumerate() {
            for (s, v) in column.iter().enumerate() {
                values[s][b] = *v;
            }
        }
        Ok(SensitivityTable { values })
    }

    pub fn get(&self, sf: SpreadingFactor, bw: Bandwidth) -> f64 {
        self.values[sf.index()][bw.index()]
    }

    pub fn column(&self, bw: Bandwidth) -> [f64; N_SF] {
        std::array::from_fn(|s| self.values[s][bw.index()])
    }
}

impl TryFrom<SensitivityColumns> for SensitivityTable {
    type Error = Error;

    fn try_from(c: SensitivityColumns) -> Result<Self> {
        SensitivityTable::from_columns([c.bw125, c.bw250, c.bw500])
    }
}

impl From<SensitivityTable> for SensitivityColumns {
    fn from(t: SensitivityTable) -> Self {
        SensitivityColumns {
            bw125: t.column(Bandwidth::Khz125),
            bw250: t.column(Bandwidth::Khz250),
            bw500: t.column(Bandwidth::Khz500),
        }
    }
}

/// Received power, dBm, of every node at every gateway. `NEG_INFINITY`
/// marks "no signal".
#[derive(Clone, Debug, PartialEq)]
pub struct RssiMatrix {
    n_gateways: usize,
    n_nodes: usize,
    // row-major [gateway][node]
    values: Vec<f64>,
}

impl RssiMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_gateways = rows.len();
        let n_nodes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_nodes) {
            return Err(Error::param("RSSI rows must all have the same length"));
        }
        if rows.iter().flatten().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::param("RSSI entries must be finite or -inf"));
        }
        Ok(RssiMatrix { n_gateways, n_nodes, values: rows.into_iter().flatten().collect() })
    }

    pub fn n_gateways(&self) -> usize {
        self.n_gateways
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn get(&self, gateway: usize, node: usize) -> f64 {
        self.values[gateway * self.n_nodes + node]
    }

    pub fn row(&self, gateway: usize) -> &[f64] {
        &self.values[gateway * self.n_nodes..(gateway + 1) * self.n_nodes]
    }

    /// Strongest received power of `node` over all gateways.
    pub fn best(&self, node: usize) -> f64 {
        (0..self.n_gateways).map(|g| self.get(g, node)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `r[i, j]` is the RSSI of node `j` at gateway `i`.
pub fn build_rssi_matrix<R: Rng + ?Sized>(
    nodes: &[Position],
    gateways: &[Position],
    model: &PathLossModel,
    tx_power_dbm: f64,
    rng: &mut R,
) -> Result<RssiMatrix> {
    if nodes.is_empty() || gateways.is_empty() {
        return Err(Error::param("RSSI matrix needs at least one node and one gateway"));
    }
    model.validate()?;
    let mut values = Vec::with_capacity(nodes.len() * gateways.len());
    for gw in gateways {
        for node in nodes {
            let d = gw.distance(node).max(MIN_DISTANCE_M);
            values.push(rssi(tx_power_dbm, model, d, rng)?);
        }
    }
    Ok(RssiMatrix { n_gateways: gateways.len(), n_nodes: nodes.len(), values })
}

/// For each gateway, the SFs at which it can demodulate `node`.
pub fn reachable_sfs(
    rssi: &RssiMatrix,
    sensitivity: &SensitivityTable,
    node: usize,
    bw: Bandwidth,
) -> Vec<Vec<SpreadingFactor>> {
    (0..rssi.n_gateways())
        .map(|gw| {
            let r = rssi.get(gw, node);
            SpreadingFactor::ALL.into_iter().filter(|&sf| r >= sensitivity.get(sf, bw)).collect()
        })
        .collect()
}
