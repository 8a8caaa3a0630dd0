//! Topologies and the scenario file.
//!
//! A scenario file is TOML. Only `n_nodes` and `n_gateways` are required;
//! every other key falls back to the defaults below.
//!
//! ```toml
//! n_nodes = 500
//! n_gateways = 4
//! topology = "balanced"        # balanced | unbalanced | single
//! hot_gateway = 0              # unbalanced only
//! gateway_spacing_m = 200.0
//! central_radius_m = 50.0
//! hot_radius_m = 50.0
//! spread_margin_m = 100.0
//! seed = 1
//!
//! [radio]
//! carrier_mhz = 869.5
//! bandwidth_hz = 125000
//! coding_rate = 1              # 4/5
//! payload_bytes = 20
//! preamble_symbols = 8
//! preamble_constant = 4.24
//! header_disabled = false
//! low_dr_opt = "auto"          # auto | on | off
//! tx_power_dbm = 14.0
//!
//! [path_loss]
//! l0_db = 127.41
//! d0_m = 40.0
//! gamma = 2.08
//! sigma2 = 0.0
//!
//! [sensitivity]
//! bw125 = [-123.0, -126.0, -129.0, -132.0, -134.5, -137.0]
//! bw250 = [-120.0, -123.0, -126.0, -129.0, -131.5, -134.0]
//! bw500 = [-117.0, -120.0, -123.0, -126.0, -128.5, -131.0]
//!
//! [traffic]
//! message_period_s = 10.0
//! duty_cycle = 0.1
//! sim_duration_s = 3600.0
//! arrival = "exponential"      # exponential | periodic
//!
//! [collision]
//! capture_threshold_db = 6.0
//! preamble_critical = false
//!
//! [allocation]
//! cost_mode = "computed"       # computed | literal
//! slack_policy = "strict"      # strict | literal
//! ```

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::airtime::{Bandwidth, ChannelParams, CostMode, LowDataRateOptimize, SpreadingFactor, DEFAULT_PREAMBLE_CONSTANT};
use crate::allocation::{LinkBudget, SlackPolicy};
use crate::error::{Error, Result};
use crate::radio::{build_rssi_matrix, PathLossModel, Position, RssiMatrix, SensitivityTable, DEFAULT_TX_POWER_DBM};
use crate::rng::{stream, Purpose};
use crate::simulator::{CollisionConfig, TrafficConfig};

/// Share of nodes placed in the concentrated population.
pub const CONCENTRATED_SHARE: f64 = 0.6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// 60% of nodes in a disc at the gateway centroid.
    #[default]
    Balanced,
    /// 60% of nodes in a disc around one gateway.
    Unbalanced,
    /// One gateway, every node in a disc around it.
    Single,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Balanced => "balanced",
            Topology::Unbalanced => "unbalanced",
            Topology::Single => "single",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Topology::Balanced),
            "unbalanced" => Ok(Topology::Unbalanced),
            "single" => Ok(Topology::Single),
            other => Err(Error::param(format!("unknown topology '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_mhz: f64,
    pub bandwidth_hz: Bandwidth,
    pub coding_rate: u8,
    pub payload_bytes: u16,
    pub preamble_symbols: u16,
    pub preamble_constant: f64,
    pub header_disabled: bool,
    pub low_dr_opt: LowDataRateOptimize,
    pub tx_power_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            carrier_mhz: 869.5,
            bandwidth_hz: Bandwidth::Khz125,
            coding_rate: 1,
            payload_bytes: 20,
            preamble_symbols: 8,
            preamble_constant: DEFAULT_PREAMBLE_CONSTANT,
            header_disabled: false,
            low_dr_opt: LowDataRateOptimize::Auto,
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
        }
    }
}

impl RadioConfig {
    /// Channel parameters for a node, before any SF is assigned.
    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            sf: SpreadingFactor::SF7,
            bw: self.bandwidth_hz,
            cr: self.coding_rate,
            payload_bytes: self.payload_bytes,
            header_disabled: self.header_disabled,
            low_dr_opt: self.low_dr_opt,
            n_preamble: self.preamble_symbols,
            preamble_constant: self.preamble_constant,
        }
    }

    pub fn channel_hz(&self) -> u32 {
        (self.carrier_mhz * 1e6).round() as u32
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    pub cost_mode: CostMode,
    pub slack_policy: SlackPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_nodes: usize,
    pub n_gateways: usize,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub hot_gateway: usize,
    #[serde(default = "defaults::spacing")]
    pub gateway_spacing_m: f64,
    #[serde(default = "defaults::radius")]
    pub central_radius_m: f64,
    #[serde(default = "defaults::radius")]
    pub hot_radius_m: f64,
    #[serde(default = "defaults::margin")]
    pub spread_margin_m: f64,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub sensitivity: SensitivityTable,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub collision: CollisionConfig,
    #[serde(default)]
    pub allocation: AllocationConfig,
}

mod defaults {
    pub fn spacing() -> f64 {
        200.0
    }
    pub fn radius() -> f64 {
        50.0
    }
    pub fn margin() -> f64 {
        100.0
    }
    pub fn seed() -> u64 {
        1
    }
}

impl ScenarioConfig {
    pub fn new(n_nodes: usize, n_gateways: usize) -> Self {
        ScenarioConfig {
            n_nodes,
            n_gateways,
            topology: Topology::Balanced,
            hot_gateway: 0,
            gateway_spacing_m: defaults::spacing(),
            central_radius_m: defaults::radius(),
            hot_radius_m: defaults::radius(),
            spread_margin_m: defaults::margin(),
            seed: defaults::seed(),
            radio: RadioConfig::default(),
            path_loss: PathLossModel::default(),
            sensitivity: SensitivityTable::default(),
            traffic: TrafficConfig::default(),
            collision: CollisionConfig::default(),
            allocation: AllocationConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::Invariant("n_nodes must be > 0".into()));
        }
        if self.n_gateways == 0 {
            return Err(Error::Invariant("n_gateways must be > 0".into()));
        }
        if self.topology == Topology::Single && self.n_gateways != 1 {
            return Err(Error::Invariant(format!(
                "single topology requires n_gateways = 1, got {}",
                self.n_gateways
            )));
        }
        if self.topology == Topology::Unbalanced && self.hot_gateway >= self.n_gateways {
            return Err(Error::Invariant(format!(
                "hot_gateway {} out of range for {} gateways",
                self.hot_gateway, self.n_gateways
            )));
        }
        for (name, v) in [
            ("gateway_spacing_m", self.gateway_spacing_m),
            ("central_radius_m", self.central_radius_m),
            ("hot_radius_m", self.hot_radius_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invariant(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.spread_margin_m >= 0.0 && self.spread_margin_m.is_finite()) {
            return Err(Error::Invariant(format!("spread_margin_m must be >= 0, got {}", self.spread_margin_m)));
        }
        if !self.radio.tx_power_dbm.is_finite() {
            return Err(Error::Invariant("tx_power_dbm must be finite".into()));
        }
        if !(self.radio.carrier_mhz > 0.0 && self.radio.carrier_mhz < 4000.0) {
            return Err(Error::Invariant(format!("carrier_mhz out of range: {}", self.radio.carrier_mhz)));
        }
        if !(self.collision.capture_threshold_db >= 0.0 && self.collision.capture_threshold_db.is_finite()) {
            return Err(Error::Invariant("capture_threshold_db must be finite and >= 0".into()));
        }
        self.radio.channel_params().validate()?;
        self.path_loss.validate()?;
        self.traffic.validate()?;
        Ok(())
    }
}

/// Gateway positions with their centroid at the origin: a `rows x cols`
/// grid of pitch `spacing`, where `rows` is the largest divisor of `n` not
/// above its square root (1 -> point, 2 -> pair, 4 -> square, 8 -> 2x4).
pub fn place_gateways(n: usize, spacing: f64) -> Result<Vec<Position>> {
    if n == 0 {
        return Err(Error::param("at least one gateway is required"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::param(format!("gateway spacing must be > 0, got {spacing}")));
    }
    let rows = (1..=n).filter(|r| n.is_multiple_of(*r) && r * r <= n).max().unwrap_or(1);
    let cols = n / rows;
    let offset = |i: usize, count: usize| (i as f64 - (count as f64 - 1.0) / 2.0) * spacing;
    let mut out = Vec::with_capacity(n);
    for r in 0..rows {
        for c in 0..cols {
            out.push(Position::new(offset(c, cols), offset(r, rows)));
        }
    }
    Ok(out)
}

pub fn centroid(points: &[Position]) -> Position {
    let n = points.len().max(1) as f64;
    Position::new(points.iter().map(|p| p.x).sum::<f64>() / n, points.iter().map(|p| p.y).sum::<f64>() / n)
}

/// Number of nodes in the concentrated population, rounding up.
pub fn concentrated_count(n_nodes: usize) -> usize {
    (n_nodes as f64 * CONCENTRATED_SHARE).ceil() as usize
}

fn uniform_in_disc<R: Rng + ?Sized>(center: Position, radius: f64, rng: &mut R) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Position::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

fn uniform_in_spread_region<R: Rng + ?Sized>(gateways: &[Position], margin: f64, rng: &mut R) -> Position {
    let (min_x, max_x) = gateways.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (min_y, max_y) = gateways.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let x = (min_x - margin) + rng.random::<f64>() * (max_x - min_x + 2.0 * margin);
    let y = (min_y - margin) + rng.random::<f64>() * (max_y - min_y + 2.0 * margin);
    Position::new(x, y)
}

/// Node positions; the concentrated population comes first.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub gateways: Vec<Position>,
    pub nodes: Vec<Position>,
    pub concentrated: usize,
}

fn two_populations<R: Rng + ?Sized>(
    n_nodes: usize,
    gateways: &[Position],
    center: Position,
    radius: f64,
    margin: f64,
    rng: &mut R,
) -> Result<Placement> {
    if n_nodes == 0 {
        return Err(Error::param("at least one node is required"));
    }
    if gateways.is_empty() {
        return Err(Error::param("at least one gateway is required"));
    }
    let concentrated = concentrated_count(n_nodes);
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..concentrated {
        nodes.push(uniform_in_disc(center, radius, rng));
    }
    for _ in concentrated..n_nodes {
        nodes.push(uniform_in_spread_region(gateways, margin, rng));
    }
    Ok(Placement { gateways: gateways.to_vec(), nodes, concentrated })
}

/// 60% of nodes in a disc of `radius` at the gateway centroid, the rest
/// uniform over the gateway bounding box grown by `margin`.
pub fn gen_balanced<R: Rng + ?Sized>(
    n_nodes: usize,
    gateways: &[Position],
    radius: f64,
    margin: f64,
    rng: &mut R,
) -> Result<Placement> {
    two_populations(n_nodes, gateways, centroid(gateways), radius, margin, rng)
}

/// 60% of nodes in a disc of `radius` around `gateways[hot]`, the rest as
/// in [`gen_balanced`].
pub fn gen_unbalanced<R: Rng + ?Sized>(
    n_nodes: usize,
    gateways: &[Position],
    hot: usize,
    radius: f64,
    margin: f64,
    rng: &mut R,
) -> Result<Placement> {
    let center = *gateways
        .get(hot)
        .ok_or_else(|| Error::param(format!("hot gateway {hot} out of range for {} gateways", gateways.len())))?;
    two_populations(n_nodes, gateways, center, radius, margin, rng)
}

/// One gateway at the origin and every node in a disc of `radius` around it.
pub fn gen_single_gw<R: Rng + ?Sized>(n_nodes: usize, radius: f64, rng: &mut R) -> Result<Placement> {
    if n_nodes == 0 {
        return Err(Error::param("at least one node is required"));
    }
    let nodes = (0..n_nodes).map(|_| uniform_in_disc(Position::ORIGIN, radius, rng)).collect();
    Ok(Placement { gateways: vec![Position::ORIGIN], nodes, concentrated: n_nodes })
}

/// A fully built scenario: geometry, radio setup and the RSSI matrix.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub placement: Placement,
    pub params: Vec<ChannelParams>,
    pub rssi: RssiMatrix,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, Purpose::Placement, 0);
        let placement = match config.topology {
            Topology::Single => gen_single_gw(config.n_nodes, config.hot_radius_m, &mut rng)?,
            Topology::Balanced => {
                let gws = place_gateways(config.n_gateways, config.gateway_spacing_m)?;
                gen_balanced(config.n_nodes, &gws, config.central_radius_m, config.spread_margin_m, &mut rng)?
            }
            Topology::Unbalanced => {
                let gws = place_gateways(config.n_gateways, config.gateway_spacing_m)?;
                gen_unbalanced(
                    config.n_nodes,
                    &gws,
                    config.hot_gateway,
                    config.hot_radius_m,
                    config.spread_margin_m,
                    &mut rng,
                )?
            }
        };
        let rssi = build_rssi_matrix(
            &placement.nodes,
            &placement.gateways,
            &config.path_loss,
            config.radio.tx_power_dbm,
            &mut stream(config.seed, Purpose::Shadowing, 0),
        )?;
        let params = vec![config.radio.channel_params(); config.n_nodes];
        Ok(Scenario { config, placement, params, rssi })
    }

    pub fn links(&self) -> LinkBudget<'_> {
        LinkBudget::new(&self.rssi, &self.config.sensitivity, self.config.radio.bandwidth_hz)
    }

    /// Collision settings with the channel taken from the radio carrier.
    pub fn collision(&self) -> CollisionConfig {
        CollisionConfig { channel_hz: self.config.radio.channel_hz(), ..self.config.collision }
    }

    /// CSV with header `kind,id,x,y`; gateways first, then nodes.
    pub fn write_positions_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "id", "x", "y"])?;
        for (kind, points) in [("gateway", &self.placement.gateways), ("node", &self.placement.nodes)] {
            for (i, p) in points.iter().enumerate() {
                w.write_record([kind.to_string(), i.to_string(), p.x.to_string(), p.y.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::build(ScenarioConfig::from_toml_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::adr_mgw;
    use approx::assert_abs_diff_eq;

    fn rng() -> rand_chacha::ChaCha8Rng {
        stream(5, Purpose::Placement, 0)
    }

    #[test]
    fn gateway_layouts() {
        assert_eq!(place_gateways(1, 123.0).unwrap(), vec![Position::ORIGIN]);
        assert_eq!(
            place_gateways(2, 200.0).unwrap(),
            vec![Position::new(-100.0, 0.0), Position::new(100.0, 0.0)]
        );
        let four = place_gateways(4, 200.0).unwrap();
        for p in &four {
            assert_eq!((p.x.abs(), p.y.abs()), (100.0, 100.0));
        }
        let eight = place_gateways(8, 200.0).unwrap();
        assert_eq!(eight.len(), 8);
        let xs: Vec<f64> = eight[..4].iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![-300.0, -100.0, 100.0, 300.0]);
        assert!(eight.iter().all(|p| p.y.abs() == 100.0));
        for n in 1..=9 {
            let c = centroid(&place_gateways(n, 200.0).unwrap());
            assert_abs_diff_eq!(c.x, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(c.y, 0.0, epsilon = 1e-9);
        }
        assert!(place_gateways(0, 200.0).is_err());
        assert!(place_gateways(2, 0.0).is_err());
    }

    #[test]
    fn balanced_split() {
        let gws = place_gateways(4, 200.0).unwrap();
        let p = gen_balanced(500, &gws, 50.0, 100.0, &mut rng()).unwrap();
        assert_eq!(p.concentrated, 300);
        assert!(p.nodes[..300].iter().all(|n| n.distance(&Position::ORIGIN) <= 50.0));
        assert!(p.nodes[300..].iter().all(|n| n.x.abs() <= 200.0 && n.y.abs() <= 200.0));
        assert_eq!(gen_balanced(1, &gws, 50.0, 100.0, &mut rng()).unwrap().concentrated, 1);
        assert_eq!(
            gen_balanced(37, &gws, 50.0, 100.0, &mut rng()).unwrap(),
            gen_balanced(37, &gws, 50.0, 100.0, &mut rng()).unwrap()
        );
        assert!(gen_balanced(0, &gws, 50.0, 100.0, &mut rng()).is_err());
    }

    #[test]
    fn unbalanced_split() {
        let gws = place_gateways(4, 200.0).unwrap();
        let p = gen_unbalanced(500, &gws, 1, 50.0, 100.0, &mut rng()).unwrap();
        assert_eq!(p.concentrated, 300);
        let hot = gws[1];
        assert_eq!(p.nodes.iter().take(300).filter(|n| n.distance(&hot) <= 50.0).count(), 300);
        assert_eq!(p.nodes.len(), 500);
        assert!(gen_unbalanced(10, &gws, 4, 50.0, 100.0, &mut rng()).is_err());
    }

    #[test]
    fn unbalanced_hot_nodes_have_strong_signal() {
        let mut config = ScenarioConfig::new(500, 1);
        config.topology = Topology::Unbalanced;
        let s = Scenario::build(config).unwrap();
        let floor = 14.0 - PathLossModel::default().mean_loss(50.0).unwrap();
        assert!((0..300).all(|n| s.rssi.get(0, n) >= floor));
    }

    #[test]
    fn single_gateway_disc() {
        let p = gen_single_gw(500, 50.0, &mut rng()).unwrap();
        assert_eq!(p.nodes.len(), 500);
        assert!(p.nodes.iter().all(|n| n.distance(&Position::ORIGIN) <= 50.0));
        assert!(gen_single_gw(0, 50.0, &mut rng()).is_err());

        let mut config = ScenarioConfig::new(500, 1);
        config.topology = Topology::Single;
        let s = Scenario::build(config).unwrap();
        let a = adr_mgw(&s.links());
        assert!(a.sfs().iter().all(|sf| *sf == Some(SpreadingFactor::SF7)));
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ScenarioConfig::from_toml_str("n_nodes = 50\nn_gateways = 2\n").unwrap();
        assert_eq!(c, ScenarioConfig::new(50, 2));
        assert_eq!(c.radio.carrier_mhz, 869.5);
        assert_eq!(c.radio.bandwidth_hz, Bandwidth::Khz125);
        assert_eq!(c.radio.coding_rate, 1);
        assert_eq!(c.radio.payload_bytes, 20);
        assert_eq!(c.path_loss, PathLossModel::default());
    }

    #[test]
    fn invalid_files_rejected() {
        let text = "n_nodes = 5\nn_gateways = 1\n[sensitivity]\nbw125 = [-123.0, -126.0, -120.0, -132.0, -134.5, -137.0]\nbw250 = [-120.0, -123.0, -126.0, -129.0, -131.5, -134.0]\nbw500 = [-117.0, -120.0, -123.0, -126.0, -128.5, -131.0]\n";
        let err = ScenarioConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("monotonicity"), "{err}");

        assert!(ScenarioConfig::from_toml_str("n_nodes = 0\nn_gateways = 1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("n_gateways = 1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("n_nodes = 3\nn_gateways = 1\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("n_nodes = 3\nn_gateways = 2\ntopology = \"single\"\n").is_err());
        assert!(ScenarioConfig::from_toml_str("n_nodes = 3\nn_gateways = 1\n[radio]\nbandwidth_hz = 100000\n").is_err());
        assert!(ScenarioConfig::from_toml_str("n_nodes = 3\nn_gateways = 1\n[traffic]\nduty_cycle = 0.5\n").is_err());
    }

    #[test]
    fn save_and_reload() {
        let mut c = ScenarioConfig::new(120, 8);
        c.topology = Topology::Unbalanced;
        c.hot_gateway = 3;
        c.traffic.message_period_s = 100.0;
        c.allocation.cost_mode = CostMode::Literal;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        c.save(&path).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(loaded.config, c);
        assert_eq!(loaded.placement.nodes.len(), 120);
    }

    #[test]
    fn scenarios_are_seeded() {
        let a = Scenario::build(ScenarioConfig::new(40, 4)).unwrap();
        let b = Scenario::build(ScenarioConfig::new(40, 4)).unwrap();
        assert_eq!(a.placement, b.placement);
        assert_eq!(a.rssi, b.rssi);
        let c = Scenario::build(ScenarioConfig { seed: 2, ..ScenarioConfig::new(40, 4) }).unwrap();
        assert_ne!(a.placement, c.placement);
    }

    #[test]
    fn positions_csv() {
        let s = Scenario::build(ScenarioConfig::new(3, 2)).unwrap();
        let mut buf = Vec::new();
        s.write_positions_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 + 3);
        assert!(text.starts_with("kind,id,x,y\ngateway,0,-100,0\n"));
    }
}
