//! Multi-gateway LoRa spreading-factor allocation and uplink simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`airtime`]: closed-form LoRa timing (symbol time, payload symbols, time on air).
//! - [`radio`]: log-distance path loss, RSSI matrices and sensitivity thresholds.
//! - [`allocation`]: the ADR_MGW, probabilistic ADR and AD MAIORA allocators.
//! - [`simulator`]: a discrete-event uplink simulator with duty-cycle gating and
//!   same-SF capture collisions.
//! - [`scenario`]: gateway layouts, node placement and the TOML scenario file.
//! - [`experiment`]: single runs, parameter sweeps and CSV reports.

pub mod airtime;
pub mod allocation;
pub mod error;
pub mod experiment;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod simulator;
pub mod stats;

pub use airtime::{Bandwidth, ChannelParams, CostMode, LowDataRateOptimize, SpreadingFactor, TimingBreakdown};
pub use allocation::{Allocator, Assignment, LinkBudget, PressureTable};
pub use error::{Error, Result};
pub use radio::{PathLossModel, Position, RssiMatrix, SensitivityTable};
pub use scenario::{Scenario, ScenarioConfig, Topology};
pub use simulator::{CollisionConfig, SimMetrics, TrafficConfig};
