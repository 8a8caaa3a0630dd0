//! LoRa time-on-air.
//!
//! All durations are milliseconds in `f64`. The preamble is
//! `(n_preamble + preamble_constant) * t_sym` with a default constant of
//! 4.24; the more common 4.25 can be selected per [`ChannelParams`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default symbol count added to the programmed preamble length.
pub const DEFAULT_PREAMBLE_CONSTANT: f64 = 4.24;

/// Per-SF base air-time weights, SF7 normalised to 1.0.
pub const LITERAL_SF_COST: [f64; 6] = [1.0, 2.0, 3.56, 7.12, 14.23, 24.93];

/// Number of spreading factors (SF7..=SF12).
pub const N_SF: usize = 6;

/// A LoRa spreading factor in `7..=12`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const SF7: SpreadingFactor = SpreadingFactor(7);
    pub const SF8: SpreadingFactor = SpreadingFactor(8);
    pub const SF9: SpreadingFactor = SpreadingFactor(9);
    pub const SF10: SpreadingFactor = SpreadingFactor(10);
    pub const SF11: SpreadingFactor = SpreadingFactor(11);
    pub const SF12: SpreadingFactor = SpreadingFactor(12);

    /// All spreading factors in ascending order.
    pub const ALL: [SpreadingFactor; N_SF] = [
        Self::SF7,
        Self::SF8,
        Self::SF9,
        Self::SF10,
        Self::SF11,
        Self::SF12,
    ];

    pub fn new(sf: u8) -> Result<Self> {
        if (7..=12).contains(&sf) {
            Ok(SpreadingFactor(sf))
        } else {
            Err(Error::param(format!("spreading factor {sf} outside 7..=12")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Row index into per-SF tables (SF7 -> 0).
    pub fn index(self) -> usize {
        usize::from(self.0 - 7)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Spreading factors strictly above `self`, ascending.
    pub fn higher(self) -> impl Iterator<Item = SpreadingFactor> {
        Self::ALL.into_iter().filter(move |&sf| sf > self)
    }

    /// Spreading factors at or above `self`, ascending.
    pub fn at_least(self) -> impl Iterator<Item = SpreadingFactor> {
        Self::ALL.into_iter().filter(move |&sf| sf >= self)
    }
}

impl TryFrom<u8> for SpreadingFactor {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SpreadingFactor> for u8 {
    fn from(sf: SpreadingFactor) -> u8 {
        sf.0
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

/// LoRa channel bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Bandwidth {
    Khz125,
    Khz250,
    Khz500,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 3] = [Bandwidth::Khz125, Bandwidth::Khz250, Bandwidth::Khz500];

    pub fn from_hz(hz: u32) -> Result<Self> {
        match hz {
            125_000 => Ok(Bandwidth::Khz125),
            250_000 => Ok(Bandwidth::Khz250),
            500_000 => Ok(Bandwidth::Khz500),
            other => Err(Error::param(format!(
                "bandwidth {other} Hz is not one of 125000, 250000, 500000"
            ))),
        }
    }

    pub fn hz(self) -> u32 {
        match self {
            Bandwidth::Khz125 => 125_000,
            Bandwidth::Khz250 => 250_000,
            Bandwidth::Khz500 => 500_000,
        }
    }

    /// Column index into per-bandwidth tables.
    pub fn index(self) -> usize {
        match self {
            Bandwidth::Khz125 => 0,
            Bandwidth::Khz250 => 1,
            Bandwidth::Khz500 => 2,
        }
    }
}

impl TryFrom<u32> for Bandwidth {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        Self::from_hz(value)
    }
}

impl From<Bandwidth> for u32 {
    fn from(bw: Bandwidth) -> u32 {
        bw.hz()
    }
}

/// Low data rate optimisation setting.
///
/// `Auto` enables it for SF11 and SF12 at 125 kHz, where the symbol time
/// exceeds 16 ms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LowDataRateOptimize {
    #[default]
    Auto,
    On,
    Off,
}

/// Per-message radio configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub sf: SpreadingFactor,
    pub bw: Bandwidth,
    /// Code-rate index: 1..=4 meaning 4/5..=4/8.
    pub cr: u8,
    pub payload_bytes: u16,
    /// `true` for implicit header mode (H = 1).
    pub header_disabled: bool,
    pub low_dr_opt: LowDataRateOptimize,
    pub n_preamble: u16,
    pub preamble_constant: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            sf: SpreadingFactor::SF7,
            bw: Bandwidth::Khz125,
            cr: 1,
            payload_bytes: 20,
            header_disabled: false,
            low_dr_opt: LowDataRateOptimize::Auto,
            n_preamble: 8,
            preamble_constant: DEFAULT_PREAMBLE_CONSTANT,
        }
    }
}

impl ChannelParams {
    /// Same configuration on another spreading factor.
    pub fn with_sf(self, sf: SpreadingFactor) -> Self {
        ChannelParams { sf, ..self }
    }

    /// Resolved DE flag.
    pub fn de(&self) -> bool {
        match self.low_dr_opt {
            LowDataRateOptimize::On => true,
            LowDataRateOptimize::Off => false,
            LowDataRateOptimize::Auto => self.sf >= SpreadingFactor::SF11 && self.bw == Bandwidth::Khz125,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.cr) {
            return Err(Error::param(format!("code rate index {} outside 1..=4", self.cr)));
        }
        if self.payload_bytes > 255 {
            return Err(Error::param(format!(
                "payload of {} bytes exceeds the 255-byte LoRa limit",
                self.payload_bytes
            )));
        }
        if self.n_preamble == 0 {
            return Err(Error::param("preamble length must be positive"));
        }
        if !self.preamble_constant.is_finite() || self.preamble_constant < 0.0 {
            return Err(Error::param("preamble constant must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Timing of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingBreakdown {
    pub t_sym: f64,
    pub t_pream: f64,
    pub payload_symbols: u32,
    pub t_payload: f64,
    pub airtime: f64,
}

/// `2^sf / bw` in milliseconds.
pub fn symbol_time(sf: SpreadingFactor, bw: Bandwidth) -> f64 {
    f64::from(1u32 << sf.value()) / f64::from(bw.hz()) * 1000.0
}

/// Raw-integer variant of [`symbol_time`] that validates its inputs.
pub fn symbol_time_checked(sf: u8, bw_hz: u32) -> Result<f64> {
    Ok(symbol_time(SpreadingFactor::new(sf)?, Bandwidth::from_hz(bw_hz)?))
}

/// Payload symbol count, including the 8 fixed symbols.
pub fn payload_symbols(params: &ChannelParams) -> Result<u32> {
    params.validate()?;
    let sf = i64::from(params.sf.value());
    let pl = i64::from(params.payload_bytes);
    let h = i64::from(params.header_disabled);
    let de = i64::from(params.de());
    let cr = i64::from(params.cr);

    let numerator = 8 * pl - 4 * sf + 44 - 20 * h;
    let denominator = 4 * (sf - 2 * de);
    let blocks = ceil_div(numerator, denominator);
    let extra = (blocks * (cr + 4)).max(0);
    // extra <= ceil(2084/20) * 8, fits easily
    Ok(8 + extra as u32)
}

fn ceil_div(numerator: i64, denominator: i64) -> i64 {
    debug_assert!(denominator > 0);
    -(-numerator).div_euclid(denominator)
}

/// Full timing breakdown of one frame.
pub fn airtime(params: &ChannelParams) -> Result<TimingBreakdown> {
    let payload_symbols = payload_symbols(params)?;
    let t_sym = symbol_time(params.sf, params.bw);
    let t_pream = (f64::from(params.n_preamble) + params.preamble_constant) * t_sym;
    let t_payload = f64::from(payload_symbols) * t_sym;
    Ok(TimingBreakdown {
        t_sym,
        t_pream,
        payload_symbols,
        t_payload,
        airtime: t_pream + t_payload,
    })
}

/// Time on air in milliseconds.
pub fn airtime_ms(params: &ChannelParams) -> Result<f64> {
    airtime(params).map(|t| t.airtime)
}

/// Nominal bit rate `SF * 4/(4+cr) / (2^SF / BW)` in bit/s.
pub fn nominal_bitrate(sf: SpreadingFactor, bw: Bandwidth, cr: u8) -> Result<f64> {
    if !(1..=4).contains(&cr) {
        return Err(Error::param(format!("code rate index {cr} outside 1..=4")));
    }
    let rate = 4.0 / (4.0 + f64::from(cr));
    let t_sym_s = f64::from(1u32 << sf.value()) / f64::from(bw.hz());
    Ok(f64::from(sf.value()) * rate / t_sym_s)
}

/// How the per-SF cost vector used by the SF search is produced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// The normalised weights in [`LITERAL_SF_COST`].
    Literal,
    /// Real air time in ms of the reference frame at each SF.
    #[default]
    Computed,
}

pub fn sf_cost_vector(mode: CostMode, reference: &ChannelParams) -> Result<[f64; N_SF]> {
    match mode {
        CostMode::Literal => Ok(LITERAL_SF_COST),
        CostMode::Computed => {
            let mut costs = [0.0; N_SF];
            for sf in SpreadingFactor::ALL {
                costs[sf.index()] = airtime_ms(&reference.with_sf(sf))?;
            }
            Ok(costs)
        }
    }
}
