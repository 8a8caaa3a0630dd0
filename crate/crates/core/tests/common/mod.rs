//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's own timing, pressure or selection
//! code; inputs are plain numbers and vectors.

#![allow(dead_code)]

use maiora::simulator::{EventLog, Reception};

// ---------------------------------------------------------------------------
// air time

/// Time on air in ms, transcribed term by term. The ceiling is found by
/// counting instead of calling `ceil`.
#[allow(clippy::too_many_arguments)]
pub fn brute_airtime(sf: u32, bw_hz: f64, cr: u32, payload: u32, header_disabled: bool, de: bool, n_preamble: u32, constant: f64) -> f64 {
    let t_sym = 2f64.powi(sf as i32) / bw_hz * 1000.0;
    let t_pream = (n_preamble as f64 + constant) * t_sym;
    let h = if header_disabled { 1 } else { 0 };
    let d = if de { 1 } else { 0 };
    let num: i64 = 8 * payload as i64 - 4 * sf as i64 + 28 + 16 - 20 * h;
    let den: i64 = 4 * (sf as i64 - 2 * d);
    // smallest k with k * den >= num
    let mut k: i64 = -1000;
    while k * den < num {
        k += 1;
    }
    let extra = (k * (cr as i64 + 4)).max(0);
    let n_payload = 8 + extra;
    t_pream + n_payload as f64 * t_sym
}

// ---------------------------------------------------------------------------
// allocation, written as set comprehensions over a toy instance

pub struct Instance {
    /// rssi[gw][node], dBm
    pub rssi: Vec<Vec<f64>>,
    /// sensitivity per SF index (0 = SF7), dBm
    pub sens: [f64; 6],
    /// SF index per node, None when disconnected
    pub sfmap: Vec<Option<usize>>,
    /// load[node][sf index], ms
    pub load: Vec<[f64; 6]>,
    pub frozen: Vec<bool>,
}

impl Instance {
    pub fn gateways(&self) -> std::ops::Range<usize> {
        0..self.rssi.len()
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.sfmap.len()
    }

    pub fn audible(&self, gw: usize, node: usize, sf: usize) -> bool {
        self.rssi[gw][node] >= self.sens[sf]
    }

    /// sfpress[sf][gw]
    pub fn pressure(&self) -> Vec<Vec<f64>> {
        (0..6)
            .map(|sf| {
                self.gateways()
                    .map(|gw| {
                        self.nodes()
                            .filter(|&n| self.sfmap[n] == Some(sf) && self.audible(gw, n, sf))
                            .map(|n| self.load[n][sf])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

fn lambda(p: &[Vec<f64>], gw: usize) -> f64 {
    (0..6).map(|sf| p[sf][gw]).fold(f64::NEG_INFINITY, f64::max)
}

/// (wSF, worstGW): the largest cell; ties to lowest gateway, then lowest SF.
pub fn worst_cell(p: &[Vec<f64>]) -> Option<(usize, usize)> {
    let n_gw = p[0].len();
    let mut cells: Vec<(usize, usize)> = (0..n_gw).flat_map(|gw| (0..6).map(move |sf| (sf, gw))).collect();
    // stable sort keeps (gw, sf) ascending among equals
    cells.sort_by(|a, b| p[b.0][b.1].partial_cmp(&p[a.0][a.1]).unwrap());
    cells.first().copied()
}

pub struct NodeChoice {
    pub node: usize,
    pub sf: usize,
    pub gw: usize,
    pub weight: f64,
}

pub fn oracle_best_node(inst: &Instance) -> Option<NodeChoice> {
    let p = inst.pressure();
    let (wsf, wgw) = worst_cell(&p)?;
    let stressing: Vec<usize> = inst
        .nodes()
        .filter(|&n| inst.sfmap[n] == Some(wsf) && inst.audible(wgw, n, wsf) && !inst.frozen[n])
        .collect();
    let mut weights = Vec::new();
    for &n in &stressing {
        let mut w = 0.0;
        for gw in inst.gateways() {
            let l = lambda(&p, gw);
            let delta: Vec<f64> = ((wsf + 1)..6)
                .filter(|&s| inst.audible(gw, n, s) && l > p[s][gw])
                .map(|s| l - p[s][gw])
                .collect();
            w += delta.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x)))).unwrap_or(0.0);
        }
        weights.push((n, w));
    }
    let best = weights.iter().map(|&(_, w)| w).fold(f64::NEG_INFINITY, f64::max);
    weights
        .into_iter()
        .find(|&(_, w)| w == best)
        .map(|(node, weight)| NodeChoice { node, sf: wsf, gw: wgw, weight })
}

/// Returns (nextAT, SF index) or None when no SF has positive headroom.
/// `skip_saturated` drops gateways whose maximum does not exceed the
/// target cell.
pub fn oracle_best_sf(inst: &Instance, node: usize, wsf: usize, cost: &[f64; 6], skip_saturated: bool) -> Option<(f64, usize)> {
    let p = inst.pressure();
    let mut scored = Vec::new();
    for s in (wsf + 1)..6 {
        let delta: Vec<f64> = inst
            .gateways()
            .filter(|&gw| inst.audible(gw, node, s))
            .filter(|&gw| !skip_saturated || lambda(&p, gw) > p[s][gw])
            .map(|gw| lambda(&p, gw) - p[s][gw] - cost[s])
            .collect();
        if let Some(m) = delta.iter().copied().reduce(f64::min) {
            scored.push((m, s));
        }
    }
    let top = scored.iter().map(|&(m, _)| m).fold(f64::NEG_INFINITY, f64::max);
    if top <= 0.0 {
        return None;
    }
    scored.into_iter().find(|&(m, _)| m == top)
}

// ---------------------------------------------------------------------------
// collisions

/// Reference verdicts for every (transmission, gateway) pair by comparing
/// all pairs of transmissions.
pub fn replay_verdicts(log: &EventLog, sensitivity_at: impl Fn(usize) -> f64, capture_db: f64, preamble_critical: bool) -> Vec<Reception> {
    let n_gw = log.n_gateways;
    let txs = &log.transmissions;
    let mut out = Vec::with_capacity(txs.len() * n_gw);
    for (i, a) in txs.iter().enumerate() {
        for gw in 0..n_gw {
            let pa = log.rx_power_dbm[i * n_gw + gw];
            if pa < sensitivity_at(a.sf.index()) {
                out.push(Reception::NotHeard);
                continue;
            }
            let lost = txs.iter().enumerate().any(|(j, b)| {
                if i == j || a.sf != b.sf || a.channel_hz != b.channel_hz {
                    return false;
                }
                let pb = log.rx_power_dbm[j * n_gw + gw];
                let b_heard = pb >= sensitivity_at(b.sf.index());
                let overlap = a.start_s < b.end_s && b.start_s < a.end_s;
                let in_window = !preamble_critical || b.end_s > a.critical_start_s;
                b_heard && overlap && in_window && pa - pb < capture_db
            });
            out.push(if lost { Reception::Lost } else { Reception::Received });
        }
    }
    out
}
