//! Storage requirements from residual demand, and their split across players.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DemandCurve, ResProfile, StorageParams};

/// Intermediate series and capacities of a sizing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingResult {
    /// `R_t = D_t - RES_t`.
    pub residual: Vec<f64>,
    /// Deficits grossed up by `1 / eta`, surpluses unchanged.
    pub corrected: Vec<f64>,
    /// Running sum of `corrected`.
    pub cumulative: Vec<f64>,
    /// Excursion above the running minimum of `cumulative`.
    pub level: Vec<f64>,
    pub e_max: f64,
    pub q_max: f64,
    pub per_player: Vec<PlayerSize>,
}

/// One player's slice of the aggregate capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSize {
    pub e_max: f64,
    pub q_max: f64,
    pub offer_grid: Vec<f64>,
}

/// Total demand per hour taken as the largest bid volume `vol_D` of each curve.
pub fn demand_profile(curves: &[DemandCurve]) -> Vec<f64> {
    curves.iter().map(DemandCurve::max_volume).collect()
}

pub fn residual_demand(demand: &[f64], res: &ResProfile) -> Result<Vec<f64>> {
    if demand.len() != res.len() {
        return Err(Error::HorizonMismatch {
            expected: demand.len(),
            found: res.len(),
        });
    }
    Ok(demand.iter().zip(&res.values).map(|(d, r)| d - r).collect())
}

fn check_rates(eta: f64, c_rate: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("efficiency {eta} outside (0, 1]")));
    }
    if !(c_rate > 0.0 && c_rate.is_finite()) {
        return Err(Error::InvalidInput(format!("C-rate {c_rate} must be positive")));
    }
    Ok(())
}

/// Energy capacity as the largest cumulative deficit excursion, power as
/// `ceil(c_rate * E)`. The returned result has no per-player split yet.
pub fn size_storage(residual: &[f64], eta: f64, c_rate: f64) -> Result<SizingResult> {
    check_rates(eta, c_rate)?;
    let corrected: Vec<f64> = residual
        .iter()
        .map(|&r| if r > 0.0 { r / eta } else { r })
        .collect();
    let mut cumulative = Vec::with_capacity(corrected.len());
    let mut level = Vec::with_capacity(corrected.len());
    let mut sum = 0.0;
    let mut low = f64::INFINITY;
    for &r in &corrected {
        sum += r;
        low = low.min(sum);
        cumulative.push(sum);
        level.push(sum - low);
    }
    let e_max = level.iter().copied().fold(0.0, f64::max);
    Ok(SizingResult {
        residual: residual.to_vec(),
        corrected,
        cumulative,
        level,
        e_max,
        q_max: (c_rate * e_max).ceil(),
        per_player: Vec::new(),
    })
}

/// `(E^max, Q^max)` of [`size_storage`].
pub fn required_capacity(residual: &[f64], eta: f64, c_rate: f64) -> Result<(f64, f64)> {
    let s = size_storage(residual, eta, c_rate)?;
    Ok((s.e_max, s.q_max))
}

/// Capacity shares used for `n` players: the reference splits for 1, 2, 4, 6
/// and 8 players, equal shares otherwise.
pub fn default_shares(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        2 => vec![1.0 / 3.0, 2.0 / 3.0],
        4 => vec![0.1, 0.2, 0.3, 0.4],
        6 => vec![0.05, 0.10, 0.10, 0.15, 0.25, 0.35],
        8 => vec![0.05, 0.05, 0.10, 0.10, 0.10, 0.15, 0.20, 0.25],
        _ => vec![1.0 / n as f64; n],
    }
}

fn check_shares(shares: &[f64]) -> Result<()> {
    if shares.is_empty() {
        return Err(Error::InvalidInput("no capacity shares".into()));
    }
    if shares.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidInput("capacity shares must be positive".into()));
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("capacity shares sum to {total}, not 1")));
    }
    Ok(())
}

/// Splits the aggregate capacity: `E_p = w_p E`, `Q_p = max(1, floor(w_p Q))`.
pub fn partition_sizes(e_max: f64, q_max: f64, shares: &[f64], n_levels: u32) -> Result<Vec<PlayerSize>> {
    check_shares(shares)?;
    if n_levels == 0 {
        return Err(Error::InvalidInput("offer grid needs at least one level".into()));
    }
    Ok(shares
        .iter()
        .map(|&w| {
            let q = (w * q_max).floor().max(1.0);
            PlayerSize {
                e_max: w * e_max,
                q_max: q,
                offer_grid: (1..=n_levels).map(|i| q / n_levels as f64 * i as f64).collect(),
            }
        })
        .collect())
}

/// Players with ids `1..=n` sized by [`partition_sizes`]; efficiency, cost
/// and SoC band take the [`StorageParams::new`] defaults.
pub fn partition_players(e_max: f64, q_max: f64, shares: &[f64], n_levels: u32) -> Result<Vec<StorageParams>> {
    Ok(partition_sizes(e_max, q_max, shares, n_levels)?
        .into_iter()
        .enumerate()
        .map(|(k, s)| StorageParams::new(k + 1, s.q_max, s.e_max, n_levels))
        .collect())
}

/// Scales every player's energy and power capacity by `theta`; everything
/// else is kept.
pub fn apply_theta(players: &[StorageParams], theta: f64) -> Result<Vec<StorageParams>> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidInput(format!("capacity multiplier {theta} must be >= 0")));
    }
    Ok(players
        .iter()
        .map(|p| StorageParams {
            e_max: p.e_max * theta,
            q_max: p.q_max * theta,
            ..p.clone()
        })
        .collect())
}
