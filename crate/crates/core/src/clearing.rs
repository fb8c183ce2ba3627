//! Uniform-price clearing of one hour against a stepwise demand curve, plus
//! the surplus accounting built on it.
//!
//! Supply exactly equal to a cumulative volume belongs to the lower-volume
//! block: block `j` owns the half-open interval `(vol_{j-1}, vol_j]`, and zero
//! supply clears in the first block. Supply beyond the last volume clears at
//! the floor price, the excess is curtailed and earns nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DemandCurve, GameState, MarketOutcome, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub price: f64,
    /// 0-based index of the active block.
    pub active_block: usize,
    pub served: f64,
    /// Served volume inside the active block (`b_tj`).
    pub partial_fill: f64,
    pub curtailment: f64,
    pub unmet: f64,
}

/// Clears one hour. Fails on an invalid curve or a negative supply.
pub fn clear_hour(curve: &DemandCurve, supply: f64) -> Result<ClearingResult> {
    curve.check()?;
    if !(supply >= 0.0) || !supply.is_finite() {
        return Err(Error::InvalidInput(format!(
            "hour {}: supply must be finite and >= 0, got {supply}",
            curve.hour
        )));
    }
    Ok(clear_unchecked(curve, supply))
}

/// [`clear_hour`] for callers that already validated the curve and supply.
pub(crate) fn clear_unchecked(curve: &DemandCurve, supply: f64) -> ClearingResult {
    let last = curve.len() - 1;
    let max_vol = curve.max_volume();
    if supply > max_vol {
        return ClearingResult {
            price: curve.price(last),
            active_block: last,
            served: max_vol,
            partial_fill: curve.width(last),
            curtailment: supply - max_vol,
            unmet: 0.0,
        };
    }
    let j = curve
        .blocks
        .iter()
        .position(|b| supply <= b.cum_volume)
        .unwrap_or(last);
    ClearingResult {
        price: curve.price(j),
        active_block: j,
        served: supply,
        partial_fill: supply - curve.volume_before(j),
        curtailment: 0.0,
        unmet: max_vol - supply,
    }
}

fn check_pair(curve: &DemandCurve, result: &ClearingResult) -> Result<()> {
    if result.active_block >= curve.len() || result.price != curve.price(result.active_block) {
        return Err(Error::InvalidInput(format!(
            "hour {}: clearing result does not belong to this curve",
            curve.hour
        )));
    }
    Ok(())
}

/// Consumer surplus as a sum over blocks strictly above the active one:
/// `sum_k (pr_k - price) * width_k`.
pub fn consumer_surplus(curve: &DemandCurve, result: &ClearingResult) -> Result<f64> {
    check_pair(curve, result)?;
    Ok((0..result.active_block)
        .map(|k| (curve.price(k) - result.price) * curve.width(k))
        .sum())
}

/// Telescoped consumer surplus `sum_{k<D} (pr_k - pr_{k+1}) * vol_k * y_k`
/// with `y_k = 1` for blocks above the active one. This is the linear form
/// used by the planner.
pub fn consumer_surplus_telescoped(curve: &DemandCurve, result: &ClearingResult) -> Result<f64> {
    check_pair(curve, result)?;
    Ok((0..curve.len().saturating_sub(1))
        .filter(|&k| k < result.active_block)
        .map(|k| (curve.price(k) - curve.price(k + 1)) * curve.volume(k))
        .sum())
}

/// Producer surplus of one hour: storage profits plus revenue of delivered
/// renewable energy. Curtailed energy is unpaid.
pub fn producer_surplus(
    result: &ClearingResult,
    charge: &[f64],
    discharge: &[f64],
    res: f64,
    ocs: &[f64],
) -> Result<f64> {
    if charge.len() != ocs.len() || discharge.len() != ocs.len() {
        return Err(Error::InvalidInput(format!(
            "producer surplus: {} charges, {} discharges, {} costs",
            charge.len(),
            discharge.len(),
            ocs.len()
        )));
    }
    let storage: f64 = charge
        .iter()
        .zip(discharge)
        .zip(ocs)
        .map(|((&ch, &dis), &oc)| hourly_profit(ch, dis, result.price, oc))
        .sum();
    Ok(storage + result.price * (res - result.curtailment))
}

/// One player's profit in one hour: `dis * (price - oc) - ch * (price + oc)`.
pub fn hourly_profit(charge: f64, discharge: f64, price: f64, oc: f64) -> f64 {
    discharge * (price - oc) - charge * (price + oc)
}

/// Day totals of a [`MarketReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketTotals {
    pub served: f64,
    pub unmet: f64,
    pub curtailment: f64,
    pub consumer_surplus: f64,
    pub producer_surplus: f64,
    pub social_welfare: f64,
    pub mean_price: f64,
    pub peak_price: f64,
}

/// Hourly outcomes of a joint schedule with day totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketReport {
    pub hours: Vec<MarketOutcome>,
    pub totals: MarketTotals,
}

impl MarketReport {
    pub fn prices(&self) -> Vec<f64> {
        self.hours.iter().map(|h| h.price).collect()
    }
}

/// Clears every hour of a joint schedule and sums the surpluses.
pub fn hourly_metrics(state: &GameState, scenario: &Scenario) -> Result<MarketReport> {
    let horizon = scenario.horizon;
    if scenario.curves.len() != horizon || scenario.res.len() != horizon {
        return Err(Error::HorizonMismatch {
            expected: horizon,
            found: scenario.curves.len().min(scenario.res.len()),
        });
    }
    if state.schedules.len() != scenario.players.len() {
        return Err(Error::InvalidInput(format!(
            "{} schedules for {} players",
            state.schedules.len(),
            scenario.players.len()
        )));
    }
    let supply = crate::model::net_supply(state, &scenario.res, None)?;
    let ocs: Vec<f64> = scenario.players.iter().map(|p| p.oc).collect();
    let mut hours = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let curve = &scenario.curves[t];
        if supply[t] < -crate::model::FEAS_TOL {
            return Err(Error::InvalidInput(format!(
                "hour {}: negative market supply {}",
                t + 1,
                supply[t]
            )));
        }
        let cleared = clear_hour(curve, supply[t].max(0.0))?;
        let ch: Vec<f64> = state.schedules.iter().map(|s| s.charge[t]).collect();
        let dis: Vec<f64> = state.schedules.iter().map(|s| s.discharge[t]).collect();
        let cs = consumer_surplus(curve, &cleared)?;
        let ps = producer_surplus(&cleared, &ch, &dis, scenario.res.values[t], &ocs)?;
        hours.push(MarketOutcome {
            hour: t + 1,
            price: cleared.price,
            active_block: cleared.active_block,
            served: cleared.served,
            partial_fill: cleared.partial_fill,
            curtailment: cleared.curtailment,
            unmet: cleared.unmet,
            consumer_surplus: cs,
            producer_surplus: ps,
        });
    }
    let totals = totals_of(&hours);
    Ok(MarketReport { hours, totals })
}

pub(crate) fn totals_of(hours: &[MarketOutcome]) -> MarketTotals {
    let mut t = MarketTotals::default();
    for h in hours {
        t.served += h.served;
        t.unmet += h.unmet;
        t.curtailment += h.curtailment;
        t.consumer_surplus += h.consumer_surplus;
        t.producer_surplus += h.producer_surplus;
        t.peak_price = t.peak_price.max(h.price);
        t.mean_price += h.price;
    }
    if !hours.is_empty() {
        t.mean_price /= hours.len() as f64;
    }
    t.social_welfare = t.consumer_surplus + t.producer_surplus;
    t
}

/// Per-player profits of a joint schedule at the cleared prices.
pub fn player_profits(state: &GameState, scenario: &Scenario, report: &MarketReport) -> Vec<f64> {
    state
        .schedules
        .iter()
        .zip(&scenario.players)
        .map(|(s, p)| {
            report
                .hours
                .iter()
                .enumerate()
                .map(|(t, h)| hourly_profit(s.charge[t], s.discharge[t], h.price, p.oc))
                .sum()
        })
        .collect()
}
