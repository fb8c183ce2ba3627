//! Turning config and data files into scenarios.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stormarket_core::ingest::{
    downsample_curves, medoid_day, parse_capacity_factor_csv, parse_demand_csv, parse_res_csv, scale_res,
};
use stormarket_core::sizing::{default_shares, demand_profile, size_storage};
use stormarket_core::{
    apply_theta, partition_players, residual_demand, DemandCurve, ResProfile, Scenario, SizingResult,
    SolverOptions, StorageParams,
};

use crate::config::RunConfig;
use crate::error::{CoreContext, Failure};

/// The market of the simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub day: NaiveDate,
    /// Days found in the bid file.
    pub days: Vec<NaiveDate>,
    pub curves: Vec<DemandCurve>,
    pub res: ResProfile,
}

/// Reads the bid file and renewables and picks the day.
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, Failure> {
    let table = parse_demand_csv(&cfg.demand).within("ingest")?;
    if !table.malformed.is_empty() {
        let shown: Vec<String> = table
            .malformed
            .iter()
            .take(5)
            .map(|m| format!("line {}: {}", m.line, m.message))
            .collect();
        return Err(Failure::data(format!(
            "ingest: {}: {} malformed rows ({})",
            cfg.demand.display(),
            table.malformed.len(),
            shown.join("; ")
        )));
    }
    let days = table.days();
    if days.is_empty() {
        return Err(Failure::data(format!("ingest: {}: no bids", cfg.demand.display())));
    }
    let factors = match &cfg.capacity_factors {
        Some(p) => Some(parse_capacity_factor_csv(p).within("ingest")?),
        None => None,
    };

    let day = match (cfg.day, &factors) {
        (Some(d), _) => d,
        (None, Some(cf)) => {
            let usable: Vec<_> = cf.iter().filter(|d| days.contains(&d.day)).collect();
            if usable.is_empty() {
                return Err(Failure::data("ingest: no day has both bids and capacity factors"));
            }
            let features: Vec<Vec<f64>> = usable.iter().map(|d| d.features()).collect();
            usable[medoid_day(&features).within("ingest")?].day
        }
        (None, None) if days.len() == 1 => days[0],
        (None, None) => {
            return Err(Failure::config(format!(
                "{} holds {} days; set `day`",
                cfg.demand.display(),
                days.len()
            )))
        }
    };
    let index = days
        .iter()
        .position(|&d| d == day)
        .ok_or_else(|| Failure::data(format!("ingest: no bids for {day}")))?;

    let curves = if cfg.downsample {
        let all: Vec<Vec<DemandCurve>> = days
            .iter()
            .map(|&d| table.day_curves(d))
            .collect::<stormarket_core::Result<_>>()
            .within("ingest")?;
        downsample_curves(&all).within("ingest")?.swap_remove(index)
    } else {
        table.day_curves(day).within("ingest")?
    };

    let res = match (&cfg.res, &factors) {
        (Some(p), _) => parse_res_csv(p).within("ingest")?,
        (None, Some(cf)) => {
            let d = cf
                .iter()
                .find(|d| d.day == day)
                .ok_or_else(|| Failure::data(format!("ingest: no capacity factors for {day}")))?;
            scale_res(d, cfg.capacities).within("ingest")?
        }
        (None, None) => return Err(Failure::config("give either `res` or `capacity_factors`")),
    };
    if res.len() != curves.len() {
        return Err(Failure::data(format!(
            "ingest: {} renewable hours for {} demand hours",
            res.len(),
            curves.len()
        )));
    }
    Ok(Inputs {
        day,
        days,
        curves,
        res,
    })
}

/// Aggregate storage requirement of the day, split for `n` players.
pub fn sizing(cfg: &RunConfig, inputs: &Inputs, n: usize) -> Result<SizingResult, Failure> {
    let s = &cfg.storage;
    let residual = residual_demand(&demand_profile(&inputs.curves), &inputs.res).within("sizing")?;
    let mut out = size_storage(&residual, s.sizing_eta.unwrap_or(s.eta), s.c_rate).within("sizing")?;
    if n > 0 {
        out.per_player =
            stormarket_core::sizing::partition_sizes(out.e_max, out.q_max, &shares(cfg, n), s.n_levels)
                .within("sizing")?;
    }
    Ok(out)
}

fn shares(cfg: &RunConfig, n: usize) -> Vec<f64> {
    match &cfg.storage.shares {
        Some(w) if w.len() == n => w.clone(),
        _ => default_shares(n),
    }
}

/// One point of the experiment grid. `None` keeps the configured value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: Option<usize>,
    pub theta: f64,
    pub eta: Option<f64>,
    pub oc: Option<f64>,
}

impl GridPoint {
    pub fn base(cfg: &RunConfig) -> Self {
        Self {
            n: None,
            theta: cfg.storage.theta,
            eta: None,
            oc: None,
        }
    }

    /// Directory-safe name, e.g. `n2_theta1_eta0.9_oc0.5`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = self.n {
            parts.push(format!("n{n}"));
        }
        parts.push(format!("theta{}", self.theta));
        if let Some(e) = self.eta {
            parts.push(format!("eta{e}"));
        }
        if let Some(c) = self.oc {
            parts.push(format!("oc{c}"));
        }
        parts.join("_")
    }
}

/// The players of a grid point. Sized storage is split with the configured
/// or default shares, scaled by theta, and players left without power
/// (theta = 0) are dropped.
pub fn players_for(cfg: &RunConfig, inputs: &Inputs, point: &GridPoint) -> Result<Vec<StorageParams>, Failure> {
    let s = &cfg.storage;
    let base: Vec<StorageParams> = match &cfg.players {
        Some(ps) => ps.clone(),
        None => {
            let n = point.n.unwrap_or(s.n_players);
            if n == 0 {
                Vec::new()
            } else {
                let size = sizing(cfg, inputs, 0)?;
                partition_players(size.e_max, size.q_max, &shares(cfg, n), s.n_levels)
                    .within("sizing")?
                    .into_iter()
                    .map(|p| p.with_eta(s.eta).with_oc(s.oc).with_soc_band(s.alpha_batt, s.epsilon))
                    .collect()
            }
        }
    };
    let adjusted: Vec<StorageParams> = base
        .into_iter()
        .map(|mut p| {
            if let Some(e) = point.eta {
                p.eta = e;
            }
            if let Some(c) = point.oc {
                p.oc = c;
            }
            p
        })
        .collect();
    Ok(apply_theta(&adjusted, point.theta)
        .within("sizing")?
        .into_iter()
        .filter(|p| p.q_max > 0.0)
        .collect())
}

/// Scenario of a grid point, checked for consistency.
pub fn scenario_for(cfg: &RunConfig, inputs: &Inputs, point: &GridPoint) -> Result<Scenario, Failure> {
    let scenario = build_scenario(cfg, inputs, point)?;
    scenario.check().within("model")?;
    Ok(scenario)
}

/// Scenario of a grid point without the consistency check.
pub fn build_scenario(cfg: &RunConfig, inputs: &Inputs, point: &GridPoint) -> Result<Scenario, Failure> {
    let mut scenario = Scenario::new(inputs.curves.clone(), inputs.res.clone(), players_for(cfg, inputs, point)?);
    scenario.price_cap = cfg.price_cap;
    scenario.options = SolverOptions {
        tolerance: cfg.tolerance,
        max_sweeps: cfg.max_sweeps,
        // players removed by a zero multiplier leave the order too
        player_order: cfg.player_order.as_ref().map(|ids| {
            ids.iter()
                .copied()
                .filter(|id| scenario.players.iter().any(|p| p.player_id == *id))
                .collect()
        }),
    };
    Ok(scenario)
}
