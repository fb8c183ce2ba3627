//! Report files: per-hour outcome CSV, summary JSON, sweep table and run
//! comparison.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stormarket_core::{Action, GameState, MarketOutcome, MarketTotals, StorageParams};

use crate::config::Mode;
use crate::error::Failure;
use crate::inputs::GridPoint;

/// Everything needed to reproduce and compare one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    /// `nash` or `planner`.
    pub mode: Mode,
    pub day: NaiveDate,
    pub horizon: usize,
    pub point: GridPoint,
    pub n_players: usize,
    /// Always true for the planner.
    pub converged: bool,
    pub iterations: usize,
    pub cycle_length: usize,
    pub totals: MarketTotals,
    pub per_player_profit: Vec<f64>,
    pub players: Vec<StorageParams>,
    pub schedules: Vec<Vec<Action>>,
}

impl RunSummary {
    /// Search stopped at the sweep cap without a fixed point or a cycle.
    pub fn hit_sweep_cap(&self) -> bool {
        self.mode == Mode::Nash && !self.converged && self.cycle_length == 0
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::data(format!("report: {}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| write_err(path, e))
}

pub fn read_summary(path: &Path) -> Result<RunSummary, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: not a run summary: {e}", path.display())))
}

/// `hour,price,served,curtailment,unmet,cs,ps` then `ch_p,dis_p,soc_p` per
/// player id.
pub fn write_outcome_csv(
    path: &Path,
    outcome: &[MarketOutcome],
    players: &[StorageParams],
    state: &GameState,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    let mut header: Vec<String> = ["hour", "price", "served", "curtailment", "unmet", "cs", "ps"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for p in players {
        let id = p.player_id;
        header.extend([format!("ch_{id}"), format!("dis_{id}"), format!("soc_{id}")]);
    }
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for (t, h) in outcome.iter().enumerate() {
        let mut row = vec![
            h.hour.to_string(),
            h.price.to_string(),
            h.served.to_string(),
            h.curtailment.to_string(),
            h.unmet.to_string(),
            h.consumer_surplus.to_string(),
            h.producer_surplus.to_string(),
        ];
        for s in &state.schedules {
            row.extend([s.charge[t].to_string(), s.discharge[t].to_string(), s.soc[t].to_string()]);
        }
        w.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub const SWEEP_HEADER: [&str; 17] = [
    "label",
    "mode",
    "n",
    "theta",
    "eta",
    "oc",
    "converged",
    "iterations",
    "cycle_length",
    "sw",
    "cs",
    "ps",
    "unmet",
    "curtailment",
    "mean_price",
    "peak_price",
    "summary",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_row(s: &RunSummary, summary_path: &str) -> Vec<String> {
    let t = &s.totals;
    vec![
        s.label.clone(),
        s.mode.to_string(),
        s.n_players.to_string(),
        s.point.theta.to_string(),
        opt(s.point.eta),
        opt(s.point.oc),
        s.converged.to_string(),
        s.iterations.to_string(),
        s.cycle_length.to_string(),
        t.social_welfare.to_string(),
        t.consumer_surplus.to_string(),
        t.producer_surplus.to_string(),
        t.unmet.to_string(),
        t.curtailment.to_string(),
        t.mean_price.to_string(),
        t.peak_price.to_string(),
        summary_path.to_string(),
    ]
}

/// Aligned table of the main totals with deltas against the first run, and
/// one profit column per player id seen in any run.
pub fn compare_runs(runs: &[(String, RunSummary)]) -> Result<Vec<Vec<String>>, Failure> {
    if runs.len() < 2 {
        return Err(Failure::config("compare needs at least two summaries"));
    }
    let horizon = runs[0].1.horizon;
    if let Some((name, r)) = runs.iter().find(|(_, r)| r.horizon != horizon) {
        return Err(Failure::data(format!(
            "compare: {name} covers {} hours, the first run {horizon}",
            r.horizon
        )));
    }
    let metrics = |t: &MarketTotals| {
        [
            t.social_welfare,
            t.consumer_surplus,
            t.producer_surplus,
            t.unmet,
            t.curtailment,
            t.mean_price,
            t.peak_price,
        ]
    };
    let names = ["sw", "cs", "ps", "unmet", "curtailment", "mean_price", "peak_price"];
    let ids: BTreeSet<usize> = runs
        .iter()
        .flat_map(|(_, r)| r.players.iter().map(|p| p.player_id))
        .collect();

    let mut header: Vec<String> = vec!["run".into(), "mode".into(), "converged".into()];
    header.extend(names.iter().map(|n| n.to_string()));
    header.extend(names.iter().map(|n| format!("d_{n}")));
    header.extend(ids.iter().map(|id| format!("profit_{id}")));
    let mut rows = vec![header];

    let first = metrics(&runs[0].1.totals);
    for (name, r) in runs {
        let m = metrics(&r.totals);
        let mut row = vec![name.clone(), r.mode.to_string(), r.converged.to_string()];
        row.extend(m.iter().map(f64::to_string));
        row.extend(m.iter().zip(&first).map(|(a, b)| (a - b).to_string()));
        for id in &ids {
            let profit = r
                .players
                .iter()
                .position(|p| p.player_id == *id)
                .and_then(|k| r.per_player_profit.get(k));
            row.push(opt(profit));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}
