//! Welfare-maximising joint dispatch of all storage: the benchmark against
//! which strategic outcomes are measured.

use serde::{Deserialize, Serialize};

mod block;
mod lattice;

pub use block::solve_planner_milp;
pub use lattice::{lattice_work, solve_planner_lattice, LATTICE_WORK_LIMIT};

use crate::clearing::{hourly_metrics, player_profits};
use crate::error::{Error, Result};
use crate::model::{GameState, MarketOutcome, Scenario, Schedule};

/// Optimal joint schedules with the market outcome they produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSolution {
    pub schedules: Vec<Schedule>,
    pub outcome: Vec<MarketOutcome>,
    pub total_sw: f64,
    pub total_cs: f64,
    pub total_ps: f64,
    /// Optimal value reported by the solver route; equals `total_sw` up to
    /// solver tolerances.
    pub objective: f64,
    pub per_player_profit: Vec<f64>,
}

impl PlannerSolution {
    pub fn state(&self) -> GameState {
        GameState::new(self.schedules.clone())
    }

    /// Planner welfare minus the welfare of `state`.
    pub fn gap_to(&self, scenario: &Scenario, state: &GameState) -> Result<f64> {
        Ok(self.total_sw - hourly_metrics(state, scenario)?.totals.social_welfare)
    }
}

/// Exact welfare-maximising schedules: [`solve_planner_lattice`] when its
/// joint state space is within [`LATTICE_WORK_LIMIT`], [`solve_planner_milp`]
/// otherwise. Reported totals are recomputed by clearing the schedules.
pub fn solve_planner(scenario: &Scenario) -> Result<PlannerSolution> {
    if lattice_work(scenario)? <= LATTICE_WORK_LIMIT {
        solve_planner_lattice(scenario)
    } else {
        solve_planner_milp(scenario)
    }
}

/// Checks the schedules and clears them.
fn finish(scenario: &Scenario, schedules: Vec<Schedule>, objective: f64) -> Result<PlannerSolution> {
    for (p, s) in scenario.players.iter().zip(&schedules) {
        if let Some(v) = s.violations(p).first() {
            return Err(Error::Solver(format!(
                "planner returned an infeasible schedule for player {}: {v}",
                p.player_id
            )));
        }
    }
    let state = GameState::new(schedules);
    let report = hourly_metrics(&state, scenario)?;
    let per_player_profit = player_profits(&state, scenario, &report);
    Ok(PlannerSolution {
        schedules: state.schedules,
        outcome: report.hours,
        total_sw: report.totals.social_welfare,
        total_cs: report.totals.consumer_surplus,
        total_ps: report.totals.producer_surplus,
        objective,
        per_player_profit,
    })
}

/// Planner welfare minus the welfare of `state`; never below `-tolerance`
/// for a feasible state.
pub fn planner_dominance_check(scenario: &Scenario, state: &GameState) -> Result<f64> {
    solve_planner(scenario)?.gap_to(scenario, state)
}
