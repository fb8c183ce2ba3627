//! Pure Nash equilibria by Gauss-Seidel iteration of best responses.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::best_response::{solve_method2, BestResponseProblem};
use crate::clearing::{hourly_metrics, player_profits, MarketTotals};
use crate::error::{Error, Result};
use crate::model::{GameState, MarketOutcome, Scenario};

/// Result of [`find_nash`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub final_state: GameState,
    /// Number of full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Length of the detected cycle; 0 for a fixed point or when the sweep
    /// cap was hit.
    pub cycle_length: usize,
    pub per_player_profit: Vec<f64>,
    pub outcome: Vec<MarketOutcome>,
    pub totals: MarketTotals,
}

/// Per-player gains from a unilateral deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCheck {
    /// Best-response profit minus current profit, in scenario player order.
    pub improvements: Vec<f64>,
    pub tolerance: f64,
}

impl NashCheck {
    pub fn max_improvement(&self) -> f64 {
        self.improvements.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_equilibrium(&self) -> bool {
        self.improvements.iter().all(|&g| g <= self.tolerance)
    }
}

/// Scenario positions in update order: `options.player_order` (player ids)
/// when given, ascending id otherwise.
fn update_order(scenario: &Scenario) -> Result<Vec<usize>> {
    let position = |id: usize| {
        scenario
            .players
            .iter()
            .position(|p| p.player_id == id)
            .ok_or_else(|| Error::InvalidInput(format!("player order names unknown player {id}")))
    };
    match &scenario.options.player_order {
        Some(ids) => {
            let order = ids.iter().map(|&id| position(id)).collect::<Result<Vec<_>>>()?;
            let mut seen = order.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != scenario.players.len() || order.len() != seen.len() {
                return Err(Error::InvalidInput(
                    "player order must list every player exactly once".into(),
                ));
            }
            Ok(order)
        }
        None => {
            let mut order: Vec<usize> = (0..scenario.players.len()).collect();
            order.sort_by_key(|&i| scenario.players[i].player_id);
            Ok(order)
        }
    }
}

/// Profit of the current schedule of player `index`, or `None` when rival
/// moves have made it infeasible (e.g. supply would go negative).
fn current_profit(prob: &BestResponseProblem, state: &GameState, index: usize) -> Option<f64> {
    let schedule = &state.schedules[index];
    if !prob.violations(schedule).is_empty() {
        return None;
    }
    prob.audit(schedule).ok().map(|(profit, _)| profit)
}

/// Searches for a pure Nash equilibrium.
///
/// All players start idle. Each sweep lets every player best-respond, in
/// update order, to the latest schedules of the others; a player keeps its
/// schedule unless the best response gains more than `tolerance`. The run
/// stops when a post-sweep state repeats: the immediately preceding state
/// means a fixed point, an earlier one a cycle, in which case the
/// highest-welfare state of the cycle is reported. The sweep cap comes from
/// `scenario.options.max_sweeps`.
pub fn find_nash(scenario: &Scenario, tolerance: f64) -> Result<EquilibriumReport> {
    scenario.check()?;
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidInput("tolerance must be >= 0".into()));
    }
    let order = update_order(scenario)?;
    let mut state = GameState::idle(&scenario.players, scenario.horizon);
    let mut history = vec![state.clone()];
    let mut seen: HashMap<GameState, usize> = HashMap::from([(state.clone(), 0)]);
    let mut iterations = 0;
    let mut converged = false;
    let mut cycle_length = 0;

    while iterations < scenario.options.max_sweeps {
        iterations += 1;
        for &p in &order {
            let prob = BestResponseProblem::for_player(scenario, &state, p)?;
            let best = solve_method2(&prob)?;
            let keep = match current_profit(&prob, &state, p) {
                Some(profit) => profit >= best.profit - tolerance,
                None => false,
            };
            if !keep {
                state.schedules[p] = best.schedule;
            }
        }
        match seen.get(&state) {
            Some(&k) if k + 1 == history.len() => {
                converged = true;
                break;
            }
            Some(&k) => {
                cycle_length = history.len() - k;
                state = best_welfare(scenario, &history[k..])?;
                break;
            }
            None => {
                seen.insert(state.clone(), history.len());
                history.push(state.clone());
            }
        }
    }

    let report = hourly_metrics(&state, scenario)?;
    let per_player_profit = player_profits(&state, scenario, &report);
    Ok(EquilibriumReport {
        final_state: state,
        iterations,
        converged,
        cycle_length,
        per_player_profit,
        outcome: report.hours,
        totals: report.totals,
    })
}

/// First state with the highest social welfare.
fn best_welfare(scenario: &Scenario, states: &[GameState]) -> Result<GameState> {
    let mut best: Option<(f64, &GameState)> = None;
    for s in states {
        let sw = hourly_metrics(s, scenario)?.totals.social_welfare;
        if best.map_or(true, |(b, _)| sw > b) {
            best = Some((sw, s));
        }
    }
    Ok(best.expect("cycle is non-empty").1.clone())
}

/// Largest profit gain each player could get by deviating alone from `state`.
pub fn verify_nash(state: &GameState, scenario: &Scenario, tolerance: f64) -> Result<NashCheck> {
    scenario.check()?;
    state.check_horizon(scenario.horizon)?;
    if state.schedules.len() != scenario.players.len() {
        return Err(Error::InvalidInput(format!(
            "{} schedules for {} players",
            state.schedules.len(),
            scenario.players.len()
        )));
    }
    let mut improvements = Vec::with_capacity(scenario.players.len());
    for p in 0..scenario.players.len() {
        let prob = BestResponseProblem::for_player(scenario, state, p)?;
        let broken = prob.violations(&state.schedules[p]);
        if let Some(v) = broken.first() {
            return Err(Error::InvalidInput(format!(
                "player {}: {v}",
                scenario.players[p].player_id
            )));
        }
        let (current, _) = prob.audit(&state.schedules[p])?;
        let best = solve_method2(&prob)?;
        improvements.push(best.profit - current);
    }
    Ok(NashCheck {
        improvements,
        tolerance,
    })
}
