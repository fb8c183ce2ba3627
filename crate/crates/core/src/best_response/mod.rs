//! A storage player's profit-maximising self-schedule against fixed rival
//! schedules.
//!
//! Three solvers share one problem type:
//!
//! * [`solve_method1`]: the big-M MILP with price/action product binaries,
//!   solved by HiGHS.
//! * [`solve_method2`]: the demand-block reformulation. Because the block
//!   selection and partial fill are determined by the hourly action, it is
//!   solved exactly by dynamic programming over the reachable SoC lattice.
//! * [`brute_force_best_response`]: exhaustive enumeration, the test oracle.
//!
//! All three report the profit audited against [`clear_hour`], so their
//! values are directly comparable.

mod big_m;
mod brute;
mod dp;

pub use big_m::{solve_method1, BOUNDARY_MARGIN};
pub use brute::{brute_force_best_response, BRUTE_FORCE_LIMIT};
pub use dp::solve_method2;

use serde::{Deserialize, Serialize};

use crate::clearing::{clear_hour, clear_unchecked, hourly_profit};
use crate::error::{Error, Result};
use crate::model::{Action, DemandCurve, GameState, Scenario, Schedule, StorageParams, FEAS_TOL};

/// One player's optimisation problem given the rivals' aggregate actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseProblem {
    pub player: StorageParams,
    /// Rivals' total charge per hour (`q^{ch,o}`).
    pub exo_charge: Vec<f64>,
    /// Rivals' total discharge per hour (`q^{dis,o}`).
    pub exo_discharge: Vec<f64>,
    pub res: Vec<f64>,
    pub curves: Vec<DemandCurve>,
    /// Big-M constants per hour, only used by the big-M formulation.
    pub big_m: Vec<f64>,
}

impl BestResponseProblem {
    /// Builds a problem with `M_t = vol_D + RES_t + rivals' charge and
    /// discharge + Q^max_p + 1`, a valid bound on any `|q^tot - vol|`.
    pub fn new(
        player: StorageParams,
        exo_charge: Vec<f64>,
        exo_discharge: Vec<f64>,
        res: Vec<f64>,
        curves: Vec<DemandCurve>,
    ) -> Result<Self> {
        let horizon = curves.len();
        for len in [exo_charge.len(), exo_discharge.len(), res.len()] {
            if len != horizon {
                return Err(Error::HorizonMismatch {
                    expected: horizon,
                    found: len,
                });
            }
        }
        let big_m = (0..horizon)
            .map(|t| {
                curves[t].max_volume()
                    + res[t]
                    + exo_charge[t]
                    + exo_discharge[t]
                    + player.q_max
                    + 1.0
            })
            .collect();
        let prob = Self {
            player,
            exo_charge,
            exo_discharge,
            res,
            curves,
            big_m,
        };
        prob.check()?;
        Ok(prob)
    }

    /// The problem player `index` (scenario position) faces in `state`, with
    /// `M_t = vol_D + RES_t + sum_p Q^max_p + 1`.
    pub fn for_player(scenario: &Scenario, state: &GameState, index: usize) -> Result<Self> {
        let player = scenario
            .players
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("no player at position {index}")))?
            .clone();
        state.check_horizon(scenario.horizon)?;
        let (exo_charge, exo_discharge) = state.exogenous(index, scenario.horizon);
        let mut prob = Self::new(
            player,
            exo_charge,
            exo_discharge,
            scenario.res.values.clone(),
            scenario.curves.clone(),
        )?;
        let total_q: f64 = scenario.players.iter().map(|p| p.q_max).sum();
        for t in 0..scenario.horizon {
            prob.big_m[t] = scenario.curves[t].max_volume() + scenario.res.values[t] + total_q + 1.0;
        }
        Ok(prob)
    }

    pub fn horizon(&self) -> usize {
        self.curves.len()
    }

    pub fn check(&self) -> Result<()> {
        if let Some(v) = self.player.violations().into_iter().next() {
            return Err(Error::InvalidInput(format!("player {}: {v}", self.player.player_id)));
        }
        for c in &self.curves {
            c.check()?;
        }
        for t in 0..self.horizon() {
            if self.res[t] < 0.0 || self.exo_charge[t] < 0.0 || self.exo_discharge[t] < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "hour {}: renewable and rival quantities must be >= 0",
                    t + 1
                )));
            }
        }
        if self.big_m.len() != self.horizon() {
            return Err(Error::HorizonMismatch {
                expected: self.horizon(),
                found: self.big_m.len(),
            });
        }
        for t in 0..self.horizon() {
            let floor = self.curves[t].max_volume()
                + self.res[t]
                + self.exo_charge[t]
                + self.exo_discharge[t]
                + self.player.q_max;
            if self.big_m[t] < floor {
                return Err(Error::InvalidInput(format!(
                    "hour {}: big-M {} below the valid bound {floor}",
                    t + 1,
                    self.big_m[t]
                )));
            }
        }
        Ok(())
    }

    /// Market supply in hour `t` when the player stays idle.
    pub fn base_supply(&self, t: usize) -> f64 {
        self.res[t] + self.exo_discharge[t] - self.exo_charge[t]
    }

    /// Market supply in hour `t` under `action`.
    pub fn supply(&self, t: usize, action: Action) -> f64 {
        let (ch, dis) = self.player.quantities(action);
        self.base_supply(t) - ch + dis
    }

    /// Clearing prices and the player's market profit under `schedule`.
    pub fn audit(&self, schedule: &Schedule) -> Result<(f64, Vec<f64>)> {
        let mut profit = 0.0;
        let mut prices = Vec::with_capacity(self.horizon());
        for t in 0..self.horizon() {
            let supply = self.base_supply(t) - schedule.charge[t] + schedule.discharge[t];
            if supply < -FEAS_TOL {
                return Err(Error::InvalidInput(format!(
                    "hour {}: negative market supply {supply}",
                    t + 1
                )));
            }
            let price = clear_hour(&self.curves[t], supply.max(0.0))?.price;
            profit += hourly_profit(schedule.charge[t], schedule.discharge[t], price, self.player.oc);
            prices.push(price);
        }
        Ok((profit, prices))
    }

    /// Every schedule invariant plus the non-negative supply floor.
    pub fn violations(&self, schedule: &Schedule) -> Vec<String> {
        let mut out = schedule.violations(&self.player);
        if schedule.horizon() != self.horizon() {
            out.push(format!("schedule covers {} of {} hours", schedule.horizon(), self.horizon()));
            return out;
        }
        for t in 0..self.horizon() {
            let supply = self.base_supply(t) - schedule.charge[t] + schedule.discharge[t];
            if supply < -FEAS_TOL {
                out.push(format!("hour {}: negative market supply", t + 1));
            }
        }
        out
    }

    /// Profit of `action` in hour `t` written the way the block reformulation
    /// writes it: revenue of the whole cleared quantity minus the part
    /// supplied by renewables and rivals, minus operating cost. `None` when
    /// the action drives supply negative.
    pub(crate) fn block_reward(&self, t: usize, action: Action) -> Option<f64> {
        let supply = self.supply(t, action);
        if supply < -FEAS_TOL {
            return None;
        }
        let curve = &self.curves[t];
        let cleared = clear_unchecked(curve, supply.max(0.0));
        let j = cleared.active_block;
        let market_revenue =
            cleared.price * (curve.volume_before(j) + cleared.partial_fill + cleared.curtailment);
        let exogenous_revenue = cleared.price * self.base_supply(t);
        let (ch, dis) = self.player.quantities(action);
        Some(market_revenue - exogenous_revenue - self.player.oc * (ch + dis))
    }

    fn finish(&self, actions: Vec<Action>, objective: f64) -> Result<BestResponseSolution> {
        let schedule = Schedule::from_actions(&self.player, actions);
        let broken = self.violations(&schedule);
        if !broken.is_empty() {
            return Err(Error::Solver(format!(
                "solver returned an infeasible schedule: {}",
                broken.join("; ")
            )));
        }
        let (profit, prices) = self.audit(&schedule)?;
        Ok(BestResponseSolution {
            schedule,
            profit,
            objective,
            prices,
        })
    }
}

/// An optimal schedule with its audited profit and the prices it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseSolution {
    pub schedule: Schedule,
    pub profit: f64,
    /// Optimal value as reported by the solving route itself.
    pub objective: f64,
    pub prices: Vec<f64>,
}

/// Relative tolerance used to detect ties between equally profitable actions.
pub(crate) fn tie_tol(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}
