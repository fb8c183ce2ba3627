//! Day-ahead market with strategic storage operators.
//!
//! Hourly uniform-price clearing against stepwise demand curves, exact best
//! responses of a storage player to rival schedules, Gauss-Seidel search for
//! pure Nash equilibria, a welfare-maximising central planner, storage
//! sizing from residual demand, and CSV ingestion of market data.

pub mod best_response;
pub mod clearing;
pub mod equilibrium;
pub mod error;
pub mod ingest;
mod milp;
pub mod model;
pub mod planner;
pub mod sizing;

pub use best_response::{
    brute_force_best_response, solve_method1, solve_method2, BestResponseProblem, BestResponseSolution,
};
pub use clearing::{
    clear_hour, consumer_surplus, consumer_surplus_telescoped, hourly_metrics, hourly_profit, player_profits,
    producer_surplus, ClearingResult, MarketReport, MarketTotals,
};
pub use equilibrium::{find_nash, verify_nash, EquilibriumReport, NashCheck};
pub use error::{Error, Result};
pub use model::{
    net_supply, validate_scenario, Action, Block, DemandCurve, GameState, MarketOutcome, ResProfile, Scenario,
    Schedule, SolverOptions, StorageParams, Violation, FEAS_TOL,
};
pub use planner::{
    planner_dominance_check, solve_planner, solve_planner_lattice, solve_planner_milp, PlannerSolution,
};
pub use sizing::{apply_theta, partition_players, required_capacity, residual_demand, SizingResult};
