//! Command implementations.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use stormarket_core::ingest::{write_demand_csv, write_res_csv};
use stormarket_core::{
    find_nash, hourly_metrics, player_profits, solve_planner, validate_scenario, GameState, MarketReport,
    Scenario,
};

use crate::config::{Mode, RunConfig};
use crate::error::{CoreContext, Failure};
use crate::inputs::{build_scenario, load_inputs, scenario_for, sizing, GridPoint, Inputs};
use crate::report::{
    compare_runs, read_summary, sweep_row, write_json, write_outcome_csv, write_rows, RunSummary, SWEEP_HEADER,
};

/// A solved grid point.
#[derive(Debug, Clone)]
pub struct PointRun {
    pub summary: RunSummary,
    pub report: MarketReport,
    pub state: GameState,
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))
}

/// Solves one grid point as a Nash search or a planner problem.
pub fn run_point(cfg: &RunConfig, inputs: &Inputs, point: &GridPoint, mode: Mode) -> Result<PointRun, Failure> {
    let scenario = scenario_for(cfg, inputs, point)?;
    let (state, converged, iterations, cycle_length) = if scenario.players.is_empty() {
        (GameState::new(Vec::new()), true, 0, 0)
    } else {
        match mode {
            Mode::Nash => {
                let r = find_nash(&scenario, cfg.tolerance).within("equilibrium")?;
                (r.final_state, r.converged, r.iterations, r.cycle_length)
            }
            Mode::Planner => (solve_planner(&scenario).within("planner")?.state(), true, 0, 0),
            Mode::Sweep => return Err(Failure::config("a grid point runs `nash` or `planner`")),
        }
    };
    summarise(&scenario, inputs, point, mode, state, converged, iterations, cycle_length)
}

#[allow(clippy::too_many_arguments)]
fn summarise(
    scenario: &Scenario,
    inputs: &Inputs,
    point: &GridPoint,
    mode: Mode,
    state: GameState,
    converged: bool,
    iterations: usize,
    cycle_length: usize,
) -> Result<PointRun, Failure> {
    let report = hourly_metrics(&state, scenario).within("clearing")?;
    let summary = RunSummary {
        label: point.label(),
        mode,
        day: inputs.day,
        horizon: scenario.horizon,
        point: *point,
        n_players: scenario.players.len(),
        converged,
        iterations,
        cycle_length,
        totals: report.totals,
        per_player_profit: player_profits(&state, scenario, &report),
        players: scenario.players.clone(),
        schedules: state.schedules.iter().map(|s| s.actions.clone()).collect(),
    };
    Ok(PointRun { summary, report, state })
}

/// Writes `outcome.csv` and `summary.json` into `dir`.
pub fn write_point(dir: &Path, run: &PointRun) -> Result<(), Failure> {
    create_dir(dir)?;
    write_outcome_csv(&dir.join("outcome.csv"), &run.report.hours, &run.summary.players, &run.state)?;
    write_json(&dir.join("summary.json"), &run.summary)
}

fn cap_reached(runs: &[&RunSummary], max_sweeps: usize) -> Result<(), Failure> {
    let hit: Vec<&str> = runs.iter().filter(|r| r.hit_sweep_cap()).map(|r| r.label.as_str()).collect();
    if hit.is_empty() {
        Ok(())
    } else {
        Err(Failure::Solver(anyhow::anyhow!(
            "equilibrium: no fixed point or cycle within {max_sweeps} sweeps ({})",
            hit.join(", ")
        )))
    }
}

/// `nash` and `planner`: one run at the configured point.
pub fn single(cfg: &RunConfig, mode: Mode) -> Result<PointRun, Failure> {
    let inputs = load_inputs(cfg)?;
    let run = run_point(cfg, &inputs, &GridPoint::base(cfg), mode)?;
    write_point(&cfg.out, &run)?;
    let t = &run.summary.totals;
    println!(
        "{} {} day {} players {}: sw {:.4} cs {:.4} ps {:.4} unmet {:.4} peak {:.4} converged {}",
        mode, run.summary.label, run.summary.day, run.summary.n_players, t.social_welfare, t.consumer_surplus,
        t.producer_surplus, t.unmet, t.peak_price, run.summary.converged
    );
    cap_reached(&[&run.summary], cfg.max_sweeps)?;
    Ok(run)
}

/// Cartesian product of the sweep axes, first axis outermost.
pub fn grid(cfg: &RunConfig) -> Vec<GridPoint> {
    let base = GridPoint::base(cfg);
    let Some(sw) = &cfg.sweep else {
        return vec![base];
    };
    let ns: Vec<Option<usize>> = sw.n.as_ref().map_or(vec![None], |v| v.iter().map(|&x| Some(x)).collect());
    let thetas: Vec<f64> = sw.theta.clone().unwrap_or(vec![base.theta]);
    let etas: Vec<Option<f64>> = sw.eta.as_ref().map_or(vec![None], |v| v.iter().map(|&x| Some(x)).collect());
    let ocs: Vec<Option<f64>> = sw.oc.as_ref().map_or(vec![None], |v| v.iter().map(|&x| Some(x)).collect());
    let mut out = Vec::new();
    for &n in &ns {
        for &theta in &thetas {
            for &eta in &etas {
                for &oc in &ocs {
                    out.push(GridPoint { n, theta, eta, oc });
                }
            }
        }
    }
    out
}

#[derive(Serialize)]
struct IndexEntry {
    label: String,
    point: GridPoint,
    summary: String,
}

/// `sweep`: every grid point in parallel, each written to
/// `points/<label>/`, then `sweep.csv` and `index.json`.
pub fn sweep(cfg: &RunConfig, jobs: usize) -> Result<Vec<RunSummary>, Failure> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| Failure::config("no `sweep` section"))?;
    let inputs = load_inputs(cfg)?;
    let points = grid(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    let runs: Vec<PointRun> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let run = run_point(cfg, &inputs, p, sw.run)?;
                write_point(&cfg.out.join("points").join(p.label()), &run)?;
                Ok(run)
            })
            .collect::<Result<_, Failure>>()
    })?;

    let mut rows = vec![SWEEP_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    let mut index = Vec::new();
    for r in &runs {
        let rel = format!("points/{}/summary.json", r.summary.label);
        rows.push(sweep_row(&r.summary, &rel));
        index.push(IndexEntry {
            label: r.summary.label.clone(),
            point: r.summary.point,
            summary: rel,
        });
        let t = &r.summary.totals;
        println!(
            "{:<32} sw {:>14.4} unmet {:>12.4} peak {:>8.4} converged {}",
            r.summary.label, t.social_welfare, t.unmet, t.peak_price, r.summary.converged
        );
    }
    write_rows(&cfg.out.join("sweep.csv"), &rows)?;
    write_json(&cfg.out.join("index.json"), &index)?;
    let summaries: Vec<RunSummary> = runs.into_iter().map(|r| r.summary).collect();
    cap_reached(&summaries.iter().collect::<Vec<_>>(), cfg.max_sweeps)?;
    Ok(summaries)
}

/// `validate`: inputs and the configured scenario, every violation listed.
pub fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    let inputs = load_inputs(cfg)?;
    let scenario = build_scenario(cfg, &inputs, &GridPoint::base(cfg))?;
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        println!(
            "ok: day {} with {} hours and {} players",
            inputs.day,
            scenario.horizon,
            scenario.players.len()
        );
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::data(format!("model: {} violations", violations.len())))
}

#[derive(Serialize)]
struct IngestSummary {
    day: chrono::NaiveDate,
    days: Vec<chrono::NaiveDate>,
    horizon: usize,
    blocks: Vec<usize>,
    demand: PathBuf,
    res: PathBuf,
}

/// `ingest`: writes the cleaned curves and renewables of the chosen day.
pub fn ingest(cfg: &RunConfig) -> Result<Inputs, Failure> {
    let inputs = load_inputs(cfg)?;
    create_dir(&cfg.out)?;
    let demand = cfg.out.join(format!("demand_{}.csv", inputs.day));
    let res = cfg.out.join("res.csv");
    write_demand_csv(&demand, inputs.day, &inputs.curves).within("ingest")?;
    write_res_csv(&res, &inputs.res).within("ingest")?;
    write_json(
        &cfg.out.join("ingest.json"),
        &IngestSummary {
            day: inputs.day,
            days: inputs.days.clone(),
            horizon: inputs.curves.len(),
            blocks: inputs.curves.iter().map(|c| c.len()).collect(),
            demand,
            res,
        },
    )?;
    println!("day {} of {} days, {} hours", inputs.day, inputs.days.len(), inputs.curves.len());
    Ok(inputs)
}

/// `size`: aggregate and per-player storage for the configured player count.
pub fn size(cfg: &RunConfig) -> Result<stormarket_core::SizingResult, Failure> {
    let inputs = load_inputs(cfg)?;
    let n = cfg.players.as_ref().map_or(cfg.storage.n_players, |_| 0);
    let out = sizing(cfg, &inputs, n)?;
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("sizing.json"), &out)?;
    println!("day {}: e_max {:.4} MWh, q_max {:.4} MW", inputs.day, out.e_max, out.q_max);
    Ok(out)
}

/// `compare`: side-by-side totals of saved runs, written to `compare.csv`.
pub fn compare(paths: &[PathBuf], out: &Path) -> Result<Vec<Vec<String>>, Failure> {
    let runs = paths
        .iter()
        .map(|p| Ok((p.display().to_string(), read_summary(p)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let rows = compare_runs(&runs)?;
    create_dir(out)?;
    write_rows(&out.join("compare.csv"), &rows)?;
    for r in &rows {
        println!("{}", r.join(","));
    }
    Ok(rows)
}
