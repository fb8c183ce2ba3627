use crate::error::{Error, Result};
use crate::milp::{Milp, Var};
use crate::model::{Action, Scenario, Schedule, FEAS_TOL};

use super::{finish, PlannerSolution};

struct PlayerHour {
    charge: Vec<Var>,
    discharge: Vec<Var>,
}

/// Planner as one MILP solved by HiGHS with zero optimality gap.
///
/// Each hour selects exactly one demand block `u_j` with a partial fill
/// `b_j <= width_j u_j`; served volume `sum_j (vol_{j-1} u_j + b_j)` plus
/// curtailment balances renewables and net storage injection. Curtailment
/// needs the last block to be active and full. Revenue is
/// `sum_j pr_j (vol_{j-1} u_j + b_j)` and consumer surplus the telescoped
/// sum `sum_j (pr_j - pr_{j+1}) vol_j y_j` with `y_j = sum_{k>j} u_k`, so the
/// whole model is linear without big-M price products.
///
/// Proving optimality can take very long for lossy storage with coarse
/// offer grids, where the LP bound is loose; [`super::solve_planner_lattice`]
/// is the faster route for few players.
pub fn solve_planner_milp(scenario: &Scenario) -> Result<PlannerSolution> {
    scenario.check()?;
    let horizon = scenario.horizon;
    let mut m = Milp::new();
    let mut grid: Vec<Vec<PlayerHour>> = Vec::with_capacity(scenario.players.len());

    // per-player action binaries and battery rows
    for p in &scenario.players {
        let levels = p.offer_grid();
        let mut hours = Vec::with_capacity(horizon);
        let mut prev: Option<Var> = None;
        for _ in 0..horizon {
            let charge: Vec<Var> = levels.iter().map(|q| m.binary(-p.oc * q)).collect();
            let discharge: Vec<Var> = levels.iter().map(|q| m.binary(-p.oc * q)).collect();
            let one: Vec<(Var, f64)> = charge.iter().chain(&discharge).map(|&z| (z, 1.0)).collect();
            m.at_most(1.0, &one);

            let soc = m.continuous(0.0, -FEAS_TOL, p.e_max + FEAS_TOL);
            let mut row = vec![(soc, 1.0)];
            row.extend(charge.iter().zip(&levels).map(|(&z, &q)| (z, -p.eta * q)));
            row.extend(discharge.iter().zip(&levels).map(|(&z, &q)| (z, q)));
            match prev {
                None => m.equal(p.initial_soc(), &row),
                Some(s) => {
                    row.push((s, -1.0));
                    m.equal(0.0, &row);
                }
            }
            prev = Some(soc);
            hours.push(PlayerHour { charge, discharge });
        }
        if let Some(last) = prev {
            let (lo, hi) = p.terminal_band();
            m.row(lo - FEAS_TOL, hi + FEAS_TOL, &[(last, 1.0)]);
        }
        grid.push(hours);
    }

    // market rows
    for t in 0..horizon {
        let curve = &scenario.curves[t];
        let d = curve.len();
        let res = scenario.res.values[t];
        let slack = res + scenario.players.iter().map(|p| p.q_max).sum::<f64>() + 1.0;

        let mut balance: Vec<(Var, f64)> = Vec::new();
        let mut pick = Vec::with_capacity(d);
        let mut consumer = 0.0;
        let mut fills = Vec::with_capacity(d);
        for j in 0..d {
            let floor = curve.volume_before(j);
            if j > 0 {
                consumer += (curve.price(j - 1) - curve.price(j)) * curve.volume(j - 1);
            }
            let u = m.binary(curve.price(j) * floor + consumer);
            let b = m.continuous(curve.price(j), 0.0, curve.width(j));
            m.at_most(0.0, &[(b, 1.0), (u, -curve.width(j))]);
            balance.push((u, floor));
            balance.push((b, 1.0));
            pick.push((u, 1.0));
            fills.push((u, b));
        }
        m.equal(1.0, &pick);

        // oversupply: only with the last block active and completely filled
        let over = m.binary(0.0);
        let curtail = m.continuous(0.0, 0.0, f64::INFINITY);
        let (u_last, b_last) = fills[d - 1];
        m.at_most(0.0, &[(curtail, 1.0), (over, -slack)]);
        m.at_most(0.0, &[(over, 1.0), (u_last, -1.0)]);
        m.at_least(0.0, &[(b_last, 1.0), (over, -curve.width(d - 1))]);
        balance.push((curtail, 1.0));

        for (p, hours) in scenario.players.iter().zip(&grid) {
            let levels = p.offer_grid();
            let h = &hours[t];
            balance.extend(h.discharge.iter().zip(&levels).map(|(&z, &q)| (z, -q)));
            balance.extend(h.charge.iter().zip(&levels).map(|(&z, &q)| (z, q)));
        }
        m.equal(res, &balance);
    }

    let (x, objective) = m.maximise_with_value().map_err(|e| match e {
        Error::Infeasible { .. } => Error::Infeasible {
            player: None,
            hour: None,
        },
        other => other,
    })?;

    let on = |v: Var| x[v.index()] > 0.5;
    let schedules: Vec<Schedule> = scenario
        .players
        .iter()
        .zip(&grid)
        .map(|(p, hours)| {
            let actions = hours
                .iter()
                .map(|h| {
                    if let Some(i) = h.charge.iter().position(|&z| on(z)) {
                        Action::Charge(i as u32 + 1)
                    } else if let Some(i) = h.discharge.iter().position(|&z| on(z)) {
                        Action::Discharge(i as u32 + 1)
                    } else {
                        Action::Idle
                    }
                })
                .collect();
            Schedule::from_actions(p, actions)
        })
        .collect();
    finish(scenario, schedules, objective)
}
