use super::{BestResponseProblem, BestResponseSolution};
use crate::error::{Error, Result};
use crate::milp::{Milp, Var};
use crate::model::{Action, FEAS_TOL};

/// Minimum excess (MWh) over a cumulative volume for supply to count as
/// "above" it. It encodes the half-open block intervals of the clearing rule
/// in the big-M rows; supplies within this margin above a boundary are cut off.
pub const BOUNDARY_MARGIN: f64 = 1e-6;

struct HourVars {
    charge: Vec<Var>,
    discharge: Vec<Var>,
}

/// Exact best response from the big-M MILP.
///
/// Per hour: level binaries for charge and discharge with at most one active,
/// a price-step binary `u_j` per block with exactly one active, the
/// above/below indicators `u+_j`, `u-_j` partitioning the other blocks, and
/// product binaries `w = z * u` linearised by the usual three rows so that
/// revenue is `sum Q_i pr_j (w_dis - w_ch)`. The last block is open above
/// (oversupply clears at the floor price and is curtailed).
pub fn solve_method1(prob: &BestResponseProblem) -> Result<BestResponseSolution> {
    prob.check()?;
    let player = &prob.player;
    let levels: Vec<f64> = player.offer_grid();
    let n = levels.len();
    let mut m = Milp::new();
    let mut hours = Vec::with_capacity(prob.horizon());
    let mut prev_soc: Option<Var> = None;

    for t in 0..prob.horizon() {
        let curve = &prob.curves[t];
        let d = curve.len();
        let big = prob.big_m[t];
        let base = prob.base_supply(t);

        let charge: Vec<Var> = levels.iter().map(|q| m.binary(-player.oc * q)).collect();
        let discharge: Vec<Var> = levels.iter().map(|q| m.binary(-player.oc * q)).collect();

        // net injection of the player: sum Q_i (z_dis - z_ch); q_tot = base + injection
        let injection: Vec<(Var, f64)> = discharge
            .iter()
            .zip(&levels)
            .map(|(&z, &q)| (z, q))
            .chain(charge.iter().zip(&levels).map(|(&z, &q)| (z, -q)))
            .collect();
        let with = |extra: &[(Var, f64)]| -> Vec<(Var, f64)> {
            injection.iter().chain(extra).copied().collect()
        };

        // one action per hour
        let all: Vec<(Var, f64)> = charge.iter().chain(&discharge).map(|&z| (z, 1.0)).collect();
        m.at_most(1.0, &all);

        // battery dynamics
        let soc = m.continuous(0.0, -FEAS_TOL, player.e_max + FEAS_TOL);
        let mut dyn_row: Vec<(Var, f64)> = vec![(soc, 1.0)];
        dyn_row.extend(charge.iter().zip(&levels).map(|(&z, &q)| (z, -player.eta * q)));
        dyn_row.extend(discharge.iter().zip(&levels).map(|(&z, &q)| (z, q)));
        match prev_soc {
            None => m.equal(player.initial_soc(), &dyn_row),
            Some(prev) => {
                dyn_row.push((prev, -1.0));
                m.equal(0.0, &dyn_row);
            }
        }
        prev_soc = Some(soc);

        // supply floor
        m.at_least(-base, &injection);

        let u: Vec<Var> = (0..d).map(|_| m.binary(0.0)).collect();
        let above: Vec<Var> = (0..d).map(|_| m.binary(0.0)).collect();
        let below: Vec<Var> = (0..d).map(|_| m.binary(0.0)).collect();
        let pick: Vec<(Var, f64)> = u.iter().map(|&v| (v, 1.0)).collect();
        m.equal(1.0, &pick);

        for j in 0..d {
            let lower = curve.volume_before(j) + if j > 0 { BOUNDARY_MARGIN } else { 0.0 };
            let upper = curve.volume(j);
            let last = j + 1 == d;

            // u_j = 1 => lower <= q_tot (<= upper unless last)
            m.at_least(lower - big - base, &with(&[(u[j], -big)]));
            if !last {
                m.at_most(upper + big - base, &with(&[(u[j], big)]));
            }
            // u+_j = 1 => q_tot strictly above block j
            if last {
                m.equal(0.0, &[(above[j], 1.0)]);
            } else {
                m.at_least(upper + BOUNDARY_MARGIN - big - base, &with(&[(above[j], -big)]));
            }
            // u-_j = 1 => q_tot at or below the start of block j
            if j == 0 {
                m.equal(0.0, &[(below[j], 1.0)]);
            } else {
                m.at_most(curve.volume_before(j) + big - base, &with(&[(below[j], big)]));
            }
            m.equal(1.0, &[(u[j], 1.0), (above[j], 1.0), (below[j], 1.0)]);
        }
        // first and last step
        m.at_least(curve.volume(0) + BOUNDARY_MARGIN - base, &with(&[(u[0], big)]));
        m.at_most(curve.max_volume() - base, &with(&[(u[d - 1], -big)]));

        // w = z * u and the revenue terms
        for i in 0..n {
            for j in 0..d {
                let value = levels[i] * curve.price(j);
                for (z, sign) in [(charge[i], -1.0), (discharge[i], 1.0)] {
                    let w = m.binary(sign * value);
                    m.at_most(0.0, &[(w, 1.0), (z, -1.0)]);
                    m.at_most(0.0, &[(w, 1.0), (u[j], -1.0)]);
                    m.at_least(-1.0, &[(w, 1.0), (z, -1.0), (u[j], -1.0)]);
                }
            }
        }
        hours.push(HourVars { charge, discharge });
    }

    // terminal band
    if let Some(last) = prev_soc {
        let (lo, hi) = player.terminal_band();
        m.row(lo - FEAS_TOL, hi + FEAS_TOL, &[(last, 1.0)]);
    }

    let (x, objective) = m.maximise_with_value().map_err(|e| match e {
        Error::Infeasible { .. } => Error::Infeasible {
            player: Some(player.player_id),
            hour: None,
        },
        other => other,
    })?;

    let on = |v: Var| x[v.index()] > 0.5;
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
    prob.finish(actions, objective)
}
