use crate::clearing::clear_unchecked;
use crate::error::{Error, Result};
use crate::model::{Action, DemandCurve, Scenario, Schedule, StorageParams, FEAS_TOL};

use super::{finish, PlannerSolution};

/// Largest `sum_t (joint states x joint actions)` the lattice route accepts.
pub const LATTICE_WORK_LIMIT: f64 = 4e8;

/// One player's reachable SoC values per hour, restricted to values from
/// which the terminal band is still reachable.
struct PlayerLattice {
    actions: Vec<Action>,
    /// `next[t][s][a]`: index in layer `t + 1`, if the action stays feasible.
    next: Vec<Vec<Vec<Option<u32>>>>,
    sizes: Vec<usize>,
}

/// Sorts `values` and merges runs within `tol` of the run's first value.
fn merge_close(mut values: Vec<f64>, tol: f64) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        match out.last() {
            Some(&rep) if v - rep <= tol => {}
            _ => out.push(v),
        }
    }
    out
}

fn find(reps: &[f64], v: f64, tol: f64) -> Option<u32> {
    let i = reps.partition_point(|&r| r <= v + tol);
    (i > 0 && v - reps[i - 1] <= tol).then(|| (i - 1) as u32)
}

impl PlayerLattice {
    fn build(p: &StorageParams, horizon: usize) -> Option<Self> {
        let actions = p.actions();
        let moves: Vec<f64> = actions
            .iter()
            .map(|&a| {
                let (ch, dis) = p.quantities(a);
                p.eta * ch - dis
            })
            .collect();
        // SoC values that agree to this tolerance are one state
        let tol = 1e-9 * p.e_max.max(1.0);

        let mut layers: Vec<Vec<f64>> = vec![vec![p.initial_soc()]];
        for t in 0..horizon {
            let candidates: Vec<f64> = layers[t]
                .iter()
                .flat_map(|&s| moves.iter().map(move |&m| s + m))
                .filter(|&v| p.soc_within_bounds(v))
                .collect();
            layers.push(merge_close(candidates, tol));
        }

        // backward: keep states that can still end inside the band
        let mut alive: Vec<Vec<bool>> = vec![Vec::new(); horizon + 1];
        alive[horizon] = layers[horizon].iter().map(|&s| p.soc_within_terminal_band(s)).collect();
        let mut raw_next: Vec<Vec<Vec<Option<u32>>>> = vec![Vec::new(); horizon];
        for t in (0..horizon).rev() {
            let mut keep = Vec::with_capacity(layers[t].len());
            let mut rows = Vec::with_capacity(layers[t].len());
            for &s in &layers[t] {
                let row: Vec<Option<u32>> = moves
                    .iter()
                    .map(|&m| find(&layers[t + 1], s + m, tol).filter(|&n| alive[t + 1][n as usize]))
                    .collect();
                keep.push(row.iter().any(Option::is_some));
                rows.push(row);
            }
            alive[t] = keep;
            raw_next[t] = rows;
        }
        if !alive[0][0] {
            return None;
        }

        // renumber the surviving states densely
        let remap: Vec<Vec<Option<u32>>> = alive
            .iter()
            .map(|layer| {
                let mut k = 0u32;
                layer
                    .iter()
                    .map(|&a| {
                        a.then(|| {
                            k += 1;
                            k - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let next = (0..horizon)
            .map(|t| {
                raw_next[t]
                    .iter()
                    .zip(&alive[t])
                    .filter(|(_, &a)| a)
                    .map(|(row, _)| {
                        row.iter()
                            .map(|n| n.and_then(|n| remap[t + 1][n as usize]))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let sizes = alive.iter().map(|l| l.iter().filter(|&&a| a).count()).collect();
        Some(Self { actions, next, sizes })
    }
}

/// Area under the demand curve up to the served volume.
fn served_area(curve: &DemandCurve, supply: f64) -> f64 {
    let r = clear_unchecked(curve, supply);
    let above: f64 = (0..r.active_block).map(|k| curve.price(k) * curve.width(k)).sum();
    above + r.price * r.partial_fill
}

/// Mixed-radix index helpers, first player most significant.
fn strides(radix: &[usize]) -> Vec<usize> {
    let mut out = vec![1; radix.len()];
    for k in (0..radix.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * radix[k + 1];
    }
    out
}

/// Planner by dynamic programming over the joint SoC lattice of all players.
///
/// Hourly welfare depends only on the joint action, and each player's SoC
/// takes finitely many values because actions are multiples of its step, so
/// backward induction over tuples of SoC values is exact. Lossy players with
/// rational efficiency revisit the same SoC values, which keeps the lattice
/// small. Fails with [`Error::TooLarge`] when the joint work exceeds
/// [`LATTICE_WORK_LIMIT`]. Ties go to the lexicographically smallest joint
/// schedule, player by player in scenario order.
pub fn solve_planner_lattice(scenario: &Scenario) -> Result<PlannerSolution> {
    scenario.check()?;
    let horizon = scenario.horizon;
    let work = lattice_work(scenario)?;
    if work > LATTICE_WORK_LIMIT {
        return Err(Error::TooLarge(work));
    }
    let lattices: Vec<PlayerLattice> = scenario
        .players
        .iter()
        .map(|p| {
            PlayerLattice::build(p, horizon).ok_or(Error::Infeasible {
                player: Some(p.player_id),
                hour: None,
            })
        })
        .collect::<Result<_>>()?;

    let n_players = lattices.len();
    let action_radix: Vec<usize> = lattices.iter().map(|l| l.actions.len()).collect();
    let n_joint: usize = action_radix.iter().product();
    let joint_actions: Vec<Vec<usize>> = (0..n_joint)
        .map(|mut a| {
            let mut digits = vec![0; n_players];
            for k in (0..n_players).rev() {
                digits[k] = a % action_radix[k];
                a /= action_radix[k];
            }
            digits
        })
        .collect();

    // hourly welfare of each joint action, None when supply goes negative
    let rewards: Vec<Vec<Option<f64>>> = (0..horizon)
        .map(|t| {
            joint_actions
                .iter()
                .map(|digits| {
                    let mut supply = scenario.res.values[t];
                    let mut cost = 0.0;
                    for (k, &a) in digits.iter().enumerate() {
                        let p = &scenario.players[k];
                        let (ch, dis) = p.quantities(lattices[k].actions[a]);
                        supply += dis - ch;
                        cost += p.oc * (ch + dis);
                    }
                    (supply >= -FEAS_TOL).then(|| served_area(&scenario.curves[t], supply.max(0.0)) - cost)
                })
                .collect()
        })
        .collect();

    let radix: Vec<Vec<usize>> = (0..=horizon)
        .map(|t| lattices.iter().map(|l| l.sizes[t]).collect())
        .collect();
    let stride: Vec<Vec<usize>> = radix.iter().map(|r| strides(r)).collect();
    let layer_len: Vec<usize> = radix.iter().map(|r| r.iter().product()).collect();

    let step = |t: usize, state: usize, digits: &[usize]| -> Option<usize> {
        let mut rest = state;
        let mut out = 0;
        for k in 0..n_players {
            let s = rest / stride[t][k];
            rest %= stride[t][k];
            let n = lattices[k].next[t][s][digits[k]]?;
            out += n as usize * stride[t + 1][k];
        }
        Some(out)
    };

    // backward induction; every state at the last hour lies in every band
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); horizon + 1];
    values[horizon] = vec![0.0; layer_len[horizon]];
    for t in (0..horizon).rev() {
        let next = &values[t + 1];
        values[t] = (0..layer_len[t])
            .map(|state| {
                let mut best = f64::NEG_INFINITY;
                for (ja, digits) in joint_actions.iter().enumerate() {
                    let Some(r) = rewards[t][ja] else { continue };
                    if let Some(n) = step(t, state, digits) {
                        best = best.max(r + next[n]);
                    }
                }
                best
            })
            .collect();
    }
    let objective = values[0][0];
    if objective == f64::NEG_INFINITY {
        return Err(Error::Infeasible {
            player: None,
            hour: None,
        });
    }

    let mut state = 0;
    let mut chosen: Vec<Vec<Action>> = vec![Vec::with_capacity(horizon); n_players];
    for t in 0..horizon {
        let target = values[t][state];
        let tol = 1e-9 * target.abs().max(1.0);
        let (digits, n) = joint_actions
            .iter()
            .enumerate()
            .find_map(|(ja, digits)| {
                let r = rewards[t][ja]?;
                let n = step(t, state, digits)?;
                (r + values[t + 1][n] >= target - tol).then_some((digits, n))
            })
            .ok_or_else(|| Error::Solver("planner recursion lost its optimum".into()))?;
        for (k, &a) in digits.iter().enumerate() {
            chosen[k].push(lattices[k].actions[a]);
        }
        state = n;
    }
    let schedules = scenario
        .players
        .iter()
        .zip(chosen)
        .map(|(p, actions)| Schedule::from_actions(p, actions))
        .collect();
    finish(scenario, schedules, objective)
}

/// `sum_t (joint states x joint actions)` of [`solve_planner_lattice`], the
/// quantity compared against [`LATTICE_WORK_LIMIT`]. Builds the per-player
/// lattices, which is cheap next to the joint recursion.
pub fn lattice_work(scenario: &Scenario) -> Result<f64> {
    scenario.check()?;
    let mut per_hour = vec![1.0; scenario.horizon];
    let mut actions = 1.0;
    for p in &scenario.players {
        actions *= p.actions().len() as f64;
        let Some(l) = PlayerLattice::build(p, scenario.horizon) else {
            // infeasible players are reported by the solver itself
            return Ok(0.0);
        };
        for (t, h) in per_hour.iter_mut().enumerate() {
            *h *= l.sizes[t] as f64;
        }
    }
    Ok(per_hour.iter().sum::<f64>() * actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merging_groups_near_equal_values() {
        let v = merge_close(vec![1.0, 0.5, 1.0 + 1e-12, 0.5 - 1e-13, 2.0], 1e-9);
        assert_eq!(v.len(), 3);
        assert_eq!(find(&v, 1.0 + 5e-10, 1e-9), Some(1));
        assert_eq!(find(&v, 1.5, 1e-9), None);
        assert_eq!(find(&v, 0.4, 1e-9), None);
    }

    #[test]
    fn lossy_lattice_stays_small() {
        // eta = 0.9 revisits SoC values: net position 9c - 10d in tenths of a step
        let p = StorageParams::new(1, 4.0, 16.0, 4).with_eta(0.9);
        let l = PlayerLattice::build(&p, 24).unwrap();
        assert!(l.sizes.iter().all(|&n| n <= 161), "{:?}", l.sizes);
    }

    #[test]
    fn served_area_examples() {
        let c = DemandCurve::from_pairs(1, &[(20.0, 50.0), (5.0, 200.0)]);
        assert_eq!(served_area(&c, 0.0), 0.0);
        assert_eq!(served_area(&c, 50.0), 1000.0);
        assert_eq!(served_area(&c, 100.0), 1250.0);
        assert_eq!(served_area(&c, 500.0), 1750.0);
    }
}
