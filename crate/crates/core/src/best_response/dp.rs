use std::collections::HashMap;

use super::{tie_tol, BestResponseProblem, BestResponseSolution};
use crate::error::{Error, Result};
use crate::model::Action;

/// Cumulative (charge units, discharge units) since the start of the day.
/// SoC is `alpha * E + step * (eta * charged - discharged)`, so the pair pins
/// it down exactly. With `eta == 1` only the difference matters and the pair
/// is collapsed to `(charged - discharged, 0)`.
type Key = (i32, i32);

struct Layer {
    keys: Vec<Key>,
    index: HashMap<Key, usize>,
}

impl Layer {
    fn new() -> Self {
        Self {
            keys: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn insert(&mut self, key: Key) {
        if !self.index.contains_key(&key) {
            self.index.insert(key, self.keys.len());
            self.keys.push(key);
        }
    }
}

/// Exact best response under the demand-block reformulation.
///
/// The block selection `u`, the partial fill `b` and any curtailment follow
/// from the player's action in each hour, so the only coupling between hours
/// is the state of charge. The recursion runs over the reachable SoC values,
/// which are finite because every action is a multiple of `Q^max / N`.
/// Among optimal schedules the lexicographically smallest action sequence is
/// returned (idle < charge levels < discharge levels).
pub fn solve_method2(prob: &BestResponseProblem) -> Result<BestResponseSolution> {
    prob.check()?;
    let player = &prob.player;
    let horizon = prob.horizon();
    let unit_eta = player.eta == 1.0;
    let step = player.step();
    let soc = |key: Key| player.initial_soc() + step * (player.eta * key.0 as f64 - key.1 as f64);
    let advance = |key: Key, action: Action| -> Key {
        let (c, d) = match action {
            Action::Idle => (0, 0),
            Action::Charge(i) => (i as i32, 0),
            Action::Discharge(i) => (0, i as i32),
        };
        if unit_eta {
            (key.0 + c - d, 0)
        } else {
            (key.0 + c, key.1 + d)
        }
    };

    let actions = player.actions();
    let rewards: Vec<Vec<Option<f64>>> = (0..horizon)
        .map(|t| actions.iter().map(|&a| prob.block_reward(t, a)).collect())
        .collect();

    // forward: reachable states with SoC inside [0, E]
    let mut layers = vec![Layer::new()];
    layers[0].insert((0, 0));
    for t in 0..horizon {
        let mut next = Layer::new();
        for &key in &layers[t].keys {
            for (ai, &a) in actions.iter().enumerate() {
                if rewards[t][ai].is_none() {
                    continue;
                }
                let k = advance(key, a);
                if player.soc_within_bounds(soc(k)) {
                    next.insert(k);
                }
            }
        }
        if next.keys.is_empty() {
            return Err(Error::Infeasible {
                player: Some(player.player_id),
                hour: Some(t + 1),
            });
        }
        layers.push(next);
    }

    // backward: best profit-to-go
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(horizon + 1);
    values.push(
        layers[horizon]
            .keys
            .iter()
            .map(|&k| {
                if player.soc_within_terminal_band(soc(k)) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect(),
    );
    for t in (0..horizon).rev() {
        let next_values = values.last().expect("layer values");
        let next_layer = &layers[t + 1];
        let row = layers[t]
            .keys
            .iter()
            .map(|&key| {
                let mut best = f64::NEG_INFINITY;
                for (ai, &a) in actions.iter().enumerate() {
                    let Some(r) = rewards[t][ai] else { continue };
                    if let Some(&ni) = next_layer.index.get(&advance(key, a)) {
                        best = best.max(r + next_values[ni]);
                    }
                }
                best
            })
            .collect();
        values.push(row);
    }
    values.reverse();

    if values[0][0] == f64::NEG_INFINITY {
        return Err(Error::Infeasible {
            player: Some(player.player_id),
            hour: Some(horizon),
        });
    }

    // forward again: first action (in tie-break order) that attains the optimum
    let mut key = (0, 0);
    let mut chosen = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let target = values[t][layers[t].index[&key]];
        let pick = actions.iter().enumerate().find_map(|(ai, &a)| {
            let r = rewards[t][ai]?;
            let next = advance(key, a);
            let ni = *layers[t + 1].index.get(&next)?;
            (r + values[t + 1][ni] >= target - tie_tol(target)).then_some((a, next))
        });
        let (a, next) = pick.ok_or_else(|| Error::Solver("dynamic program lost its optimum".into()))?;
        chosen.push(a);
        key = next;
    }
    prob.finish(chosen, values[0][0])
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::*;
    use crate::model::{DemandCurve, StorageParams};

    #[test]
    fn charges_cheap_discharges_dear() {
        let sol = solve_method2(&cheap_then_dear()).unwrap();
        assert_eq!(sol.schedule.actions, vec![Action::Charge(1), Action::Discharge(1)]);
        assert!((sol.profit - 250.0).abs() < 1e-9);
        assert_eq!(sol.prices, vec![5.0, 30.0]);
    }

    #[test]
    fn prohibitive_cost_idles() {
        let sol = solve_method2(&prohibitive_cost()).unwrap();
        assert!(sol.schedule.is_idle());
        assert_eq!(sol.profit, 0.0);
    }

    #[test]
    fn zero_capacity_idles() {
        let sol = solve_method2(&no_capacity()).unwrap();
        assert!(sol.schedule.is_idle());
        assert_eq!(sol.profit, 0.0);
    }

    #[test]
    fn empty_grid_only_discharges() {
        let mut p = empty_grid();
        p.player.epsilon = 1.0;
        let sol = solve_method2(&p).unwrap();
        // discharging 10 in hour 1 clears at 40; hour 2 would clear at 30
        assert_eq!(sol.schedule.actions, vec![Action::Discharge(1), Action::Idle]);
        assert!((sol.profit - 400.0).abs() < 1e-9);
    }

    #[test]
    fn negative_supply_everywhere_is_infeasible() {
        let player = StorageParams::new(1, 10.0, 10.0, 1).with_soc_band(0.0, 0.0);
        let curves = vec![DemandCurve::from_pairs(1, &[(10.0, 100.0)])];
        let mut prob =
            BestResponseProblem::new(player, vec![0.0], vec![0.0], vec![50.0], curves).unwrap();
        assert!(solve_method2(&prob).unwrap().schedule.is_idle());
        // rivals charge more than renewables plus the player's full discharge
        prob.exo_charge[0] = 70.0;
        prob.big_m[0] += 70.0;
        let err = solve_method2(&prob).unwrap_err();
        assert!(matches!(err, Error::Infeasible { player: Some(1), hour: Some(1) }));
    }

    #[test]
    fn unreachable_terminal_band_is_infeasible() {
        let player = StorageParams::new(1, 1.0, 10.0, 1)
            .with_eta(0.5)
            .with_soc_band(0.5, 0.0);
        let curves = vec![DemandCurve::from_pairs(1, &[(10.0, 100.0)])];
        let mut prob =
            BestResponseProblem::new(player, vec![0.0], vec![0.0], vec![50.0], curves).unwrap();
        // start at 5.0 with band [5, 5]: idle works
        assert!(solve_method2(&prob).unwrap().schedule.is_idle());
        // rivals overdraw by 0.5: only a discharge keeps supply >= 0, and it
        // leaves the band
        prob.exo_charge[0] = 50.5;
        prob.big_m[0] += 50.5;
        let err = solve_method2(&prob).unwrap_err();
        assert!(matches!(err, Error::Infeasible { player: Some(1), hour: Some(1) }));
    }

    #[test]
    fn lossy_storage_tracks_both_counters() {
        let player = StorageParams::new(1, 10.0, 30.0, 2).with_eta(0.8).with_soc_band(0.5, 0.1);
        let curves = vec![
            DemandCurve::from_pairs(1, &[(50.0, 100.0), (2.0, 300.0)]),
            DemandCurve::from_pairs(2, &[(50.0, 100.0), (2.0, 300.0)]),
            DemandCurve::from_pairs(3, &[(80.0, 250.0), (40.0, 300.0)]),
        ];
        let prob = BestResponseProblem::new(
            player,
            vec![0.0; 3],
            vec![0.0; 3],
            vec![200.0, 200.0, 245.0],
            curves,
        )
        .unwrap();
        let sol = solve_method2(&prob).unwrap();
        assert!(prob.violations(&sol.schedule).is_empty());
        let brute = super::super::brute_force_best_response(&prob).unwrap();
        assert!((sol.profit - brute.profit).abs() < 1e-9);
    }
}
