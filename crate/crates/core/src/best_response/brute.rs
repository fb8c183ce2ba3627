use super::{tie_tol, BestResponseProblem, BestResponseSolution};
use crate::clearing::{clear_unchecked, hourly_profit};
use crate::error::{Error, Result};
use crate::model::{Action, FEAS_TOL};

/// Largest number of action sequences the oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Exhaustive search over all `(2N+1)^T` action sequences.
///
/// Sequences are visited in lexicographic order and a later sequence only
/// replaces the incumbent when it is strictly better, so ties resolve to the
/// lexicographically smallest sequence. Prices come from clearing each hour
/// on the realised total supply.
pub fn brute_force_best_response(prob: &BestResponseProblem) -> Result<BestResponseSolution> {
    prob.check()?;
    let player = &prob.player;
    let horizon = prob.horizon();
    let actions = player.actions();
    let count = (actions.len() as f64).powi(horizon as i32);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(count));
    }

    struct Search<'a> {
        prob: &'a BestResponseProblem,
        actions: Vec<Action>,
        current: Vec<Action>,
        best: Option<(f64, Vec<Action>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, t: usize, soc: f64, profit: f64) {
            let prob = self.prob;
            let player = &prob.player;
            if t == prob.horizon() {
                if !player.soc_within_terminal_band(soc) {
                    return;
                }
                let better = match &self.best {
                    None => true,
                    Some((b, _)) => profit > b + tie_tol(*b),
                };
                if better {
                    self.best = Some((profit, self.current.clone()));
                }
                return;
            }
            for ai in 0..self.actions.len() {
                let a = self.actions[ai];
                let (ch, dis) = player.quantities(a);
                let next_soc = soc + player.eta * ch - dis;
                if !player.soc_within_bounds(next_soc) {
                    continue;
                }
                let supply = prob.base_supply(t) - ch + dis;
                if supply < -FEAS_TOL {
                    continue;
                }
                let price = clear_unchecked(&prob.curves[t], supply.max(0.0)).price;
                self.current.push(a);
                self.visit(t + 1, next_soc, profit + hourly_profit(ch, dis, price, player.oc));
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        prob,
        actions,
        current: Vec::with_capacity(horizon),
        best: None,
    };
    search.visit(0, player.initial_soc(), 0.0);
    match search.best {
        Some((value, seq)) => prob.finish(seq, value),
        None => Err(Error::Infeasible {
            player: Some(player.player_id),
            hour: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::super::testkit::*;
    use super::*;
    use crate::model::{DemandCurve, StorageParams};

    #[test]
    fn single_hour_is_best_single_action() {
        let player = StorageParams::new(1, 30.0, 100.0, 3).with_soc_band(0.5, 1.0);
        let curves = vec![DemandCurve::from_pairs(1, &[(90.0, 40.0), (50.0, 80.0), (10.0, 120.0)])];
        let prob =
            BestResponseProblem::new(player.clone(), vec![0.0], vec![0.0], vec![60.0], curves.clone())
                .unwrap();
        let sol = brute_force_best_response(&prob).unwrap();
        // candidates by hand: discharge 10 -> supply 70 at 50 = 500,
        // 20 -> 80 at 50 = 1000, 30 -> 90 at 10 = 300
        assert_eq!(sol.schedule.actions, vec![Action::Discharge(2)]);
        assert_eq!(sol.profit, 1000.0);
    }

    #[test]
    fn toy_instance_by_enumeration() {
        let sol = brute_force_best_response(&cheap_then_dear()).unwrap();
        assert_eq!(sol.schedule.actions, vec![Action::Charge(1), Action::Discharge(1)]);
        assert_eq!(sol.profit, 250.0);
    }

    #[test]
    fn refuses_huge_instances() {
        let player = StorageParams::new(1, 10.0, 10.0, 10);
        let curves: Vec<_> = (1..=24).map(|h| DemandCurve::from_pairs(h, &[(1.0, 10.0)])).collect();
        let prob =
            BestResponseProblem::new(player, vec![0.0; 24], vec![0.0; 24], vec![5.0; 24], curves).unwrap();
        assert!(matches!(brute_force_best_response(&prob), Err(Error::TooLarge(_))));
    }
}
