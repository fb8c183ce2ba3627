//! Thin builder over HiGHS used by the big-M best response and the planner.
//! Gaps are zero and tolerances tight: callers rely on exact optima.

use std::num::NonZeroU32;

use highs::{Col, HighsModelStatus, RowProblem, Sense};

use crate::error::{Error, Result};

pub(crate) type Var = Col;

#[derive(Default)]
pub(crate) struct Milp {
    problem: RowProblem,
}

impl Milp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn binary(&mut self, cost: f64) -> Var {
        self.problem.add_integer_column(cost, 0.0..=1.0)
    }

    pub fn continuous(&mut self, cost: f64, lo: f64, hi: f64) -> Var {
        self.problem.add_column(cost, lo..=hi)
    }

    /// `lo <= sum(coef * var) <= hi`; pass infinities for one-sided rows.
    pub fn row(&mut self, lo: f64, hi: f64, terms: &[(Var, f64)]) {
        self.problem.add_row(lo..=hi, terms.iter().copied());
    }

    pub fn at_most(&mut self, hi: f64, terms: &[(Var, f64)]) {
        self.row(f64::NEG_INFINITY, hi, terms);
    }

    pub fn at_least(&mut self, lo: f64, terms: &[(Var, f64)]) {
        self.row(lo, f64::INFINITY, terms);
    }

    pub fn equal(&mut self, rhs: f64, terms: &[(Var, f64)]) {
        self.row(rhs, rhs, terms);
    }

    /// Maximises the objective; returns the column values and the optimal
    /// objective value.
    pub fn maximise_with_value(self) -> Result<(Vec<f64>, f64)> {
        let mut model = self.problem.optimise(Sense::Maximise);
        model.make_quiet();
        model.set_threads(NonZeroU32::new(1).expect("nonzero"));
        model.set_option("mip_rel_gap", 0.0);
        model.set_option("mip_abs_gap", 1e-9);
        model.set_option("primal_feasibility_tolerance", 1e-9);
        model.set_option("mip_feasibility_tolerance", 1e-9);
        model.set_option("random_seed", 0);
        let solved = model.solve();
        match solved.status() {
            HighsModelStatus::Optimal => {
                Ok((solved.get_solution().columns().to_vec(), solved.objective_value()))
            }
            HighsModelStatus::Infeasible => Err(Error::Infeasible {
                player: None,
                hour: None,
            }),
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                Err(Error::Solver("MILP reported unbounded".into()))
            }
            other => Err(Error::Solver(format!("MILP ended with status {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knapsack() {
        let mut m = Milp::new();
        let a = m.binary(10.0);
        let b = m.binary(7.0);
        let c = m.binary(6.0);
        m.at_most(5.0, &[(a, 4.0), (b, 3.0), (c, 2.0)]);
        let (x, _) = m.maximise_with_value().unwrap();
        assert_eq!(x.iter().map(|v| v.round() as i32).collect::<Vec<_>>(), vec![0, 1, 1]);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut m = Milp::new();
        let a = m.binary(1.0);
        m.at_least(2.0, &[(a, 1.0)]);
        assert!(matches!(m.maximise_with_value(), Err(Error::Infeasible { .. })));
    }
}
