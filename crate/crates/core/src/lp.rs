//! Linear programs over nonnegative and free variables, solved with
//! `microlp`. Infeasible programs come back with a Farkas certificate found
//! by solving the alternative system.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    /// No feasible point. `certificate` holds one multiplier per constraint
    /// row (see [`LinearProgram::check_farkas`]); it is empty when the
    /// alternative system could not be solved either.
    #[error("linear program is infeasible")]
    Infeasible { certificate: Vec<f64> },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("constraint has {got} coefficients, program has {expected} variables")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rel: Relation,
    rhs: f64,
}

/// A linear program over variables that are either nonnegative or free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n_vars: usize,
    free: Vec<bool>,
    objective: Vec<f64>,
    sense: Sense,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// All variables start nonnegative with a zero objective.
    pub fn new(n_vars: usize, sense: Sense) -> Self {
        Self {
            n_vars,
            free: vec![false; n_vars],
            objective: vec![0.0; n_vars],
            sense,
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn set_objective_coeff(&mut self, var: usize, c: f64) {
        self.objective[var] = c;
    }

    pub fn add_dense(&mut self, coeffs: &[f64], rel: Relation, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.n_vars {
            return Err(LpError::Dimension {
                expected: self.n_vars,
                got: coeffs.len(),
            });
        }
        let sparse = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, c)| (j, *c))
            .collect();
        self.rows.push(Row {
            coeffs: sparse,
            rel,
            rhs,
        });
        Ok(())
    }

    pub fn add_sparse(&mut self, coeffs: &[(usize, f64)], rel: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.n_vars));
        self.rows.push(Row {
            coeffs: coeffs.to_vec(),
            rel,
            rhs,
        });
    }

    /// Verifies a Farkas certificate `y` returned with [`LpError::Infeasible`]:
    /// `y·b > 0`, `y·A_j ≤ 0` on nonnegative columns, `y·A_j = 0` on free
    /// columns, `y_i ≤ 0` on `≤` rows and `y_i ≥ 0` on `≥` rows. Returns the
    /// margin `y·b` when every condition holds within `tol`.
    pub fn check_farkas(&self, y: &[f64], tol: f64) -> Option<f64> {
        if y.len() != self.rows.len() {
            return None;
        }
        let mut col = vec![0.0; self.n_vars];
        let mut yb = 0.0;
        for (row, &yi) in self.rows.iter().zip(y) {
            match row.rel {
                Relation::Le if yi > tol => return None,
                Relation::Ge if yi < -tol => return None,
                _ => {}
            }
            yb += yi * row.rhs;
            for &(j, a) in &row.coeffs {
                col[j] += yi * a;
            }
        }
        for (j, v) in col.iter().enumerate() {
            if *v > tol || (self.free[j] && *v < -tol) {
                return None;
            }
        }
        (yb > tol).then_some(yb)
    }

    pub fn solve(&self) -> Result<Solution, LpError> {
        let dir = match self.sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        let mut p = Problem::new(dir);
        let vars: Vec<_> = (0..self.n_vars)
            .map(|j| {
                let lo = if self.free[j] { f64::NEG_INFINITY } else { 0.0 };
                p.add_var(self.objective[j], (lo, f64::INFINITY))
            })
            .collect();
        for row in &self.rows {
            let terms: Vec<_> = row.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect();
            p.add_constraint(terms.as_slice(), op(row.rel), row.rhs);
        }
        match p.solve() {
            Ok(outcome) => {
                let sol = outcome
                    .solution()
                    .ok_or_else(|| LpError::Solver("solve interrupted".into()))?;
                let x: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
                let objective = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
                Ok(Solution { x, objective })
            }
            Err(microlp::Error::Infeasible) => Err(LpError::Infeasible {
                certificate: self.farkas().unwrap_or_default(),
            }),
            Err(microlp::Error::Unbounded) => Err(LpError::Unbounded),
            Err(e) => Err(LpError::Solver(e.to_string())),
        }
    }

    /// Solves the alternative system: `y` with the row signs of
    /// [`check_farkas`](Self::check_farkas), `yᵀA ≤ 0` (`= 0` on free
    /// columns) and `y·b = 1`.
    fn farkas(&self) -> Option<Vec<f64>> {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let ys: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                let bounds = match r.rel {
                    Relation::Le => (f64::NEG_INFINITY, 0.0),
                    Relation::Ge => (0.0, f64::INFINITY),
                    Relation::Eq => (f64::NEG_INFINITY, f64::INFINITY),
                };
                p.add_var(0.0, bounds)
            })
            .collect();
        let mut cols: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); self.n_vars];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                cols[j].push((ys[i], a));
            }
        }
        for (j, col) in cols.iter().enumerate() {
            let rel = if self.free[j] { ComparisonOp::Eq } else { ComparisonOp::Le };
            p.add_constraint(col.as_slice(), rel, 0.0);
        }
        let b: Vec<_> = self.rows.iter().zip(&ys).map(|(r, &y)| (y, r.rhs)).collect();
        p.add_constraint(b.as_slice(), ComparisonOp::Eq, 1.0);
        let outcome = p.solve().ok()?;
        let sol = outcome.solution()?;
        Some(ys.iter().map(|&y| sol.var_value_raw(y)).collect())
    }
}

fn op(rel: Relation) -> ComparisonOp {
    match rel {
        Relation::Le => ComparisonOp::Le,
        Relation::Eq => ComparisonOp::Eq,
        Relation::Ge => ComparisonOp::Ge,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2, Sense::Maximize);
        lp.set_objective_coeff(0, 3.0);
        lp.set_objective_coeff(1, 5.0);
        lp.add_dense(&[1.0, 0.0], Relation::Le, 4.0).unwrap();
        lp.add_dense(&[0.0, 2.0], Relation::Le, 12.0).unwrap();
        lp.add_dense(&[3.0, 2.0], Relation::Le, 18.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x s.t. x - y = -3, y <= 1, x free -> x = -3 at y = 0
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.set_free(0);
        lp.set_objective_coeff(0, 1.0);
        lp.add_dense(&[1.0, -1.0], Relation::Eq, -3.0).unwrap();
        lp.add_dense(&[0.0, 1.0], Relation::Le, 1.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective + 3.0).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn ge_rows_need_phase_one() {
        // min x + y s.t. x + 2y >= 4, 3x + y >= 6 -> (1.6, 1.2), 2.8
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.set_objective_coeff(0, 1.0);
        lp.set_objective_coeff(1, 1.0);
        lp.add_dense(&[1.0, 2.0], Relation::Ge, 4.0).unwrap();
        lp.add_dense(&[3.0, 1.0], Relation::Ge, 6.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.8).abs() < 1e-9);
    }

    #[test]
    fn infeasible_program_carries_a_valid_certificate() {
        let mut lp = LinearProgram::new(2, Sense::Minimize);
        lp.add_dense(&[1.0, 1.0], Relation::Le, 1.0).unwrap();
        lp.add_dense(&[1.0, 1.0], Relation::Ge, 2.0).unwrap();
        lp.add_dense(&[1.0, -1.0], Relation::Eq, 0.5).unwrap();
        match lp.solve() {
            Err(LpError::Infeasible { certificate, .. }) => {
                assert!(lp.check_farkas(&certificate, 1e-9).is_some(), "{certificate:?}");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new(1, Sense::Maximize);
        lp.set_objective_coeff(0, 1.0);
        lp.add_dense(&[-1.0], Relation::Le, 0.0).unwrap();
        assert_eq!(lp.solve().unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new(2, Sense::Maximize);
        lp.set_objective_coeff(0, 1.0);
        lp.add_dense(&[1.0, 1.0], Relation::Eq, 1.0).unwrap();
        lp.add_dense(&[2.0, 2.0], Relation::Eq, 2.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling LP.
        let mut lp = LinearProgram::new(4, Sense::Minimize);
        for (j, c) in [-0.75, 150.0, -0.02, 6.0].iter().enumerate() {
            lp.set_objective_coeff(j, *c);
        }
        lp.add_dense(&[0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0).unwrap();
        lp.add_dense(&[0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0).unwrap();
        lp.add_dense(&[0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9, "{s:?}");
    }
}
