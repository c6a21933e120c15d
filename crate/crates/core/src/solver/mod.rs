//! Bounded-integer linear programs (minimise, `<=` rows) with an exact
//! branch-and-bound solver, an exhaustive oracle and a feasibility checker.

mod bnb;
mod exhaustive;
mod lp_format;
pub mod simplex;

pub use bnb::{solve_bnb, DEFAULT_NODE_BUDGET};
pub use exhaustive::{solve_exhaustive, DEFAULT_DOMAIN_BUDGET};
pub use lp_format::to_lp_format;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on constraint satisfaction.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Relative tolerance on objective comparisons.
pub const OBJECTIVE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("enumeration needs {needed} assignments, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("assignment has {got} values for {expected} variables")]
    AssignmentSize { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrality {
    Binary,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
    pub integrality: Integrality,
}

/// `sum(coef * x) <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coefficients: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegerProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sparse minimisation objective.
    pub objective: Vec<(usize, f64)>,
}

impl IntegerProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: i64,
        upper: i64,
        integrality: Integrality,
    ) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integrality,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_variable(name, 0, 1, Integrality::Binary)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: i64, upper: i64) -> usize {
        self.add_variable(name, lower, upper, Integrality::Integer)
    }

    /// Adds `sum(coef * x) <= rhs`, merging repeated variables.
    pub fn add_le(&mut self, name: impl Into<String>, coefficients: &[(usize, f64)], rhs: f64) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefficients.len());
        let mut sorted = coefficients.to_vec();
        sorted.sort_by_key(|&(j, _)| j);
        for (j, a) in sorted {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            coefficients: merged,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Adds `sum(coef * x) >= rhs` as a negated `<=` row.
    pub fn add_ge(&mut self, name: impl Into<String>, coefficients: &[(usize, f64)], rhs: f64) -> usize {
        let neg: Vec<(usize, f64)> = coefficients.iter().map(|&(j, a)| (j, -a)).collect();
        self.add_le(name, &neg, -rhs)
    }

    pub fn set_objective(&mut self, var: usize, coefficient: f64) {
        match self.objective.iter_mut().find(|(j, _)| *j == var) {
            Some(entry) => entry.1 = coefficient,
            None => self.objective.push((var, coefficient)),
        }
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(j, a) in &self.objective {
            c[j] += a;
        }
        c
    }

    pub fn objective_value(&self, assignment: &[i64]) -> f64 {
        self.objective.iter().map(|&(j, a)| a * assignment[j] as f64).sum()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower > v.upper {
                return Err(SolverError::InvalidProgram(format!(
                    "variable {} has lower {} > upper {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.integrality == Integrality::Binary && (v.lower < 0 || v.upper > 1) {
                return Err(SolverError::InvalidProgram(format!(
                    "binary variable {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let check_terms = |what: &str, terms: &[(usize, f64)]| {
            for &(j, a) in terms {
                if j >= n {
                    return Err(SolverError::InvalidProgram(format!(
                        "{what} references undeclared variable {j}"
                    )));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidProgram(format!("{what} has non-finite coefficient")));
                }
            }
            Ok(())
        };
        check_terms("objective", &self.objective)?;
        for c in &self.constraints {
            check_terms(&format!("constraint {}", c.name), &c.coefficients)?;
            if !c.rhs.is_finite() {
                return Err(SolverError::InvalidProgram(format!(
                    "constraint {} has non-finite rhs",
                    c.name
                )));
            }
        }
        Ok(())
    }

    fn has_integral_objective(&self) -> bool {
        self.objective.iter().all(|&(_, a)| a == a.round())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Node budget exhausted; the assignment, if any, is the best incumbent.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub assignment: Option<Vec<i64>>,
    pub objective_value: Option<f64>,
    pub nodes: u64,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Row activity exceeds the rhs by `excess`.
    Row { index: usize, name: String, excess: f64 },
    Bound { variable: usize, name: String, value: i64 },
}

/// Re-evaluates every row and bound of `ip` at `assignment`. An empty result
/// means the assignment is feasible.
pub fn check_feasible(ip: &IntegerProgram, assignment: &[i64]) -> Result<Vec<Violation>, SolverError> {
    if assignment.len() != ip.variables.len() {
        return Err(SolverError::AssignmentSize {
            expected: ip.variables.len(),
            got: assignment.len(),
        });
    }
    let mut out = Vec::new();
    for (j, (v, &x)) in ip.variables.iter().zip(assignment).enumerate() {
        if x < v.lower || x > v.upper {
            out.push(Violation::Bound {
                variable: j,
                name: v.name.clone(),
                value: x,
            });
        }
    }
    for (r, c) in ip.constraints.iter().enumerate() {
        let lhs: f64 = c.coefficients.iter().map(|&(j, a)| a * assignment[j] as f64).sum();
        if lhs - c.rhs > FEASIBILITY_TOL {
            out.push(Violation::Row {
                index: r,
                name: c.name.clone(),
                excess: lhs - c.rhs,
            });
        }
    }
    Ok(out)
}

fn row_feasible(ip: &IntegerProgram, assignment: &[i64]) -> bool {
    ip.constraints.iter().all(|c| {
        let lhs: f64 = c.coefficients.iter().map(|&(j, a)| a * assignment[j] as f64).sum();
        lhs - c.rhs <= FEASIBILITY_TOL
    })
}

/// `a` is strictly better than `b` beyond the relative objective tolerance.
pub fn improves(a: f64, b: f64) -> bool {
    a < b - OBJECTIVE_REL_TOL * b.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_le_merges_and_drops_zeros() {
        let mut ip = IntegerProgram::new();
        let x = ip.add_binary("x");
        let y = ip.add_binary("y");
        ip.add_le("r", &[(y, 1.0), (x, 2.0), (y, -1.0), (x, 1.0)], 3.0);
        assert_eq!(ip.constraints[0].coefficients, vec![(x, 3.0)]);
        ip.add_ge("g", &[(x, 1.0)], 1.0);
        assert_eq!(ip.constraints[1].coefficients, vec![(x, -1.0)]);
        assert_eq!(ip.constraints[1].rhs, -1.0);
    }

    #[test]
    fn validation_catches_bad_programs() {
        let mut ip = IntegerProgram::new();
        ip.add_integer("x", 2, 1);
        assert!(ip.validate().is_err());
        let mut ip = IntegerProgram::new();
        ip.add_variable("b", 0, 2, Integrality::Binary);
        assert!(ip.validate().is_err());
        let mut ip = IntegerProgram::new();
        ip.add_binary("b");
        ip.constraints.push(Constraint {
            name: "r".into(),
            coefficients: vec![(3, 1.0)],
            rhs: 0.0,
        });
        assert!(ip.validate().is_err());
    }

    #[test]
    fn check_feasible_reports_rows_and_bounds() {
        let mut ip = IntegerProgram::new();
        let x = ip.add_integer("x", 0, 3);
        ip.add_le("cap", &[(x, 1.0)], 2.0);
        assert!(check_feasible(&ip, &[2]).unwrap().is_empty());
        let v = check_feasible(&ip, &[3]).unwrap();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::Row { index, excess, .. } => {
                assert_eq!(*index, 0);
                assert!((excess - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let v = check_feasible(&ip, &[-1]).unwrap();
        assert!(matches!(v[0], Violation::Bound { variable: 0, value: -1, .. }));
        assert!(matches!(
            check_feasible(&ip, &[]),
            Err(SolverError::AssignmentSize { expected: 1, got: 0 })
        ));
    }
}
