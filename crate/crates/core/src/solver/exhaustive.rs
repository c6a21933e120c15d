//! Brute-force enumeration, used to certify the branch-and-bound solver on
//! small programs.

use super::{improves, row_feasible, IntegerProgram, Solution, SolveStatus, SolverError};

pub const DEFAULT_DOMAIN_BUDGET: u128 = 5_000_000;

/// Enumerates every assignment inside the variable bounds and returns a
/// feasible one of minimum objective (the first found in odometer order).
/// Refuses programs whose domain product exceeds `domain_budget`.
pub fn solve_exhaustive(ip: &IntegerProgram, domain_budget: u128) -> Result<Solution, SolverError> {
    ip.validate()?;
    let needed = ip
        .variables
        .iter()
        .fold(1u128, |acc, v| acc.saturating_mul((v.upper - v.lower) as u128 + 1));
    if needed > domain_budget {
        return Err(SolverError::BudgetExceeded {
            needed,
            budget: domain_budget,
        });
    }
    let n = ip.variables.len();
    let mut x: Vec<i64> = ip.variables.iter().map(|v| v.lower).collect();
    let mut best: Option<(Vec<i64>, f64)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        if row_feasible(ip, &x) {
            let obj = ip.objective_value(&x);
            if best.as_ref().is_none_or(|(_, b)| improves(obj, *b)) {
                best = Some((x.clone(), obj));
            }
        }
        let mut j = 0;
        while j < n {
            if x[j] < ip.variables[j].upper {
                x[j] += 1;
                break;
            }
            x[j] = ip.variables[j].lower;
            j += 1;
        }
        if j == n {
            break;
        }
    }
    Ok(match best {
        Some((a, obj)) => Solution {
            status: SolveStatus::Optimal,
            assignment: Some(a),
            objective_value: Some(obj),
            nodes: visited,
        },
        None => Solution {
            status: SolveStatus::Infeasible,
            assignment: None,
            objective_value: None,
            nodes: visited,
        },
    })
}
