//! Depth-first branch-and-bound over the simplex relaxation.

use super::simplex::{LpOutcome, Relaxation};
use super::{improves, row_feasible, IntegerProgram, Solution, SolveStatus, SolverError};

pub const DEFAULT_NODE_BUDGET: u64 = 200_000;

/// Relaxation values within this distance of an integer count as integral.
const INTEGRALITY_TOL: f64 = 1e-6;

struct Node {
    lower: Vec<i64>,
    upper: Vec<i64>,
}

struct Search<'a> {
    ip: &'a IntegerProgram,
    cost: Vec<f64>,
    integral_objective: bool,
    incumbent: Option<(Vec<i64>, f64)>,
}

impl Search<'_> {
    fn prunable(&self, bound: f64) -> bool {
        let bound = if self.integral_objective {
            (bound - INTEGRALITY_TOL).ceil()
        } else {
            bound
        };
        matches!(&self.incumbent, Some((_, best)) if !improves(bound, *best))
    }

    fn offer(&mut self, x: Vec<i64>) {
        if !row_feasible(self.ip, &x) {
            return;
        }
        let obj = self.ip.objective_value(&x);
        if self.incumbent.as_ref().is_none_or(|(_, best)| improves(obj, *best)) {
            self.incumbent = Some((x, obj));
        }
    }

    /// Bound from objective signs alone, used when the relaxation fails.
    fn sign_bound(&self, node: &Node) -> f64 {
        self.cost
            .iter()
            .enumerate()
            .map(|(j, &c)| (c * node.lower[j] as f64).min(c * node.upper[j] as f64))
            .sum()
    }
}

/// Splits `node` on variable `j` into `[lower, at]` and `[at + 1, upper]`.
fn split(node: &Node, j: usize, at: i64) -> (Node, Node) {
    let mut down = Node {
        lower: node.lower.clone(),
        upper: node.upper.clone(),
    };
    down.upper[j] = at;
    let mut up = Node {
        lower: node.lower.clone(),
        upper: node.upper.clone(),
    };
    up.lower[j] = at + 1;
    (down, up)
}

fn first_free(node: &Node) -> Option<usize> {
    (0..node.lower.len()).find(|&j| node.lower[j] < node.upper[j])
}

/// Solves `ip` exactly. Branches on the most fractional relaxation value
/// (lowest index on ties) and explores the nearer child first. When more
/// than `node_budget` nodes would be needed the search stops with status
/// `Aborted` and the best assignment found so far.
pub fn solve_bnb(ip: &IntegerProgram, node_budget: u64) -> Result<Solution, SolverError> {
    ip.validate()?;
    let mut search = Search {
        ip,
        cost: ip.objective_dense(),
        integral_objective: ip.has_integral_objective(),
        incumbent: None,
    };
    let mut stack = vec![Node {
        lower: ip.variables.iter().map(|v| v.lower).collect(),
        upper: ip.variables.iter().map(|v| v.upper).collect(),
    }];
    let mut relaxation = Relaxation::new(ip);
    let mut nodes = 0u64;
    let mut aborted = false;
    while let Some(node) = stack.pop() {
        if nodes >= node_budget {
            aborted = true;
            break;
        }
        nodes += 1;
        let lo: Vec<f64> = node.lower.iter().map(|&v| v as f64).collect();
        let up: Vec<f64> = node.upper.iter().map(|&v| v as f64).collect();
        match relaxation.solve(&lo, &up) {
            Ok(LpOutcome::Infeasible) => {}
            Ok(LpOutcome::Optimal { x, objective }) => {
                if search.prunable(objective) {
                    continue;
                }
                let mut branch: Option<(usize, f64)> = None;
                for (j, &v) in x.iter().enumerate() {
                    let frac = v - v.floor();
                    let score = frac.min(1.0 - frac);
                    if score > INTEGRALITY_TOL && branch.is_none_or(|(_, s)| score > s) {
                        branch = Some((j, score));
                    }
                }
                match branch {
                    Some((j, _)) => {
                        let v = x[j];
                        let (down, upc) = split(&node, j, v.floor() as i64);
                        if v - v.floor() > 0.5 {
                            stack.push(down);
                            stack.push(upc);
                        } else {
                            stack.push(upc);
                            stack.push(down);
                        }
                    }
                    None => {
                        let rounded: Vec<i64> = x
                            .iter()
                            .enumerate()
                            .map(|(j, v)| (v.round() as i64).clamp(node.lower[j], node.upper[j]))
                            .collect();
                        if row_feasible(ip, &rounded) {
                            search.offer(rounded);
                        } else if let Some(j) = first_free(&node) {
                            // rounding drifted off a row; split the box at the rounded point
                            let at = rounded[j].min(node.upper[j] - 1);
                            let (down, upc) = split(&node, j, at);
                            stack.push(upc);
                            stack.push(down);
                        }
                    }
                }
            }
            Err(_) => {
                if search.prunable(search.sign_bound(&node)) {
                    continue;
                }
                match first_free(&node) {
                    None => search.offer(node.lower.clone()),
                    Some(j) => {
                        let mid = node.lower[j] + (node.upper[j] - node.lower[j]) / 2;
                        let (down, upc) = split(&node, j, mid);
                        stack.push(upc);
                        stack.push(down);
                    }
                }
            }
        }
    }
    let status = match (&search.incumbent, aborted) {
        (_, true) => SolveStatus::Aborted,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    };
    let (assignment, objective_value) = match search.incumbent {
        Some((x, obj)) => (Some(x), Some(obj)),
        None => (None, None),
    };
    Ok(Solution {
        status,
        assignment,
        objective_value,
        nodes,
    })
}
