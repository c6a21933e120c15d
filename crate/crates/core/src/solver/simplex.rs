//! Dense bounded-variable simplex for the linear relaxation. The first
//! solve runs a two-phase primal method; later solves with changed bounds
//! restart from the previous optimal basis, which stays dual feasible, and
//! repair primal feasibility with the dual simplex.

use super::IntegerProgram;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const PRIMAL_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule for the
/// rest of the run.
const DEGENERATE_LIMIT: usize = 50;
/// Warm solves before the tableau is rebuilt, bounding accumulated error.
const WARM_LIMIT: usize = 200;
/// Pivot budget of a warm solve before falling back to a cold one.
const WARM_ITERATIONS: usize = 200;
/// Warm solves between rebuilds of the tableau from the original rows.
const REFACTOR_EVERY: usize = 20;
/// Row or bound violation at which a warm solution is discarded.
const RESIDUAL_TOL: f64 = 1e-7;
/// Relative widening of bounds during a cold solve.
const PERTURBATION: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpFailure {
    IterationLimit,
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n: usize,
    a: Vec<f64>,
    /// Rows as built, before any pivot, and their right-hand sides.
    a0: Vec<f64>,
    b0: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    xb: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.n..(r + 1) * self.n]
    }

    fn fixed(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] <= 0.0
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::AtUpper => self.upper[j],
            _ => self.lower[j],
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let base = r * self.n;
                for j in 0..self.n {
                    self.d[j] -= cb * self.a[base + j];
                }
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.fixed(j) {
                continue;
            }
            let gain = match self.state[j] {
                State::Basic => continue,
                State::AtLower if self.d[j] < -COST_TOL => -self.d[j],
                State::AtUpper if self.d[j] > COST_TOL => self.d[j],
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((j, gain));
            }
        }
        best.map(|(j, _)| j)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let p = self.a[r * n + j];
        for v in &mut self.a[r * n..(r + 1) * n] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * n + j];
            if f != 0.0 {
                for (v, &pr) in self.a[i * n..(i + 1) * n].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.a[i * n + j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (v, &pr) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.d[j] = 0.0;
        }
    }

    /// Moves nonbasic `j` by `delta`, updating the basic values.
    fn shift_nonbasic(&mut self, j: usize, delta: f64) {
        if delta != 0.0 {
            for r in 0..self.m {
                self.xb[r] -= delta * self.a[r * self.n + j];
            }
        }
    }

    /// Primal simplex from a primal feasible basis.
    fn run(&mut self, cost: &[f64]) -> Result<(), LpFailure> {
        self.price(cost);
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpFailure::IterationLimit);
            }
            self.iterations += 1;
            bland |= degenerate >= DEGENERATE_LIMIT;
            let Some(j) = self.entering(bland) else {
                return Ok(());
            };
            let dir = if self.state[j] == State::AtLower { 1.0 } else { -1.0 };
            let range = self.upper[j] - self.lower[j];
            // (row, step limit, signed entry) for each basic that blocks
            let blocking: Vec<(usize, f64, f64)> = (0..self.m)
                .filter_map(|r| {
                    let b = self.basis[r];
                    let alpha = dir * self.a[r * self.n + j];
                    if alpha > PIVOT_TOL {
                        Some((r, (self.xb[r] - self.lower[b]).max(0.0) / alpha, alpha))
                    } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                        Some((r, (self.upper[b] - self.xb[r]).max(0.0) / -alpha, alpha))
                    } else {
                        None
                    }
                })
                .collect();
            let (theta, leave) = if bland {
                let mut theta = range;
                let mut leave: Option<(usize, f64)> = None;
                for &(r, lim, alpha) in &blocking {
                    let better = lim < theta - 1e-12
                        || (lim <= theta + 1e-12 && leave.is_some_and(|(lr, _)| self.basis[r] < self.basis[lr]));
                    if better {
                        theta = lim.min(theta);
                        leave = Some((r, alpha));
                    }
                }
                (theta, leave)
            } else {
                // Harris two-pass test, as in the dual
                let bound = blocking
                    .iter()
                    .map(|&(_, lim, alpha)| lim + PRIMAL_TOL / alpha.abs())
                    .fold(f64::INFINITY, f64::min);
                if range <= bound {
                    (range, None)
                } else {
                    let &(r, lim, alpha) = blocking
                        .iter()
                        .filter(|&&(_, lim, _)| lim <= bound)
                        .max_by(|a, b| a.2.abs().total_cmp(&b.2.abs()))
                        .expect("finite bound has a blocking row");
                    (lim, Some((r, alpha)))
                }
            };
            if !theta.is_finite() {
                return Err(LpFailure::Unbounded);
            }
            degenerate = if theta < 1e-9 { degenerate + 1 } else { 0 };
            let entering_value = self.nonbasic_value(j) + dir * theta;
            self.shift_nonbasic(j, dir * theta);
            match leave {
                None => {
                    self.state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                }
                Some((r, alpha)) => {
                    let out = self.basis[r];
                    self.state[out] = if alpha > 0.0 { State::AtLower } else { State::AtUpper };
                    self.xb[r] = entering_value;
                    self.basis[r] = j;
                    self.state[j] = State::Basic;
                    self.pivot(r, j);
                }
            }
        }
    }

    /// Dual simplex from a dual feasible basis. Returns `false` when a row
    /// proves the bounds infeasible.
    fn dual(&mut self) -> Result<bool, LpFailure> {
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpFailure::IterationLimit);
            }
            self.iterations += 1;
            let mut leave: Option<(usize, bool, f64)> = None;
            for r in 0..self.m {
                let b = self.basis[r];
                let (below, violation) = if self.xb[r] < self.lower[b] - PRIMAL_TOL {
                    (true, self.lower[b] - self.xb[r])
                } else if self.xb[r] > self.upper[b] + PRIMAL_TOL {
                    (false, self.xb[r] - self.upper[b])
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, _, v)| violation > v) {
                    leave = Some((r, below, violation));
                }
            }
            let Some((r, below, _)) = leave else {
                return Ok(true);
            };
            // Raising nonbasic j by delta changes xb[r] by -a[r][j] * delta.
            // Harris two-pass test: find the largest step that keeps every
            // reduced cost within tolerance, then pivot on the largest entry
            // that fits under it.
            let candidates: Vec<(usize, f64)> = (0..self.n)
                .filter(|&j| self.state[j] != State::Basic && !self.fixed(j))
                .map(|j| (j, self.a[r * self.n + j]))
                .filter(|&(j, alpha)| match (self.state[j], below) {
                    (State::AtLower, true) | (State::AtUpper, false) => alpha < -PIVOT_TOL,
                    _ => alpha > PIVOT_TOL,
                })
                .collect();
            let bound = candidates
                .iter()
                .map(|&(j, alpha)| (self.d[j].abs() + COST_TOL) / alpha.abs())
                .fold(f64::INFINITY, f64::min);
            let enter = candidates
                .iter()
                .filter(|&&(j, alpha)| self.d[j].abs() / alpha.abs() <= bound)
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .copied();
            let Some((j, alpha)) = enter else {
                return Ok(false);
            };
            let b = self.basis[r];
            let target = if below { self.lower[b] } else { self.upper[b] };
            let delta = (self.xb[r] - target) / alpha;
            let entering_value = self.nonbasic_value(j) + delta;
            self.shift_nonbasic(j, delta);
            self.state[b] = if below { State::AtLower } else { State::AtUpper };
            self.xb[r] = entering_value;
            self.basis[r] = j;
            self.state[j] = State::Basic;
            self.pivot(r, j);
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Basic => {
                let r = self.basis.iter().position(|&b| b == j).expect("basic column in basis");
                self.xb[r]
            }
            _ => self.nonbasic_value(j),
        }
    }

    /// Replaces the bounds of the structural columns, keeping each nonbasic
    /// column on the same side.
    fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        for j in 0..lower.len() {
            if self.lower[j] == lower[j] && self.upper[j] == upper[j] {
                continue;
            }
            let before = self.nonbasic_value(j);
            self.lower[j] = lower[j];
            self.upper[j] = upper[j];
            if self.state[j] != State::Basic {
                let after = self.nonbasic_value(j);
                self.shift_nonbasic(j, after - before);
            }
        }
    }

    /// Rebuilds the tableau, basic values and reduced costs from the
    /// original rows for the current basis, discarding accumulated
    /// rounding error. Returns `false` if the basis is numerically singular.
    fn refactor(&mut self, cost: &[f64]) -> bool {
        let (m, n) = (self.m, self.n);
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        let columns = self.basis.clone();
        for (k, &c) in columns.iter().enumerate() {
            let Some(p) = (k..m).max_by(|&x, &y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs())) else {
                return false;
            };
            if a[p * n + c].abs() < PIVOT_TOL {
                return false;
            }
            if p != k {
                for j in 0..n {
                    a.swap(p * n + j, k * n + j);
                }
                b.swap(p, k);
            }
            let pv = a[k * n + c];
            for v in &mut a[k * n..(k + 1) * n] {
                *v /= pv;
            }
            b[k] /= pv;
            let pivot_row: Vec<f64> = a[k * n..(k + 1) * n].to_vec();
            for i in 0..m {
                let f = a[i * n + c];
                if i != k && f != 0.0 {
                    for (v, &pr) in a[i * n..(i + 1) * n].iter_mut().zip(&pivot_row) {
                        *v -= f * pr;
                    }
                    a[i * n + c] = 0.0;
                    b[i] -= f * b[k];
                }
            }
        }
        self.a = a;
        for r in 0..m {
            let mut v = b[r];
            for j in 0..n {
                if self.state[j] != State::Basic {
                    v -= self.a[r * n + j] * self.nonbasic_value(j);
                }
            }
            self.xb[r] = v;
        }
        self.price(cost);
        true
    }

    /// A column that was fixed may carry a reduced cost of either sign.
    /// Once its box reopens it must sit on the bound its cost prefers.
    /// Returns `false` if that bound is infinite.
    fn restore_dual_feasibility(&mut self) -> bool {
        for j in 0..self.n {
            if self.fixed(j) {
                continue;
            }
            let target = match self.state[j] {
                State::AtLower if self.d[j] < -COST_TOL => State::AtUpper,
                State::AtUpper if self.d[j] > COST_TOL => State::AtLower,
                _ => continue,
            };
            if !(self.lower[j].is_finite() && self.upper[j].is_finite()) {
                return false;
            }
            let before = self.nonbasic_value(j);
            self.state[j] = target;
            let after = self.nonbasic_value(j);
            self.shift_nonbasic(j, after - before);
        }
        true
    }

    fn solution(&self, ns: usize, lower: &[f64], upper: &[f64]) -> Vec<f64> {
        (0..ns).map(|j| self.value(j).clamp(lower[j], upper[j])).collect()
    }
}

/// Reusable relaxation of one program. Successive solves may differ only
/// in the variable bounds.
pub struct Relaxation<'a> {
    ip: &'a IntegerProgram,
    cost: Vec<f64>,
    warm: Option<Tableau>,
    warm_solves: usize,
}

impl<'a> Relaxation<'a> {
    pub fn new(ip: &'a IntegerProgram) -> Self {
        Relaxation {
            ip,
            cost: ip.objective_dense(),
            warm: None,
            warm_solves: 0,
        }
    }

    /// Minimises the objective over the rows with the continuous box
    /// `lower <= x <= upper` (which replaces the declared bounds).
    pub fn solve(&mut self, lower: &[f64], upper: &[f64]) -> Result<LpOutcome, LpFailure> {
        if lower.iter().zip(upper).any(|(l, u)| l > u) {
            return Ok(LpOutcome::Infeasible);
        }
        if self.warm_solves < WARM_LIMIT {
            if let Some(outcome) = self.solve_warm(lower, upper) {
                self.warm_solves += 1;
                return Ok(outcome);
            }
        }
        self.warm = None;
        self.warm_solves = 0;
        self.solve_cold(lower, upper)
    }

    /// `None` when there is no warm basis or the warm result is unusable.
    fn solve_warm(&mut self, lower: &[f64], upper: &[f64]) -> Option<LpOutcome> {
        let ns = self.ip.variables.len();
        let refresh = self.warm_solves % REFACTOR_EVERY == REFACTOR_EVERY - 1;
        let t = self.warm.as_mut()?;
        let mut phase2 = vec![0.0; t.n];
        phase2[..ns].copy_from_slice(&self.cost);
        t.set_bounds(lower, upper);
        if refresh && !t.refactor(&phase2) {
            return None;
        }
        // An infeasibility verdict is only trusted from a fresh factorisation.
        let mut fresh = refresh;
        loop {
            if !t.restore_dual_feasibility() {
                return None;
            }
            t.iterations = 0;
            t.max_iterations = WARM_ITERATIONS + 2 * t.m;
            if t.dual().ok()? {
                break;
            }
            if fresh {
                return Some(LpOutcome::Infeasible);
            }
            if !t.refactor(&phase2) {
                return None;
            }
            fresh = true;
        }
        t.run(&phase2).ok()?;
        let x = t.solution(ns, lower, upper);
        let drift = self.ip.constraints.iter().any(|row| {
            row.activity(&x) > row.rhs + RESIDUAL_TOL * row.rhs.abs().max(1.0)
        }) || (0..ns).any(|j| (t.value(j) - x[j]).abs() > RESIDUAL_TOL);
        if drift {
            return None;
        }
        let objective = self.cost.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>();
        Some(LpOutcome::Optimal { x, objective })
    }

    fn solve_cold(&mut self, lower: &[f64], upper: &[f64]) -> Result<LpOutcome, LpFailure> {
        let ip = self.ip;
        let ns = ip.variables.len();
        let m = ip.constraints.len();
        // Bounds are widened by small distinct amounts so that ties in the
        // ratio test are rare; the exact bounds are restored at the end.
        let jitter = |j: usize, scale: f64| PERTURBATION * (1.0 + (j as f64 * 0.618_033_988_7).fract()) * scale.abs().max(1.0);
        let mut plo = lower.to_vec();
        let mut pup = upper.to_vec();
        for j in 0..ns {
            if upper[j] > lower[j] {
                plo[j] -= jitter(j, lower[j]);
                pup[j] += jitter(j + 1, upper[j]);
            }
        }
        let slack_lo: Vec<f64> = ip
            .constraints
            .iter()
            .enumerate()
            .map(|(r, row)| -jitter(ns + r, row.rhs))
            .collect();
        let residual: Vec<f64> = ip
            .constraints
            .iter()
            .map(|row| row.rhs - row.activity(&plo))
            .collect();
        let arts: Vec<usize> = (0..m).filter(|&r| residual[r] < slack_lo[r]).collect();
        let n = ns + m + arts.len();
        let mut a = vec![0.0; m * n];
        let mut basis = vec![0; m];
        let mut xb = vec![0.0; m];
        let mut b0 = vec![0.0; m];
        let mut state = vec![State::AtLower; n];
        let mut lo = vec![0.0; n];
        let mut up = vec![f64::INFINITY; n];
        lo[..ns].copy_from_slice(&plo);
        up[..ns].copy_from_slice(&pup);
        lo[ns..ns + m].copy_from_slice(&slack_lo);
        for (r, row) in ip.constraints.iter().enumerate() {
            let flipped = residual[r] < slack_lo[r];
            let sign = if flipped { -1.0 } else { 1.0 };
            for &(j, v) in &row.coefficients {
                a[r * n + j] = sign * v;
            }
            a[r * n + ns + r] = sign;
            b0[r] = sign * row.rhs;
            xb[r] = if flipped { slack_lo[r] - residual[r] } else { residual[r] };
            basis[r] = ns + r;
        }
        for (q, &r) in arts.iter().enumerate() {
            let col = ns + m + q;
            a[r * n + col] = 1.0;
            basis[r] = col;
        }
        for &b in &basis {
            state[b] = State::Basic;
        }
        let mut t = Tableau {
            m,
            n,
            a0: a.clone(),
            b0,
            a,
            basis,
            state,
            lower: lo,
            upper: up,
            xb,
            d: vec![0.0; n],
            iterations: 0,
            max_iterations: 1000 + 50 * (m + n),
        };

        if !arts.is_empty() {
            let mut phase1 = vec![0.0; n];
            for cost in &mut phase1[ns + m..] {
                *cost = 1.0;
            }
            t.run(&phase1)?;
            let infeasibility: f64 = (ns + m..n).map(|j| t.value(j)).sum();
            if infeasibility > PHASE1_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            for j in ns + m..n {
                t.upper[j] = 0.0;
            }
            for r in 0..m {
                if t.basis[r] >= ns + m {
                    t.xb[r] = 0.0;
                }
            }
        }
        let mut phase2 = vec![0.0; n];
        phase2[..ns].copy_from_slice(&self.cost);
        t.run(&phase2)?;

        let mut exact_lo = t.lower.clone();
        let mut exact_up = t.upper.clone();
        exact_lo[..ns].copy_from_slice(lower);
        exact_up[..ns].copy_from_slice(upper);
        exact_lo[ns..ns + m].fill(0.0);
        t.set_bounds(&exact_lo, &exact_up);
        if !t.dual()? {
            return Ok(LpOutcome::Infeasible);
        }
        t.run(&phase2)?;

        let x = t.solution(ns, lower, upper);
        let objective = self.cost.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>();
        self.warm = Some(t);
        Ok(LpOutcome::Optimal { x, objective })
    }
}

/// One-off cold solve of the relaxation with the box `lower <= x <= upper`.
pub fn solve_relaxation(
    ip: &IntegerProgram,
    lower: &[f64],
    upper: &[f64],
) -> Result<LpOutcome, LpFailure> {
    Relaxation::new(ip).solve(lower, upper)
}
