//! Bounded-variable revised primal simplex.
//!
//! Every row `a·x (=|<=|>=) b` gets a slack `s` with `a·x + s = b`, so the slack
//! column is a unit vector and the all-slack basis is always available. The basis
//! inverse is kept dense and updated in product form; it is rebuilt from scratch
//! every [`REFACTOR_INTERVAL`] pivots. Infeasible starting points (after bound
//! changes or appended rows) are handled by a composite phase 1 that minimizes the
//! sum of bound violations of the basic variables, so the same engine is used for
//! cold solves and warm re-solves.

use crate::error::{Error, Result};

const NONBASIC: usize = usize::MAX;
const REFACTOR_INTERVAL: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
/// Degenerate pivots tolerated before perturbing bounds (or, once perturbation is
/// used up, switching to Bland's rule).
const STALL_LIMIT: usize = 60;
const MAX_PERTURBATIONS: usize = 4;

pub const PRIMAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug)]
struct Row {
    rhs: f64,
}

#[derive(Clone, Debug)]
pub struct Simplex {
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Row>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    y: Vec<f64>,
    iteration_limit: usize,
    iterations: usize,
    cost_scale: f64,
}

impl Simplex {
    /// A model with `costs.len()` structural variables bounded by `[lb, ub]` and no rows.
    pub fn new(costs: Vec<f64>, lb: Vec<f64>, ub: Vec<f64>) -> Self {
        let n = costs.len();
        assert_eq!(lb.len(), n);
        assert_eq!(ub.len(), n);
        let x = lb.iter().map(|&l| if l.is_finite() { l } else { 0.0 }).collect();
        let cost_scale = costs.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
        Simplex {
            n_struct: n,
            cols: vec![Vec::new(); n],
            rows: Vec::new(),
            cost: costs,
            lb,
            ub,
            x,
            at_upper: vec![false; n],
            basis: Vec::new(),
            pos: vec![NONBASIC; n],
            binv: Vec::new(),
            since_refactor: 0,
            y: Vec::new(),
            iteration_limit: 200_000,
            iterations: 0,
            cost_scale,
        }
    }

    pub fn set_iteration_limit(&mut self, limit: usize) {
        self.iteration_limit = limit;
    }

    pub fn num_structural(&self) -> usize {
        self.n_struct
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn slack(&self, row: usize) -> usize {
        self.n_struct + row
    }

    /// Appends a row; its slack enters the basis, so the current basis stays valid.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let m = self.rows.len();
        let r = m;
        let coeffs: Vec<(usize, f64)> = coeffs.iter().copied().filter(|&(_, a)| a != 0.0).collect();
        for &(j, a) in &coeffs {
            assert!(j < self.n_struct, "row coefficient on non-structural column {j}");
            self.cols[j].push((r, a));
        }
        let (slb, sub) = match sense {
            RowSense::Eq => (0.0, 0.0),
            RowSense::Le => (0.0, f64::INFINITY),
            RowSense::Ge => (f64::NEG_INFINITY, 0.0),
        };
        let s = self.cost.len();
        debug_assert_eq!(s, self.n_struct + m);
        self.cost.push(0.0);
        self.lb.push(slb);
        self.ub.push(sub);
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * self.x[j]).sum();
        self.x.push(rhs - activity);
        self.at_upper.push(false);
        self.pos.push(m);

        // B' = [[B, 0], [a_B, 1]]  =>  B'^-1 = [[B^-1, 0], [-a_B B^-1, 1]]
        let mut next = vec![0.0; (m + 1) * (m + 1)];
        for p in 0..m {
            next[p * (m + 1)..p * (m + 1) + m].copy_from_slice(&self.binv[p * m..p * m + m]);
        }
        let last = m * (m + 1);
        for &(j, a) in &coeffs {
            let p = self.pos[j];
            if p != NONBASIC {
                for i in 0..m {
                    next[last + i] -= a * self.binv[p * m + i];
                }
            }
        }
        next[last + m] = 1.0;
        self.binv = next;
        self.basis.push(s);
        self.rows.push(Row { rhs });
        r
    }

    /// Removes rows whose slack is basic. Rows with a nonbasic slack are kept.
    /// Returns the old indices that were removed; surviving rows keep their relative order.
    pub fn remove_rows(&mut self, candidates: &[usize]) -> Result<Vec<usize>> {
        let m = self.rows.len();
        let mut drop = vec![false; m];
        let mut removed = Vec::new();
        for &r in candidates {
            if r < m && !drop[r] && self.pos[self.slack(r)] != NONBASIC {
                drop[r] = true;
                removed.push(r);
            }
        }
        if removed.is_empty() {
            return Ok(removed);
        }
        removed.sort_unstable();
        let mut new_index = vec![NONBASIC; m];
        let mut next = 0;
        for r in 0..m {
            if !drop[r] {
                new_index[r] = next;
                next += 1;
            }
        }
        let ns = self.n_struct;
        let remap_var = |v: usize| if v < ns { Some(v) } else { let ni = new_index[v - ns]; (ni != NONBASIC).then(|| ns + ni) };
        let basis: Vec<usize> = self.basis.iter().filter_map(|&v| remap_var(v)).collect();
        for col in &mut self.cols {
            col.retain(|&(r, _)| !drop[r]);
            for e in col.iter_mut() {
                e.0 = new_index[e.0];
            }
        }
        let mut keep_vars: Vec<usize> = (0..ns).collect();
        keep_vars.extend((0..m).filter(|&r| !drop[r]).map(|r| ns + r));
        self.cost = keep_vars.iter().map(|&v| self.cost[v]).collect();
        self.lb = keep_vars.iter().map(|&v| self.lb[v]).collect();
        self.ub = keep_vars.iter().map(|&v| self.ub[v]).collect();
        self.x = keep_vars.iter().map(|&v| self.x[v]).collect();
        self.at_upper = keep_vars.iter().map(|&v| self.at_upper[v]).collect();
        let mut r = 0;
        self.rows.retain(|_| {
            let keep = !drop[r];
            r += 1;
            keep
        });
        self.basis = basis;
        self.pos = vec![NONBASIC; self.cost.len()];
        for (p, &v) in self.basis.iter().enumerate() {
            self.pos[v] = p;
        }
        self.refactor()?;
        Ok(removed)
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.cost[j] = c;
    }

    pub fn set_costs(&mut self, costs: &[f64]) {
        assert_eq!(costs.len(), self.n_struct);
        self.cost[..self.n_struct].copy_from_slice(costs);
        self.cost_scale = costs.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    pub fn set_bounds(&mut self, j: usize, lb: f64, ub: f64) {
        self.lb[j] = lb;
        self.ub[j] = ub;
        if self.pos[j] == NONBASIC {
            if self.at_upper[j] && ub.is_finite() {
                self.x[j] = ub;
            } else {
                self.at_upper[j] = false;
                self.x[j] = if lb.is_finite() { lb } else { ub };
            }
        }
    }

    /// Value of structural variable `j`.
    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n_struct]
    }

    pub fn is_basic(&self, j: usize) -> bool {
        self.pos[j] != NONBASIC
    }

    pub fn slack_is_basic(&self, row: usize) -> bool {
        self.pos[self.slack(row)] != NONBASIC
    }

    pub fn slack_value(&self, row: usize) -> f64 {
        self.x[self.slack(row)]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n_struct).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Row duals of the last phase-2 pricing.
    pub fn duals(&self) -> &[f64] {
        &self.y
    }

    /// `c_j - y·A_j` for every structural column using the current duals.
    pub fn reduced_costs(&self) -> Vec<f64> {
        (0..self.n_struct)
            .map(|j| if self.pos[j] != NONBASIC { 0.0 } else { self.reduced_cost(j) })
            .collect()
    }

    /// Dual objective `y·b + sum_j d_j x_j` over nonbasic bounded variables.
    pub fn dual_objective(&self) -> f64 {
        let mut z: f64 = self.rows.iter().zip(&self.y).map(|(r, y)| r.rhs * y).sum();
        for j in 0..self.n_struct {
            if self.pos[j] == NONBASIC {
                let bound = if self.at_upper[j] { self.ub[j] } else { self.lb[j] };
                z += self.reduced_cost(j) * bound;
            }
        }
        z
    }

    /// Largest violation of `Ax + s = b` and of the variable bounds.
    pub fn primal_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut act = vec![0.0; self.rows.len()];
        for j in 0..self.n_struct {
            for &(r, a) in &self.cols[j] {
                act[r] += a * self.x[j];
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            worst = worst.max((act[r] + self.x[self.slack(r)] - row.rhs).abs());
        }
        for v in 0..self.cost.len() {
            worst = worst.max(self.lb[v] - self.x[v]).max(self.x[v] - self.ub[v]);
        }
        worst
    }

    #[inline]
    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n_struct {
            self.cols[j].iter().map(|&(r, a)| a * y[r]).sum()
        } else {
            y[j - self.n_struct]
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.column_dot(j, &self.y)
    }

    fn column_entries(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n_struct {
            self.cols[j].clone()
        } else {
            vec![(j - self.n_struct, 1.0)]
        }
    }

    /// Rebuilds `B^-1` by Gauss-Jordan elimination; singular columns are replaced by slacks.
    fn refactor(&mut self) -> Result<()> {
        let m = self.rows.len();
        self.since_refactor = 0;
        if m == 0 {
            self.binv.clear();
            return Ok(());
        }
        for attempt in 0..2 {
            // dense B: rows = constraints, cols = basis positions
            let mut b = vec![0.0; m * m];
            for (p, &v) in self.basis.iter().enumerate() {
                for (r, a) in self.column_entries(v) {
                    b[r * m + p] = a;
                }
            }
            let mut inv = vec![0.0; m * m];
            for i in 0..m {
                inv[i * m + i] = 1.0;
            }
            // row_of[p] = constraint row chosen as pivot for position p
            let mut row_used = vec![false; m];
            let mut row_of = vec![NONBASIC; m];
            let mut singular = Vec::new();
            for p in 0..m {
                let mut best = NONBASIC;
                let mut best_abs = 1e-11;
                for r in 0..m {
                    if !row_used[r] && b[r * m + p].abs() > best_abs {
                        best_abs = b[r * m + p].abs();
                        best = r;
                    }
                }
                if best == NONBASIC {
                    singular.push(p);
                    continue;
                }
                row_used[best] = true;
                row_of[p] = best;
                let piv = b[best * m + p];
                for c in 0..m {
                    b[best * m + c] /= piv;
                    inv[best * m + c] /= piv;
                }
                for r in 0..m {
                    if r != best {
                        let f = b[r * m + p];
                        if f != 0.0 {
                            for c in 0..m {
                                b[r * m + c] -= f * b[best * m + c];
                                inv[r * m + c] -= f * inv[best * m + c];
                            }
                        }
                    }
                }
            }
            if singular.is_empty() {
                // inv rows are indexed by pivot row; reorder to basis positions
                let mut binv = vec![0.0; m * m];
                for p in 0..m {
                    let r = row_of[p];
                    binv[p * m..p * m + m].copy_from_slice(&inv[r * m..r * m + m]);
                }
                self.binv = binv;
                return Ok(());
            }
            if attempt == 1 {
                break;
            }
            let free_rows: Vec<usize> = (0..m).filter(|&r| !row_used[r]).collect();
            for (&p, &r) in singular.iter().zip(&free_rows) {
                let out = self.basis[p];
                self.pos[out] = NONBASIC;
                self.at_upper[out] = false;
                self.x[out] = if self.lb[out].is_finite() { self.lb[out] } else { self.ub[out] };
                let s = self.slack(r);
                if self.pos[s] != NONBASIC {
                    return Err(Error::Solver("basis repair found a slack already basic".into()));
                }
                self.basis[p] = s;
                self.pos[s] = p;
            }
        }
        Err(Error::Solver("singular basis could not be repaired".into()))
    }

    fn compute_basic_values(&mut self) {
        let m = self.rows.len();
        let mut r: Vec<f64> = self.rows.iter().map(|row| row.rhs).collect();
        for j in 0..self.n_struct {
            if self.pos[j] == NONBASIC && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let s = self.slack(i);
            if self.pos[s] == NONBASIC {
                r[i] -= self.x[s];
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..p * m + m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[p]] = v;
        }
    }

    /// Moves the finite bounds of every basic variable outward by a small pseudo-random
    /// amount, so degenerate basic variables sit strictly inside their bounds.
    fn widen_basic_bounds(&mut self, round: usize) {
        // fixed-seed xorshift keeps solves reproducible
        let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ round as u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let scale = 1e-7 * 10f64.powi(round as i32 - 1);
        for p in 0..self.basis.len() {
            let v = self.basis[p];
            if self.lb[v].is_finite() {
                self.lb[v] -= scale * (1.0 + next()) * self.lb[v].abs().max(1.0);
            }
            if self.ub[v].is_finite() {
                self.ub[v] += scale * (1.0 + next()) * self.ub[v].abs().max(1.0);
            }
        }
    }

    /// Puts back bounds saved before widening and snaps nonbasic variables onto them.
    fn restore_bounds(&mut self, saved: &mut Option<(Vec<f64>, Vec<f64>)>) {
        let Some((lb, ub)) = saved.take() else { return };
        self.lb = lb;
        self.ub = ub;
        for j in 0..self.cost.len() {
            if self.pos[j] == NONBASIC {
                let (l, u) = (self.lb[j], self.ub[j]);
                self.set_bounds(j, l, u);
            }
        }
        self.compute_basic_values();
    }

    /// Sum of bound violations in phase 1, the cost otherwise.
    fn phase_objective(&self, phase1: bool) -> f64 {
        if phase1 {
            self.basis.iter().map(|&v| (self.lb[v] - self.x[v]).max(0.0) + (self.x[v] - self.ub[v]).max(0.0)).sum()
        } else {
            self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
        }
    }

    fn infeasibility(&self, v: usize) -> f64 {
        let x = self.x[v];
        if x < self.lb[v] - PRIMAL_TOL {
            -1.0
        } else if x > self.ub[v] + PRIMAL_TOL {
            1.0
        } else {
            0.0
        }
    }

    fn compute_duals(&mut self, phase1: bool) {
        let m = self.rows.len();
        let mut y = vec![0.0; m];
        for p in 0..m {
            let v = self.basis[p];
            let c = if phase1 { self.infeasibility(v) } else { self.cost[v] };
            if c != 0.0 {
                let row = &self.binv[p * m..p * m + m];
                for (yi, a) in y.iter_mut().zip(row) {
                    *yi += c * a;
                }
            }
        }
        self.y = y;
    }

    /// Solves from the current basis. Bounds, costs and rows may have changed since the last call.
    pub fn solve(&mut self) -> Result<LpStatus> {
        let m = self.rows.len();
        if self.since_refactor >= REFACTOR_INTERVAL || self.binv.len() != m * m {
            self.refactor()?;
        }
        self.compute_basic_values();
        if let Some(LpStatus::Infeasible) = self.dual(20 * m + 1000)? {
            return Ok(LpStatus::Infeasible);
        }
        self.primal()
    }

    /// Runs at most `max_iters` dual pivots and returns a lower bound on the optimum,
    /// `None` if the LP is infeasible. Falls back to a full solve when the basis is not
    /// dual feasible.
    pub fn dual_bound(&mut self, max_iters: usize) -> Result<Option<f64>> {
        let m = self.rows.len();
        if self.since_refactor >= REFACTOR_INTERVAL || self.binv.len() != m * m {
            self.refactor()?;
        }
        self.compute_basic_values();
        match self.dual(max_iters)? {
            Some(LpStatus::Infeasible) => Ok(None),
            Some(_) => Ok(Some(self.objective())),
            None if self.dual_feasible() => Ok(Some(self.objective())),
            None => match self.primal()? {
                LpStatus::Infeasible => Ok(None),
                LpStatus::Optimal => Ok(Some(self.objective())),
                LpStatus::IterationLimit => Ok(Some(f64::NEG_INFINITY)),
            },
        }
    }

    fn dual_feasible(&mut self) -> bool {
        let dtol = 1e-9 * self.cost_scale;
        self.compute_duals(false);
        (0..self.cost.len()).all(|j| {
            if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                return true;
            }
            let d = self.reduced_cost(j);
            if self.nonbasic_at_upper(j) { d <= dtol } else { d >= -dtol }
        })
    }

    /// Bounded-variable primal simplex from the current basis with a composite phase 1.
    fn primal(&mut self) -> Result<LpStatus> {
        let m = self.rows.len();
        let mut stall = 0usize;
        let mut bland = false;
        let mut last_phase1 = None;
        // objective at the last pivot that made real progress
        let mut anchor = f64::INFINITY;
        let mut saved: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut perturbations = 0;
        let start = self.iterations;
        loop {
            if self.iterations - start >= self.iteration_limit {
                self.restore_bounds(&mut saved);
                return Ok(LpStatus::IterationLimit);
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
                self.compute_basic_values();
            }
            let phase1 = self.basis.iter().any(|&v| self.infeasibility(v) != 0.0);
            if last_phase1 != Some(phase1) {
                stall = 0;
                bland = false;
                last_phase1 = Some(phase1);
                anchor = self.phase_objective(phase1);
            }
            self.compute_duals(phase1);
            let dtol = if phase1 { 1e-9 } else { 1e-9 * self.cost_scale };

            // pricing
            let mut enter = NONBASIC;
            let mut enter_d = 0.0;
            let mut best = 0.0;
            for j in 0..self.cost.len() {
                if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.column_dot(j, &self.y);
                let eligible = if self.at_upper[j] { d > dtol } else { d < -dtol };
                if eligible {
                    if bland {
                        enter = j;
                        enter_d = d;
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        enter = j;
                        enter_d = d;
                    }
                }
            }
            if enter == NONBASIC {
                if saved.is_some() {
                    // optimal for the widened bounds: restore and clean up from here
                    self.restore_bounds(&mut saved);
                    last_phase1 = None;
                    continue;
                }
                if phase1 {
                    return Ok(LpStatus::Infeasible);
                }
                return Ok(LpStatus::Optimal);
            }

            // alpha = B^-1 a_q
            let q = enter;
            let entries = self.column_entries(q);
            let mut alpha = vec![0.0; m];
            for p in 0..m {
                let row = &self.binv[p * m..p * m + m];
                alpha[p] = entries.iter().map(|&(r, a)| a * row[r]).sum();
            }
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            // ratio test
            let mut t_best = self.ub[q] - self.lb[q];
            let mut leave = NONBASIC; // NONBASIC => bound flip of q
            let mut leave_to_upper = false;
            let mut leave_alpha = 0.0f64;
            for p in 0..m {
                let a = alpha[p];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let v = self.basis[p];
                let xv = self.x[v];
                let (lbv, ubv) = (self.lb[v], self.ub[v]);
                let (limit, to_upper) = if phase1 && xv < lbv - PRIMAL_TOL {
                    if rate > 0.0 {
                        ((lbv - xv) / rate, false)
                    } else {
                        continue;
                    }
                } else if phase1 && xv > ubv + PRIMAL_TOL {
                    if rate < 0.0 {
                        ((xv - ubv) / -rate, true)
                    } else {
                        continue;
                    }
                } else if rate < 0.0 {
                    if lbv.is_finite() {
                        (((xv - lbv) / -rate).max(0.0), false)
                    } else {
                        continue;
                    }
                } else if ubv.is_finite() {
                    (((ubv - xv) / rate).max(0.0), true)
                } else {
                    continue;
                };
                let better = if limit < t_best - 1e-12 {
                    true
                } else if limit <= t_best + 1e-12 && leave != NONBASIC {
                    if bland {
                        v < self.basis[leave]
                    } else {
                        a.abs() > leave_alpha.abs()
                    }
                } else {
                    false
                };
                if better {
                    t_best = limit;
                    leave = p;
                    leave_to_upper = to_upper;
                    leave_alpha = a;
                }
            }
            if !t_best.is_finite() {
                return Err(Error::Solver("unbounded direction in a bounded model".into()));
            }

            // update values
            let t = t_best;
            if t != 0.0 {
                self.x[q] += dir * t;
                for p in 0..m {
                    if alpha[p] != 0.0 {
                        let v = self.basis[p];
                        self.x[v] -= dir * alpha[p] * t;
                    }
                }
            }
            // tiny steps from rounding noise do not count as progress
            let obj = self.phase_objective(phase1);
            if t * enter_d.abs() > 0.0 && anchor - obj > 1e-9 * anchor.abs().max(1.0) {
                stall = 0;
                bland = false;
                anchor = obj;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    if saved.is_none() && perturbations < MAX_PERTURBATIONS {
                        perturbations += 1;
                        saved = Some((self.lb.clone(), self.ub.clone()));
                        self.widen_basic_bounds(perturbations);
                        stall = 0;
                        last_phase1 = None;
                    } else {
                        bland = true;
                    }
                }
            }
            self.iterations += 1;

            if leave == NONBASIC {
                self.at_upper[q] = !self.at_upper[q];
                self.x[q] = if self.at_upper[q] { self.ub[q] } else { self.lb[q] };
                continue;
            }

            let out = self.basis[leave];
            self.x[out] = if leave_to_upper { self.ub[out] } else { self.lb[out] };
            self.at_upper[out] = leave_to_upper;
            self.pos[out] = NONBASIC;
            self.basis[leave] = q;
            self.pos[q] = leave;
            self.at_upper[q] = false;

            self.update_inverse(leave, &alpha);
        }
    }

    /// Product-form update of `B^-1` after the variable at position `r` is replaced by a
    /// column whose representation in the old basis is `alpha`.
    fn update_inverse(&mut self, r: usize, alpha: &[f64]) {
        let m = self.rows.len();
        let piv = alpha[r];
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, tail) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v /= piv;
        }
        for p in 0..m {
            let f = alpha[p];
            if p == r || f == 0.0 {
                continue;
            }
            let row = if p < r {
                &mut head[p * m..p * m + m]
            } else {
                let o = (p - r - 1) * m;
                &mut tail[o..o + m]
            };
            for (a, b) in row.iter_mut().zip(pivot_row.iter()) {
                *a -= f * b;
            }
        }
        self.since_refactor += 1;
    }

    fn nonbasic_at_upper(&self, j: usize) -> bool {
        self.ub[j].is_finite() && (self.at_upper[j] || !self.lb[j].is_finite())
    }

    /// Dual simplex from a dual-feasible basis, used after bounds change or rows are added.
    /// Returns `None` when the basis is not dual feasible or the method stalls; the primal
    /// method then finishes from wherever this left off.
    fn dual(&mut self, max_iters: usize) -> Result<Option<LpStatus>> {
        let m = self.rows.len();
        let dtol = 1e-9 * self.cost_scale;
        self.compute_duals(false);
        let mut moved = false;
        for j in 0..self.cost.len() {
            if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let up = self.nonbasic_at_upper(j);
            if (up && d > dtol) || (!up && d < -dtol) {
                if !(self.lb[j].is_finite() && self.ub[j].is_finite()) {
                    return Ok(None);
                }
                // boxed: move to the bound the reduced cost prefers
                self.at_upper[j] = !up;
                self.x[j] = if up { self.lb[j] } else { self.ub[j] };
                moved = true;
            }
        }
        if moved {
            self.compute_basic_values();
        }
        let start = self.iterations;
        let mut rechecked = false;
        loop {
            if self.iterations - start >= max_iters {
                return Ok(None);
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
                self.compute_basic_values();
            }
            let mut leave = NONBASIC;
            let mut worst = PRIMAL_TOL;
            for p in 0..m {
                let v = self.basis[p];
                let viol = (self.lb[v] - self.x[v]).max(self.x[v] - self.ub[v]);
                if viol > worst {
                    worst = viol;
                    leave = p;
                }
            }
            if leave == NONBASIC {
                return Ok(Some(LpStatus::Optimal));
            }
            let v = self.basis[leave];
            let below = self.x[v] < self.lb[v];
            self.compute_duals(false);
            let rho = self.binv[leave * m..leave * m + m].to_vec();

            // Harris two-pass ratio test over the pivot row
            let mut cands = Vec::new();
            let mut theta_max = f64::INFINITY;
            for j in 0..self.cost.len() {
                if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                    continue;
                }
                let a = self.column_dot(j, &rho);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let up = self.nonbasic_at_upper(j);
                let eligible = if below { (a < 0.0) != up } else { (a > 0.0) != up };
                if eligible {
                    let d = self.reduced_cost(j);
                    theta_max = theta_max.min((d.abs() + dtol) / a.abs());
                    cands.push((j, a, d));
                }
            }
            if cands.is_empty() {
                if self.since_refactor > 0 && !rechecked {
                    rechecked = true;
                    self.refactor()?;
                    self.compute_basic_values();
                    continue;
                }
                return Ok(Some(LpStatus::Infeasible));
            }
            let mut q = NONBASIC;
            let mut q_alpha = 0.0f64;
            for &(j, a, d) in &cands {
                if d.abs() / a.abs() <= theta_max && a.abs() > q_alpha.abs() {
                    q = j;
                    q_alpha = a;
                }
            }

            let entries = self.column_entries(q);
            let mut alpha = vec![0.0; m];
            for p in 0..m {
                let row = &self.binv[p * m..p * m + m];
                alpha[p] = entries.iter().map(|&(r, a)| a * row[r]).sum();
            }
            if (alpha[leave] - q_alpha).abs() > 1e-7 * (1.0 + q_alpha.abs()) {
                if self.since_refactor == 0 {
                    return Ok(None);
                }
                self.refactor()?;
                self.compute_basic_values();
                continue;
            }
            let target = if below { self.lb[v] } else { self.ub[v] };
            let step = (self.x[v] - target) / alpha[leave];
            self.x[q] += step;
            for p in 0..m {
                if alpha[p] != 0.0 {
                    let b = self.basis[p];
                    self.x[b] -= alpha[p] * step;
                }
            }
            self.x[v] = target;
            self.at_upper[v] = !below;
            self.pos[v] = NONBASIC;
            self.basis[leave] = q;
            self.pos[q] = leave;
            self.at_upper[q] = false;
            self.iterations += 1;
            self.update_inverse(leave, &alpha);
        }
    }

    /// Final phase-2 duals for reporting; call after an optimal solve.
    pub fn refresh_duals(&mut self) {
        self.compute_duals(false);
    }
}
