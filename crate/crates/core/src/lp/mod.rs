//! The symmetric TSP linear relaxation: degree-2 rows, subtour cuts, reduced costs.

pub mod simplex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{complete_edges, validate_permutation, Edge, Tour};
use crate::tsplib::Instance;
use simplex::{LpStatus, RowSense, Simplex};

/// Support threshold for separation.
pub const SUPPORT_EPS: f64 = 1e-6;
/// Distance from {0, 1} accepted as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Reduced-cost maxima at or below this normalize to the zero vector.
pub const NORMALIZE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowKind {
    Degree(usize),
    Subtour(Vec<usize>),
    Blossom(BlossomCut),
    TourElimination(Vec<Edge>),
}

/// Subtour elimination constraint over the vertex subset `vertices`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtourCut {
    pub vertices: Vec<usize>,
}

/// Blossom (2-matching) inequality `x(E(H)) + sum_i x(t_i) <= |H| + (|T| - 1) / 2`
/// for a handle `H` and an odd number of disjoint teeth, each an edge with one end in `H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlossomCut {
    pub handle: Vec<usize>,
    pub teeth: Vec<Edge>,
}

/// LP over a set of undirected edge variables, each bounded to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct LpModel {
    n: usize,
    edges: Vec<Edge>,
    weights: Vec<f64>,
    /// `slot[u * n + v]` = variable of edge (u, v), or `usize::MAX` if absent
    slot: Vec<usize>,
    rows: Vec<RowKind>,
    simplex: Simplex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

/// Root relaxation over the complete graph: one `[0, 1]` variable per edge, one degree row per vertex.
pub fn build_relaxation(inst: &Instance) -> LpModel {
    LpModel::new(inst, complete_edges(inst.n()))
}

impl LpModel {
    /// Relaxation restricted to `edges`; absent edges are fixed at zero by omission.
    pub fn new(inst: &Instance, mut edges: Vec<Edge>) -> Self {
        let n = inst.n();
        edges.sort_unstable();
        edges.dedup();
        let weights: Vec<f64> = edges.iter().map(|e| inst.w(e.u, e.v) as f64).collect();
        let mut slot = vec![usize::MAX; n * n];
        for (j, e) in edges.iter().enumerate() {
            slot[e.u * n + e.v] = j;
            slot[e.v * n + e.u] = j;
        }
        let k = edges.len();
        let mut simplex = Simplex::new(weights.clone(), vec![0.0; k], vec![1.0; k]);
        let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (j, e) in edges.iter().enumerate() {
            incident[e.u].push((j, 1.0));
            incident[e.v].push((j, 1.0));
        }
        let mut rows = Vec::with_capacity(n);
        for (v, inc) in incident.iter().enumerate() {
            simplex.add_row(inc, RowSense::Eq, 2.0);
            rows.push(RowKind::Degree(v));
        }
        LpModel { n, edges, weights, slot, rows, simplex }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_vars(&self) -> usize {
        self.edges.len()
    }

    pub fn num_degree_rows(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r, RowKind::Degree(_))).count()
    }

    pub fn rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn var_of(&self, e: Edge) -> Option<usize> {
        let j = self.slot[e.u * self.n + e.v];
        (j != usize::MAX).then_some(j)
    }

    pub fn simplex(&self) -> &Simplex {
        &self.simplex
    }

    pub fn simplex_mut(&mut self) -> &mut Simplex {
        &mut self.simplex
    }

    /// Adds `x(E(W)) <= |W| - 1`, written over whichever side of the cut has fewer internal edges.
    pub fn add_subtour_cut(&mut self, cut: &SubtourCut) -> Result<()> {
        let n = self.n;
        let w = &cut.vertices;
        if w.len() < 3 || w.len() >= n {
            return Err(Error::Validation(format!("subtour cut needs 3 <= |W| <= n-1, got {}", w.len())));
        }
        let mut inside = vec![false; n];
        for &v in w {
            inside[v] = true;
        }
        let side_in = w.len() <= n - w.len();
        let size = if side_in { w.len() } else { n - w.len() };
        let coeffs: Vec<(usize, f64)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| inside[e.u] == side_in && inside[e.v] == side_in)
            .map(|(j, _)| (j, 1.0))
            .collect();
        let mut sorted = w.clone();
        sorted.sort_unstable();
        self.simplex.add_row(&coeffs, RowSense::Le, size as f64 - 1.0);
        self.rows.push(RowKind::Subtour(sorted));
        Ok(())
    }

    pub fn add_blossom_cut(&mut self, cut: &BlossomCut) -> Result<()> {
        let n = self.n;
        let t = cut.teeth.len();
        if t < 3 || t % 2 == 0 || cut.handle.is_empty() {
            return Err(Error::Validation(format!("blossom needs an odd number (>= 3) of teeth, got {t}")));
        }
        let mut inside = vec![false; n];
        for &v in &cut.handle {
            inside[v] = true;
        }
        let mut touched = vec![false; n];
        let mut coeffs: Vec<(usize, f64)> =
            self.edges.iter().enumerate().filter(|(_, e)| inside[e.u] && inside[e.v]).map(|(j, _)| (j, 1.0)).collect();
        for e in &cut.teeth {
            if inside[e.u] == inside[e.v] || touched[e.u] || touched[e.v] {
                return Err(Error::Validation("blossom teeth must be disjoint and cross the handle".into()));
            }
            touched[e.u] = true;
            touched[e.v] = true;
            match self.var_of(*e) {
                Some(j) => coeffs.push((j, 1.0)),
                None => return Err(Error::Validation("blossom tooth outside the model".into())),
            }
        }
        let rhs = cut.handle.len() as f64 + ((t - 1) / 2) as f64;
        self.simplex.add_row(&coeffs, RowSense::Le, rhs);
        self.rows.push(RowKind::Blossom(cut.clone()));
        Ok(())
    }

    /// Adds `sum_{e in tour} x_e <= n - 1`, which excludes exactly that Hamiltonian cycle.
    pub fn add_tour_elimination(&mut self, tour: &Tour) -> Result<()> {
        let edges = tour.edge_set();
        let mut coeffs = Vec::with_capacity(edges.len());
        for e in &edges {
            match self.var_of(*e) {
                Some(j) => coeffs.push((j, 1.0)),
                None => return Err(Error::Validation("tour uses an edge outside the model".into())),
            }
        }
        self.simplex.add_row(&coeffs, RowSense::Le, self.n as f64 - 1.0);
        self.rows.push(RowKind::TourElimination(edges));
        Ok(())
    }

    /// Drops subtour and blossom rows that are slack by more than `min_slack` and whose slack is basic.
    pub fn purge_slack_cuts(&mut self, min_slack: f64) -> Result<usize> {
        let candidates: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(r, k)| {
                matches!(k, RowKind::Subtour(_) | RowKind::Blossom(_))
                    && self.simplex.slack_is_basic(*r)
                    && self.simplex.slack_value(*r) > min_slack
            })
            .map(|(r, _)| r)
            .collect();
        let removed = self.simplex.remove_rows(&candidates)?;
        let mut drop = vec![false; self.rows.len()];
        for &r in &removed {
            drop[r] = true;
        }
        let mut i = 0;
        self.rows.retain(|_| {
            let keep = !drop[i];
            i += 1;
            keep
        });
        Ok(removed.len())
    }

    pub fn set_costs(&mut self, costs: &[f64]) {
        self.simplex.set_costs(costs);
    }

    pub fn values(&self) -> &[f64] {
        self.simplex.values()
    }

    pub fn objective(&self) -> f64 {
        self.simplex.objective()
    }
}

/// Solves from the model's current basis and reports values and reduced costs.
pub fn solve_lp(model: &mut LpModel) -> Result<LpSolution> {
    let status = model.simplex.solve()?;
    model.simplex.refresh_duals();
    Ok(LpSolution {
        values: model.simplex.values().to_vec(),
        reduced_costs: model.simplex.reduced_costs(),
        objective: model.simplex.objective(),
        status,
    })
}

/// Connected components of the support graph `{e : x_e >= eps}`, each sorted.
pub fn support_components(n: usize, edges: &[Edge], values: &[f64], eps: f64) -> Vec<Vec<usize>> {
    let mut dsu = crate::graph::DisjointSet::new(n);
    for (e, &x) in edges.iter().zip(values) {
        if x >= eps {
            dsu.union(e.u, e.v);
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        let r = dsu.find(v);
        by_root[r].push(v);
    }
    let mut comps: Vec<Vec<usize>> = by_root.into_iter().filter(|c| !c.is_empty()).collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

/// Fast blossom heuristic: each component `H` of the fractional edges, with the
/// edges at 1 leaving it as teeth, gives a violated blossom when the teeth are odd.
/// An outside vertex hit by two teeth is absorbed into the handle.
pub fn separate_blossoms(n: usize, edges: &[Edge], values: &[f64], eps: f64) -> Vec<BlossomCut> {
    let fractional = |x: f64| x > eps && x < 1.0 - eps;
    let mut dsu = crate::graph::DisjointSet::new(n);
    let mut has_fractional = vec![false; n];
    for (e, &x) in edges.iter().zip(values) {
        if fractional(x) {
            dsu.union(e.u, e.v);
            has_fractional[e.u] = true;
            has_fractional[e.v] = true;
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in (0..n).filter(|&v| has_fractional[v]) {
        let r = dsu.find(v);
        by_root[r].push(v);
    }
    let mut cuts = Vec::new();
    for mut handle in by_root.into_iter().filter(|c| c.len() >= 3) {
        let mut inside = vec![false; n];
        for &v in &handle {
            inside[v] = true;
        }
        let mut teeth: Vec<Edge> = edges
            .iter()
            .zip(values)
            .filter(|(e, &x)| x >= 1.0 - eps && inside[e.u] != inside[e.v])
            .map(|(e, _)| *e)
            .collect();
        let mut hits = vec![0usize; n];
        for e in &teeth {
            hits[if inside[e.u] { e.v } else { e.u }] += 1;
        }
        for w in (0..n).filter(|&w| hits[w] >= 2) {
            inside[w] = true;
            handle.push(w);
        }
        teeth.retain(|e| inside[e.u] != inside[e.v]);
        if teeth.len() < 3 || teeth.len() % 2 == 0 || handle.len() >= n {
            continue;
        }
        let mut lhs = 0.0;
        for (e, &x) in edges.iter().zip(values) {
            if (inside[e.u] && inside[e.v]) || teeth.binary_search(e).is_ok() {
                lhs += x;
            }
        }
        let rhs = handle.len() as f64 + ((teeth.len() - 1) / 2) as f64;
        if lhs > rhs + 1e-6 {
            handle.sort_unstable();
            cuts.push(BlossomCut { handle, teeth });
        }
    }
    cuts
}

/// One cut per component of the support graph when it is disconnected.
pub fn separate_subtours(model: &LpModel, sol: &LpSolution, eps: f64) -> Vec<SubtourCut> {
    let comps = support_components(model.n(), model.edges(), &sol.values, eps);
    if comps.len() <= 1 {
        return Vec::new();
    }
    comps
        .into_iter()
        .filter(|c| c.len() >= 3 && c.len() < model.n())
        .map(|vertices| SubtourCut { vertices })
        .collect()
}

/// `r / max(r)`, or all zeros when the maximum is not positive.
pub fn normalize_reduced_costs(r: &[f64]) -> Vec<f64> {
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > NORMALIZE_FLOOR) {
        return vec![0.0; r.len()];
    }
    r.iter().map(|&v| v / max).collect()
}

fn require_optimal(sol: &LpSolution) -> Result<()> {
    match sol.status {
        LpStatus::Optimal => Ok(()),
        s => Err(Error::Solver(format!("relaxation ended with status {s:?}"))),
    }
}

#[derive(Clone, Debug)]
pub struct CuttingPlaneResult {
    /// Root solution before any cuts.
    pub root: LpSolution,
    /// Solution after the last round.
    pub solution: LpSolution,
    /// Rounds in which cuts were added.
    pub rounds_used: usize,
    /// Objective after the root solve and after each round.
    pub objectives: Vec<f64>,
    pub normalized_reduced_costs: Vec<f64>,
    /// Set when the root or a later round was an integral Hamiltonian cycle.
    pub tour: Option<Tour>,
}

/// Root relaxation followed by at most `max_rounds` rounds of component-based subtour cuts.
pub fn cutting_plane_features(inst: &Instance, max_rounds: usize) -> Result<CuttingPlaneResult> {
    let mut model = build_relaxation(inst);
    let root = solve_lp(&mut model)?;
    require_optimal(&root)?;
    let mut solution = root.clone();
    let mut objectives = vec![root.objective];
    let mut rounds_used = 0;
    let mut tour = integral_tour_check(&model, &solution, inst);
    while rounds_used < max_rounds && tour.is_none() {
        let cuts = separate_subtours(&model, &solution, SUPPORT_EPS);
        if cuts.is_empty() {
            break;
        }
        for c in &cuts {
            model.add_subtour_cut(c)?;
        }
        solution = solve_lp(&mut model)?;
        require_optimal(&solution)?;
        rounds_used += 1;
        objectives.push(solution.objective);
        tour = integral_tour_check(&model, &solution, inst);
    }
    let normalized_reduced_costs = normalize_reduced_costs(&solution.reduced_costs);
    Ok(CuttingPlaneResult { root, solution, rounds_used, objectives, normalized_reduced_costs, tour })
}

#[derive(Clone, Debug)]
pub struct PerturbedReducedCosts {
    pub mean: Vec<f64>,
    /// Normalized reduced costs of each perturbed copy, in copy order.
    pub per_copy: Vec<Vec<f64>>,
}

/// Mean normalized reduced costs over `copies` multiplicatively perturbed re-solves of the
/// relaxation strengthened by one round of component cuts. Each coefficient is scaled by a
/// factor drawn uniformly from `[1 - magnitude, 1 + magnitude]`.
pub fn perturbed_mean_reduced_costs(
    inst: &Instance,
    copies: usize,
    seed: u64,
    magnitude: f64,
) -> Result<PerturbedReducedCosts> {
    if copies == 0 {
        return Err(Error::Domain("perturbation needs at least one copy".into()));
    }
    if !(0.0..1.0).contains(&magnitude) {
        return Err(Error::Domain(format!("perturbation magnitude must lie in [0, 1), got {magnitude}")));
    }
    let mut model = build_relaxation(inst);
    let root = solve_lp(&mut model)?;
    require_optimal(&root)?;
    for c in separate_subtours(&model, &root, SUPPORT_EPS) {
        model.add_subtour_cut(&c)?;
    }
    let base = solve_lp(&mut model)?;
    require_optimal(&base)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = model.weights().to_vec();
    let mut per_copy = Vec::with_capacity(copies);
    for _ in 0..copies {
        let costs: Vec<f64> = weights
            .iter()
            .map(|&w| {
                let f = if magnitude > 0.0 { rng.gen_range(1.0 - magnitude..=1.0 + magnitude) } else { 1.0 };
                w * f
            })
            .collect();
        let mut copy = model.clone();
        copy.set_costs(&costs);
        let sol = solve_lp(&mut copy)?;
        require_optimal(&sol)?;
        per_copy.push(normalize_reduced_costs(&sol.reduced_costs));
    }
    let m = weights.len();
    let mut mean = vec![0.0; m];
    for v in &per_copy {
        for (a, b) in mean.iter_mut().zip(v) {
            *a += b;
        }
    }
    for a in &mut mean {
        *a /= copies as f64;
    }
    Ok(PerturbedReducedCosts { mean, per_copy })
}

/// Is every value integral and do the 1-edges form one Hamiltonian cycle?
pub fn integral_tour_check(model: &LpModel, sol: &LpSolution, inst: &Instance) -> Option<Tour> {
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let n = model.n();
    let mut adj = vec![Vec::with_capacity(2); n];
    for (e, &x) in model.edges().iter().zip(&sol.values) {
        if x > INTEGRALITY_TOL && x < 1.0 - INTEGRALITY_TOL {
            return None;
        }
        if x >= 1.0 - INTEGRALITY_TOL {
            if adj[e.u].len() == 2 || adj[e.v].len() == 2 {
                return None;
            }
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
    }
    tour_from_adjacency(&adj, inst)
}

/// Walks a 2-regular adjacency from vertex 0; `None` unless it is a single cycle through all vertices.
pub fn tour_from_adjacency(adj: &[Vec<usize>], inst: &Instance) -> Option<Tour> {
    let n = adj.len();
    if adj.iter().any(|a| a.len() != 2) {
        return None;
    }
    let mut order = Vec::with_capacity(n);
    let (mut prev, mut cur) = (usize::MAX, 0);
    loop {
        order.push(cur);
        let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
        prev = cur;
        cur = next;
        if cur == 0 || order.len() > n {
            break;
        }
    }
    if order.len() != n || validate_permutation(&order, n).is_err() {
        return None;
    }
    Tour::new(order, inst).ok()
}

#[cfg(test)]
mod tests;
