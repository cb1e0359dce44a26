//! Best-first branch-and-cut over the subtour relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use log::debug;

use super::local_search::{improve_tour, EdgeMask};
use super::mincut::stoer_wagner_phases;
use crate::error::{Error, Result};
use crate::graph::{complete_edges, double_tree_tours, Edge, Tour};
use crate::lp::simplex::LpStatus;
use crate::lp::{
    separate_blossoms, support_components, tour_from_adjacency, BlossomCut, LpModel, SubtourCut, INTEGRALITY_TOL,
    SUPPORT_EPS,
};
use crate::tsplib::{Instance, Weight};

/// Minimum cut values below `2 - MINCUT_TOL` are separated.
pub const MINCUT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BranchCutConfig {
    /// Maximum number of LP solves before giving up on a proof.
    pub lp_budget: usize,
    pub time_limit: Option<Duration>,
    pub root_rounds: usize,
    pub node_rounds: usize,
    /// Seed the incumbent with locally improved double-tree tours.
    pub heuristic: bool,
    /// Fractional edges nearest 0.5 tried by strong branching. With 1 the search simply
    /// branches on the edge closest to 0.5 (ties by index).
    pub strong_candidates: usize,
}

impl Default for BranchCutConfig {
    fn default() -> Self {
        BranchCutConfig {
            lp_budget: 1_000_000,
            time_limit: None,
            root_rounds: 200,
            node_rounds: 25,
            heuristic: true,
            strong_candidates: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BranchCutOutcome {
    /// Best tour found, or `None` if no tour within the limit exists (when `proven`).
    pub tour: Option<Tour>,
    /// The search tree was exhausted: `tour` is optimal, or no admissible tour exists.
    pub proven: bool,
    pub root_bound: Option<f64>,
    pub nodes: usize,
    pub lp_solves: usize,
    /// The root LP (restricted to the model's edges) had no feasible point.
    pub root_infeasible: bool,
}

/// A node of the search tree: edges fixed to 0 or 1 on top of the global bounds.
#[derive(Clone, Debug)]
pub struct BranchNode {
    pub fixed_zero: Vec<usize>,
    pub fixed_one: Vec<usize>,
    pub bound: f64,
    pub depth: usize,
    seq: usize,
}

impl PartialEq for BranchNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for BranchNode {}
impl PartialOrd for BranchNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for BranchNode {
    // max-heap: smallest bound first, then deeper, then older
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Dual pivots per strong-branching trial.
const STRONG_ITERS: usize = 25;

enum NodeResult {
    Pruned,
    Branch { var: usize, down: f64, up: f64, fix_zero: Vec<usize>, fix_one: Vec<usize> },
}

/// Reusable branch-and-cut state: the model keeps its cuts between searches.
pub struct BranchCut<'a> {
    inst: &'a Instance,
    model: LpModel,
    mask: EdgeMask,
    global_lb: Vec<f64>,
    global_ub: Vec<f64>,
    applied: Vec<usize>,
    config: BranchCutConfig,
    lp_solves: usize,
    nodes: usize,
    started: Instant,
    exhausted: bool,
    incumbent: Option<Tour>,
    /// Tours longer than this are not wanted.
    limit: Option<Weight>,
    last_infeasible: bool,
}

impl<'a> BranchCut<'a> {
    pub fn new(inst: &'a Instance, edges: Vec<Edge>, config: BranchCutConfig) -> Self {
        let model = LpModel::new(inst, edges);
        let k = model.num_vars();
        let mask = EdgeMask::from_edges(inst.n(), model.edges());
        BranchCut {
            inst,
            model,
            mask,
            global_lb: vec![0.0; k],
            global_ub: vec![1.0; k],
            applied: Vec::new(),
            config,
            lp_solves: 0,
            nodes: 0,
            started: Instant::now(),
            exhausted: false,
            incumbent: None,
            limit: None,
            last_infeasible: false,
        }
    }

    pub fn complete(inst: &'a Instance, config: BranchCutConfig) -> Self {
        Self::new(inst, complete_edges(inst.n()), config)
    }

    pub fn model(&self) -> &LpModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut LpModel {
        &mut self.model
    }

    pub fn lp_solves(&self) -> usize {
        self.lp_solves
    }

    /// Clears global fixings derived from reduced costs in a previous search.
    pub fn reset_fixings(&mut self) {
        let k = self.model.num_vars();
        self.global_lb = vec![0.0; k];
        self.global_ub = vec![1.0; k];
        for j in 0..k {
            self.model.simplex_mut().set_bounds(j, 0.0, 1.0);
        }
        self.applied.clear();
    }

    fn out_of_budget(&mut self) -> bool {
        if self.lp_solves >= self.config.lp_budget {
            self.exhausted = true;
        }
        if let Some(t) = self.config.time_limit {
            if self.started.elapsed() > t {
                self.exhausted = true;
            }
        }
        self.exhausted
    }

    /// Largest admissible tour length: below the incumbent, and within the cutoff.
    fn admissible(&self) -> Option<i64> {
        let from_inc = self.incumbent.as_ref().map(|t| t.length() as i64 - 1);
        let cut = self.limit.map(|l| l as i64);
        match (from_inc, cut) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn bound_prunes(&self, z: f64) -> bool {
        // integer weights: a node is useful only if ceil(z) is admissible
        self.admissible().is_some_and(|limit| (z - 1e-6).ceil() > limit as f64)
    }

    fn offer(&mut self, tour: Tour) {
        if let Some(limit) = self.limit {
            if tour.length() > limit {
                return;
            }
        }
        if self.incumbent.as_ref().map_or(true, |t| tour.length() < t.length()) {
            debug!("new incumbent {}", tour.length());
            self.incumbent = Some(tour);
        }
    }

    fn apply_node_bounds(&mut self, node: &BranchNode) -> bool {
        let applied = std::mem::take(&mut self.applied);
        for j in applied {
            let (lb, ub) = (self.global_lb[j], self.global_ub[j]);
            self.model.simplex_mut().set_bounds(j, lb, ub);
        }
        for &j in &node.fixed_zero {
            if self.global_lb[j] > 0.5 {
                return false;
            }
            self.model.simplex_mut().set_bounds(j, 0.0, 0.0);
            self.applied.push(j);
        }
        for &j in &node.fixed_one {
            if self.global_ub[j] < 0.5 {
                return false;
            }
            self.model.simplex_mut().set_bounds(j, 1.0, 1.0);
            self.applied.push(j);
        }
        true
    }

    /// Subtour cuts, or blossoms when the support has no cut below 2.
    fn separate(&self, values: &[f64]) -> (Vec<SubtourCut>, Vec<BlossomCut>) {
        let subtours = self.separate_subtours(values);
        if !subtours.is_empty() {
            return (subtours, Vec::new());
        }
        (subtours, separate_blossoms(self.inst.n(), self.model.edges(), values, SUPPORT_EPS))
    }

    fn separate_subtours(&self, values: &[f64]) -> Vec<SubtourCut> {
        let n = self.inst.n();
        let edges = self.model.edges();
        let comps = support_components(n, edges, values, SUPPORT_EPS);
        if comps.len() > 1 {
            return comps
                .into_iter()
                .filter(|c| c.len() >= 3 && c.len() < n)
                .map(|vertices| SubtourCut { vertices })
                .collect();
        }
        let mut cap = vec![0.0; n * n];
        for (e, &x) in edges.iter().zip(values) {
            if x > SUPPORT_EPS {
                cap[e.u * n + e.v] = x;
                cap[e.v * n + e.u] = x;
            }
        }
        let mut cuts: Vec<SubtourCut> = Vec::new();
        for pc in stoer_wagner_phases(n, &cap) {
            if pc.value < 2.0 - MINCUT_TOL && pc.side.len() >= 3 && n - pc.side.len() >= 3 {
                let side = if pc.side.contains(&0) {
                    let mut inside = vec![false; n];
                    for &v in &pc.side {
                        inside[v] = true;
                    }
                    (0..n).filter(|&v| !inside[v]).collect()
                } else {
                    pc.side
                };
                if !cuts.iter().any(|c| c.vertices == side) {
                    cuts.push(SubtourCut { vertices: side });
                }
            }
        }
        cuts
    }

    fn integral_tour(&self, values: &[f64]) -> Option<Tour> {
        let n = self.inst.n();
        let mut adj = vec![Vec::with_capacity(2); n];
        for (e, &x) in self.model.edges().iter().zip(values) {
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
        tour_from_adjacency(&adj, self.inst)
    }

    /// Solves the node LP with cutting rounds. `Ok(None)` means the LP is infeasible.
    fn solve_node_lp(&mut self, rounds: usize) -> Result<Option<f64>> {
        let mut round = 0;
        loop {
            if self.out_of_budget() {
                return Ok(None);
            }
            let status = self.model.simplex_mut().solve()?;
            self.lp_solves += 1;
            match status {
                LpStatus::Infeasible => {
                    self.last_infeasible = true;
                    return Ok(None);
                }
                LpStatus::IterationLimit => {
                    self.exhausted = true;
                    return Ok(None);
                }
                LpStatus::Optimal => {}
            }
            let z = self.model.objective();
            if self.bound_prunes(z) {
                return Ok(Some(z));
            }
            let values = self.model.values().to_vec();
            if let Some(t) = self.integral_tour(&values) {
                self.offer(t);
                return Ok(Some(z));
            }
            if round >= rounds {
                return Ok(Some(z));
            }
            let (subtours, blossoms) = self.separate(&values);
            if subtours.is_empty() && blossoms.is_empty() {
                return Ok(Some(z));
            }
            for c in &subtours {
                self.model.add_subtour_cut(c)?;
            }
            for c in &blossoms {
                self.model.add_blossom_cut(c)?;
            }
            round += 1;
        }
    }

    fn process(&mut self, node: &BranchNode) -> Result<NodeResult> {
        self.nodes += 1;
        self.last_infeasible = false;
        if !self.apply_node_bounds(node) {
            return Ok(NodeResult::Pruned);
        }
        let rounds = if node.depth == 0 { self.config.root_rounds } else { self.config.node_rounds };
        let Some(z) = self.solve_node_lp(rounds)? else {
            return Ok(NodeResult::Pruned);
        };
        if self.bound_prunes(z) {
            return Ok(NodeResult::Pruned);
        }
        let values = self.model.values().to_vec();
        if self.integral_tour(&values).is_some() {
            return Ok(NodeResult::Pruned);
        }
        if self.model.num_vars() > 0 && self.model.rows().len() > 4 * self.inst.n() {
            self.model.purge_slack_cuts(1e-3)?;
        }

        // reduced-cost fixing against the admissible limit
        let mut fix_zero = Vec::new();
        let mut fix_one = Vec::new();
        if let Some(limit) = self.admissible() {
            let gap = limit as f64 - z + 1e-6;
            self.model.simplex_mut().refresh_duals();
            let d = self.model.simplex().reduced_costs();
            for j in 0..d.len() {
                let (lb, ub) = self.model.simplex().bounds(j);
                if lb == ub || self.model.simplex().is_basic(j) {
                    continue;
                }
                if values[j] < 0.5 && d[j] > gap {
                    fix_zero.push(j);
                } else if values[j] > 0.5 && -d[j] > gap {
                    fix_one.push(j);
                }
            }
        }

        let Some((var, down, up)) = self.choose_branch(&values, z)? else {
            // integral but not a tour and no cut found; cannot happen with exact separation
            return Err(Error::Solver("integral subtour solution without a violated cut".into()));
        };
        Ok(NodeResult::Branch { var, down, up, fix_zero, fix_one })
    }

    /// Strong branching over the fractional variables nearest 0.5: each is fixed both ways
    /// and bounded by a few dual pivots. Returns the variable with the best product of
    /// bound gains and the two child bounds.
    fn choose_branch(&mut self, values: &[f64], z: f64) -> Result<Option<(usize, f64, f64)>> {
        let mut frac: Vec<(f64, usize)> = values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > INTEGRALITY_TOL && x < 1.0 - INTEGRALITY_TOL)
            .map(|(j, &x)| ((x - 0.5).abs(), j))
            .collect();
        if frac.is_empty() {
            return Ok(None);
        }
        frac.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        frac.truncate(self.config.strong_candidates.max(1));
        let snapshot = self.model.simplex().clone();
        let mut best = (f64::NEG_INFINITY, frac[0].1, z, z);
        for &(_, j) in &frac {
            let mut child = [z, z];
            for (k, v) in [0.0, 1.0].into_iter().enumerate() {
                self.model.simplex_mut().set_bounds(j, v, v);
                let b = self.model.simplex_mut().dual_bound(STRONG_ITERS)?;
                self.lp_solves += 1;
                child[k] = b.map_or(f64::INFINITY, |b| b.max(z));
                *self.model.simplex_mut() = snapshot.clone();
            }
            let score = (child[0] - z).max(1e-6) * (child[1] - z).max(1e-6);
            if score > best.0 {
                best = (score, j, child[0], child[1]);
            }
        }
        Ok(Some((best.1, best.2, best.3)))
    }

    /// Searches for the shortest tour of length at most `cutoff` (if given) that is also
    /// shorter than any tour in `seeds`.
    pub fn search(&mut self, cutoff: Option<Weight>, seeds: &[Tour]) -> Result<BranchCutOutcome> {
        self.started = Instant::now();
        self.exhausted = false;
        self.nodes = 0;
        self.limit = cutoff;
        self.incumbent = None;
        for t in seeds {
            if self.mask.contains_tour(t) {
                self.offer(t.clone());
            }
        }
        let start_solves = self.lp_solves;
        let mut heap = BinaryHeap::new();
        let mut seq = 0;
        heap.push(BranchNode { fixed_zero: Vec::new(), fixed_one: Vec::new(), bound: f64::NEG_INFINITY, depth: 0, seq });
        let mut root_bound = None;
        let mut root_infeasible = false;
        while let Some(node) = heap.pop() {
            if self.bound_prunes(node.bound) {
                continue;
            }
            if self.out_of_budget() {
                heap.push(node);
                break;
            }
            let result = self.process(&node)?;
            if node.depth == 0 {
                root_bound = (!self.exhausted && self.lp_solves > start_solves).then(|| self.model.objective());
                root_infeasible = self.last_infeasible;
            }
            let NodeResult::Branch { var, down, up: up_bound, fix_zero, fix_one } = result else { continue };
            if node.depth == 0 {
                // root fixings hold for the whole tree
                for &j in &fix_zero {
                    self.global_ub[j] = 0.0;
                }
                for &j in &fix_one {
                    self.global_lb[j] = 1.0;
                }
                self.applied.extend(fix_zero.iter().chain(&fix_one));
                self.applied.sort_unstable();
                self.applied.dedup();
            }
            let (mut z0, mut z1) = (node.fixed_zero.clone(), node.fixed_one.clone());
            if node.depth > 0 {
                z0.extend(&fix_zero);
                z1.extend(&fix_one);
            }
            let mut up = z1.clone();
            up.push(var);
            let down_bound = down;
            let mut down = z0.clone();
            down.push(var);
            seq += 1;
            heap.push(BranchNode { fixed_zero: z0, fixed_one: up, bound: up_bound, depth: node.depth + 1, seq });
            seq += 1;
            heap.push(BranchNode { fixed_zero: down, fixed_one: z1, bound: down_bound, depth: node.depth + 1, seq });
        }
        let proven = !self.exhausted;
        // leave the model at global bounds for the next search
        let applied = std::mem::take(&mut self.applied);
        for j in applied {
            let (lb, ub) = (self.global_lb[j], self.global_ub[j]);
            self.model.simplex_mut().set_bounds(j, lb, ub);
        }
        Ok(BranchCutOutcome {
            tour: self.incumbent.take(),
            proven,
            root_bound,
            nodes: self.nodes,
            lp_solves: self.lp_solves - start_solves,
            root_infeasible,
        })
    }
}

/// Heuristic starting tours: both double-tree tours, locally improved, restricted to `mask`.
pub fn seed_tours(inst: &Instance, mask: &EdgeMask) -> Vec<Tour> {
    let Ok((l, r)) = double_tree_tours(inst) else { return Vec::new() };
    let mut out = Vec::new();
    for t in [l, r] {
        if mask.contains_tour(&t) {
            out.push(improve_tour(&t, inst, mask));
        }
    }
    out
}

/// Exact solve on the complete graph. With `cutoff`, only tours of length `<= cutoff` are sought.
pub fn branch_and_cut(inst: &Instance, cutoff: Option<Weight>) -> Result<BranchCutOutcome> {
    branch_and_cut_with(inst, cutoff, &BranchCutConfig::default())
}

pub fn branch_and_cut_with(inst: &Instance, cutoff: Option<Weight>, config: &BranchCutConfig) -> Result<BranchCutOutcome> {
    if inst.n() < 4 {
        return Err(Error::Domain(format!("branch-and-cut needs n >= 4, got {}", inst.n())));
    }
    let mut bc = BranchCut::complete(inst, config.clone());
    let seeds = if config.heuristic { seed_tours(inst, &EdgeMask::complete(inst.n())) } else { Vec::new() };
    bc.search(cutoff, &seeds)
}

/// Exact solve restricted to `edges`; `seeds` are known feasible tours (ignored if they leave the edge set).
pub fn branch_and_cut_restricted(
    inst: &Instance,
    edges: &[Edge],
    seeds: &[Tour],
    config: &BranchCutConfig,
) -> Result<BranchCutOutcome> {
    let mut bc = BranchCut::new(inst, edges.to_vec(), config.clone());
    let mut all: Vec<Tour> = seeds.iter().filter(|t| bc.mask.contains_tour(t)).map(|t| improve_tour(t, inst, &bc.mask)).collect();
    if config.heuristic {
        all.extend(seed_tours(inst, &bc.mask));
    }
    bc.search(None, &all)
}
