//! Spanning trees, successive MST extraction, tours and the double-tree heuristic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsplib::{Instance, Weight};

/// Undirected edge with `u < v` (0-indexed).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }
}

/// Position of edge `(u, v)`, `u < v`, in the lexicographic enumeration of `K_n`.
#[inline]
pub fn edge_index(n: usize, e: Edge) -> usize {
    debug_assert!(e.u < e.v && e.v < n);
    e.u * n - e.u * (e.u + 1) / 2 + (e.v - e.u - 1)
}

/// All edges of `K_n` in lexicographic order.
pub fn complete_edges(n: usize) -> Vec<Edge> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            out.push(Edge { u, v });
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(Edge, Weight)>,
}

impl WeightedGraph {
    pub fn new(n: usize, mut edges: Vec<(Edge, Weight)>) -> Result<Self> {
        for (e, _) in &edges {
            if e.u >= e.v || e.v >= n {
                return Err(Error::Validation(format!("invalid edge ({}, {}) for n = {n}", e.u, e.v)));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation("duplicate edge".into()));
        }
        Ok(WeightedGraph { n, edges })
    }

    /// The complete graph of an instance (ignoring any attached edge list).
    pub fn complete(inst: &Instance) -> Self {
        let edges = complete_edges(inst.n()).into_iter().map(|e| (e, inst.w(e.u, e.v))).collect();
        WeightedGraph { n: inst.n(), edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(Edge, Weight)] {
        &self.edges
    }

    fn remove(&mut self, gone: &[Edge]) {
        let mut gone = gone.to_vec();
        gone.sort_unstable();
        self.edges.retain(|(e, _)| gone.binary_search(e).is_err());
    }
}

/// Kruskal's algorithm with ties broken by `(weight, u, v)`.
pub fn minimum_spanning_tree(g: &WeightedGraph) -> Result<Vec<Edge>> {
    let n = g.n();
    let mut order: Vec<(Weight, Edge)> = g.edges().iter().map(|&(e, w)| (w, e)).collect();
    order.sort_unstable();
    let mut dsu = DisjointSet::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (_, e) in order {
        if dsu.union(e.u, e.v) {
            tree.push(e);
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    if tree.len() + 1 != n && n > 0 {
        return Err(Error::Disconnected);
    }
    tree.sort_unstable();
    Ok(tree)
}

pub fn tree_weight(inst: &Instance, tree: &[Edge]) -> Weight {
    tree.iter().map(|e| inst.w(e.u, e.v)).sum()
}

/// Edges grouped by the spanning-tree level (1-based) at which they were extracted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MstExtraction {
    pub levels: BTreeMap<Edge, usize>,
    pub k_max: usize,
}

impl MstExtraction {
    pub fn level(&self, e: Edge) -> Option<usize> {
        self.levels.get(&e).copied()
    }

    pub fn edges_at(&self, level: usize) -> Vec<Edge> {
        self.levels.iter().filter(|&(_, &l)| l == level).map(|(&e, _)| e).collect()
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.levels.keys().copied().collect()
    }
}

/// Repeatedly takes the MST of the residual graph and removes its edges.
pub fn successive_mst_extract(g: &WeightedGraph, k: usize) -> Result<MstExtraction> {
    let mut residual = g.clone();
    let mut levels = BTreeMap::new();
    for level in 1..=k {
        let tree = match minimum_spanning_tree(&residual) {
            Ok(t) => t,
            Err(Error::Disconnected) => return Err(Error::PartialExtraction { completed: level - 1, requested: k }),
            Err(e) => return Err(e),
        };
        for &e in &tree {
            levels.insert(e, level);
        }
        residual.remove(&tree);
    }
    Ok(MstExtraction { levels, k_max: k })
}

/// A Hamiltonian cycle with its length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tour {
    order: Vec<usize>,
    length: Weight,
}

impl Tour {
    /// Validates `order` as a permutation of `0..n` and computes its length.
    pub fn new(order: Vec<usize>, inst: &Instance) -> Result<Self> {
        let length = tour_length(&order, inst)?;
        Ok(Tour { order, length })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> Weight {
        self.length
    }

    pub fn edges(&self) -> Vec<Edge> {
        let n = self.order.len();
        (0..n).map(|i| Edge::new(self.order[i], self.order[(i + 1) % n])).collect()
    }

    /// Sorted undirected edge set; equal for tours that are the same cycle.
    pub fn edge_set(&self) -> Vec<Edge> {
        let mut e = self.edges();
        e.sort_unstable();
        e
    }

    /// Rotates to start at vertex 0 and picks the direction whose second vertex is smaller.
    pub fn canonical(&self) -> Tour {
        let n = self.order.len();
        let start = self.order.iter().position(|&v| v == 0).unwrap_or(0);
        let fwd: Vec<usize> = (0..n).map(|i| self.order[(start + i) % n]).collect();
        let order = if n > 2 && fwd[n - 1] < fwd[1] {
            std::iter::once(fwd[0]).chain(fwd[1..].iter().rev().copied()).collect()
        } else {
            fwd
        };
        Tour { order, length: self.length }
    }
}

pub fn validate_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::Validation(format!("tour visits {} vertices, instance has {n}", order.len())));
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n {
            return Err(Error::Validation(format!("vertex {} out of range", v + 1)));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::Validation(format!("vertex {} visited twice", v + 1)));
        }
    }
    Ok(())
}

/// Sum of consecutive weights plus the closing edge.
pub fn tour_length(order: &[usize], inst: &Instance) -> Result<Weight> {
    validate_permutation(order, inst.n())?;
    let n = order.len();
    Ok((0..n).map(|i| inst.w(order[i], order[(i + 1) % n])).sum())
}

fn preorder(adj: &[Vec<usize>], root: usize, reverse_children: bool) -> Vec<usize> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        out.push(v);
        // push in reverse so the first child to visit is on top
        let kids = adj[v].iter().filter(|&&c| !seen[c]);
        if reverse_children {
            stack.extend(kids);
        } else {
            let kids: Vec<usize> = kids.copied().collect();
            stack.extend(kids.into_iter().rev());
        }
    }
    out
}

/// Both double-tree tours: pre-order DFS of the MST from vertex 1 with children in
/// ascending order, and the same walk with children in descending order.
pub fn double_tree_tours(inst: &Instance) -> Result<(Tour, Tour)> {
    let n = inst.n();
    if n < 3 {
        return Err(Error::Domain(format!("double-tree needs at least 3 vertices, got {n}")));
    }
    let tree = minimum_spanning_tree(&WeightedGraph::complete(inst))?;
    let mut adj = vec![Vec::new(); n];
    for e in &tree {
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let left = Tour::new(preorder(&adj, 0, false), inst)?;
    let right = Tour::new(preorder(&adj, 0, true), inst)?;
    Ok((left, right))
}

/// Does the tour use only edges in `allowed` (sorted)?
pub fn tour_within(tour: &Tour, allowed: &[Edge]) -> bool {
    tour.edges().iter().all(|e| allowed.binary_search(e).is_ok())
}
