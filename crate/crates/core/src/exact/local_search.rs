//! 2-opt and Or-opt improvement, used to seed branch-and-cut with a good incumbent.

use crate::graph::{Edge, Tour};
use crate::tsplib::Instance;

/// Adjacency bitmap of the edges a tour may use.
#[derive(Clone, Debug)]
pub struct EdgeMask {
    n: usize,
    bits: Vec<bool>,
}

impl EdgeMask {
    pub fn complete(n: usize) -> Self {
        let mut bits = vec![true; n * n];
        for i in 0..n {
            bits[i * n + i] = false;
        }
        EdgeMask { n, bits }
    }

    pub fn from_edges(n: usize, edges: &[Edge]) -> Self {
        let mut bits = vec![false; n * n];
        for e in edges {
            bits[e.u * n + e.v] = true;
            bits[e.v * n + e.u] = true;
        }
        EdgeMask { n, bits }
    }

    #[inline]
    pub fn has(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.n + b]
    }

    pub fn contains_tour(&self, t: &Tour) -> bool {
        t.edges().iter().all(|e| self.has(e.u, e.v))
    }
}

fn gain_2opt(inst: &Instance, a: usize, b: usize, c: usize, d: usize) -> i64 {
    inst.w(a, b) as i64 + inst.w(c, d) as i64 - inst.w(a, c) as i64 - inst.w(b, d) as i64
}

/// First-improvement 2-opt followed by Or-opt segment moves, repeated until neither improves.
/// Only moves whose new edges are in `mask` are taken; the input tour must lie inside `mask`.
pub fn improve_tour(tour: &Tour, inst: &Instance, mask: &EdgeMask) -> Tour {
    let n = inst.n();
    let mut order = tour.order().to_vec();
    if n < 5 {
        return tour.clone();
    }
    loop {
        let mut improved = false;
        // 2-opt: replace (a,b),(c,d) with (a,c),(b,d) by reversing b..=c
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b, c, d) = (order[i], order[i + 1], order[j], order[(j + 1) % n]);
                if gain_2opt(inst, a, b, c, d) > 0 && mask.has(a, c) && mask.has(b, d) {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        // Or-opt: move a segment of length 1..=3 elsewhere, possibly reversed
        for seg in 1..=3usize {
            let mut i = 0;
            while i + seg < n {
                let p = order[(i + n - 1) % n];
                let s0 = order[i];
                let s1 = order[i + seg - 1];
                let q = order[(i + seg) % n];
                if !mask.has(p, q) {
                    i += 1;
                    continue;
                }
                let removed = inst.w(p, s0) as i64 + inst.w(s1, q) as i64 - inst.w(p, q) as i64;
                let mut best: Option<(usize, bool, i64)> = None;
                for k in 0..n {
                    let x = order[k];
                    let y = order[(k + 1) % n];
                    // skip insertion points touching the segment
                    if (k + n - i) % n < seg || (k + 1 + n - i) % n < seg || k == (i + n - 1) % n {
                        continue;
                    }
                    let fwd = inst.w(x, s0) as i64 + inst.w(s1, y) as i64 - inst.w(x, y) as i64;
                    let rev = inst.w(x, s1) as i64 + inst.w(s0, y) as i64 - inst.w(x, y) as i64;
                    if removed - fwd > 0 && mask.has(x, s0) && mask.has(s1, y) && best.map_or(true, |b| removed - fwd > b.2) {
                        best = Some((k, false, removed - fwd));
                    }
                    if removed - rev > 0 && mask.has(x, s1) && mask.has(s0, y) && best.map_or(true, |b| removed - rev > b.2) {
                        best = Some((k, true, removed - rev));
                    }
                }
                if let Some((k, reversed, _)) = best {
                    let target = (order[k], order[(k + 1) % n]);
                    let mut segment: Vec<usize> = order[i..i + seg].to_vec();
                    if reversed {
                        segment.reverse();
                    }
                    let mut rest: Vec<usize> = order[..i].iter().chain(&order[i + seg..]).copied().collect();
                    let at = rest.iter().position(|&v| v == target.0).expect("insertion point") + 1;
                    rest.splice(at..at, segment);
                    debug_assert_eq!(rest.len(), n);
                    order = rest;
                    improved = true;
                }
                i += 1;
            }
        }
        if !improved {
            break;
        }
    }
    Tour::new(order, inst).expect("local search preserves the permutation")
}
