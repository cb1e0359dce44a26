use crate::error::{Error, Result};
use crate::graph::Tour;
use crate::tsplib::{Instance, Weight};

pub const DEFAULT_HELD_KARP_CAP: usize = 18;

/// Exact optimum by subset dynamic programming, `O(2^n n^2)`.
pub fn held_karp(inst: &Instance) -> Result<Tour> {
    held_karp_with_cap(inst, DEFAULT_HELD_KARP_CAP)
}

pub fn held_karp_with_cap(inst: &Instance, cap: usize) -> Result<Tour> {
    let n = inst.n();
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    if n < 3 {
        return Err(Error::Domain(format!("a tour needs at least 3 vertices, got {n}")));
    }
    // vertex 0 is the fixed start; subsets range over vertices 1..n, bit i-1 for vertex i
    let k = n - 1;
    let full = 1usize << k;
    let mut cost = vec![Weight::MAX; full * k];
    let mut parent = vec![u8::MAX; full * k];
    for j in 0..k {
        cost[(1 << j) * k + j] = inst.w(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..k {
            if mask >> j & 1 == 0 {
                continue;
            }
            let here = cost[mask * k + j];
            if here == Weight::MAX {
                continue;
            }
            let rest = !mask & (full - 1);
            let mut bits = rest;
            while bits != 0 {
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let next = mask | (1 << t);
                let c = here + inst.w(j + 1, t + 1);
                let slot = next * k + t;
                if c < cost[slot] || (c == cost[slot] && (j as u8) < parent[slot]) {
                    cost[slot] = c;
                    parent[slot] = j as u8;
                }
            }
        }
    }
    let last = full - 1;
    let mut best = Weight::MAX;
    let mut end = 0;
    for j in 0..k {
        let c = cost[last * k + j] + inst.w(j + 1, 0);
        if c < best {
            best = c;
            end = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = last;
    let mut j = end;
    loop {
        order.push(j + 1);
        let p = parent[mask * k + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    let tour = Tour::new(order, inst)?;
    debug_assert_eq!(tour.length(), best);
    Ok(tour)
}
