//! Stoer-Wagner global minimum cut on a dense capacity matrix.

/// One "cut of the phase": the vertices merged into the last-added supervertex.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCut {
    pub side: Vec<usize>,
    pub value: f64,
}

/// Runs every Stoer-Wagner phase and returns all phase cuts in discovery order.
/// The global minimum cut is the smallest of them.
pub fn stoer_wagner_phases(n: usize, capacity: &[f64]) -> Vec<PhaseCut> {
    assert_eq!(capacity.len(), n * n);
    if n < 2 {
        return Vec::new();
    }
    let mut w = capacity.to_vec();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut cuts = Vec::with_capacity(n - 1);
    let mut key = vec![0.0; n];
    let mut added = vec![false; n];
    while alive.len() > 1 {
        for &v in &alive {
            key[v] = 0.0;
            added[v] = false;
        }
        let mut prev = alive[0];
        let mut last = alive[0];
        added[last] = true;
        for &v in &alive {
            key[v] = w[last * n + v];
        }
        for _ in 1..alive.len() {
            let mut best = usize::MAX;
            let mut best_key = f64::NEG_INFINITY;
            for &v in &alive {
                if !added[v] && key[v] > best_key {
                    best_key = key[v];
                    best = v;
                }
            }
            added[best] = true;
            prev = last;
            last = best;
            for &v in &alive {
                if !added[v] {
                    key[v] += w[best * n + v];
                }
            }
        }
        let value = key[last];
        let mut side = members[last].clone();
        side.sort_unstable();
        cuts.push(PhaseCut { side, value });
        // merge last into prev
        let moved = std::mem::take(&mut members[last]);
        members[prev].extend(moved);
        for &v in &alive {
            if v != last && v != prev {
                let c = w[last * n + v];
                w[prev * n + v] += c;
                w[v * n + prev] += c;
            }
        }
        alive.retain(|&v| v != last);
    }
    cuts
}

pub fn global_min_cut(n: usize, capacity: &[f64]) -> Option<PhaseCut> {
    stoer_wagner_phases(n, capacity).into_iter().min_by(|a, b| a.value.total_cmp(&b.value))
}
