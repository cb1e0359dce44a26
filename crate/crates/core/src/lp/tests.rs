use super::simplex::{LpStatus, RowSense, Simplex};
use super::*;
use crate::exact::held_karp;
use crate::tsplib::{generate_random_instance, EdgeWeightKind, ExplicitLayout, Instance};
use proptest::prelude::*;

fn matrix_instance(n: usize, w: &[(usize, usize, u64)], default: u64) -> Instance {
    let mut m = vec![default; n * n];
    for i in 0..n {
        m[i * n + i] = 0;
    }
    for &(a, b, x) in w {
        m[a * n + b] = x;
        m[b * n + a] = x;
    }
    Instance::from_matrix("m", ExplicitLayout::FullMatrix, n, m).unwrap()
}

fn k4_distinct() -> Instance {
    matrix_instance(4, &[(0, 1, 1), (1, 2, 2), (2, 3, 3), (0, 2, 4), (1, 3, 5), (0, 3, 6)], 0)
}

fn uniform(n: usize) -> Instance {
    matrix_instance(n, &[], 1)
}

fn two_clusters() -> Instance {
    let pts = vec![
        [0.0, 0.0],
        [10.0, 0.0],
        [10.0, 10.0],
        [0.0, 10.0],
        [1000.0, 0.0],
        [1010.0, 0.0],
        [1010.0, 10.0],
        [1000.0, 10.0],
    ];
    Instance::from_coords("clusters", EdgeWeightKind::Euc2d, pts).unwrap()
}

/// Minimum of `c·x` over `{A x = b, 0 <= x <= 1}` by enumerating every basic solution.
/// Independent of the simplex code: plain Gaussian elimination on each candidate basis.
fn vertex_enumeration_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let nv = c.len();
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        for mask in 0..(1u32 << (nv - m)) {
            let nonbasic: Vec<usize> = (0..nv).filter(|j| !subset.contains(j)).collect();
            let mut x = vec![0.0; nv];
            for (k, &j) in nonbasic.iter().enumerate() {
                x[j] = if mask >> k & 1 == 1 { 1.0 } else { 0.0 };
            }
            // solve A_B x_B = b - A_N x_N
            let mut mat: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let mut row: Vec<f64> = subset.iter().map(|&j| a[i][j]).collect();
                    let rhs = b[i] - nonbasic.iter().map(|&j| a[i][j] * x[j]).sum::<f64>();
                    row.push(rhs);
                    row
                })
                .collect();
            let mut ok = true;
            for col in 0..m {
                let piv = (col..m).max_by(|&p, &q| mat[p][col].abs().total_cmp(&mat[q][col].abs())).unwrap();
                if mat[piv][col].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                mat.swap(col, piv);
                for r in 0..m {
                    if r != col {
                        let f = mat[r][col] / mat[col][col];
                        for k in col..=m {
                            mat[r][k] -= f * mat[col][k];
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            for (i, &j) in subset.iter().enumerate() {
                x[j] = mat[i][m] / mat[i][i];
            }
            if x.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)) {
                let z: f64 = x.iter().zip(c).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(z, |bz: f64| bz.min(z)));
            }
        }
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < nv - m + i {
                break;
            }
        }
        subset[i] += 1;
        for k in i + 1..m {
            subset[k] = subset[k - 1] + 1;
        }
    }
}

fn degree_system(inst: &Instance) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = inst.n();
    let edges = crate::graph::complete_edges(n);
    let a = (0..n)
        .map(|v| edges.iter().map(|e| if e.u == v || e.v == v { 1.0 } else { 0.0 }).collect())
        .collect();
    let c = edges.iter().map(|e| inst.w(e.u, e.v) as f64).collect();
    (a, vec![2.0; n], c)
}

#[test]
fn relaxation_sizes() {
    let m = build_relaxation(&uniform(4));
    assert_eq!((m.num_vars(), m.num_degree_rows()), (6, 4));
    let m = build_relaxation(&uniform(5));
    assert_eq!((m.num_vars(), m.num_degree_rows()), (10, 5));
    let big = generate_random_instance(100, 1, 1000.0).unwrap();
    assert_eq!(build_relaxation(&big).num_vars(), 4950);
}

#[test]
fn uniform_objectives() {
    for n in [4, 5] {
        let mut m = build_relaxation(&uniform(n));
        let sol = solve_lp(&mut m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - n as f64).abs() < 1e-9);
    }
}

#[test]
fn k4_matches_vertex_enumeration() {
    let inst = k4_distinct();
    let (a, b, c) = degree_system(&inst);
    let oracle = vertex_enumeration_min(&a, &b, &c).unwrap();
    let mut m = build_relaxation(&inst);
    let sol = solve_lp(&mut m).unwrap();
    assert!((sol.objective - oracle).abs() < 1e-9, "{} vs {}", sol.objective, oracle);
    assert!(sol.objective <= 12.0 + 1e-9);
}

#[test]
fn random_k5_matches_vertex_enumeration() {
    for seed in 0..20 {
        let inst = generate_random_instance(5, seed, 100.0).unwrap();
        let (a, b, c) = degree_system(&inst);
        let oracle = vertex_enumeration_min(&a, &b, &c).unwrap();
        let mut m = build_relaxation(&inst);
        let sol = solve_lp(&mut m).unwrap();
        assert!((sol.objective - oracle).abs() < 1e-7, "seed {seed}: {} vs {}", sol.objective, oracle);
    }
}

#[test]
fn optimality_conditions_hold() {
    let inst = generate_random_instance(30, 3, 1e4).unwrap();
    let mut m = build_relaxation(&inst);
    let sol = solve_lp(&mut m).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    let s = m.simplex();
    assert!(s.primal_residual() < 1e-9);
    let scale = inst.max_weight() as f64;
    for (j, &d) in sol.reduced_costs.iter().enumerate() {
        if s.is_basic(j) {
            assert!(d.abs() < 1e-9 * scale);
        } else if sol.values[j] < 0.5 {
            assert!(d >= -1e-9 * scale);
        } else {
            assert!(d <= 1e-9 * scale);
        }
    }
    assert!((s.dual_objective() - sol.objective).abs() < 1e-6 * sol.objective.abs().max(1.0));
}

fn solution_with(model: &LpModel, ones: &[(usize, usize, f64)]) -> LpSolution {
    let mut values = vec![0.0; model.num_vars()];
    for &(a, b, x) in ones {
        values[model.var_of(Edge::new(a, b)).unwrap()] = x;
    }
    LpSolution { values, reduced_costs: vec![0.0; model.num_vars()], objective: 0.0, status: LpStatus::Optimal }
}

#[test]
fn separation_cases() {
    let inst = uniform(6);
    let model = build_relaxation(&inst);
    let two_triangles = solution_with(&model, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)]);
    let cuts = separate_subtours(&model, &two_triangles, SUPPORT_EPS);
    assert_eq!(cuts.len(), 2);
    assert!(cuts.iter().all(|c| c.vertices.len() == 3));
    assert!(integral_tour_check(&model, &two_triangles, &inst).is_none());

    let ham = solution_with(&model, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (0, 5, 1.0)]);
    assert!(separate_subtours(&model, &ham, SUPPORT_EPS).is_empty());
    let tour = integral_tour_check(&model, &ham, &inst).unwrap();
    assert_eq!(tour.length(), 6);

    let inst8 = uniform(8);
    let model8 = build_relaxation(&inst8);
    let mut halves = Vec::new();
    for block in [0, 4] {
        for i in 0..4 {
            halves.push((block + i, block + (i + 1) % 4, 0.5));
        }
        halves.push((block, block + 2, 0.5));
        halves.push((block + 1, block + 3, 0.5));
    }
    let frac = solution_with(&model8, &halves);
    assert_eq!(separate_subtours(&model8, &frac, SUPPORT_EPS).len(), 2);
    assert!(integral_tour_check(&model8, &frac, &inst8).is_none());
}

#[test]
fn zero_rounds_returns_root() {
    let inst = two_clusters();
    let r = cutting_plane_features(&inst, 0).unwrap();
    assert_eq!(r.rounds_used, 0);
    assert_eq!(r.solution, r.root);
}

#[test]
fn integral_root_stops_immediately() {
    // cheap cycle 1-2-3-4-5-1, everything else expensive
    let inst = matrix_instance(5, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (0, 4, 1)], 100);
    let r = cutting_plane_features(&inst, 3).unwrap();
    assert_eq!(r.rounds_used, 0);
    let tour = r.tour.expect("root should be a tour");
    assert_eq!(tour.length() as f64, r.solution.objective);
    assert_eq!(tour.length(), 5);
}

#[test]
fn k4_integral_tour_matches_objective() {
    // the cheap cycle 1-2-3-4 (weights 1,1,1,1) dominates the other two tours
    let inst = matrix_instance(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1), (0, 2, 9), (1, 3, 9)], 0);
    let mut m = build_relaxation(&inst);
    let sol = solve_lp(&mut m).unwrap();
    let t = integral_tour_check(&m, &sol, &inst).unwrap();
    assert_eq!(t.length() as f64, sol.objective);
    let mut frac = sol.clone();
    frac.values[0] = 0.5;
    assert!(integral_tour_check(&m, &frac, &inst).is_none());
}

#[test]
fn two_clusters_cut_raises_bound() {
    let inst = two_clusters();
    let r = cutting_plane_features(&inst, 5).unwrap();
    assert!(r.rounds_used >= 1);
    assert!(r.objectives[1] > r.objectives[0] + 1.0);
    assert_ne!(normalize_reduced_costs(&r.root.reduced_costs), r.normalized_reduced_costs);
}

#[test]
fn zero_perturbation_equals_one_round() {
    let inst = generate_random_instance(12, 5, 1000.0).unwrap();
    let p = perturbed_mean_reduced_costs(&inst, 1, 9, 0.0).unwrap();
    let mut m = build_relaxation(&inst);
    let root = solve_lp(&mut m).unwrap();
    for c in separate_subtours(&m, &root, SUPPORT_EPS) {
        m.add_subtour_cut(&c).unwrap();
    }
    let sol = solve_lp(&mut m).unwrap();
    assert_eq!(p.mean, normalize_reduced_costs(&sol.reduced_costs));
}

#[test]
fn perturbation_deterministic_and_bracketed() {
    let inst = generate_random_instance(5, 11, 1000.0).unwrap();
    let a = perturbed_mean_reduced_costs(&inst, 3, 42, 0.1).unwrap();
    let b = perturbed_mean_reduced_costs(&inst, 3, 42, 0.1).unwrap();
    assert_eq!(a.mean, b.mean);
    for j in 0..a.mean.len() {
        let lo = a.per_copy.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min);
        let hi = a.per_copy.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max);
        assert!(a.mean[j] >= lo - 1e-12 && a.mean[j] <= hi + 1e-12);
    }
    assert!(perturbed_mean_reduced_costs(&inst, 0, 42, 0.1).is_err());
}

#[test]
fn normalization_dichotomy() {
    assert_eq!(normalize_reduced_costs(&[0.0, -1.0, 0.0]), vec![0.0, 0.0, 0.0]);
    let v = normalize_reduced_costs(&[2.0, -1.0, 4.0]);
    assert_eq!(v, vec![0.5, -0.25, 1.0]);
}

/// Two half-weighted triangles joined by three edges at 1: degree-feasible, 3-edge-connected,
/// and violating the blossom with either triangle as handle.
#[test]
fn blossom_on_two_triangles() {
    let edges = crate::graph::complete_edges(6);
    let half = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)];
    let one = [(0, 3), (1, 4), (2, 5)];
    let values: Vec<f64> = edges
        .iter()
        .map(|e| {
            if half.contains(&(e.u, e.v)) {
                0.5
            } else if one.contains(&(e.u, e.v)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    assert_eq!(support_components(6, &edges, &values, SUPPORT_EPS).len(), 1);
    let cuts = separate_blossoms(6, &edges, &values, SUPPORT_EPS);
    let handles: Vec<_> = cuts.iter().map(|c| c.handle.clone()).collect();
    assert_eq!(handles, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    assert_eq!(cuts[0].teeth, vec![Edge::new(0, 3), Edge::new(1, 4), Edge::new(2, 5)]);

    let inst = generate_random_instance(6, 2, 100.0).unwrap();
    let mut m = build_relaxation(&inst);
    m.add_blossom_cut(&cuts[0]).unwrap();
    let bad = BlossomCut { handle: vec![0, 1, 2], teeth: vec![Edge::new(0, 3), Edge::new(1, 4)] };
    assert!(m.add_blossom_cut(&bad).is_err());
    // every tour satisfies the blossom, so the LP optimum cannot rise above the tour optimum
    let sol = solve_lp(&mut m).unwrap();
    assert!(sol.objective <= held_karp(&inst).unwrap().length() as f64 + 1e-6);
}

#[test]
fn subtour_cut_validation() {
    let mut m = build_relaxation(&uniform(6));
    assert!(m.add_subtour_cut(&SubtourCut { vertices: vec![0, 1] }).is_err());
    assert!(m.add_subtour_cut(&SubtourCut { vertices: (0..6).collect() }).is_err());
    assert!(m.add_subtour_cut(&SubtourCut { vertices: vec![0, 1, 2] }).is_ok());
}

#[test]
fn simplex_against_enumeration_on_random_rows() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let nv = 6;
        let c: Vec<f64> = (0..nv).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let rows: Vec<Vec<f64>> = (0..2).map(|_| (0..nv).map(|_| rng.gen_range(1..3) as f64).collect()).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() * 0.4).collect();
        let oracle = vertex_enumeration_min(&rows, &b, &c);
        let mut s = Simplex::new(c.clone(), vec![0.0; nv], vec![1.0; nv]);
        for (r, rhs) in rows.iter().zip(&b) {
            let coeffs: Vec<(usize, f64)> = r.iter().copied().enumerate().collect();
            s.add_row(&coeffs, RowSense::Eq, *rhs);
        }
        let status = s.solve().unwrap();
        match oracle {
            Some(z) => {
                assert_eq!(status, LpStatus::Optimal);
                assert!((s.objective() - z).abs() < 1e-7, "{} vs {z}", s.objective());
            }
            None => assert_eq!(status, LpStatus::Infeasible),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cut_rounds_bound_and_monotone(seed in 0u64..10_000, n in 5usize..=10) {
        let inst = generate_random_instance(n, seed, 1000.0).unwrap();
        let opt = held_karp(&inst).unwrap().length() as f64;
        let r = cutting_plane_features(&inst, 6).unwrap();
        for w in r.objectives.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-6);
        }
        for z in &r.objectives {
            prop_assert!(*z <= opt + 1e-6);
        }
        let max = r.normalized_reduced_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(max == 1.0 || r.normalized_reduced_costs.iter().all(|&v| v == 0.0));
    }
}
