//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use tsp_sparsify::eval::{evaluate_against, evaluate_instance, solve_reference, write_reports_csv, EvaluationReport, Feasibility};
use tsp_sparsify::exact::{branch_and_cut, enumerate_optimal_tours, held_karp, BranchCutConfig};
use tsp_sparsify::features::{assemble_features, FeatureConfig, FeatureMatrix, FEATURE_NAMES, NUM_FEATURES};
use tsp_sparsify::graph::{double_tree_tours, Edge, Tour};
use tsp_sparsify::lp::cutting_plane_features;
use tsp_sparsify::sparsifier::{
    insert_tour_edges, mst_only_sparsify, predict_mask, prune_instance, train_model, Confusion, Model, SparsifiedInstance,
    TrainConfig, TrainingSummary,
};
use tsp_sparsify::tsplib::{generate_random_instance, EdgeWeightKind, ExplicitLayout, Instance, Weight};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BOX: f64 = 1e6;

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

fn verdict(id: u32, pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { id, pass, detail: detail.into() }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Exhaustive search over permutations with vertex 0 fixed first.
fn brute_force(inst: &Instance) -> Weight {
    fn go(inst: &Instance, path: &mut Vec<usize>, used: &mut [bool], len: Weight, best: &mut Weight) {
        let n = inst.n();
        let last = *path.last().unwrap();
        if path.len() == n {
            *best = (*best).min(len + inst.w(last, 0));
            return;
        }
        for v in 1..n {
            if !used[v] {
                used[v] = true;
                path.push(v);
                go(inst, path, used, len + inst.w(last, v), best);
                path.pop();
                used[v] = false;
            }
        }
    }
    let mut used = vec![false; inst.n()];
    used[0] = true;
    let mut best = Weight::MAX;
    go(inst, &mut vec![0], &mut used, 0, &mut best);
    best
}

/// Prim's algorithm on the dense weight matrix.
fn mst_weight(inst: &Instance) -> Weight {
    let n = inst.n();
    let mut in_tree = vec![false; n];
    let mut dist = vec![Weight::MAX; n];
    dist[0] = 0;
    let mut total = 0;
    for _ in 0..n {
        let u = (0..n).filter(|&v| !in_tree[v]).min_by_key(|&v| dist[v]).unwrap();
        in_tree[u] = true;
        total += dist[u];
        for v in 0..n {
            if !in_tree[v] {
                dist[v] = dist[v].min(inst.w(u, v));
            }
        }
    }
    total
}

fn tour_edges_retained(s: &SparsifiedInstance, t: &Tour) -> bool {
    let retained: HashSet<Edge> = s.retained().iter().copied().collect();
    let o = t.order();
    (0..o.len()).all(|i| retained.contains(&Edge::new(o[i], o[(i + 1) % o.len()])))
}

fn uniform(n: usize) -> Instance {
    let mut m = vec![1; n * n];
    for i in 0..n {
        m[i * n + i] = 0;
    }
    Instance::from_matrix(format!("uniform{n}"), ExplicitLayout::FullMatrix, n, m).unwrap()
}

fn ratios(reports: &[EvaluationReport]) -> Vec<f64> {
    reports.iter().map(|r| r.ratio.unwrap_or(f64::INFINITY)).collect()
}

fn csv_bytes(reports: &[EvaluationReport]) -> Vec<u8> {
    let mut out = Vec::new();
    write_reports_csv(reports, false, &mut out).unwrap();
    out
}

/// Pre- and post-insertion reports for one batch of sparsified instances.
#[derive(Default)]
struct Batch {
    before: Vec<EvaluationReport>,
    after: Vec<EvaluationReport>,
    insertion_failures: usize,
    one_tour_violations: usize,
    elapsed: Duration,
}

impl Batch {
    fn csv(&self) -> Vec<u8> {
        let mut out = csv_bytes(&self.before);
        out.extend(csv_bytes(&self.after));
        out
    }
}

/// Scores `s` before and after inserting both double-tree tours.
fn score(batch: &mut Batch, inst: &Instance, s: SparsifiedInstance, budget: &BranchCutConfig) {
    let t = Instant::now();
    let (opt, proven) = solve_reference(inst, budget).unwrap();
    let t_ref = t.elapsed();
    batch.before.push(evaluate_against(&s, &opt, proven, budget).unwrap());
    let before = batch.before.last().unwrap();
    eprintln!(
        "  {} m_hat {} {} ratio {:?} (reference {:.1}s, pruned {:.1}s)",
        inst.name(),
        s.m_hat(),
        before.feasibility.as_str(),
        before.ratio,
        t_ref.as_secs_f64(),
        (t.elapsed() - t_ref).as_secs_f64()
    );
    let (left, right) = double_tree_tours(inst).unwrap();
    let one = insert_tour_edges(&s, std::slice::from_ref(&left)).unwrap();
    if one.m_hat() > s.m_hat() + inst.n() {
        batch.one_tour_violations += 1;
    }
    let both = insert_tour_edges(&s, &[left.clone(), right.clone()]).unwrap();
    if !tour_edges_retained(&both, &left) || !tour_edges_retained(&both, &right) {
        batch.insertion_failures += 1;
    }
    batch.after.push(evaluate_against(&both, &opt, proven, budget).unwrap());
}

fn mst_only_run() -> Batch {
    let started = Instant::now();
    let budget = BranchCutConfig::default();
    let mut batch = Batch::default();
    for i in 0..50 {
        let inst = generate_random_instance(100, 5000 + i, BOX).unwrap();
        let s = mst_only_sparsify(&inst, 7).unwrap();
        score(&mut batch, &inst, s, &budget);
    }
    batch.elapsed = started.elapsed();
    batch
}

fn train_desk_model() -> Model {
    let mut data = Vec::new();
    for i in 0..20 {
        let inst = generate_random_instance(50, 6000 + i, BOX).unwrap();
        let tours = enumerate_optimal_tours(&inst, 32).unwrap();
        let cfg = FeatureConfig { seed: i, ..Default::default() };
        data.push(assemble_features(&inst, &cfg, Some(&tours)).unwrap());
    }
    train_model(&data, &TrainConfig::default()).unwrap()
}

fn learned_run(model: &Model, n: usize, seeds: std::ops::Range<u64>) -> Batch {
    let started = Instant::now();
    let budget = BranchCutConfig::default();
    let mut batch = Batch::default();
    for seed in seeds {
        let inst = generate_random_instance(n, seed, BOX).unwrap();
        let fm = assemble_features(&inst, &FeatureConfig { seed, ..Default::default() }, None).unwrap();
        let keep = predict_mask(model, &fm, None).unwrap().keep;
        score(&mut batch, &inst, prune_instance(&inst, &keep).unwrap(), &budget);
    }
    batch.elapsed = started.elapsed();
    batch
}

fn criteria_1_2() -> (Verdict, Verdict) {
    let started = Instant::now();
    let mut instances = Vec::new();
    let mut mismatches = Vec::new();
    for seed in 0..100u64 {
        let inst = generate_random_instance(5 + (seed as usize % 5), seed, BOX).unwrap();
        let hk = held_karp(&inst).unwrap().length();
        if hk != brute_force(&inst) {
            mismatches.push(format!("hk/brute seed {seed}"));
        }
        instances.push((inst, hk));
    }
    for seed in 100..160u64 {
        let inst = generate_random_instance(10 + (seed as usize % 6), seed, BOX).unwrap();
        let hk = held_karp(&inst).unwrap().length();
        let bc = branch_and_cut(&inst, None).unwrap();
        if !bc.proven || bc.tour.map(|t| t.length()) != Some(hk) {
            mismatches.push(format!("bc/hk seed {seed}"));
        }
        instances.push((inst, hk));
    }
    let elapsed = started.elapsed();
    let c1 = verdict(
        1,
        mismatches.is_empty() && elapsed < Duration::from_secs(120),
        format!("100 HK/brute + 60 B&C/HK instances, {} mismatches {:?}, {:.1}s", mismatches.len(), mismatches, elapsed.as_secs_f64()),
    );

    let mut bad = Vec::new();
    let mut rounds = 0;
    for (inst, opt) in &instances {
        let cp = cutting_plane_features(inst, 1000).unwrap();
        rounds += cp.objectives.len();
        let above = cp.objectives.iter().any(|&z| z > *opt as f64 + 1e-6);
        let drops = cp.objectives.windows(2).any(|w| w[1] < w[0] - 1e-6);
        if above || drops {
            bad.push(inst.name().to_string());
        }
    }
    let c2 = verdict(2, bad.is_empty(), format!("{} instances, {rounds} LP objectives checked, violations {:?}", instances.len(), bad));
    (c1, c2)
}

fn criterion_3() -> Verdict {
    let k4 = enumerate_optimal_tours(&uniform(4), 32).unwrap();
    let k5 = enumerate_optimal_tours(&uniform(5), 32).unwrap();
    let pass = k4.tours.len() == 3 && k5.tours.len() == 12 && !k4.truncated && !k5.truncated;
    verdict(3, pass, format!("K4 {} tours, K5 {} tours", k4.tours.len(), k5.tours.len()))
}

fn criterion_4() -> Verdict {
    let mut bad = Vec::new();
    for seed in 0..60u64 {
        let inst = generate_random_instance(4 + (seed as usize % 9), 9000 + seed, BOX).unwrap();
        let opt = held_karp(&inst).unwrap().length();
        let tree = mst_weight(&inst);
        let (l, r) = double_tree_tours(&inst).unwrap();
        for t in [l, r] {
            if t.length() > 2 * tree || t.length() < opt {
                bad.push(seed);
            }
        }
    }
    let rect =
        Instance::from_coords("rect", EdgeWeightKind::Euc2d, vec![[0.0, 0.0], [0.0, 10.0], [20.0, 0.0], [20.0, 10.0]]).unwrap();
    let (left, _) = double_tree_tours(&rect).unwrap();
    let s = insert_tour_edges(&prune_instance(&rect, &[false; 6]).unwrap(), &[left]).unwrap();
    let r = evaluate_instance(&rect, &s, &BranchCutConfig::default()).unwrap();
    let rect_ok = r.pruned_length == Some(64) && r.optimal_length == 60 && r.ratio == Some(64.0 / 60.0);
    verdict(
        4,
        bad.is_empty() && rect_ok,
        format!("60 instances, violations {:?}; rectangle {:?}/{}", bad, r.pruned_length, r.optimal_length),
    )
}

fn criterion_5(batch: &Batch) -> Verdict {
    let m_hat_ok = batch.before.iter().all(|r| r.m_hat == 693 && (r.pruning_rate - 0.86).abs() <= 1e-3);
    let feasible = batch.before.iter().filter(|r| r.feasibility == Feasibility::Feasible).count();
    let after = ratios(&batch.after);
    let pass = m_hat_ok
        && feasible * 10 >= batch.before.len() * 8
        && mean(&after) <= 1.03
        && max(&after) <= 1.10
        && batch.elapsed <= Duration::from_secs(30 * 60);
    verdict(
        5,
        pass,
        format!(
            "m_hat=693 on all: {m_hat_ok}, feasible before insertion {feasible}/{}, after insertion mean {:.5} max {:.5}, {:.1}s",
            batch.before.len(),
            mean(&after),
            max(&after),
            batch.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6(batch: &Batch, train_time: Duration) -> Verdict {
    let pruning: Vec<f64> = batch.before.iter().map(|r| r.pruning_rate).collect();
    let post_pruning: Vec<f64> = batch.after.iter().map(|r| r.pruning_rate).collect();
    let after = ratios(&batch.after);
    let all_feasible = batch.after.iter().all(|r| r.feasibility == Feasibility::Feasible);
    let total = train_time + batch.elapsed;
    let pass = mean(&pruning) >= 0.70
        && all_feasible
        && mean(&after) <= 1.02
        && max(&after) <= 1.10
        && total <= Duration::from_secs(45 * 60);
    verdict(
        6,
        pass,
        format!(
            "mean pruning {:.4} ({:.4} after insertion), all feasible {all_feasible}, mean ratio {:.5}, max {:.5}, {:.1}s",
            mean(&pruning),
            mean(&post_pruning),
            mean(&after),
            max(&after),
            total.as_secs_f64()
        ),
    )
}

fn criterion_7(batch: &Batch) -> Verdict {
    let pruning: Vec<f64> = batch.before.iter().map(|r| r.pruning_rate).collect();
    let after = ratios(&batch.after);
    let pass = mean(&pruning) >= 0.60 && mean(&after) <= 1.05;
    verdict(7, pass, format!("n=100 mean pruning {:.4}, mean ratio after insertion {:.5}", mean(&pruning), mean(&after)))
}

fn criterion_8(batches: &[&Batch]) -> Verdict {
    let failures: usize = batches.iter().map(|b| b.insertion_failures).sum();
    let runs: usize = batches.iter().map(|b| b.after.len()).sum();
    verdict(8, failures == 0, format!("{runs} post-insertion instances, {failures} missing an inserted tour"))
}

fn random_model(rng: &mut ChaCha8Rng) -> Model {
    Model {
        version: 1,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        means: (0..NUM_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        stds: (0..NUM_FEATURES).map(|_| rng.gen_range(0.1..2.0)).collect(),
        weights: (0..NUM_FEATURES).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        bias: rng.gen_range(-2.0..2.0),
        threshold: 0.5,
        seed: 0,
        train_config: TrainConfig::default(),
        training: TrainingSummary { loss: 0.0, samples: 0, confusion: Confusion::default() },
    }
}

fn criterion_9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = 0;
    for _ in 0..1000 {
        let model = random_model(&mut rng);
        let rows = rng.gen_range(1..60);
        let fm = FeatureMatrix {
            edges: Vec::new(),
            rows: (0..rows).map(|_| std::array::from_fn(|_| rng.gen_range(-2.0..2.0))).collect(),
            labels: None,
            sample_weights: None,
            solved_at_root: false,
        };
        let mut thresholds: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        thresholds.sort_by(f64::total_cmp);
        let masks: Vec<Vec<bool>> = thresholds.iter().map(|&t| predict_mask(&model, &fm, Some(t)).unwrap().keep).collect();
        for w in masks.windows(2) {
            if w[1].iter().zip(&w[0]).any(|(&hi, &lo)| hi && !lo) {
                violations += 1;
            }
        }
    }
    verdict(9, violations == 0, format!("1000 pairs x 8 thresholds, {violations} non-nested pairs"))
}

fn main() {
    let started = Instant::now();
    let mut verdicts = Vec::new();
    let (c1, c2) = criteria_1_2();
    verdicts.extend([c1, c2, criterion_3(), criterion_4()]);

    eprintln!("criteria 1-4 done after {:.1}s; MST-only run", started.elapsed().as_secs_f64());
    let mst = mst_only_run();
    verdicts.push(criterion_5(&mst));

    eprintln!("training");
    let t = Instant::now();
    let model = train_desk_model();
    let train_time = t.elapsed();
    let learned = learned_run(&model, 50, 7000..7020);
    verdicts.push(criterion_6(&learned, train_time));
    eprintln!("generalization run");
    let general = learned_run(&model, 100, 8000..8010);
    verdicts.push(criterion_7(&general));
    verdicts.push(criterion_8(&[&mst, &learned, &general]));
    verdicts.push(criterion_9());

    eprintln!("determinism reruns");
    let mst_again = mst_only_run();
    let model_again = train_desk_model();
    let learned_again = learned_run(&model_again, 50, 7000..7020);
    let same = mst.csv() == mst_again.csv() && learned.csv() == learned_again.csv();
    let same_model = model.to_json().unwrap() == model_again.to_json().unwrap();
    verdicts.push(verdict(10, same && same_model, format!("report CSVs identical: {same}, model identical: {same_model}")));

    let v = learned.one_tour_violations;
    verdicts.push(verdict(11, v == 0, format!("{} instances, {v} exceed m_hat + n after one insertion", learned.before.len())));
    verdicts.sort_by_key(|v| v.id);

    println!();
    for v in &verdicts {
        println!("criterion {:>2}: {}  {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed, {:.1}s total", verdicts.len() - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
