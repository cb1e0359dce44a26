use proptest::prelude::*;

use tsp_sparsify::eval::{aggregate_summary, evaluate_instance, read_reports_csv, write_reports_csv, DEFAULT_BOUNDS};
use tsp_sparsify::exact::{enumerate_optimal_tours, held_karp, BranchCutConfig};
use tsp_sparsify::features::{assemble_features, read_features_csv, write_features_csv, FeatureConfig};
use tsp_sparsify::graph::{double_tree_tours, minimum_spanning_tree, tree_weight, WeightedGraph};
use tsp_sparsify::sparsifier::{insert_tour_edges, predict_mask, prune_instance, train_model, Model, SparsifiedInstance, TrainConfig};
use tsp_sparsify::tsplib::{generate_random_instance, parse_instance, write_instance, write_sparsified, EdgeWeightKind, Instance};

fn small_model() -> Model {
    let data: Vec<_> = (0..4)
        .map(|seed| {
            let inst = generate_random_instance(12, seed, 1000.0).unwrap();
            let tours = enumerate_optimal_tours(&inst, 32).unwrap();
            assemble_features(&inst, &FeatureConfig::default(), Some(&tours)).unwrap()
        })
        .collect();
    train_model(&data, &TrainConfig { epochs: 200, ..Default::default() }).unwrap()
}

#[test]
fn instance_text_round_trip() {
    let inst = generate_random_instance(20, 3, 1e4).unwrap();
    let back = parse_instance(&write_instance(&inst)).unwrap();
    assert_eq!(back.n(), inst.n());
    for u in 0..inst.n() {
        for v in 0..inst.n() {
            assert_eq!(back.w(u, v), inst.w(u, v));
        }
    }
}

#[test]
fn sparsified_round_trip_keeps_edges() {
    let inst = generate_random_instance(15, 8, 1e4).unwrap();
    let hk = held_karp(&inst).unwrap();
    let s = insert_tour_edges(&prune_instance(&inst, &vec![false; inst.m()]).unwrap(), &[hk.clone()]).unwrap();
    let parsed = parse_instance(&write_sparsified(&s).unwrap()).unwrap();
    let back = SparsifiedInstance::from_instance(&parsed).unwrap();
    assert_eq!(back.retained(), s.retained());
    assert!(back.contains_tour(&hk));
    let r = evaluate_instance(&inst, &back, &BranchCutConfig::default()).unwrap();
    assert_eq!(r.ratio, Some(1.0));
}

#[test]
fn features_and_model_round_trip() {
    let inst = generate_random_instance(14, 11, 1000.0).unwrap();
    let fm = assemble_features(&inst, &FeatureConfig::default(), None).unwrap();
    let mut buf = Vec::new();
    write_features_csv(&fm, &mut buf).unwrap();
    let back = read_features_csv(buf.as_slice()).unwrap();
    assert_eq!(back.edges, fm.edges);

    let model = small_model();
    let reloaded = Model::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(reloaded, model);
    let a = predict_mask(&model, &fm, None).unwrap();
    let b = predict_mask(&reloaded, &back, None).unwrap();
    assert_eq!(a.keep, b.keep);
}

#[test]
fn reports_round_trip_and_summarize() {
    let reports: Vec<_> = (0..3)
        .map(|seed| {
            let inst = generate_random_instance(10, seed, 1000.0).unwrap();
            let (l, r) = double_tree_tours(&inst).unwrap();
            let s = insert_tour_edges(&prune_instance(&inst, &vec![false; inst.m()]).unwrap(), &[l, r]).unwrap();
            let mut rep = evaluate_instance(&inst, &s, &BranchCutConfig::default()).unwrap();
            rep.group = "g".into();
            rep.runtime_ms = None;
            rep
        })
        .collect();
    let mut buf = Vec::new();
    write_reports_csv(&reports, false, &mut buf).unwrap();
    let back = read_reports_csv(buf.as_slice(), "g").unwrap();
    assert_eq!(back, reports);
    let summary = aggregate_summary(&back, &DEFAULT_BOUNDS).unwrap();
    let all = summary.last().unwrap();
    assert_eq!(all.count, 3);
    assert!(all.max_ratio.unwrap() >= 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn double_tree_within_twice_mst(coords in prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 4..10)) {
        let pts: Vec<[f64; 2]> = coords.iter().map(|&(x, y)| [x, y]).collect();
        let inst = Instance::from_coords("p", EdgeWeightKind::Euc2d, pts).unwrap();
        let mst = tree_weight(&inst, &minimum_spanning_tree(&WeightedGraph::complete(&inst)).unwrap());
        let opt = held_karp(&inst).unwrap().length();
        let (l, r) = double_tree_tours(&inst).unwrap();
        for t in [l, r] {
            prop_assert!(t.length() <= 2 * mst);
            prop_assert!(t.length() >= opt);
        }
    }

    #[test]
    fn retained_sets_nested(seed in 0u64..50, mut ts in prop::collection::vec(0.0..1.0f64, 2..6)) {
        let inst = generate_random_instance(16, seed, 1000.0).unwrap();
        let fm = assemble_features(&inst, &FeatureConfig::default(), None).unwrap();
        let model = MODEL.with(|m| m.clone());
        ts.sort_by(f64::total_cmp);
        let masks: Vec<_> = ts.iter().map(|&t| predict_mask(&model, &fm, Some(t)).unwrap().keep).collect();
        for w in masks.windows(2) {
            prop_assert!(w[1].iter().zip(&w[0]).all(|(&hi, &lo)| !hi || lo));
        }
    }
}

thread_local! {
    static MODEL: Model = small_model();
}
