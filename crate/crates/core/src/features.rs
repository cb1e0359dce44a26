//! Per-edge feature vectors and supervision labels.
//!
//! Each undirected edge `(u, v)` with `u < v` gets nine values, always in the order of
//! [`FEATURE_NAMES`]: six local weight ratios, two reduced-cost features from the LP
//! relaxation, and the successive-MST level feature.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::exact::TourSet;
use crate::graph::{complete_edges, edge_index, successive_mst_extract, Edge, Tour, WeightedGraph};
use crate::lp::{cutting_plane_features, perturbed_mean_reduced_costs};
use crate::tsplib::Instance;

pub const FEATURE_NAMES: [&str; 9] = ["q_a", "q_b", "q_c", "q_d", "q_e", "q_f", "r_hat", "r_tilde", "q_mst"];
pub const NUM_FEATURES: usize = 9;
pub const DEFAULT_PERTURBATION: f64 = 0.1;

/// `ceil(log2(n))`, the default for cut rounds, perturbed copies and MST levels.
pub fn default_k(n: usize) -> usize {
    assert!(n >= 1);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// The six weight-ratio features of every edge, in lexicographic edge order.
pub fn local_features(inst: &Instance) -> Vec<[f64; 6]> {
    let n = inst.n();
    let mut row_max = vec![0u64; n];
    let mut row_min = vec![u64::MAX; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = inst.w(i, j);
                row_max[i] = row_max[i].max(w);
                row_min[i] = row_min[i].min(w);
            }
        }
    }
    let gmax = row_max.iter().copied().max().unwrap_or(0) as f64;
    let gmin = row_min.iter().copied().min().unwrap_or(0) as f64;
    complete_edges(n)
        .into_iter()
        .map(|e| {
            let (i, j) = (e.u, e.v);
            let a = 1.0 + inst.w(i, j) as f64;
            [
                a / (1.0 + gmax),
                a / (1.0 + row_max[i] as f64),
                a / (1.0 + row_max[j] as f64),
                (1.0 + gmin) / a,
                (1.0 + row_min[i] as f64) / a,
                (1.0 + row_min[j] as f64) / a,
            ]
        })
        .collect()
}

/// `1/j` for edges taken at extraction level `j`, zero elsewhere.
pub fn mst_feature(inst: &Instance, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Domain("MST feature needs k >= 1".into()));
    }
    let n = inst.n();
    let ex = successive_mst_extract(&WeightedGraph::complete(inst), k)?;
    let mut out = vec![0.0; n * (n - 1) / 2];
    for (e, level) in &ex.levels {
        out[edge_index(n, *e)] = 1.0 / *level as f64;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LpFeatures {
    pub r_hat: Vec<f64>,
    pub r_tilde: Vec<f64>,
    /// The cutting-plane loop ended on an integral tour, which is therefore optimal.
    pub solved_at_root: Option<Tour>,
}

pub fn lp_features(inst: &Instance, rounds: usize, copies: usize, seed: u64, magnitude: f64) -> Result<LpFeatures> {
    let cp = cutting_plane_features(inst, rounds)?;
    let pert = perturbed_mean_reduced_costs(inst, copies, seed, magnitude)?;
    Ok(LpFeatures { r_hat: cp.normalized_reduced_costs, r_tilde: pert.mean, solved_at_root: cp.tour })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEdgeSet {
    /// 1 if the edge lies on any of the supplied tours.
    pub labels: Vec<u8>,
    /// `A_ij / max A`.
    pub sample_weights: Vec<f64>,
}

impl LabeledEdgeSet {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

pub fn label_edges(inst: &Instance, tours: &TourSet) -> Result<LabeledEdgeSet> {
    if tours.tours.is_empty() {
        return Err(Error::Labeling("no tours to label from".into()));
    }
    let n = inst.n();
    let m = n * (n - 1) / 2;
    let mut labels = vec![0u8; m];
    for t in &tours.tours {
        if t.order().len() != n {
            return Err(Error::Labeling(format!("tour visits {} vertices, instance has {n}", t.order().len())));
        }
        for e in t.edges() {
            labels[edge_index(n, e)] = 1;
        }
    }
    let max = inst.max_weight() as f64;
    let sample_weights = complete_edges(n)
        .into_iter()
        .map(|e| if max > 0.0 { inst.w(e.u, e.v) as f64 / max } else { 1.0 })
        .collect();
    Ok(LabeledEdgeSet { labels, sample_weights })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    /// Cutting-plane rounds for `r_hat`; `None` means `ceil(log2 n)`.
    pub k_rounds: Option<usize>,
    /// Perturbed copies for `r_tilde`; `None` means `ceil(log2 n)`.
    pub copies: Option<usize>,
    /// Successive MST levels for `q_mst`; `None` means `ceil(log2 n)`.
    pub mst_k: Option<usize>,
    pub seed: u64,
    pub magnitude: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { k_rounds: None, copies: None, mst_k: None, seed: 0, magnitude: DEFAULT_PERTURBATION }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub edges: Vec<Edge>,
    pub rows: Vec<[f64; NUM_FEATURES]>,
    pub labels: Option<Vec<u8>>,
    pub sample_weights: Option<Vec<f64>>,
    pub solved_at_root: bool,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    pub fn with_labels(mut self, labels: LabeledEdgeSet) -> Result<Self> {
        if labels.labels.len() != self.rows.len() {
            return Err(Error::Labeling(format!("{} labels for {} rows", labels.labels.len(), self.rows.len())));
        }
        self.labels = Some(labels.labels);
        self.sample_weights = Some(labels.sample_weights);
        Ok(self)
    }
}

pub fn assemble_features(inst: &Instance, config: &FeatureConfig, tours: Option<&TourSet>) -> Result<FeatureMatrix> {
    let n = inst.n();
    if n < 4 {
        return Err(Error::Domain(format!("features need n >= 4, got {n}")));
    }
    let k = default_k(n);
    let local = local_features(inst);
    let lp = lp_features(inst, config.k_rounds.unwrap_or(k), config.copies.unwrap_or(k), config.seed, config.magnitude)?;
    let mst = mst_feature(inst, config.mst_k.unwrap_or(k))?;
    let rows = local
        .iter()
        .enumerate()
        .map(|(i, q)| [q[0], q[1], q[2], q[3], q[4], q[5], lp.r_hat[i], lp.r_tilde[i], mst[i]])
        .collect();
    let fm = FeatureMatrix {
        edges: complete_edges(n),
        rows,
        labels: None,
        sample_weights: None,
        solved_at_root: lp.solved_at_root.is_some(),
    };
    match tours {
        Some(t) => fm.with_labels(label_edges(inst, t)?),
        None => Ok(fm),
    }
}

/// Rounds to 12 significant digits and prints the shortest decimal that reads back to that value.
pub fn format_real(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float");
    format!("{rounded}")
}

pub fn write_features_csv<W: Write>(fm: &FeatureMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["u", "v"];
    header.extend(FEATURE_NAMES);
    if fm.labels.is_some() {
        header.push("label");
    }
    if fm.sample_weights.is_some() {
        header.push("sample_weight");
    }
    w.write_record(&header)?;
    for (i, (e, row)) in fm.edges.iter().zip(&fm.rows).enumerate() {
        let mut rec = vec![(e.u + 1).to_string(), (e.v + 1).to_string()];
        rec.extend(row.iter().map(|&x| format_real(x)));
        if let Some(l) = &fm.labels {
            rec.push(l[i].to_string());
        }
        if let Some(s) = &fm.sample_weights {
            rec.push(format_real(s[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R) -> Result<FeatureMatrix> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 11 || header[0] != "u" || header[1] != "v" || header[2..11] != FEATURE_NAMES {
        return Err(Error::Schema(format!("unexpected feature header: {}", header.join(","))));
    }
    let mut label_col = None;
    let mut weight_col = None;
    for (i, h) in header.iter().enumerate().skip(11) {
        match h.as_str() {
            "label" => label_col = Some(i),
            "sample_weight" => weight_col = Some(i),
            other => return Err(Error::Schema(format!("unknown feature column {other}"))),
        }
    }
    let mut fm = FeatureMatrix {
        edges: Vec::new(),
        rows: Vec::new(),
        labels: label_col.map(|_| Vec::new()),
        sample_weights: weight_col.map(|_| Vec::new()),
        solved_at_root: false,
    };
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Data { row, msg: format!("missing column {}", header[i]) })
        };
        let vertex = |i: usize| -> Result<usize> {
            let v: usize = field(i)?.trim().parse().map_err(|_| Error::Data { row, msg: format!("bad vertex in {}", header[i]) })?;
            if v == 0 {
                return Err(Error::Data { row, msg: "vertices are 1-indexed".into() });
            }
            Ok(v - 1)
        };
        let real = |i: usize| -> Result<f64> {
            field(i)?.trim().parse().map_err(|_| Error::Data { row, msg: format!("bad number in {}", header[i]) })
        };
        let (u, v) = (vertex(0)?, vertex(1)?);
        if u >= v {
            return Err(Error::Data { row, msg: "edge endpoints must satisfy u < v".into() });
        }
        let mut vals = [0.0; NUM_FEATURES];
        for (c, x) in vals.iter_mut().enumerate() {
            *x = real(c + 2)?;
        }
        fm.edges.push(Edge::new(u, v));
        fm.rows.push(vals);
        if let (Some(c), Some(l)) = (label_col, fm.labels.as_mut()) {
            match field(c)?.trim() {
                "0" => l.push(0),
                "1" => l.push(1),
                s => return Err(Error::Data { row, msg: format!("label must be 0 or 1, got {s}") }),
            }
        }
        if let (Some(c), Some(s)) = (weight_col, fm.sample_weights.as_mut()) {
            s.push(real(c)?);
        }
    }
    Ok(fm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::k4_distinct;
    use crate::tsplib::{generate_random_instance, ExplicitLayout};

    fn k3() -> Instance {
        let m = vec![0, 10, 20, 10, 0, 30, 20, 30, 0];
        Instance::from_matrix("k3", ExplicitLayout::FullMatrix, 3, m).unwrap()
    }

    fn uniform(n: usize) -> Instance {
        let mut m = vec![7; n * n];
        for i in 0..n {
            m[i * n + i] = 0;
        }
        Instance::from_matrix("u", ExplicitLayout::FullMatrix, n, m).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn k3_local_features() {
        let f = local_features(&k3());
        // edge order: (1,2), (1,3), (2,3)
        let e12 = f[0];
        let want = [11.0 / 31.0, 11.0 / 21.0, 11.0 / 31.0, 1.0, 1.0, 1.0];
        for (a, b) in e12.iter().zip(want) {
            assert!(close(*a, b), "{e12:?}");
        }
        let e23 = f[2];
        assert!(close(e23[0], 1.0));
        assert!(close(e23[3], 11.0 / 31.0));
    }

    #[test]
    fn uniform_local_features_are_one() {
        for row in local_features(&uniform(6)) {
            assert!(row.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn mst_levels() {
        let f = mst_feature(&k4_distinct(), 2).unwrap();
        // (1,2) (1,3) (1,4) (2,3) (2,4) (3,4)
        assert_eq!(f, vec![1.0, 0.5, 0.5, 1.0, 0.5, 1.0]);
        let f1 = mst_feature(&k4_distinct(), 1).unwrap();
        assert_eq!(f1, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let k5 = generate_random_instance(5, 2, 100.0).unwrap();
        assert_eq!(mst_feature(&k5, 2).unwrap().iter().filter(|&&x| x > 0.0).count(), 8);
    }

    #[test]
    fn mst_feature_scale_invariant() {
        let a = generate_random_instance(12, 9, 1000.0).unwrap();
        let n = a.n();
        let scaled: Vec<u64> = (0..n * n).map(|i| a.w(i / n, i % n) * 13).collect();
        let b = Instance::from_matrix("s", ExplicitLayout::FullMatrix, n, scaled).unwrap();
        assert_eq!(mst_feature(&a, 3).unwrap(), mst_feature(&b, 3).unwrap());
    }

    #[test]
    fn default_k_values() {
        assert_eq!(default_k(100), 7);
        assert_eq!(default_k(4), 2);
        assert_eq!(default_k(64), 6);
        assert_eq!(default_k(65), 7);
        assert_eq!(default_k(1000), 10);
    }

    #[test]
    fn labels() {
        let t = Tour::new(vec![0, 1, 2, 3], &k4_distinct()).unwrap();
        let one = TourSet { tours: vec![t], optimal_length: 12, truncated: false };
        let l = label_edges(&k4_distinct(), &one).unwrap();
        assert_eq!(l.positives(), 4);
        assert_eq!(l.sample_weights.iter().cloned().fold(0.0, f64::max), 1.0);

        let u = uniform(4);
        let all = crate::exact::enumerate_optimal_tours(&u, 32).unwrap();
        let l = label_edges(&u, &all).unwrap();
        assert_eq!(l.positives(), 6);
        assert!(l.sample_weights.iter().all(|&w| w == 1.0));

        let empty = TourSet { tours: vec![], optimal_length: 0, truncated: false };
        assert!(matches!(label_edges(&u, &empty), Err(Error::Labeling(_))));
    }

    #[test]
    fn assembled_shape_and_csv_round_trip() {
        let inst = k4_distinct();
        let fm = assemble_features(&inst, &FeatureConfig::default(), None).unwrap();
        assert_eq!(fm.len(), 6);
        assert!(fm.rows.iter().all(|r| r.len() == 9));

        let inst = generate_random_instance(15, 3, 1000.0).unwrap();
        let tours = crate::exact::enumerate_optimal_tours(&inst, 32).unwrap();
        let fm = assemble_features(&inst, &FeatureConfig::default(), Some(&tours)).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&fm, &mut buf).unwrap();
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back.edges, fm.edges);
        assert_eq!(back.labels, fm.labels);
        for (a, b) in back.rows.iter().zip(&fm.rows) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-11 * y.abs().max(1e-300));
            }
        }
        let mut again = Vec::new();
        write_features_csv(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn format_real_digits() {
        assert_eq!(format_real(11.0 / 31.0), "0.354838709677");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(0.5), "0.5");
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(matches!(read_features_csv("a,b\n1,2\n".as_bytes()), Err(Error::Schema(_))));
        let text = "u,v,q_a,q_b,q_c,q_d,q_e,q_f,r_hat,r_tilde,q_mst\n1,2,1,1,1,1,1,1,0,0,x\n";
        assert!(matches!(read_features_csv(text.as_bytes()), Err(Error::Data { row: 1, .. })));
    }
}
