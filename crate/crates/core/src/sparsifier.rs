//! Weighted logistic-regression edge classifier, pruning, and tour insertion.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FEATURE_NAMES, NUM_FEATURES};
use crate::graph::{complete_edges, successive_mst_extract, Edge, Tour, WeightedGraph};
use crate::tsplib::Instance;

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// (negative, positive)
    pub class_weights: (f64, f64),
    pub undersample: bool,
    pub seed: u64,
    pub learning_rate: f64,
    /// Step size at epoch `t` is `learning_rate / (1 + decay * t)`.
    pub decay: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            class_weights: (0.01, 0.99),
            undersample: true,
            seed: 0,
            learning_rate: 1.0,
            decay: 1e-3,
            epochs: 3000,
            l2: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.fp + self.tn + self.fn_;
        (self.tp + self.tn) as f64 / total.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    /// Final weighted loss on the (undersampled) training set, without the penalty term.
    pub loss: f64,
    pub samples: usize,
    /// Counts on every training row at threshold 0.5.
    pub confusion: Confusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub training: TrainingSummary,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Model {
    fn score(&self, row: &[f64; NUM_FEATURES]) -> f64 {
        let mut z = self.bias;
        for c in 0..NUM_FEATURES {
            z += self.weights[c] * (row[c] - self.means[c]) / self.stds[c];
        }
        sigmoid(z)
    }

    fn check_schema(&self) -> Result<()> {
        if self.feature_names.len() != NUM_FEATURES || self.feature_names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b) {
            return Err(Error::Schema(format!("model features [{}] do not match [{}]", self.feature_names.join(","), FEATURE_NAMES.join(","))));
        }
        for v in [&self.means, &self.stds, &self.weights] {
            if v.len() != NUM_FEATURES {
                return Err(Error::Schema(format!("model vector of length {} for {NUM_FEATURES} features", v.len())));
            }
        }
        if self.stds.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Schema("standard deviations must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Schema(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let m: Model = serde_json::from_str(text)?;
        if m.version != MODEL_VERSION {
            return Err(Error::Schema(format!("model version {} is not supported (expected {MODEL_VERSION})", m.version)));
        }
        m.check_schema()?;
        Ok(m)
    }
}

struct Sample {
    x: [f64; NUM_FEATURES],
    y: f64,
    weight: f64,
}

/// Trains on labeled matrices; each matrix is one instance.
pub fn train_model(data: &[FeatureMatrix], cfg: &TrainConfig) -> Result<Model> {
    let (wn, wp) = cfg.class_weights;
    if !(wn > 0.0 && wp > 0.0) || ((wn + wp) - 1.0).abs() > 1e-9 {
        return Err(Error::Training(format!("class weights must be positive and sum to 1, got ({wn}, {wp})")));
    }
    if cfg.epochs == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Training("need at least one epoch and a positive learning rate".into()));
    }
    let mut row = 0;
    for fm in data {
        let labels = fm.labels.as_ref().ok_or_else(|| Error::Training("training matrix without labels".into()))?;
        if labels.len() != fm.rows.len() || fm.sample_weights.as_ref().is_some_and(|s| s.len() != fm.rows.len()) {
            return Err(Error::Training("label or weight column length differs from row count".into()));
        }
        for (i, r) in fm.rows.iter().enumerate() {
            row += 1;
            if let Some(c) = r.iter().position(|x| !x.is_finite()) {
                return Err(Error::Data { row, msg: format!("non-finite {}", FEATURE_NAMES[c]) });
            }
            if let Some(s) = &fm.sample_weights {
                if !s[i].is_finite() || s[i] < 0.0 {
                    return Err(Error::Data { row, msg: "sample weight must be finite and non-negative".into() });
                }
            }
        }
    }
    let pos: usize = data.iter().map(|fm| fm.labels.as_ref().unwrap().iter().filter(|&&l| l == 1).count()).sum();
    let total: usize = data.iter().map(|fm| fm.rows.len()).sum();
    if pos == 0 || pos == total {
        return Err(Error::Training("training data must contain both classes".into()));
    }

    // per-instance balanced undersampling of negatives
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::new();
    for fm in data {
        let labels = fm.labels.as_ref().unwrap();
        let sw = |i: usize| fm.sample_weights.as_ref().map_or(1.0, |s| s[i]);
        let negatives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
        let n_pos = labels.len() - negatives.len();
        let chosen: Vec<usize> = if cfg.undersample && negatives.len() > n_pos {
            let mut picked: Vec<usize> = sample(&mut rng, negatives.len(), n_pos).into_iter().map(|k| negatives[k]).collect();
            picked.sort_unstable();
            picked
        } else {
            negatives
        };
        for i in (0..labels.len()).filter(|&i| labels[i] == 1) {
            samples.push(Sample { x: fm.rows[i], y: 1.0, weight: wp * sw(i) });
        }
        for i in chosen {
            samples.push(Sample { x: fm.rows[i], y: 0.0, weight: wn * sw(i) });
        }
    }

    let count = samples.len() as f64;
    let mut means = [0.0; NUM_FEATURES];
    for s in &samples {
        for c in 0..NUM_FEATURES {
            means[c] += s.x[c];
        }
    }
    for m in &mut means {
        *m /= count;
    }
    let mut stds = [0.0; NUM_FEATURES];
    for s in &samples {
        for c in 0..NUM_FEATURES {
            stds[c] += (s.x[c] - means[c]).powi(2);
        }
    }
    for sd in &mut stds {
        *sd = (*sd / count).sqrt();
        if *sd <= 1e-12 {
            *sd = 1.0;
        }
    }
    let z: Vec<[f64; NUM_FEATURES]> = samples
        .iter()
        .map(|s| {
            let mut r = [0.0; NUM_FEATURES];
            for c in 0..NUM_FEATURES {
                r[c] = (s.x[c] - means[c]) / stds[c];
            }
            r
        })
        .collect();
    let wsum: f64 = samples.iter().map(|s| s.weight).sum();
    if !(wsum > 0.0) {
        return Err(Error::Training("all effective sample weights are zero".into()));
    }

    let mut w = [0.0; NUM_FEATURES];
    let mut b = 0.0;
    let mut loss = 0.0;
    for epoch in 0..cfg.epochs {
        let mut gw = [0.0; NUM_FEATURES];
        let mut gb = 0.0;
        loss = 0.0;
        for (s, x) in samples.iter().zip(&z) {
            let mut t = b;
            for c in 0..NUM_FEATURES {
                t += w[c] * x[c];
            }
            let p = sigmoid(t);
            let err = s.weight * (p - s.y);
            for c in 0..NUM_FEATURES {
                gw[c] += err * x[c];
            }
            gb += err;
            // log(1 + e^t) - y t, computed stably
            loss += s.weight * (t.max(0.0) + (-t.abs()).exp().ln_1p() - s.y * t);
        }
        loss /= wsum;
        let step = cfg.learning_rate / (1.0 + cfg.decay * epoch as f64);
        for c in 0..NUM_FEATURES {
            w[c] -= step * (gw[c] / wsum + cfg.l2 * w[c]);
        }
        b -= step * gb / wsum;
    }

    let mut model = Model {
        version: MODEL_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        means: means.to_vec(),
        stds: stds.to_vec(),
        weights: w.to_vec(),
        bias: b,
        threshold: 0.5,
        seed: cfg.seed,
        train_config: cfg.clone(),
        training: TrainingSummary { loss, samples: samples.len(), confusion: Confusion::default() },
    };
    let mut conf = Confusion::default();
    for fm in data {
        conf = add_confusion(conf, confusion(&model, fm, 0.5)?);
    }
    model.training.confusion = conf;
    Ok(model)
}

fn add_confusion(a: Confusion, b: Confusion) -> Confusion {
    Confusion { tp: a.tp + b.tp, fp: a.fp + b.fp, tn: a.tn + b.tn, fn_: a.fn_ + b.fn_ }
}

/// Confusion counts of the model's decisions against the matrix labels.
pub fn confusion(model: &Model, fm: &FeatureMatrix, threshold: f64) -> Result<Confusion> {
    let labels = fm.labels.as_ref().ok_or_else(|| Error::Labeling("matrix has no labels".into()))?;
    let pred = predict_mask(model, fm, Some(threshold))?;
    let mut c = Confusion::default();
    for (&keep, &l) in pred.keep.iter().zip(labels) {
        match (keep, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub keep: Vec<bool>,
    pub probability: Vec<f64>,
}

/// Keeps an edge iff its predicted probability is at least the threshold
/// (the model's own unless overridden).
pub fn predict_mask(model: &Model, fm: &FeatureMatrix, threshold: Option<f64>) -> Result<Prediction> {
    model.check_schema()?;
    let t = threshold.unwrap_or(model.threshold);
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("threshold must be non-negative, got {t}")));
    }
    let probability: Vec<f64> = fm.rows.iter().map(|r| model.score(r)).collect();
    let keep = probability.iter().map(|&p| p >= t).collect();
    Ok(Prediction { keep, probability })
}

/// A base instance together with the subset of its edges that survived pruning.
#[derive(Clone, Debug)]
pub struct SparsifiedInstance {
    base: Instance,
    retained: Vec<Edge>,
    inserted: Vec<Edge>,
}

impl SparsifiedInstance {
    /// `retained` must be edges of `base`; it is sorted and deduplicated.
    pub fn new(base: Instance, mut retained: Vec<Edge>) -> Result<Self> {
        let n = base.n();
        if retained.iter().any(|e| e.u >= e.v || e.v >= n) {
            return Err(Error::Validation("retained edge outside the base instance".into()));
        }
        retained.sort_unstable();
        retained.dedup();
        Ok(SparsifiedInstance { base, retained, inserted: Vec::new() })
    }

    /// Reads a pruned instance back from an instance carrying an edge list.
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        let edges = inst.edge_list().map(<[Edge]>::to_vec).unwrap_or_else(|| complete_edges(inst.n()));
        Self::new(inst.clone().without_edge_list(), edges)
    }

    pub fn base(&self) -> &Instance {
        &self.base
    }

    pub fn retained(&self) -> &[Edge] {
        &self.retained
    }

    /// Edges that were added by tour insertion rather than kept by the classifier.
    pub fn inserted(&self) -> &[Edge] {
        &self.inserted
    }

    pub fn m_hat(&self) -> usize {
        self.retained.len()
    }

    pub fn retention_rate(&self) -> f64 {
        self.m_hat() as f64 / self.base.m() as f64
    }

    pub fn pruning_rate(&self) -> f64 {
        1.0 - self.retention_rate()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.retained.binary_search(&e).is_ok()
    }

    pub fn contains_tour(&self, t: &Tour) -> bool {
        t.order().len() == self.base.n() && t.edges().iter().all(|&e| self.contains(e))
    }

    /// The instance as an explicit edge list, ready to be written.
    pub fn to_instance(&self) -> Result<Instance> {
        self.base.clone().with_edge_list(self.retained.clone())
    }
}

/// Keeps the edges whose mask entry is true; `keep` is indexed in lexicographic edge order.
pub fn prune_instance(inst: &Instance, keep: &[bool]) -> Result<SparsifiedInstance> {
    let edges = complete_edges(inst.n());
    if keep.len() != edges.len() {
        return Err(Error::Validation(format!("mask has {} entries for {} edges", keep.len(), edges.len())));
    }
    let retained = edges.into_iter().zip(keep).filter(|(_, &k)| k).map(|(e, _)| e).collect();
    SparsifiedInstance::new(inst.clone(), retained)
}

/// Adds every edge of every tour; edges that were not already retained are recorded as inserted.
pub fn insert_tour_edges(s: &SparsifiedInstance, tours: &[Tour]) -> Result<SparsifiedInstance> {
    let n = s.base.n();
    let mut out = s.clone();
    for t in tours {
        let check = Tour::new(t.order().to_vec(), &s.base)?;
        if check.order().len() != n || check.length() != t.length() {
            return Err(Error::Validation("tour does not belong to the base instance".into()));
        }
        for e in t.edges() {
            if let Err(pos) = out.retained.binary_search(&e) {
                out.retained.insert(pos, e);
                out.inserted.push(e);
            }
        }
    }
    out.inserted.sort_unstable();
    out.inserted.dedup();
    Ok(out)
}

/// Keeps only the `k (n - 1)` edges of `k` successive minimum spanning trees.
pub fn mst_only_sparsify(inst: &Instance, k: usize) -> Result<SparsifiedInstance> {
    if k == 0 {
        return Err(Error::Domain("MST-only sparsification needs k >= 1".into()));
    }
    let ex = successive_mst_extract(&WeightedGraph::complete(inst), k)?;
    SparsifiedInstance::new(inst.clone(), ex.edges())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::double_tree_tours;
    use crate::tsplib::generate_random_instance;

    /// Positives have q_mst = 1, negatives 0; other columns are noise.
    pub(crate) fn separable(seed: u64) -> FeatureMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let y = (i % 3 == 0) as u8;
            let mut r = [0.0; NUM_FEATURES];
            for x in r.iter_mut().take(8) {
                *x = rng.gen_range(0.0..1.0);
            }
            r[8] = y as f64;
            rows.push(r);
            labels.push(y);
        }
        FeatureMatrix {
            edges: complete_edges(12).into_iter().take(60).collect(),
            rows,
            labels: Some(labels),
            sample_weights: None,
            solved_at_root: false,
        }
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let fm = separable(1);
        let model = train_model(std::slice::from_ref(&fm), &TrainConfig::default()).unwrap();
        let pred = predict_mask(&model, &fm, Some(0.5)).unwrap();
        let labels: Vec<bool> = fm.labels.as_ref().unwrap().iter().map(|&l| l == 1).collect();
        assert_eq!(pred.keep, labels);
        assert_eq!(model.training.confusion.accuracy(), 1.0);
    }

    #[test]
    fn training_is_deterministic_and_rejects_one_class() {
        let fm = separable(2);
        let a = train_model(std::slice::from_ref(&fm), &TrainConfig::default()).unwrap();
        let b = train_model(std::slice::from_ref(&fm), &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        let mut all_pos = fm.clone();
        all_pos.labels = Some(vec![1; 60]);
        assert!(matches!(train_model(&[all_pos], &TrainConfig::default()), Err(Error::Training(_))));
        let mut bad = fm;
        bad.rows[5][2] = f64::NAN;
        assert!(matches!(train_model(&[bad], &TrainConfig::default()), Err(Error::Data { row: 6, .. })));
    }

    #[test]
    fn threshold_boundaries() {
        let fm = separable(3);
        let model = train_model(std::slice::from_ref(&fm), &TrainConfig::default()).unwrap();
        assert!(predict_mask(&model, &fm, Some(0.0)).unwrap().keep.iter().all(|&k| k));
        assert!(predict_mask(&model, &fm, Some(1.01)).unwrap().keep.iter().all(|&k| !k));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let fm = separable(4);
        let model = train_model(std::slice::from_ref(&fm), &TrainConfig::default()).unwrap();
        let back = Model::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        let mut renamed = model.clone();
        renamed.feature_names[0] = "other".into();
        let text = serde_json::to_string(&renamed).unwrap();
        assert!(matches!(Model::from_json(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn pruning_and_insertion() {
        let inst = generate_random_instance(5, 7, 100.0).unwrap();
        let all = prune_instance(&inst, &[true; 10]).unwrap();
        assert_eq!((all.m_hat(), all.pruning_rate()), (10, 0.0));
        let none = prune_instance(&inst, &[false; 10]).unwrap();
        assert_eq!(none.m_hat(), 0);

        let tour = Tour::new(vec![0, 1, 2, 3, 4], &inst).unwrap();
        let with = insert_tour_edges(&none, &[tour.clone()]).unwrap();
        assert_eq!((with.m_hat(), with.inserted().len(), with.pruning_rate()), (5, 5, 0.5));
        assert!(with.contains_tour(&tour));
        let again = insert_tour_edges(&with, &[tour]).unwrap();
        assert_eq!(again.m_hat(), 5);

        let (l, r) = double_tree_tours(&inst).unwrap();
        let grown = insert_tour_edges(&none, &[l.clone(), r.clone()]).unwrap();
        assert!(grown.m_hat() <= 10);
        assert!(grown.contains_tour(&l) && grown.contains_tour(&r));
    }

    #[test]
    fn mst_only_counts() {
        let inst = generate_random_instance(100, 1, 1e6).unwrap();
        let s = mst_only_sparsify(&inst, 7).unwrap();
        assert_eq!(s.m_hat(), 693);
        assert!((s.pruning_rate() - 0.86).abs() < 1e-3);
        let k4 = crate::graph::tests::k4_distinct();
        assert_eq!(mst_only_sparsify(&k4, 2).unwrap().m_hat(), 6);
    }
}
