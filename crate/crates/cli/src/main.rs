use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use tsp_sparsify::eval;
use tsp_sparsify::exact::{self, BranchCutConfig, DEFAULT_ENUMERATION_CAP};
use tsp_sparsify::features::{self, FeatureConfig, DEFAULT_PERTURBATION};
use tsp_sparsify::sparsifier::{self, Model, SparsifiedInstance, TrainConfig};
use tsp_sparsify::tsplib::{self, Instance};
use tsp_sparsify::{Tour, TourSet};

/// Sparsify TSP instances with a learned edge classifier.
#[derive(Parser, Debug)]
#[command(name = "tspsparse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write random EUC_2D instances.
    Generate(GenerateArgs),
    /// Solve an instance exactly; prints the tour set as JSON.
    Solve(SolveArgs),
    /// Compute the per-edge feature CSV.
    Features(FeaturesArgs),
    /// Train the logistic-regression edge classifier.
    Train(TrainArgs),
    /// Prune an instance with a model or with successive spanning trees.
    Sparsify(SparsifyArgs),
    /// Compare the optimum of a pruned instance with the original.
    Evaluate(EvaluateArgs),
    /// Summarize evaluation reports.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "box", default_value_t = 1e6)]
    box_size: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    HeldKarp,
    Bc,
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    /// Maximum LP solves for each branch-and-cut search.
    #[arg(long, default_value_t = 1_000_000)]
    budget: usize,
    /// Wall-clock limit in seconds for each branch-and-cut search.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Fractional edges evaluated by strong branching (1 = branch on the edge closest to 0.5).
    #[arg(long, default_value_t = 1)]
    strong_branching: usize,
}

impl BudgetArgs {
    fn config(&self) -> BranchCutConfig {
        BranchCutConfig {
            lp_budget: self.budget,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            strong_candidates: self.strong_branching,
            ..BranchCutConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: PathBuf,
    /// Enumerate every optimal tour (up to --cap).
    #[arg(long)]
    all_optimal: bool,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    #[arg(long, value_enum, default_value_t = Method::Bc)]
    method: Method,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// Cutting-plane rounds (default ceil(log2 n)).
    #[arg(long)]
    k_rounds: Option<usize>,
    /// Perturbed LP copies (default ceil(log2 n)).
    #[arg(long)]
    copies: Option<usize>,
    /// Successive spanning-tree levels (default ceil(log2 n)).
    #[arg(long)]
    mst_k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative size of the objective perturbation.
    #[arg(long, default_value_t = DEFAULT_PERTURBATION)]
    magnitude: f64,
}

impl FeatureArgs {
    fn config(&self) -> FeatureConfig {
        FeatureConfig {
            k_rounds: self.k_rounds,
            copies: self.copies,
            mst_k: self.mst_k,
            seed: self.seed,
            magnitude: self.magnitude,
        }
    }
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    instance: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Tour set JSON from `solve --all-optimal`; adds label and sample_weight columns.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Labeled feature CSVs, one per instance.
    #[arg(long, num_args = 1.., required = true)]
    data: Vec<PathBuf>,
    /// Negative and positive class weights.
    #[arg(long, default_value = "0.01,0.99")]
    class_weights: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    /// Train on all negatives instead of a balanced sample.
    #[arg(long)]
    no_undersample: bool,
    /// Decision threshold stored in the model.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SparsifyArgs {
    instance: PathBuf,
    #[arg(long, required_unless_present = "mst_only")]
    model: Option<PathBuf>,
    /// Overrides the model's threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Add the edges of both double-tree tours so the result contains a tour.
    #[arg(long)]
    insert_double_tree: bool,
    /// Keep only the edges of k successive minimum spanning trees.
    #[arg(long, conflicts_with = "model")]
    mst_only: bool,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    instance: PathBuf,
    pruned: PathBuf,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Append a runtime_ms column (makes the output run-dependent).
    #[arg(long)]
    runtime: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long = "in", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "1.0,1.02,1.05")]
    bounds: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A command-line mistake that clap cannot detect.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

enum Status {
    Done,
    BudgetExhausted,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    tsplib::parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn parse_list(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("invalid {what} value '{s}'"))))
        .collect()
}

fn generate(a: &GenerateArgs) -> anyhow::Result<Status> {
    if !(a.box_size > 0.0) {
        return Err(usage("--box must be positive"));
    }
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for i in 0..a.count {
        let inst = tsplib::generate_random_instance(a.n, a.seed + i, a.box_size)?;
        let path = a.out_dir.join(format!("{}.tsp", inst.name()));
        write_output(&path, tsplib::write_instance(&inst).as_bytes())?;
        println!("{}", path.display());
    }
    Ok(Status::Done)
}

fn solve(a: &SolveArgs) -> anyhow::Result<Status> {
    let inst = read_instance(&a.instance)?;
    let config = a.budget.config();
    let (set, status) = match (a.method, a.all_optimal) {
        (Method::HeldKarp, false) => {
            let t = exact::held_karp(&inst)?;
            let len = t.length();
            (TourSet { tours: vec![t.canonical()], optimal_length: len, truncated: false }, Status::Done)
        }
        (Method::HeldKarp, true) => return Err(usage("--all-optimal requires --method bc")),
        (Method::Bc, true) => (exact::enumerate_optimal_tours_with(&inst, a.cap, &config)?, Status::Done),
        (Method::Bc, false) => {
            let out = exact::branch_and_cut_with(&inst, None, &config)?;
            let t = out.tour.context("no tour found within budget")?;
            let len = t.length();
            let status = if out.proven { Status::Done } else { Status::BudgetExhausted };
            info!("{} nodes, {} LP solves", out.nodes, out.lp_solves);
            (TourSet { tours: vec![t.canonical()], optimal_length: len, truncated: false }, status)
        }
    };
    let json = serde_json::to_string_pretty(&set)? + "\n";
    match &a.out {
        Some(p) => write_output(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    if let Status::BudgetExhausted = status {
        eprintln!("budget exhausted: tour of length {} is not proven optimal", set.optimal_length);
    }
    Ok(status)
}

fn read_tour_set(path: &Path, inst: &Instance) -> anyhow::Result<TourSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let set: TourSet = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    // recompute lengths against the instance rather than trusting the file
    let tours = set
        .tours
        .iter()
        .map(|t| Tour::new(t.order().to_vec(), inst))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("tours in {} do not fit the instance", path.display()))?;
    if tours.iter().any(|t| t.length() != set.optimal_length) {
        bail!("tour lengths in {} disagree with optimal_length {}", path.display(), set.optimal_length);
    }
    Ok(TourSet { tours, ..set })
}

fn features_cmd(a: &FeaturesArgs) -> anyhow::Result<Status> {
    let inst = read_instance(&a.instance)?;
    let tours = a.labels.as_deref().map(|p| read_tour_set(p, &inst)).transpose()?;
    let fm = features::assemble_features(&inst, &a.features.config(), tours.as_ref())?;
    if fm.solved_at_root {
        info!("{}: the cutting-plane loop found an optimal tour", inst.name());
    }
    let mut buf = Vec::new();
    features::write_features_csv(&fm, &mut buf)?;
    write_output(&a.out, &buf)?;
    Ok(Status::Done)
}

fn train(a: &TrainArgs) -> anyhow::Result<Status> {
    let cw = parse_list(&a.class_weights, "class weight")?;
    if cw.len() != 2 {
        return Err(usage("--class-weights takes two values: negative,positive"));
    }
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(usage("--threshold must lie in [0, 1]"));
    }
    let mut cfg = TrainConfig { class_weights: (cw[0], cw[1]), seed: a.seed, undersample: !a.no_undersample, ..TrainConfig::default() };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(l) = a.learning_rate {
        cfg.learning_rate = l;
    }
    if let Some(l) = a.l2 {
        cfg.l2 = l;
    }
    let mut data = Vec::new();
    for p in &a.data {
        let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        data.push(features::read_features_csv(file).with_context(|| format!("reading {}", p.display()))?);
    }
    let mut model = sparsifier::train_model(&data, &cfg)?;
    model.threshold = a.threshold;
    let c = model.training.confusion;
    eprintln!(
        "trained on {} samples: loss {:.6}, tp {} fp {} tn {} fn {}",
        model.training.samples, model.training.loss, c.tp, c.fp, c.tn, c.fn_
    );
    write_output(&a.out, (model.to_json()? + "\n").as_bytes())?;
    Ok(Status::Done)
}

fn sparsify(a: &SparsifyArgs) -> anyhow::Result<Status> {
    let inst = read_instance(&a.instance)?.without_edge_list();
    let pruned = if a.mst_only {
        let k = a.k.unwrap_or_else(|| features::default_k(inst.n()));
        sparsifier::mst_only_sparsify(&inst, k)?
    } else {
        let path = a.model.as_ref().ok_or_else(|| usage("--model is required unless --mst-only is given"))?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let model = Model::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
        let fm = features::assemble_features(&inst, &a.features.config(), None)?;
        let pred = sparsifier::predict_mask(&model, &fm, a.threshold)?;
        sparsifier::prune_instance(&inst, &pred.keep)?
    };
    let result = if a.insert_double_tree {
        let (l, r) = tsp_sparsify::double_tree_tours(&inst)?;
        sparsifier::insert_tour_edges(&pruned, &[l, r])?
    } else {
        pruned
    };
    eprintln!(
        "{}: kept {} of {} edges ({} inserted), pruning rate {:.4}",
        inst.name(),
        result.m_hat(),
        inst.m(),
        result.inserted().len(),
        result.pruning_rate()
    );
    let text = tsplib::write_sparsified(&result)?;
    write_output(&a.out, text.as_bytes())?;
    Ok(Status::Done)
}

fn evaluate(a: &EvaluateArgs) -> anyhow::Result<Status> {
    let inst = read_instance(&a.instance)?.without_edge_list();
    let pruned_inst = read_instance(&a.pruned)?;
    let s = SparsifiedInstance::from_instance(&pruned_inst)?;
    let n = inst.n();
    let same = s.base().n() == n && (0..n).all(|u| (0..n).all(|v| s.base().w(u, v) == inst.w(u, v)));
    if !same {
        bail!("{} is not a pruned version of {}", a.pruned.display(), a.instance.display());
    }
    let config = a.budget.config();
    let report = eval::evaluate_instance(&inst, &s, &config)?;
    let mut buf = Vec::new();
    eval::write_reports_csv(std::slice::from_ref(&report), a.runtime, &mut buf)?;
    write_output(&a.out, &buf)?;
    Ok(if report.solver_proven { Status::Done } else { Status::BudgetExhausted })
}

fn report(a: &ReportArgs) -> anyhow::Result<Status> {
    let bounds = parse_list(&a.bounds, "bound")?;
    if bounds.iter().any(|&b| !(b >= 1.0)) {
        return Err(usage("ratio bounds must be at least 1"));
    }
    let mut reports = Vec::new();
    for p in &a.inputs {
        let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        reports.extend(eval::read_reports_csv(file, &p.display().to_string()).with_context(|| format!("reading {}", p.display()))?);
    }
    if reports.is_empty() {
        bail!("the report files contain no rows");
    }
    let rows = eval::aggregate_summary(&reports, &bounds)?;
    if let Some(out) = &a.out {
        let mut buf = Vec::new();
        eval::write_summary_csv(&rows, &bounds, &mut buf)?;
        write_output(out, &buf)?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(eval::render_summary(&rows, &bounds).as_bytes())?;
    Ok(Status::Done)
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Features(a) => features_cmd(a),
        Command::Train(a) => train(a),
        Command::Sparsify(a) => sparsify(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::BudgetExhausted) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
