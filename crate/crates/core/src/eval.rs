//! Optimality ratio and pruning-rate reports for sparsified instances.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{branch_and_cut_with, branch_and_cut_restricted, BranchCutConfig};
use crate::features::format_real;
use crate::graph::Tour;
use crate::sparsifier::SparsifiedInstance;
use crate::tsplib::{Instance, Weight};

pub const DEFAULT_BOUNDS: [f64; 3] = [1.0, 1.02, 1.05];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    ProvenInfeasible,
    /// No tour was found and the search ran out of budget.
    Unknown,
}

impl Feasibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Feasibility::Feasible => "feasible",
            Feasibility::ProvenInfeasible => "infeasible",
            Feasibility::Unknown => "unknown",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "feasible" => Some(Feasibility::Feasible),
            "infeasible" => Some(Feasibility::ProvenInfeasible),
            "unknown" => Some(Feasibility::Unknown),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub instance: String,
    /// Summary group, usually the report file the row came from.
    pub group: String,
    pub n: usize,
    pub m: usize,
    pub m_hat: usize,
    pub pruning_rate: f64,
    pub feasibility: Feasibility,
    pub optimal_length: Weight,
    pub pruned_length: Option<Weight>,
    /// Pruned over original optimum; `None` unless a pruned tour is known.
    pub ratio: Option<f64>,
    /// Both lengths are proven optimal (or infeasibility is proven).
    pub solver_proven: bool,
    pub runtime_ms: Option<f64>,
}

impl EvaluationReport {
    pub fn retention_rate(&self) -> f64 {
        self.m_hat as f64 / self.m as f64
    }
}

/// Solves the full instance once so several sparsifications can be scored against it.
pub fn solve_reference(inst: &Instance, budget: &BranchCutConfig) -> Result<(Tour, bool)> {
    let out = branch_and_cut_with(inst, None, budget)?;
    match out.tour {
        Some(t) => Ok((t, out.proven)),
        None => Err(Error::Solver("no tour found for the full instance within budget".into())),
    }
}

pub fn evaluate_instance(inst: &Instance, s: &SparsifiedInstance, budget: &BranchCutConfig) -> Result<EvaluationReport> {
    let started = Instant::now();
    let (opt, proven) = solve_reference(inst, budget)?;
    let mut r = evaluate_against(s, &opt, proven, budget)?;
    r.runtime_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    Ok(r)
}

/// Scores `s` against a known optimal tour of its base instance.
pub fn evaluate_against(
    s: &SparsifiedInstance,
    optimum: &Tour,
    optimum_proven: bool,
    budget: &BranchCutConfig,
) -> Result<EvaluationReport> {
    let started = Instant::now();
    let base = s.base();
    let opt_len = optimum.length();
    // pruning cannot shorten the optimum, so a surviving optimal tour settles it
    let (pruned, feasibility, proven) = if s.contains_tour(optimum) {
        (Some(opt_len), Feasibility::Feasible, optimum_proven)
    } else if s.m_hat() < base.n() {
        (None, Feasibility::ProvenInfeasible, true)
    } else {
        let out = branch_and_cut_restricted(base, s.retained(), &[], budget)?;
        match out.tour {
            Some(t) => (Some(t.length()), Feasibility::Feasible, out.proven && optimum_proven),
            None if out.proven => (None, Feasibility::ProvenInfeasible, true),
            None => (None, Feasibility::Unknown, false),
        }
    };
    Ok(EvaluationReport {
        instance: base.name().to_string(),
        group: String::new(),
        n: base.n(),
        m: base.m(),
        m_hat: s.m_hat(),
        pruning_rate: s.pruning_rate(),
        feasibility,
        optimal_length: opt_len,
        pruned_length: pruned,
        ratio: pruned.map(|l| l as f64 / opt_len as f64),
        solver_proven: proven,
        runtime_ms: Some(started.elapsed().as_secs_f64() * 1e3),
    })
}

const REPORT_HEADER: [&str; 10] =
    ["instance", "n", "m", "m_hat", "pruning_rate", "feasible", "optimal_length", "pruned_length", "optimality_ratio", "solver_proven"];

fn ratio_field(r: &EvaluationReport) -> String {
    match (r.ratio, r.feasibility) {
        (Some(x), _) => format_real(x),
        (None, Feasibility::ProvenInfeasible) => "inf".into(),
        (None, _) => String::new(),
    }
}

/// Writes reports as CSV. Runtimes vary between runs, so they are only written on request.
pub fn write_reports_csv<W: Write>(reports: &[EvaluationReport], include_runtime: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REPORT_HEADER.to_vec();
    if include_runtime {
        header.push("runtime_ms");
    }
    w.write_record(&header)?;
    for r in reports {
        let mut rec = vec![
            r.instance.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.m_hat.to_string(),
            format_real(r.pruning_rate),
            r.feasibility.as_str().to_string(),
            r.optimal_length.to_string(),
            r.pruned_length.map(|l| l.to_string()).unwrap_or_default(),
            ratio_field(r),
            r.solver_proven.to_string(),
        ];
        if include_runtime {
            rec.push(r.runtime_ms.map(|t| format!("{t:.3}")).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R, group: &str) -> Result<Vec<EvaluationReport>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() < REPORT_HEADER.len() || header[..REPORT_HEADER.len()] != REPORT_HEADER {
        return Err(Error::Schema(format!("unexpected report header: {}", header.join(","))));
    }
    let runtime_col = header.iter().position(|h| h == "runtime_ms");
    let mut out = Vec::new();
    for (idx, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let bad = |c: &str| Error::Data { row, msg: format!("bad value in column {c}") };
        let get = |i: usize| rec.get(i).unwrap_or("").trim();
        let int = |i: usize| -> Result<u64> { get(i).parse().map_err(|_| bad(REPORT_HEADER[i])) };
        let real = |i: usize| -> Result<f64> { get(i).parse().map_err(|_| bad(REPORT_HEADER[i])) };
        let feasibility = Feasibility::parse(get(5)).ok_or_else(|| bad("feasible"))?;
        let pruned_length = if get(7).is_empty() { None } else { Some(int(7)?) };
        let optimal_length = int(6)?;
        // derived columns are recomputed so a re-read report is exact
        if !matches!(get(8), "" | "inf") {
            real(8)?;
        }
        let ratio = pruned_length.map(|l| l as f64 / optimal_length as f64);
        let (m, m_hat) = (int(2)? as usize, int(3)? as usize);
        real(4)?;
        let solver_proven = match get(9) {
            "true" => true,
            "false" => false,
            _ => return Err(bad("solver_proven")),
        };
        let runtime_ms = match runtime_col {
            Some(c) if !get(c).is_empty() => Some(get(c).parse().map_err(|_| bad("runtime_ms"))?),
            _ => None,
        };
        out.push(EvaluationReport {
            instance: get(0).to_string(),
            group: group.to_string(),
            n: int(1)? as usize,
            m,
            m_hat,
            pruning_rate: 1.0 - m_hat as f64 / m as f64,
            feasibility,
            optimal_length,
            pruned_length,
            ratio,
            solver_proven,
            runtime_ms,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub count: usize,
    pub mean_pruning_rate: f64,
    /// Over feasible reports only.
    pub mean_ratio: Option<f64>,
    /// Infinite when any report is proven infeasible.
    pub max_ratio: Option<f64>,
    /// For each bound: reports with ratio equal to 1 (for a bound of exactly 1) or below the bound.
    pub within: Vec<usize>,
    pub infeasible: usize,
    pub unknown: usize,
}

fn summarize(group: &str, reports: &[&EvaluationReport], bounds: &[f64]) -> SummaryRow {
    let count = reports.len();
    let mean_pruning_rate = reports.iter().map(|r| r.pruning_rate).sum::<f64>() / count as f64;
    let ratios: Vec<f64> = reports.iter().filter_map(|r| r.ratio).collect();
    let infeasible = reports.iter().filter(|r| r.feasibility == Feasibility::ProvenInfeasible).count();
    let unknown = reports.iter().filter(|r| r.feasibility == Feasibility::Unknown).count();
    let mean_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    let max_ratio = if infeasible > 0 {
        Some(f64::INFINITY)
    } else {
        ratios.iter().copied().reduce(f64::max)
    };
    let within = bounds
        .iter()
        .map(|&b| ratios.iter().filter(|&&x| if b == 1.0 { x == 1.0 } else { x < b }).count())
        .collect();
    SummaryRow { group: group.to_string(), count, mean_pruning_rate, mean_ratio, max_ratio, within, infeasible, unknown }
}

/// One row per group in first-seen order, then an `all` row.
pub fn aggregate_summary(reports: &[EvaluationReport], bounds: &[f64]) -> Result<Vec<SummaryRow>> {
    if reports.is_empty() {
        return Err(Error::Domain("nothing to summarize".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&EvaluationReport>> = BTreeMap::new();
    for r in reports {
        if !groups.contains_key(r.group.as_str()) {
            order.push(&r.group);
        }
        groups.entry(&r.group).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> = order.iter().map(|g| summarize(g, &groups[g], bounds)).collect();
    if order.len() > 1 || order[0] != "all" {
        let all: Vec<&EvaluationReport> = reports.iter().collect();
        rows.push(summarize("all", &all, bounds));
    }
    Ok(rows)
}

fn bound_label(b: f64) -> String {
    if b == 1.0 {
        "ratio_eq_1".into()
    } else {
        format!("ratio_lt_{}", format_real(b))
    }
}

fn opt_real(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format_real(v),
        None => String::new(),
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], bounds: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["group", "count", "mean_pruning_rate", "mean_ratio", "max_ratio"].iter().map(|s| s.to_string()).collect();
    header.extend(bounds.iter().map(|&b| bound_label(b)));
    header.push("infeasible".into());
    header.push("unknown".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.group.clone(), r.count.to_string(), format_real(r.mean_pruning_rate), opt_real(r.mean_ratio), opt_real(r.max_ratio)];
        rec.extend(r.within.iter().map(|c| c.to_string()));
        rec.push(r.infeasible.to_string());
        rec.push(r.unknown.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table for terminals; infinite ratios print as the infinity sign.
pub fn render_summary(rows: &[SummaryRow], bounds: &[f64]) -> String {
    let fmt = |x: Option<f64>| match x {
        Some(v) if v.is_infinite() => "\u{221e}".to_string(),
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    };
    let mut s = String::new();
    let _ = write!(s, "{:<24} {:>6} {:>8} {:>10} {:>10}", "group", "count", "pruning", "mean", "worst");
    for &b in bounds {
        let label = if b == 1.0 { "=1".to_string() } else { format!("<{b}") };
        let _ = write!(s, " {label:>7}");
    }
    let _ = writeln!(s, " {:>7} {:>7}", "infeas", "unknown");
    for r in rows {
        let _ = write!(
            s,
            "{:<24} {:>6} {:>8.4} {:>10} {:>10}",
            r.group,
            r.count,
            r.mean_pruning_rate,
            fmt(r.mean_ratio),
            fmt(r.max_ratio)
        );
        for c in &r.within {
            let _ = write!(s, " {c:>7}");
        }
        let _ = writeln!(s, " {:>7} {:>7}", r.infeasible, r.unknown);
    }
    s
}
