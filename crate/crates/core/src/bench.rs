//! Experiment harness: rule-by-instance-by-seed grids, run filtering,
//! shifted geometric means, Wilcoxon signed-rank tests and summary tables.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::bnb::{solve_named, SolveSettings, SolveStats, SolveStatus};
use crate::branching::RuleSpec;
use crate::io::{parse_solution, read_file, read_mps, InstanceManifest, IoError};
use crate::model::{Milp, Solution, SolutionStatus};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("empty input")]
    EmptyInput,
    #[error("all paired differences are zero")]
    AllZeroDiffs,
    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    File(#[from] std::io::Error),
}

/// Shifts used when aggregating each metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shifts {
    pub nodes: f64,
    pub time: f64,
    pub branch_time: f64,
}

impl Default for Shifts {
    fn default() -> Self {
        Shifts { nodes: 100.0, time: 10.0, branch_time: 1.0 }
    }
}

/// `(prod (v_i + s))^(1/n) - s`, evaluated in log space.
pub fn shifted_geometric_mean(values: &[f64], shift: f64) -> Result<f64, BenchError> {
    let (&first, _) = values.split_first().ok_or(BenchError::EmptyInput)?;
    if values.iter().all(|&v| v == first) {
        return Ok(first);
    }
    let mean_log = values.iter().map(|&v| (v + shift).ln()).sum::<f64>() / values.len() as f64;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok((mean_log.exp() - shift).clamp(lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Rank sum of the positive differences.
    pub w_plus: f64,
    pub w_minus: f64,
    /// Nonzero differences.
    pub n: usize,
    pub p_two_sided: f64,
    /// Probability of a rank sum at least `w_plus` (alternative: differences tend to be positive).
    pub p_greater: f64,
    /// Probability of a rank sum at most `w_plus` (alternative: differences tend to be negative).
    pub p_less: f64,
    pub exact: bool,
}

/// Sample size up to which p-values are computed exactly.
pub const WILCOXON_EXACT_MAX: usize = 20;

/// Mid-ranks of `|d|`, ascending.
pub fn mid_ranks(abs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut k = i;
        while k + 1 < order.len() && abs[order[k + 1]] == abs[order[i]] {
            k += 1;
        }
        let r = (i + k) as f64 / 2.0 + 1.0;
        for &o in &order[i..=k] {
            ranks[o] = r;
        }
        i = k + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on paired differences. Zero differences are
/// dropped and ties get mid-ranks.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<Wilcoxon, BenchError> {
    let d: Vec<f64> = diffs.iter().copied().filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(if diffs.is_empty() { BenchError::EmptyInput } else { BenchError::AllZeroDiffs });
    }
    let n = d.len();
    let ranks = mid_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p_greater, p_less, exact) = if n <= WILCOXON_EXACT_MAX {
        let (g, l) = exact_tails(&ranks, w_plus);
        (g, l, true)
    } else {
        let (g, l) = normal_tails(&ranks, w_plus);
        (g, l, false)
    };
    let p_two_sided = (2.0 * p_greater.min(p_less)).min(1.0);
    Ok(Wilcoxon { w_plus, w_minus, n, p_two_sided, p_greater, p_less, exact })
}

/// `(P(W+ >= w), P(W+ <= w))` under the null, by dynamic programming over
/// the rank-sum distribution.
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    // mid-ranks are multiples of 1/2, so doubled ranks are integers
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w2 = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let ge: u64 = counts[w2..].iter().sum();
    let le: u64 = counts[..=w2].iter().sum();
    (ge as f64 / all, le as f64 / all)
}

/// Normal approximation with tie correction and continuity correction.
fn normal_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let nf = ranks.len() as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tie_term: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let sd = var.sqrt();
    let upper_tail = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    (upper_tail((w_plus - mean - 0.5) / sd), 1.0 - upper_tail((w_plus - mean + 0.5) / sd))
}

// ---------------------------------------------------------------- records

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
    Error,
}

impl RunStatus {
    /// Solved to completion.
    pub fn solved(self) -> bool {
        matches!(self, RunStatus::Optimal | RunStatus::Infeasible | RunStatus::Unbounded)
    }
}

impl From<SolveStatus> for RunStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RunStatus::Optimal,
            SolveStatus::Infeasible => RunStatus::Infeasible,
            SolveStatus::Unbounded => RunStatus::Unbounded,
            SolveStatus::TimeLimit => RunStatus::TimeLimit,
            SolveStatus::NodeLimit => RunStatus::NodeLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub seed: u64,
    pub rule: String,
    pub status: RunStatus,
    pub nodes: u64,
    pub time_s: f64,
    pub branch_time_s: f64,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub root_branch_var: Option<usize>,
}

impl RunRecord {
    pub fn from_stats(instance: &str, seed: u64, rule: &str, stats: &SolveStats) -> Self {
        RunRecord {
            instance: instance.to_string(),
            seed,
            rule: rule.to_string(),
            status: stats.status.into(),
            nodes: stats.nodes as u64,
            time_s: stats.total_time.as_secs_f64(),
            branch_time_s: stats.branch_time.as_secs_f64(),
            objective: stats.incumbent,
            bound: stats.bound.is_finite().then_some(stats.bound),
            root_branch_var: stats.root_branch_var,
        }
    }

    pub fn error(instance: &str, seed: u64, rule: &str) -> Self {
        RunRecord {
            instance: instance.to_string(),
            seed,
            rule: rule.to_string(),
            status: RunStatus::Error,
            nodes: 0,
            time_s: 0.0,
            branch_time_s: 0.0,
            objective: None,
            bound: None,
            root_branch_var: None,
        }
    }

    pub fn key(&self) -> (String, u64, String) {
        (self.instance.clone(), self.seed, self.rule.clone())
    }

    /// Total time minus time spent choosing branching variables.
    pub fn time_without_branching(&self) -> f64 {
        (self.time_s - self.branch_time_s).max(0.0)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn sorted_records(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by_key(|a| a.key());
    v
}

// ---------------------------------------------------------------- filtering

/// Instances kept for a comparison of `rules`: every seed under every rule
/// must have branched at least once and ended without error or a node limit.
pub fn filter_runs(records: &[RunRecord], rules: &[String]) -> Result<BTreeSet<String>, BenchError> {
    let seeds: BTreeSet<u64> = records.iter().map(|r| r.seed).collect();
    let mut by_instance: BTreeMap<&str, HashMap<(&str, u64), &RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| rules.contains(&r.rule)) {
        by_instance.entry(&r.instance).or_default().insert((&r.rule, r.seed), r);
    }
    let mut kept = BTreeSet::new();
    for (inst, runs) in by_instance {
        for rule in rules {
            for &s in &seeds {
                if !runs.contains_key(&(rule.as_str(), s)) {
                    return Err(BenchError::IncompleteGrid(format!("{inst}: no run for rule {rule}, seed {s}")));
                }
            }
        }
        let clean = runs.values().all(|r| {
            !matches!(r.status, RunStatus::Error | RunStatus::NodeLimit)
                && !(r.status.solved() && r.root_branch_var.is_none())
        });
        if clean {
            kept.insert(inst.to_string());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffectedReport {
    /// Pairs both rules solved to optimality.
    pub compared: Vec<(String, u64)>,
    /// Pairs whose node counts differ.
    pub affected: Vec<(String, u64)>,
    /// Pairs whose root branching variable differs.
    pub root_differs: Vec<(String, u64)>,
}

impl AffectedReport {
    pub fn root_fraction(&self) -> f64 {
        if self.compared.is_empty() {
            0.0
        } else {
            self.root_differs.len() as f64 / self.compared.len() as f64
        }
    }
}

pub fn affected_pairs(records: &[RunRecord], rule_a: &str, rule_b: &str) -> AffectedReport {
    let index: HashMap<(&str, u64, &str), &RunRecord> =
        records.iter().map(|r| ((r.instance.as_str(), r.seed, r.rule.as_str()), r)).collect();
    let mut out = AffectedReport::default();
    for a in sorted_records(records).into_iter().filter(|r| r.rule == rule_a) {
        let Some(b) = index.get(&(a.instance.as_str(), a.seed, rule_b)) else {
            continue;
        };
        if a.status != RunStatus::Optimal || b.status != RunStatus::Optimal {
            continue;
        }
        let pair = (a.instance.clone(), a.seed);
        if a.nodes != b.nodes {
            out.affected.push(pair.clone());
        }
        if a.root_branch_var != b.root_branch_var {
            out.root_differs.push(pair.clone());
        }
        out.compared.push(pair);
    }
    out
}

// ---------------------------------------------------------------- tables

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableVariant {
    /// Pairs every rule solved to optimality.
    SolvedByAll,
    /// Pairs at least one rule solved; unsolved runs enter with their limit values.
    SolvedByAtLeastOne,
}

impl TableVariant {
    pub fn title(self) -> &'static str {
        match self {
            TableVariant::SolvedByAll => "solved by all rules",
            TableVariant::SolvedByAtLeastOne => "solved by at least one rule",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleAggregate {
    pub rule: String,
    pub pairs: usize,
    pub solved: usize,
    pub nodes: f64,
    pub time: f64,
    pub time_without_branching: f64,
    pub branch_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTable {
    pub variant: TableVariant,
    pub shifts: Shifts,
    pub rows: Vec<RuleAggregate>,
}

/// Shifted geometric means per rule over the retained instance-seed pairs.
pub fn aggregate(
    records: &[RunRecord],
    rules: &[String],
    keep: &BTreeSet<String>,
    variant: TableVariant,
    shifts: Shifts,
) -> Result<AggregateTable, BenchError> {
    let index: HashMap<(&str, u64, &str), &RunRecord> =
        records.iter().map(|r| ((r.instance.as_str(), r.seed, r.rule.as_str()), r)).collect();
    let pairs: BTreeSet<(&str, u64)> =
        records.iter().filter(|r| keep.contains(&r.instance)).map(|r| (r.instance.as_str(), r.seed)).collect();
    let mut chosen = Vec::new();
    for (inst, seed) in pairs {
        let runs: Vec<&RunRecord> = rules
            .iter()
            .map(|rule| {
                index
                    .get(&(inst, seed, rule.as_str()))
                    .copied()
                    .ok_or_else(|| BenchError::IncompleteGrid(format!("{inst}: no run for rule {rule}, seed {seed}")))
            })
            .collect::<Result<_, _>>()?;
        let take = match variant {
            TableVariant::SolvedByAll => runs.iter().all(|r| r.status == RunStatus::Optimal),
            TableVariant::SolvedByAtLeastOne => runs.iter().any(|r| r.status == RunStatus::Optimal),
        };
        if take {
            chosen.push(runs);
        }
    }
    let mut rows = Vec::new();
    for (k, rule) in rules.iter().enumerate() {
        let runs: Vec<&RunRecord> = chosen.iter().map(|rs| rs[k]).collect();
        let col = |f: &dyn Fn(&RunRecord) -> f64, s: f64| -> f64 {
            let v: Vec<f64> = runs.iter().map(|r| f(r)).collect();
            shifted_geometric_mean(&v, s).unwrap_or(f64::NAN)
        };
        rows.push(RuleAggregate {
            rule: rule.clone(),
            pairs: runs.len(),
            solved: runs.iter().filter(|r| r.status == RunStatus::Optimal).count(),
            nodes: col(&|r| r.nodes as f64, shifts.nodes),
            time: col(&|r| r.time_s, shifts.time),
            time_without_branching: col(&|r| r.time_without_branching(), shifts.time),
            branch_time: col(&|r| r.branch_time_s, shifts.branch_time),
        });
    }
    Ok(AggregateTable { variant, shifts, rows })
}

impl AggregateTable {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Shifted geometric means, {} (shifts: nodes {}, time {}, branching time {})\n",
            self.variant.title(), self.shifts.nodes, self.shifts.time, self.shifts.branch_time);
        let header = ["Rule", "Pairs", "Solved", "Nodes", "Time (s)", "Time w/o branch (s)", "Branch time (s)"];
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.rule.clone(),
                    r.pairs.to_string(),
                    r.solved.to_string(),
                    format!("{:.1}", r.nodes),
                    format!("{:.3}", r.time),
                    format!("{:.3}", r.time_without_branching),
                    format!("{:.3}", r.branch_time),
                ]
            })
            .collect();
        out.push_str(&markdown_table(&header, &body));
        out
    }
}

/// `rule / baseline` ratios of shifted geometric means over affected pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub rule: String,
    pub baseline: String,
    pub affected: usize,
    pub root_differs: usize,
    pub compared: usize,
    pub node_ratio: f64,
    pub time_ratio: f64,
    /// Two-sided Wilcoxon p on paired node counts.
    pub p_nodes: Option<f64>,
    pub p_time: Option<f64>,
}

pub fn ratio_table(records: &[RunRecord], baseline: &str, rules: &[String], keep: &BTreeSet<String>, shifts: Shifts) -> Vec<RatioRow> {
    let kept: Vec<RunRecord> = records.iter().filter(|r| keep.contains(&r.instance)).cloned().collect();
    let index: HashMap<(&str, u64, &str), &RunRecord> =
        kept.iter().map(|r| ((r.instance.as_str(), r.seed, r.rule.as_str()), r)).collect();
    let mut rows = Vec::new();
    for rule in rules.iter().filter(|r| r.as_str() != baseline) {
        let rep = affected_pairs(&kept, rule, baseline);
        let get = |(i, s): &(String, u64), rl: &str| index[&(i.as_str(), *s, rl)];
        let metric = |rl: &str, f: &dyn Fn(&RunRecord) -> f64| -> Vec<f64> { rep.affected.iter().map(|p| f(get(p, rl))).collect() };
        let nodes_r = metric(rule, &|r| r.nodes as f64);
        let nodes_b = metric(baseline, &|r| r.nodes as f64);
        let time_r = metric(rule, &|r| r.time_s);
        let time_b = metric(baseline, &|r| r.time_s);
        let ratio = |a: &[f64], b: &[f64], s: f64| match (shifted_geometric_mean(a, s), shifted_geometric_mean(b, s)) {
            (Ok(x), Ok(y)) if y > 0.0 => x / y,
            _ => f64::NAN,
        };
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        rows.push(RatioRow {
            rule: rule.clone(),
            baseline: baseline.to_string(),
            affected: rep.affected.len(),
            root_differs: rep.root_differs.len(),
            compared: rep.compared.len(),
            node_ratio: ratio(&nodes_r, &nodes_b, shifts.nodes),
            time_ratio: ratio(&time_r, &time_b, shifts.time),
            p_nodes: wilcoxon_signed_rank(&diff(&nodes_r, &nodes_b)).ok().map(|w| w.p_two_sided),
            p_time: wilcoxon_signed_rank(&diff(&time_r, &time_b)).ok().map(|w| w.p_two_sided),
        });
    }
    rows
}

pub fn ratio_markdown(rows: &[RatioRow]) -> String {
    let header = ["Rule", "Baseline", "Compared", "Affected", "Root differs", "Node ratio", "Time ratio", "p (nodes)", "p (time)"];
    let fmt_p = |p: Option<f64>| p.map_or("-".to_string(), |p| format!("{p:.4}"));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.rule.clone(),
                r.baseline.clone(),
                r.compared.to_string(),
                r.affected.to_string(),
                r.root_differs.to_string(),
                format!("{:.3}", r.node_ratio),
                format!("{:.3}", r.time_ratio),
                fmt_p(r.p_nodes),
                fmt_p(r.p_time),
            ]
        })
        .collect();
    format!("Ratios of shifted geometric means over affected pairs\n\n{}", markdown_table(&header, &body))
}

fn markdown_table(header: &[&str], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!(" {c:<w$} ")).collect();
        format!("|{}|\n", parts.join("|"))
    };
    let mut out = line(header.to_vec());
    out.push_str(&format!("|{}|\n", widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")));
    for row in body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Per-pair relative improvement of `rule` over `baseline`, `(b - r) / max(b, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub instance: String,
    pub seed: u64,
    pub rule: String,
    pub baseline: String,
    pub nodes: f64,
    pub time: f64,
}

pub fn relative_improvements(records: &[RunRecord], baseline: &str, rule: &str) -> Vec<Improvement> {
    let index: HashMap<(&str, u64, &str), &RunRecord> =
        records.iter().map(|r| ((r.instance.as_str(), r.seed, r.rule.as_str()), r)).collect();
    let rel = |b: f64, r: f64| if b.max(r) > 0.0 { (b - r) / b.max(r) } else { 0.0 };
    affected_pairs(records, rule, baseline)
        .affected
        .iter()
        .map(|(i, s)| {
            let r = index[&(i.as_str(), *s, rule)];
            let b = index[&(i.as_str(), *s, baseline)];
            Improvement {
                instance: i.clone(),
                seed: *s,
                rule: rule.to_string(),
                baseline: baseline.to_string(),
                nodes: rel(b.nodes as f64, r.nodes as f64),
                time: rel(b.time_s, r.time_s),
            }
        })
        .collect()
}

// ---------------------------------------------------------------- experiments

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub rules: Vec<RuleSpec>,
    pub seeds: Vec<u64>,
    pub settings: SolveSettings,
    pub threads: usize,
    /// Install a known solution as the incumbent before each run.
    pub provided_solutions: bool,
    pub shifts: Shifts,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rules: ["random", "fullstrong", "pseudocost", "gmi", "weakgmi", "hybridgmi"].into_iter().map(RuleSpec::new).collect(),
            seeds: vec![1, 2, 3, 4, 5],
            settings: SolveSettings { time_limit: Some(Duration::from_secs(60)), ..SolveSettings::default() },
            threads: 1,
            provided_solutions: false,
            shifts: Shifts::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub kept: BTreeSet<String>,
    pub tables: Vec<AggregateTable>,
    pub ratios: Vec<RatioRow>,
}

impl ExperimentOutput {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str(&t.to_markdown());
            out.push('\n');
        }
        if !self.ratios.is_empty() {
            out.push_str(&ratio_markdown(&self.ratios));
        }
        out
    }
}

pub fn instance_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// A known solution for `p`: `<path>.sol` next to the instance if present,
/// otherwise obtained by a solve with default settings.
pub fn provided_solution(path: &Path, p: &Milp, settings: &SolveSettings) -> Result<Option<Vec<f64>>, BenchError> {
    let sol = path.with_extension("sol");
    if sol.exists() {
        return Ok(Some(parse_solution(&read_file(&sol)?, p)?));
    }
    let settings = SolveSettings { provided_solution: None, ..settings.clone() };
    Ok(match solve_named(p, &RuleSpec::new("pseudocost"), &settings) {
        Ok((Solution { status: SolutionStatus::Optimal, values, .. }, _)) => Some(values),
        _ => None,
    })
}

/// Runs every (instance, rule, seed) triple not already in `out`, appending
/// records as they finish, then aggregates the complete record set.
pub fn run_experiment(manifest: &InstanceManifest, config: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput, BenchError> {
    if config.rules.is_empty() || config.seeds.is_empty() {
        return Err(BenchError::Invalid("need at least one rule and one seed".into()));
    }
    let mut names = HashSet::new();
    for e in &manifest.entries {
        if !names.insert(instance_name(&e.path)) {
            return Err(BenchError::Invalid(format!("two instances named `{}`", instance_name(&e.path))));
        }
    }
    let existing = if out.exists() { read_records(out)? } else { Vec::new() };
    let done: HashSet<(String, u64, String)> = existing.iter().map(RunRecord::key).collect();

    let mut instances: Vec<(PathBuf, String, Result<Milp, String>)> = Vec::new();
    for e in &manifest.entries {
        instances.push((e.path.clone(), instance_name(&e.path), read_mps(&e.path).map_err(|err| err.to_string())));
    }
    let mut jobs = Vec::new();
    for (k, (_, name, _)) in instances.iter().enumerate() {
        for rule in &config.rules {
            for &seed in &config.seeds {
                if !done.contains(&(name.clone(), seed, rule.label())) {
                    jobs.push((k, rule.clone(), seed));
                }
            }
        }
    }
    let mut provided: Vec<Option<Vec<f64>>> = vec![None; instances.len()];
    if config.provided_solutions {
        let needed: BTreeSet<usize> = jobs.iter().map(|j| j.0).collect();
        for k in needed {
            if let (path, _, Ok(p)) = &instances[k] {
                provided[k] = provided_solution(path, p, &config.settings)?;
            }
        }
    }

    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let fresh = existing.is_empty() && file.metadata()?.len() == 0;
    let sink = Mutex::new(csv::WriterBuilder::new().has_headers(fresh).from_writer(file));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.max(1))
        .build()
        .map_err(|e| BenchError::Invalid(e.to_string()))?;
    let results: Vec<Result<RunRecord, BenchError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(k, rule, seed)| {
                let (_, name, p) = &instances[*k];
                let label = rule.label();
                let rec = match p {
                    Err(_) => RunRecord::error(name, *seed, &label),
                    Ok(p) => {
                        let settings =
                            SolveSettings { seed: *seed, provided_solution: provided[*k].clone(), ..config.settings.clone() };
                        match solve_named(p, rule, &settings) {
                            Ok((_, stats)) => RunRecord::from_stats(name, *seed, &label, &stats),
                            Err(_) => RunRecord::error(name, *seed, &label),
                        }
                    }
                };
                let mut w = sink.lock().expect("record sink poisoned");
                w.serialize(&rec)?;
                w.flush()?;
                Ok(rec)
            })
            .collect()
    });
    let mut records = existing;
    for r in results {
        records.push(r?);
    }
    records.sort_by_key(RunRecord::key);
    analyze(&records, &config.rules.iter().map(RuleSpec::label).collect::<Vec<_>>(), config.shifts)
}

/// Filtering and tables for a finished record set; the first rule is the ratio baseline.
pub fn analyze(records: &[RunRecord], rules: &[String], shifts: Shifts) -> Result<ExperimentOutput, BenchError> {
    let kept = filter_runs(records, rules)?;
    let tables = [TableVariant::SolvedByAll, TableVariant::SolvedByAtLeastOne]
        .into_iter()
        .map(|v| aggregate(records, rules, &kept, v, shifts))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios = match rules.first() {
        Some(base) => ratio_table(records, base, rules, &kept, shifts),
        None => Vec::new(),
    };
    let mut records = records.to_vec();
    records.sort_by_key(RunRecord::key);
    Ok(ExperimentOutput { records, kept, tables, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(inst: &str, seed: u64, rule: &str, nodes: u64, root: Option<usize>) -> RunRecord {
        RunRecord {
            instance: inst.into(),
            seed,
            rule: rule.into(),
            status: RunStatus::Optimal,
            nodes,
            time_s: nodes as f64 * 0.01,
            branch_time_s: 0.0,
            objective: Some(1.0),
            bound: Some(1.0),
            root_branch_var: root,
        }
    }

    #[test]
    fn sgm_examples() {
        assert!((shifted_geometric_mean(&[90.0, 990.0], 10.0).unwrap() - 306.2278).abs() < 1e-3);
        assert_eq!(shifted_geometric_mean(&[7.25; 4], 100.0).unwrap(), 7.25);
        let a = shifted_geometric_mean(&[1.0, 5.0, 30.0], 1.0).unwrap();
        let b = shifted_geometric_mean(&[30.0, 1.0, 5.0], 1.0).unwrap();
        assert_eq!(a, b);
        assert!(matches!(shifted_geometric_mean(&[], 1.0), Err(BenchError::EmptyInput)));
    }

    #[test]
    fn wilcoxon_examples() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.w_plus, 6.0);
        assert!((w.p_two_sided - 0.25).abs() < 1e-15);
        assert!((w.p_greater - 0.125).abs() < 1e-15);
        assert_eq!(wilcoxon_signed_rank(&[2.0, -2.0]).unwrap().p_two_sided, 1.0);
        assert!(matches!(wilcoxon_signed_rank(&[0.0, 0.0]), Err(BenchError::AllZeroDiffs)));
    }

    #[test]
    fn normal_approximation_is_close_to_exact() {
        let d: Vec<f64> = (1..=20).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let ranks = mid_ranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
        let w = wilcoxon_signed_rank(&d).unwrap();
        assert!(w.exact);
        let (g, l) = normal_tails(&ranks, w.w_plus);
        assert!((g - w.p_greater).abs() < 0.01);
        assert!((l - w.p_less).abs() < 0.01);
        let big: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        assert!(!wilcoxon_signed_rank(&big).unwrap().exact);
    }

    #[test]
    fn filtering_rules() {
        let rules = vec!["a".to_string(), "b".to_string()];
        let mut rs = vec![
            rec("clean", 1, "a", 10, Some(0)),
            rec("clean", 1, "b", 12, Some(1)),
            rec("root", 1, "a", 1, None),
            rec("root", 1, "b", 5, Some(0)),
            rec("err", 1, "a", 5, Some(0)),
            rec("err", 1, "b", 5, Some(0)),
        ];
        rs[4].status = RunStatus::Error;
        let kept = filter_runs(&rs, &rules).unwrap();
        assert_eq!(kept.into_iter().collect::<Vec<_>>(), vec!["clean".to_string()]);
        rs.pop();
        assert!(matches!(filter_runs(&rs, &rules), Err(BenchError::IncompleteGrid(_))));
    }

    #[test]
    fn affected_definition() {
        let rs = vec![
            rec("x", 1, "a", 10, Some(0)),
            rec("x", 1, "b", 10, Some(0)),
            rec("y", 1, "a", 10, Some(0)),
            rec("y", 1, "b", 12, Some(0)),
            rec("z", 1, "a", 10, Some(0)),
            rec("z", 1, "b", 10, Some(3)),
        ];
        let rep = affected_pairs(&rs, "a", "b");
        assert_eq!(rep.compared.len(), 3);
        assert_eq!(rep.affected, vec![("y".to_string(), 1)]);
        assert_eq!(rep.root_differs, vec![("z".to_string(), 1)]);
    }

    #[test]
    fn tables_have_equal_pair_counts() {
        let mut rs = Vec::new();
        for inst in ["p", "q"] {
            for seed in [1, 2] {
                rs.push(rec(inst, seed, "a", 10 * seed, Some(0)));
                rs.push(rec(inst, seed, "b", 20 * seed, Some(0)));
            }
        }
        rs[3].status = RunStatus::TimeLimit;
        let rules = vec!["a".to_string(), "b".to_string()];
        let out = analyze(&rs, &rules, Shifts::default()).unwrap();
        assert_eq!(out.tables.len(), 2);
        assert!(out.tables[0].rows.iter().all(|r| r.pairs == 3));
        assert!(out.tables[1].rows.iter().all(|r| r.pairs == 4));
        assert!(out.to_markdown().contains("| Rule"));
    }

    #[test]
    fn records_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        let mut rs = vec![rec("p", 1, "a", 10, Some(2)), rec("p", 1, "b", 20, None)];
        rs[1].objective = None;
        rs[1].status = RunStatus::TimeLimit;
        write_records(&path, &rs).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("instance,seed,rule,status,nodes,time_s,branch_time_s,objective,bound,root_branch_var\n"));
        assert_eq!(read_records(&path).unwrap(), rs);
    }
}
