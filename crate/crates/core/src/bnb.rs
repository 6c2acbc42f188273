//! Branch-and-cut driver: root cut rounds, best-bound node selection,
//! pruning, branching dispatch and solve statistics.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::branching::{
    node_candidates, record_gmi_history, update_pseudocost, BranchHistory, BranchSettings, BranchingRule, CandidateScore, Decision,
    Direction, NodeContext, RuleRegistry, RuleSpec, UnknownRule,
};
use crate::cutgen::{
    elementary_split, generate_round, select_cuts, Cut, CutError, CutKind, SeparationSettings, SplitDisjunction,
};
use crate::model::{check_feasible, objective_value, standardize, Milp, ModelError, Solution, SolutionStatus, StandardForm};
use crate::simplex::{self, Basis, BoundOverrides, LpError, LpLimits, LpProblem, LpResult, LpStatus, TableauRow};

const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    UnknownRule(#[from] UnknownRule),
    #[error("provided solution is not feasible for the instance")]
    InvalidProvidedSolution,
}

/// A cut derived from a tableau row, reported to observers as it is generated.
pub struct RowCutEvent<'a> {
    pub sf: &'a StandardForm,
    pub lp: &'a LpResult,
    pub overrides: &'a BoundOverrides,
    pub row: &'a TableauRow,
    pub kind: CutKind,
    pub cut: Result<&'a Cut, &'a CutError>,
    /// Generated by a root separation round rather than for branching.
    pub root_separation: bool,
}

pub struct BranchEvent<'a> {
    pub sf: &'a StandardForm,
    pub lp: &'a LpResult,
    pub overrides: &'a BoundOverrides,
    pub node: u64,
    pub var: usize,
    /// Standard-form value of the branching variable.
    pub value: f64,
    /// Scores of every candidate at this node.
    pub scores: &'a [CandidateScore],
}

impl BranchEvent<'_> {
    /// The elementary split behind this branching, in original variables.
    pub fn split(&self) -> Result<SplitDisjunction, CutError> {
        let orig = self.sf.to_original(self.lp.structural());
        elementary_split(self.var, orig[self.var])
    }
}

/// Hooks for inspecting a solve; every method defaults to doing nothing.
pub trait SolveObserver {
    fn on_row_cut(&mut self, _event: &RowCutEvent<'_>) {}
    fn on_branch(&mut self, _event: &BranchEvent<'_>) {}
}

pub struct NoObserver;

impl SolveObserver for NoObserver {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeSelection {
    #[default]
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone)]
pub struct SolveSettings {
    pub seed: u64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    pub root_cut_rounds: usize,
    /// Installed as the incumbent before the search starts.
    pub provided_solution: Option<Vec<f64>>,
    pub node_selection: NodeSelection,
    pub branch: BranchSettings,
    pub separation: SeparationSettings,
    pub int_tol: f64,
    pub lp_max_iterations: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            seed: 1,
            time_limit: None,
            node_limit: None,
            root_cut_rounds: 5,
            provided_solution: None,
            node_selection: NodeSelection::BestBound,
            branch: BranchSettings::default(),
            separation: SeparationSettings::default(),
            int_tol: crate::model::INT_TOL,
            lp_max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::TimeLimit => "time_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub nodes: usize,
    pub total_time: Duration,
    /// Time spent inside the branching rule, child LPs included.
    pub branch_time: Duration,
    pub lp_iterations: usize,
    pub cuts_added: usize,
    pub incumbent: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub root_lp_bound: f64,
    pub root_bound: f64,
    pub root_branch_var: Option<usize>,
}

impl SolveStats {
    fn new() -> Self {
        SolveStats {
            nodes: 0,
            total_time: Duration::ZERO,
            branch_time: Duration::ZERO,
            lp_iterations: 0,
            cuts_added: 0,
            incumbent: None,
            bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            status: SolveStatus::Infeasible,
            root_lp_bound: f64::NEG_INFINITY,
            root_bound: f64::NEG_INFINITY,
            root_branch_var: None,
        }
    }

    pub fn branched(&self) -> bool {
        self.root_branch_var.is_some()
    }
}

/// Which bound a node's last branching tightened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchInfo {
    pub var: usize,
    pub dir: Direction,
    pub frac: f64,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: usize,
    pub overrides: BoundOverrides,
    /// Objective of the parent LP.
    pub lower_bound: f64,
    pub warm_start: Option<Arc<Basis>>,
    pub branched_on: Option<BranchInfo>,
}

impl Node {
    pub fn root(bound: f64) -> Self {
        Node {
            id: 0,
            parent: None,
            depth: 0,
            overrides: BoundOverrides::new(),
            lower_bound: bound,
            warm_start: None,
            branched_on: None,
        }
    }
}

/// Splits `node` on `x_j` at fractional value `lp_value` (standard space),
/// giving `x_j <= floor` and `x_j >= ceil` children. `bounds` is the current
/// interval of `x_j` at the node.
pub fn branch(node: &Node, j: usize, lp_value: f64, bounds: (f64, f64)) -> Result<(Node, Node), CutError> {
    let f = lp_value - lp_value.floor();
    if !(crate::model::INT_TOL..=1.0 - crate::model::INT_TOL).contains(&f) {
        return Err(CutError::NotFractional(lp_value));
    }
    let mut down = node.overrides.clone();
    down.tighten(j, f64::NEG_INFINITY, lp_value.floor(), bounds);
    let mut up = node.overrides.clone();
    up.tighten(j, lp_value.ceil(), f64::INFINITY, bounds);
    let child = |ov: BoundOverrides, dir| Node {
        id: 0,
        parent: Some(node.id),
        depth: node.depth + 1,
        overrides: ov,
        lower_bound: node.lower_bound,
        warm_start: node.warm_start.clone(),
        branched_on: Some(BranchInfo { var: j, dir, frac: f }),
    };
    Ok((child(down, Direction::Down), child(up, Direction::Up)))
}

/// Result of the root separation loop.
pub struct RootCuts {
    pub lp: LpResult,
    pub cuts: Vec<Cut>,
    pub rounds: usize,
}

/// Up to `rounds` GMI separation rounds at the root. Every round's raw
/// efficacies feed the GMI history before selection; the loop stops early
/// when nothing is separated or the bound stalls.
pub fn root_cut_loop(
    sf: &StandardForm,
    root: LpResult,
    rounds: usize,
    hist: &mut BranchHistory,
    settings: &SolveSettings,
    limits: &LpLimits,
    observer: &mut dyn SolveObserver,
) -> Result<RootCuts, LpError> {
    let mut lp = root;
    let mut cuts: Vec<Cut> = Vec::new();
    let mut done = 0;
    let no_overrides = BoundOverrides::new();
    for _ in 0..rounds {
        if !lp.is_optimal() {
            break;
        }
        let generated = generate_round(sf, &lp, &settings.separation);
        for c in &generated {
            observer.on_row_cut(&RowCutEvent {
                sf,
                lp: &lp,
                overrides: &no_overrides,
                row: &c.row,
                kind: CutKind::Gmi,
                cut: Ok(&c.nonbasic),
                root_separation: true,
            });
        }
        let raw: Vec<(usize, f64)> = generated.iter().map(|c| (c.var(), c.efficacy)).collect();
        record_gmi_history(hist, &raw, settings.branch.record_eps);
        let selected = select_cuts(generated, &settings.separation);
        if selected.is_empty() {
            break;
        }
        let mut next_cuts = cuts.clone();
        next_cuts.extend(selected.into_iter().map(|c| c.cut));
        let prob = Arc::new(LpProblem::new(sf, &next_cuts));
        let next = simplex::solve_problem(&prob, &no_overrides, None, limits)?;
        done += 1;
        match next.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                cuts = next_cuts;
                lp = next;
                break;
            }
            _ => break,
        }
        let gain = next.objective - lp.objective;
        cuts = next_cuts;
        lp = next;
        if gain < 1e-9 {
            break;
        }
    }
    Ok(RootCuts { lp, cuts, rounds: done })
}

#[derive(PartialEq)]
struct Queued {
    bound: f64,
    id: u64,
    slot: usize,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: smaller bound first, then smaller id
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Frontier {
    Best(BinaryHeap<Queued>),
    Depth(Vec<Queued>),
}

impl Frontier {
    fn push(&mut self, q: Queued) {
        match self {
            Frontier::Best(h) => h.push(q),
            Frontier::Depth(v) => v.push(q),
        }
    }

    fn pop(&mut self) -> Option<Queued> {
        match self {
            Frontier::Best(h) => h.pop(),
            Frontier::Depth(v) => v.pop(),
        }
    }

    fn min_bound(&self) -> Option<f64> {
        let it: Box<dyn Iterator<Item = &Queued>> = match self {
            Frontier::Best(h) => Box::new(h.iter()),
            Frontier::Depth(v) => Box::new(v.iter()),
        };
        it.map(|q| q.bound).min_by(f64::total_cmp)
    }
}

/// Solves `p` with the named rule.
pub fn solve_named(p: &Milp, rule: &RuleSpec, settings: &SolveSettings) -> Result<(Solution, SolveStats), SolveError> {
    let mut settings = settings.clone();
    settings.branch = rule.settings(&settings.branch);
    let mut r = RuleRegistry::default().create(&rule.name, &settings.branch)?;
    solve(p, r.as_mut(), &settings)
}

pub fn solve(p: &Milp, rule: &mut dyn BranchingRule, settings: &SolveSettings) -> Result<(Solution, SolveStats), SolveError> {
    solve_observed(p, rule, settings, &mut NoObserver)
}

pub fn solve_observed(
    p: &Milp,
    rule: &mut dyn BranchingRule,
    settings: &SolveSettings,
    observer: &mut dyn SolveObserver,
) -> Result<(Solution, SolveStats), SolveError> {
    let start = Instant::now();
    let deadline = settings.time_limit.map(|t| start + t);
    let limits = LpLimits { max_iterations: settings.lp_max_iterations, deadline, ..LpLimits::default() };
    let mut stats = SolveStats::new();
    p.validate()?;
    let finish = |mut stats: SolveStats, sol: Solution| {
        stats.total_time = start.elapsed();
        Ok((sol, stats))
    };
    if p.bounds_consistent().is_err() {
        stats.status = SolveStatus::Infeasible;
        return finish(stats, Solution::without_point(SolutionStatus::Infeasible));
    }
    let sf = standardize(p)?;

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    if let Some(x) = &settings.provided_solution {
        if !check_feasible(p, x, 1e-6) {
            return Err(SolveError::InvalidProvidedSolution);
        }
        incumbent = Some((x.clone(), objective_value(p, x)?));
    }

    let base = Arc::new(LpProblem::new(&sf, &[]));
    let root = simplex::solve_problem(&base, &BoundOverrides::new(), None, &limits)?;
    stats.lp_iterations += root.iterations;
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            stats.status = SolveStatus::Infeasible;
            return finish(stats, Solution::without_point(SolutionStatus::Infeasible));
        }
        LpStatus::Unbounded => {
            stats.status = SolveStatus::Unbounded;
            return finish(stats, Solution::without_point(SolutionStatus::Unbounded));
        }
        LpStatus::IterationLimit => {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                stats.status = SolveStatus::TimeLimit;
                return finish(stats, limit_solution(&incumbent));
            }
            return Err(LpError::NumericalFailure("root LP hit the iteration limit".into()).into());
        }
    }
    stats.root_lp_bound = root.objective;

    let mut hist = BranchHistory::new(sf.n_structural, settings.seed);
    let root_cuts = root_cut_loop(&sf, root, settings.root_cut_rounds, &mut hist, settings, &limits, observer)?;
    stats.cuts_added = root_cuts.cuts.len();
    let root_lp = root_cuts.lp;
    if root_lp.status == LpStatus::Infeasible {
        stats.status = SolveStatus::Infeasible;
        return finish(stats, Solution::without_point(SolutionStatus::Infeasible));
    }
    stats.root_bound = root_lp.objective;
    let problem = Arc::clone(&root_lp.problem);

    let mut slots: Vec<Option<(Node, Option<LpResult>)>> = Vec::new();
    let mut frontier = match settings.node_selection {
        NodeSelection::BestBound => Frontier::Best(BinaryHeap::new()),
        NodeSelection::DepthFirst => Frontier::Depth(Vec::new()),
    };
    let root_node = Node::root(root_lp.objective);
    slots.push(Some((root_node, Some(root_lp))));
    frontier.push(Queued { bound: stats.root_bound, id: 0, slot: 0 });
    let mut next_id: u64 = 1;
    let mut status = SolveStatus::Optimal;

    while let Some(q) = frontier.pop() {
        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| *v);
        if q.bound >= cutoff - PRUNE_TOL {
            slots[q.slot] = None;
            continue;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            status = SolveStatus::TimeLimit;
            frontier.push(q);
            break;
        }
        if settings.node_limit.is_some_and(|l| stats.nodes >= l) {
            status = SolveStatus::NodeLimit;
            frontier.push(q);
            break;
        }
        let (node, pre_solved) = slots[q.slot].take().expect("queued node present");
        let lp = match pre_solved {
            Some(lp) => lp,
            None => simplex::solve_problem(&problem, &node.overrides, node.warm_start.as_deref(), &limits)?,
        };
        stats.nodes += 1;
        stats.lp_iterations += lp.iterations;
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                status = SolveStatus::Unbounded;
                break;
            }
            LpStatus::IterationLimit => {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    status = SolveStatus::TimeLimit;
                    slots[q.slot] = Some((node, None));
                    frontier.push(q);
                    break;
                }
                return Err(LpError::NumericalFailure(format!("node {} LP hit the iteration limit", node.id)).into());
            }
        }
        if let Some(info) = node.branched_on {
            update_pseudocost(&mut hist, info.var, info.dir, info.frac, lp.objective - node.lower_bound);
        }
        if lp.objective >= cutoff - PRUNE_TOL {
            continue;
        }
        let candidates = node_candidates(&lp, settings.int_tol);
        if candidates.is_empty() {
            let mut x = sf.to_original(lp.structural());
            for j in p.integer_indices() {
                x[j] = x[j].round();
            }
            let obj = objective_value(p, &x)?;
            if obj < cutoff {
                incumbent = Some((x, obj));
            }
            continue;
        }

        let t0 = Instant::now();
        let mut ctx = NodeContext {
            sf: &sf,
            lp: &lp,
            overrides: &node.overrides,
            limits: &limits,
            settings: &settings.branch,
            observer: &mut *observer,
            lp_iterations: 0,
        };
        let decision = rule.select(&candidates, &mut ctx, &mut hist)?;
        stats.lp_iterations += ctx.lp_iterations;
        stats.branch_time += t0.elapsed();

        let (var, scores) = match decision {
            Decision::Prune => continue,
            Decision::Branch { var, scores } => (var, scores),
        };
        let value = lp.x[var];
        observer.on_branch(&BranchEvent { sf: &sf, lp: &lp, overrides: &node.overrides, node: node.id, var, value, scores: &scores });
        if node.id == 0 {
            stats.root_branch_var = Some(var);
        }
        let parent = Node {
            lower_bound: lp.objective,
            warm_start: Some(Arc::new(lp.basis.clone())),
            ..node
        };
        let (mut down, mut up) = branch(&parent, var, value, (lp.lower[var], lp.upper[var]))
            .expect("candidates are fractional");
        down.id = next_id;
        up.id = next_id + 1;
        next_id += 2;
        let bound = lp.objective;
        // depth-first pops the last push, so the down child goes last
        for child in [up, down] {
            let id = child.id;
            slots.push(Some((child, None)));
            frontier.push(Queued { bound, id, slot: slots.len() - 1 });
        }
    }

    stats.incumbent = incumbent.as_ref().map(|(_, v)| *v);
    let open_bound = frontier.min_bound();
    stats.bound = match (status, open_bound) {
        (SolveStatus::Optimal, _) | (_, None) => stats.incumbent.unwrap_or(f64::INFINITY),
        (_, Some(b)) => b.min(stats.incumbent.unwrap_or(f64::INFINITY)),
    };
    if status == SolveStatus::Optimal && incumbent.is_none() {
        status = SolveStatus::Infeasible;
    }
    stats.status = status;
    stats.gap = match stats.incumbent {
        Some(inc) if stats.bound.is_finite() => (inc - stats.bound).abs() / inc.abs().max(1e-10),
        _ => f64::INFINITY,
    };
    let solution = match (&incumbent, status) {
        (Some((x, v)), SolveStatus::Optimal) => Solution { values: x.clone(), objective: *v, status: SolutionStatus::Optimal },
        (_, SolveStatus::Infeasible) => Solution::without_point(SolutionStatus::Infeasible),
        (_, SolveStatus::Unbounded) => Solution::without_point(SolutionStatus::Unbounded),
        _ => limit_solution(&incumbent),
    };
    finish(stats, solution)
}

fn limit_solution(incumbent: &Option<(Vec<f64>, f64)>) -> Solution {
    match incumbent {
        Some((x, v)) => Solution { values: x.clone(), objective: *v, status: SolutionStatus::Feasible },
        None => Solution::without_point(SolutionStatus::Limit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sense;

    #[test]
    fn branch_children_bounds() {
        let root = Node::root(0.0);
        let (d, u) = branch(&root, 3, 2.3, (0.0, 5.0)).unwrap();
        assert_eq!(d.overrides.get(3), Some((0.0, 2.0)));
        assert_eq!(u.overrides.get(3), Some((3.0, 5.0)));
        assert_eq!(d.depth, 1);
        assert_eq!(d.parent, Some(0));
        assert!(branch(&root, 3, 2.0, (0.0, 5.0)).is_err());
    }

    #[test]
    fn integral_relaxation_needs_one_node() {
        let mut p = Milp::new("t", 2);
        p.objective = vec![-1.0, -1.0];
        p.upper = vec![3.0, 3.0];
        p.integer = vec![true, true];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 4.0);
        for rule in ["random", "gmi", "pseudocost"] {
            let (sol, stats) = solve_named(&p, &RuleSpec::new(rule), &SolveSettings::default()).unwrap();
            assert_eq!(sol.status, SolutionStatus::Optimal);
            assert_eq!(sol.objective, -4.0);
            assert_eq!(stats.nodes, 1);
            assert!(!stats.branched());
        }
    }
}
