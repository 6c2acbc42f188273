//! Branching-candidate selection.
//!
//! Every rule implements [`BranchingRule`] and is created by name through a
//! [`RuleRegistry`]. Rules see the node LP through a [`NodeContext`], which
//! also lets them solve child LPs for strong branching.

mod history;
mod registry;
mod rules;
mod scoring;

pub use history::{record_gmi_history, update_pseudocost, BranchHistory, GmiHistoryMode, PseudoCost};
pub use registry::{RuleFactory, RuleRegistry, RuleSpec, UnknownRule};
pub use rules::{CutRule, FullStrongRule, HybridGmiRule, PseudocostRule, RandomRule};
pub use scoring::{
    combine_hybrid_gmi, score_by_cut, score_fullstrong, score_pseudocost, score_random, FullStrongOutcome,
};

use crate::bnb::SolveObserver;
use crate::cutgen::{EfficacySpace, GmiSettings};
use crate::model::StandardForm;
use crate::simplex::{self, BoundOverrides, LpError, LpLimits, LpResult, VarStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Down,
    Up,
}

/// A fractional integer variable at the node LP, in standard-form space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub var: usize,
    pub value: f64,
    pub frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub var: usize,
    pub score: f64,
    pub base: f64,
    pub gmi_term: f64,
}

impl CandidateScore {
    pub fn plain(var: usize, score: f64) -> Self {
        CandidateScore { var, score, base: score, gmi_term: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Branch { var: usize, scores: Vec<CandidateScore> },
    /// The node cannot contain a feasible point (both children of some candidate are infeasible).
    Prune,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSettings {
    pub gmi: GmiSettings,
    pub efficacy_space: EfficacySpace,
    /// Observations per direction before pseudo-costs are trusted.
    pub reliability: usize,
    pub gmi_weight: f64,
    pub gmi_history: GmiHistoryMode,
    /// Minimum raw efficacy for a cut to enter the GMI history.
    pub record_eps: f64,
    /// Gain assigned to an infeasible child.
    pub infeasible_gain: f64,
    /// Floor applied to each factor of the product score.
    pub score_eps: f64,
}

impl Default for BranchSettings {
    fn default() -> Self {
        BranchSettings {
            gmi: GmiSettings::default(),
            efficacy_space: EfficacySpace::Structural,
            reliability: 8,
            gmi_weight: 1e-5,
            gmi_history: GmiHistoryMode::MostRecent,
            record_eps: 1e-4,
            infeasible_gain: 1e10,
            score_eps: 1e-6,
        }
    }
}

/// Everything a rule may inspect or do at one node.
pub struct NodeContext<'a> {
    pub sf: &'a StandardForm,
    pub lp: &'a LpResult,
    pub overrides: &'a BoundOverrides,
    pub limits: &'a LpLimits,
    pub settings: &'a BranchSettings,
    pub observer: &'a mut dyn SolveObserver,
    /// Simplex iterations spent in child solves.
    pub lp_iterations: usize,
}

impl NodeContext<'_> {
    /// Solves the child of `cand` in direction `dir`, warm-started from the node basis.
    pub fn solve_child(&mut self, cand: &Candidate, dir: Direction) -> Result<LpResult, LpError> {
        let ov = child_overrides(self.overrides, self.lp, cand, dir);
        let res = simplex::solve_problem(&self.lp.problem, &ov, Some(&self.lp.basis), self.limits)?;
        self.lp_iterations += res.iterations;
        Ok(res)
    }
}

/// The bound set of a child: `x_j <= floor(v)` down, `x_j >= ceil(v)` up.
pub fn child_overrides(parent: &BoundOverrides, lp: &LpResult, cand: &Candidate, dir: Direction) -> BoundOverrides {
    let mut ov = parent.clone();
    let current = (lp.lower[cand.var], lp.upper[cand.var]);
    match dir {
        Direction::Down => ov.tighten(cand.var, f64::NEG_INFINITY, cand.value.floor(), current),
        Direction::Up => ov.tighten(cand.var, cand.value.ceil(), f64::INFINITY, current),
    }
    ov
}

pub trait BranchingRule: Send {
    fn name(&self) -> &str;

    /// Picks a branching variable among `candidates` (never empty).
    fn select(
        &mut self,
        candidates: &[Candidate],
        ctx: &mut NodeContext<'_>,
        hist: &mut BranchHistory,
    ) -> Result<Decision, LpError>;
}

/// Fractional basic integer variables of the node LP, by index.
pub fn node_candidates(res: &LpResult, int_tol: f64) -> Vec<Candidate> {
    let prob = &res.problem;
    (0..prob.n_structural)
        .filter(|&j| prob.integer[j] && res.basis.status[j] == VarStatus::Basic)
        .filter_map(|j| {
            let v = res.x[j];
            let f = v - v.floor();
            (f >= int_tol && f <= 1.0 - int_tol).then_some(Candidate { var: j, value: v, frac: f })
        })
        .collect()
}

/// Indices of the fractional integer variables, in original-index order.
pub fn enumerate_candidates(res: &LpResult, _sf: &StandardForm, int_tol: f64) -> Vec<usize> {
    node_candidates(res, int_tol).into_iter().map(|c| c.var).collect()
}

/// Highest score, ties to the lowest variable index.
pub fn select_best(scores: &[CandidateScore]) -> Option<CandidateScore> {
    scores.iter().copied().fold(None, |best, s| match best {
        None => Some(s),
        Some(b) if s.score > b.score || (s.score == b.score && s.var < b.var) => Some(s),
        keep => keep,
    })
}
