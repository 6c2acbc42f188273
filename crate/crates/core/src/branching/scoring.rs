use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{update_pseudocost, BranchHistory, Candidate, CandidateScore, Direction, GmiHistoryMode, NodeContext};
use crate::bnb::RowCutEvent;
use crate::cutgen::{cut_from_row, scored_efficacy, CutKind};
use crate::simplex::{tableau_row, LpError, LpStatus};

/// `max(down, eps) * max(up, eps)`.
pub fn product_score(down: f64, up: f64, eps: f64) -> f64 {
    down.max(eps) * up.max(eps)
}

/// Scores each candidate by the efficacy of the (weak-)GMI cut of its
/// tableau row at the node LP point. Rows that cannot produce a cut score 0.
pub fn score_by_cut(kind: CutKind, candidates: &[Candidate], ctx: &mut NodeContext<'_>) -> Vec<CandidateScore> {
    let int_mask = &ctx.lp.problem.integer;
    candidates
        .iter()
        .map(|cand| {
            let Ok(row) = tableau_row(ctx.lp, cand.var) else {
                return CandidateScore::plain(cand.var, 0.0);
            };
            let cut = cut_from_row(kind, &row, int_mask, &ctx.settings.gmi);
            ctx.observer.on_row_cut(&RowCutEvent {
                sf: ctx.sf,
                lp: ctx.lp,
                overrides: ctx.overrides,
                row: &row,
                kind,
                cut: cut.as_ref(),
                root_separation: false,
            });
            let score = cut
                .ok()
                .and_then(|c| scored_efficacy(&c, ctx.sf, ctx.lp, ctx.settings.efficacy_space).ok())
                .map_or(0.0, |(_, eff)| eff.max(0.0));
            CandidateScore::plain(cand.var, score)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullStrongOutcome {
    pub scores: Vec<CandidateScore>,
    /// Some candidate has two infeasible children.
    pub prunable: bool,
}

/// Objective gain of one child, `None` when the child LP is infeasible.
fn child_gain(ctx: &mut NodeContext<'_>, cand: &Candidate, dir: Direction) -> Result<Option<f64>, LpError> {
    let res = ctx.solve_child(cand, dir)?;
    Ok(match res.status {
        LpStatus::Infeasible => None,
        LpStatus::Optimal => Some((res.objective - ctx.lp.objective).max(0.0)),
        LpStatus::Unbounded | LpStatus::IterationLimit => Some(0.0),
    })
}

fn strong_branch(ctx: &mut NodeContext<'_>, cand: &Candidate) -> Result<(Option<f64>, Option<f64>), LpError> {
    Ok((child_gain(ctx, cand, Direction::Down)?, child_gain(ctx, cand, Direction::Up)?))
}

/// Solves both children of every candidate and scores by the product of gains.
pub fn score_fullstrong(candidates: &[Candidate], ctx: &mut NodeContext<'_>) -> Result<FullStrongOutcome, LpError> {
    let big = ctx.settings.infeasible_gain;
    let eps = ctx.settings.score_eps;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut prunable = false;
    for cand in candidates {
        let (down, up) = strong_branch(ctx, cand)?;
        if down.is_none() && up.is_none() {
            prunable = true;
        }
        scores.push(CandidateScore::plain(cand.var, product_score(down.unwrap_or(big), up.unwrap_or(big), eps)));
    }
    Ok(FullStrongOutcome { scores, prunable })
}

/// Pseudo-cost estimate `max(q- f, eps) * max(q+ (1 - f), eps)`.
pub fn pseudocost_estimate(hist: &BranchHistory, cand: &Candidate, eps: f64) -> f64 {
    let down = hist.unit_gain(cand.var, Direction::Down) * cand.frac;
    let up = hist.unit_gain(cand.var, Direction::Up) * (1.0 - cand.frac);
    product_score(down, up, eps)
}

/// Reliability pseudo-cost scoring: candidates with fewer than
/// `reliability` observations in either direction are strong-branched and
/// their gains recorded; the rest use the pseudo-cost estimate.
pub fn score_pseudocost(
    candidates: &[Candidate],
    hist: &mut BranchHistory,
    reliability: usize,
    ctx: &mut NodeContext<'_>,
) -> Result<FullStrongOutcome, LpError> {
    let big = ctx.settings.infeasible_gain;
    let eps = ctx.settings.score_eps;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut prunable = false;
    for cand in candidates {
        if hist.reliability(cand.var) < reliability {
            let (down, up) = strong_branch(ctx, cand)?;
            hist.strong_inits[cand.var] += 1;
            if let Some(g) = down {
                update_pseudocost(hist, cand.var, Direction::Down, cand.frac, g);
            }
            if let Some(g) = up {
                update_pseudocost(hist, cand.var, Direction::Up, cand.frac, g);
            }
            if down.is_none() && up.is_none() {
                prunable = true;
            }
            scores.push(CandidateScore::plain(cand.var, product_score(down.unwrap_or(big), up.unwrap_or(big), eps)));
        } else {
            scores.push(CandidateScore::plain(cand.var, pseudocost_estimate(hist, cand, eps)));
        }
    }
    Ok(FullStrongOutcome { scores, prunable })
}

/// Uniform choice among `candidates`.
pub fn score_random(candidates: &[Candidate], rng: &mut ChaCha8Rng) -> CandidateScore {
    assert!(!candidates.is_empty(), "random selection needs at least one candidate");
    let k = rng.gen_range(0..candidates.len());
    CandidateScore::plain(candidates[k].var, 1.0)
}

/// Adds `weight * g_j` to each base score, where `g_j` is the recorded
/// normalized GMI efficacy of variable `j` (zero when absent).
pub fn combine_hybrid_gmi(
    base: Vec<CandidateScore>,
    hist: &BranchHistory,
    weight: f64,
    mode: GmiHistoryMode,
) -> Vec<CandidateScore> {
    base.into_iter()
        .map(|s| {
            let g = hist.gmi_score(s.var, mode).unwrap_or(0.0);
            let gmi_term = weight * g;
            CandidateScore { var: s.var, score: s.base + gmi_term, base: s.base, gmi_term }
        })
        .collect()
}
