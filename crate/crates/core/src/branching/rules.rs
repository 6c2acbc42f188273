use super::{
    combine_hybrid_gmi, score_by_cut, score_fullstrong, score_pseudocost, score_random, select_best, BranchHistory,
    BranchingRule, Candidate, Decision, NodeContext,
};
use crate::cutgen::CutKind;
use crate::simplex::LpError;

fn decide(scores: Vec<super::CandidateScore>) -> Decision {
    let best = select_best(&scores).expect("candidate list is never empty");
    Decision::Branch { var: best.var, scores }
}

#[derive(Debug, Default)]
pub struct RandomRule;

impl BranchingRule for RandomRule {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&mut self, candidates: &[Candidate], _: &mut NodeContext<'_>, hist: &mut BranchHistory) -> Result<Decision, LpError> {
        let pick = score_random(candidates, &mut hist.rng);
        Ok(Decision::Branch { var: pick.var, scores: vec![pick] })
    }
}

#[derive(Debug, Default)]
pub struct FullStrongRule;

impl BranchingRule for FullStrongRule {
    fn name(&self) -> &str {
        "fullstrong"
    }

    fn select(&mut self, candidates: &[Candidate], ctx: &mut NodeContext<'_>, _: &mut BranchHistory) -> Result<Decision, LpError> {
        let out = score_fullstrong(candidates, ctx)?;
        if out.prunable {
            return Ok(Decision::Prune);
        }
        Ok(decide(out.scores))
    }
}

/// Reliability pseudo-cost branching.
#[derive(Debug)]
pub struct PseudocostRule {
    pub reliability: usize,
}

impl BranchingRule for PseudocostRule {
    fn name(&self) -> &str {
        "pseudocost"
    }

    fn select(&mut self, candidates: &[Candidate], ctx: &mut NodeContext<'_>, hist: &mut BranchHistory) -> Result<Decision, LpError> {
        let out = score_pseudocost(candidates, hist, self.reliability, ctx)?;
        if out.prunable {
            return Ok(Decision::Prune);
        }
        Ok(decide(out.scores))
    }
}

/// Branches on the candidate whose tableau-row cut is most efficacious.
#[derive(Debug)]
pub struct CutRule {
    pub kind: CutKind,
}

impl BranchingRule for CutRule {
    fn name(&self) -> &str {
        match self.kind {
            CutKind::Gmi => "gmi",
            CutKind::WeakGmi => "weakgmi",
        }
    }

    fn select(&mut self, candidates: &[Candidate], ctx: &mut NodeContext<'_>, _: &mut BranchHistory) -> Result<Decision, LpError> {
        Ok(decide(score_by_cut(self.kind, candidates, ctx)))
    }
}

/// Reliability pseudo-cost plus a small weight on the recorded GMI efficacy.
#[derive(Debug)]
pub struct HybridGmiRule {
    pub reliability: usize,
    pub weight: f64,
}

impl BranchingRule for HybridGmiRule {
    fn name(&self) -> &str {
        "hybridgmi"
    }

    fn select(&mut self, candidates: &[Candidate], ctx: &mut NodeContext<'_>, hist: &mut BranchHistory) -> Result<Decision, LpError> {
        let out = score_pseudocost(candidates, hist, self.reliability, ctx)?;
        if out.prunable {
            return Ok(Decision::Prune);
        }
        let mode = ctx.settings.gmi_history;
        Ok(decide(combine_hybrid_gmi(out.scores, hist, self.weight, mode)))
    }
}
