//! Gomory mixed-integer cuts from simplex tableau rows.
//!
//! A tableau row `x_j + sum a_i x'_i = b` over complemented nonbasic
//! variables `x' >= 0` yields, with `f0 = frac(b)` and `f_i = frac(a_i)`,
//!
//! ```text
//! sum_{int, f_i <= f0} f_i/f0 x'_i + sum_{int, f_i > f0} (1-f_i)/(1-f0) x'_i
//!   + sum_{cont, a_i >= 0} a_i/f0 x'_i - sum_{cont, a_i < 0} a_i/(1-f0) x'_i >= 1
//! ```
//!
//! The weak variant applies the continuous rule to every column; it is the
//! intersection cut of the elementary split on `x_j`, while the full GMI cut
//! is the intersection cut of the split with integer normal
//! `pi_i = floor(a_i)` (if `f_i <= f0`) or `ceil(a_i)` (otherwise).
//!
//! Cuts are stored as `alpha·x <= beta`.

use thiserror::Error;

use crate::model::{check_feasible_with, standardize, Milp, ModelError, Sense, StandardForm, VarOrigin};
use crate::simplex::{
    self, BoundOverrides, ColumnKind, LpError, LpLimits, LpResult, LpStatus, TableauRow, VarStatus,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutError {
    #[error("row right-hand side is too close to integral (f0 = {0:e})")]
    RhsTooIntegral(f64),
    #[error("cut coefficient dynamism {0:e} exceeds the safety limit")]
    Dynamism(f64),
    #[error("cut has no nonzero coefficients")]
    EmptyCut,
    #[error("cut has zero norm")]
    ZeroNorm,
    #[error("value {0} is not fractional")]
    NotFractional(f64),
    #[error("integer grid has more than {0} points or an infinite range")]
    TooLargeToEnumerate(u64),
    #[error("split coefficient {0} is not integral after substitution")]
    NonIntegralSplit(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Variable space a cut or split is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutSpace {
    /// LP columns, with nonbasic columns in their complemented local variables.
    Nonbasic,
    /// Structural columns of the standard form.
    Standard,
    /// Variables of the original problem.
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutKind {
    Gmi,
    WeakGmi,
}

impl CutKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CutKind::Gmi => "gmi",
            CutKind::WeakGmi => "weak_gmi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutSource {
    pub var: usize,
    pub kind: CutKind,
}

/// `alpha·x <= beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub space: CutSpace,
    pub source: Option<CutSource>,
}

impl Cut {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64, space: CutSpace) -> Self {
        Cut { coeffs, rhs, space, source: None }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt()
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// `alpha·x - beta`; positive when `x` violates the cut.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.activity(x) - self.rhs
    }

    /// Coefficients of the `>=` form `gamma·x >= -beta`, i.e. `-alpha`.
    pub fn geq_coefficients(&self) -> Vec<(usize, f64)> {
        self.coeffs.iter().map(|&(i, a)| (i, -a)).collect()
    }

    pub fn support_size(&self) -> usize {
        self.coeffs.len()
    }
}

/// `pi·x <= pi0  or  pi·x >= pi0 + 1` with integral `pi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDisjunction {
    pub pi: Vec<(usize, i64)>,
    pub pi0: i64,
    pub space: CutSpace,
}

impl SplitDisjunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.pi.iter().map(|&(i, p)| p as f64 * x[i]).sum()
    }

    /// True if `x` lies strictly between the two hyperplanes.
    pub fn strictly_inside(&self, x: &[f64], tol: f64) -> bool {
        let v = self.value(x);
        v > self.pi0 as f64 + tol && v < self.pi0 as f64 + 1.0 - tol
    }

    pub fn is_elementary(&self) -> bool {
        self.pi.len() == 1 && self.pi[0].1 == 1
    }
}

/// Safeguards applied when deriving a cut from a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmiSettings {
    /// Rows with `f0` outside `[f0_min, 1 - f0_min]` are skipped.
    pub f0_min: f64,
    /// Coefficients below this magnitude are dropped.
    pub min_coef: f64,
    /// Cuts with `max|gamma| / min|gamma|` above this are discarded.
    pub max_dynamism: f64,
}

impl Default for GmiSettings {
    fn default() -> Self {
        GmiSettings { f0_min: 1e-4, min_coef: 1e-12, max_dynamism: 1e10 }
    }
}

fn frac(v: f64) -> f64 {
    v - v.floor()
}

fn row_f0(row: &TableauRow, settings: &GmiSettings) -> Result<f64, CutError> {
    let f0 = frac(row.rhs);
    if f0 < settings.f0_min || f0 > 1.0 - settings.f0_min {
        return Err(CutError::RhsTooIntegral(f0));
    }
    Ok(f0)
}

fn continuous_coef(a: f64, f0: f64) -> f64 {
    if a >= 0.0 {
        a / f0
    } else {
        -a / (1.0 - f0)
    }
}

fn integer_coef(a: f64, f0: f64) -> f64 {
    let f = frac(a);
    if f <= f0 {
        f / f0
    } else {
        (1.0 - f) / (1.0 - f0)
    }
}

fn finish_nonbasic_cut(
    row: &TableauRow,
    gamma: Vec<(usize, f64)>,
    kind: CutKind,
    settings: &GmiSettings,
) -> Result<Cut, CutError> {
    let gamma: Vec<(usize, f64)> = gamma.into_iter().filter(|&(_, g)| g.abs() >= settings.min_coef).collect();
    if gamma.is_empty() {
        return Err(CutError::EmptyCut);
    }
    let (lo, hi) = gamma
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, g)| (lo.min(g.abs()), hi.max(g.abs())));
    if hi / lo > settings.max_dynamism {
        return Err(CutError::Dynamism(hi / lo));
    }
    Ok(Cut {
        coeffs: gamma.into_iter().map(|(i, g)| (i, -g)).collect(),
        rhs: -1.0,
        space: CutSpace::Nonbasic,
        source: Some(CutSource { var: row.basic_var, kind }),
    })
}

/// GMI cut of a tableau row; `int_mask` is indexed by LP column.
pub fn gmi_from_row(row: &TableauRow, int_mask: &[bool], settings: &GmiSettings) -> Result<Cut, CutError> {
    let f0 = row_f0(row, settings)?;
    let gamma = row
        .entries
        .iter()
        .map(|e| {
            let g = if int_mask[e.var] { integer_coef(e.coef, f0) } else { continuous_coef(e.coef, f0) };
            (e.var, g)
        })
        .collect();
    finish_nonbasic_cut(row, gamma, CutKind::Gmi, settings)
}

/// The unstrengthened cut: every column uses the continuous rule.
pub fn weak_gmi_from_row(row: &TableauRow, settings: &GmiSettings) -> Result<Cut, CutError> {
    let f0 = row_f0(row, settings)?;
    let gamma = row.entries.iter().map(|e| (e.var, continuous_coef(e.coef, f0))).collect();
    finish_nonbasic_cut(row, gamma, CutKind::WeakGmi, settings)
}

pub fn cut_from_row(
    kind: CutKind,
    row: &TableauRow,
    int_mask: &[bool],
    settings: &GmiSettings,
) -> Result<Cut, CutError> {
    match kind {
        CutKind::Gmi => gmi_from_row(row, int_mask, settings),
        CutKind::WeakGmi => weak_gmi_from_row(row, settings),
    }
}

/// Euclidean distance from `x` to the cut hyperplane, positive when violated.
pub fn efficacy(cut: &Cut, x: &[f64]) -> Result<f64, CutError> {
    let norm = cut.norm();
    if norm == 0.0 {
        return Err(CutError::ZeroNorm);
    }
    Ok(cut.violation(x) / norm)
}

/// `(pi, pi0) = (e_j, floor(value))`, the disjunction behind branching on `x_j`.
pub fn elementary_split(j: usize, lp_value: f64) -> Result<SplitDisjunction, CutError> {
    let f = frac(lp_value);
    if !(crate::model::INT_TOL..=1.0 - crate::model::INT_TOL).contains(&f) {
        return Err(CutError::NotFractional(lp_value));
    }
    Ok(SplitDisjunction { pi: vec![(j, 1)], pi0: lp_value.floor() as i64, space: CutSpace::Original })
}

/// The split whose intersection cut is the GMI cut of `row`, over LP
/// columns in local (complemented) variables.
pub fn split_of_gmi(row: &TableauRow, int_mask: &[bool], settings: &GmiSettings) -> Result<SplitDisjunction, CutError> {
    let f0 = row_f0(row, settings)?;
    let mut pi = vec![(row.basic_var, 1i64)];
    for e in &row.entries {
        if !int_mask[e.var] {
            continue;
        }
        let p = if frac(e.coef) <= f0 { e.coef.floor() } else { e.coef.ceil() };
        if p != 0.0 {
            pi.push((e.var, p as i64));
        }
    }
    pi.sort_by_key(|&(i, _)| i);
    Ok(SplitDisjunction { pi, pi0: row.rhs.floor() as i64, space: CutSpace::Nonbasic })
}

/// Rewrites `sum_i t_i * local_i` (LP columns, nonbasics in local variables)
/// as `sum_k c_k x_k + constant` over standard structural columns.
fn local_to_structural(terms: &[(usize, f64)], res: &LpResult) -> (Vec<f64>, f64) {
    let prob = &res.problem;
    let mut lp_coef = vec![0.0; prob.n_cols()];
    let mut constant = 0.0;
    for &(i, t) in terms {
        match res.basis.status[i] {
            VarStatus::Basic => lp_coef[i] += t,
            VarStatus::AtLower => {
                lp_coef[i] += t;
                constant -= t * res.lower[i];
            }
            VarStatus::AtUpper => {
                lp_coef[i] -= t;
                constant += t * res.upper[i];
            }
        }
    }
    let mut coef = vec![0.0; prob.n_structural];
    for (i, &c) in lp_coef.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        match prob.kinds[i] {
            ColumnKind::Structural => coef[i] += c,
            ColumnKind::Slack { row } => {
                // s = rhs - coeffs·x
                let def = &prob.rows[row];
                constant += c * def.rhs;
                for &(k, a) in &def.coeffs {
                    coef[k] -= c * a;
                }
            }
        }
    }
    (coef, constant)
}

/// Expresses a nonbasic-space cut over standard structural variables.
/// The violation `alpha·x - beta` at the generating LP point is preserved.
pub fn to_structural_space(cut: &Cut, sf: &StandardForm, res: &LpResult) -> Cut {
    match cut.space {
        CutSpace::Standard => return cut.clone(),
        CutSpace::Nonbasic => {}
        CutSpace::Original => panic!("original-space cut cannot be mapped back to the standard form"),
    }
    let (coef, constant) = local_to_structural(&cut.coeffs, res);
    let mut rhs = cut.rhs - constant;
    let scale = coef.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut coeffs = Vec::new();
    for (k, &a) in coef.iter().enumerate() {
        if a.abs() > 1e-12 * scale.max(1.0) {
            coeffs.push((k, a));
        } else if a < 0.0 {
            // dropping a negative term is only safe when its column is bounded
            if sf.upper[k].is_finite() {
                rhs += -a * sf.upper[k];
            } else {
                coeffs.push((k, a));
            }
        }
    }
    Cut { coeffs, rhs, space: CutSpace::Standard, source: cut.source }
}

/// Maps a standard-space cut to the original variables.
pub fn to_original_space(cut: &Cut, sf: &StandardForm) -> Cut {
    assert_eq!(cut.space, CutSpace::Standard);
    let mut rhs = cut.rhs;
    let coeffs = cut
        .coeffs
        .iter()
        .map(|&(k, a)| match sf.var_map[k] {
            VarOrigin::Shifted { shift, .. } => {
                rhs += a * shift;
                (k, a)
            }
            VarOrigin::Negated { upper, .. } => {
                rhs -= a * upper;
                (k, -a)
            }
            VarOrigin::Slack { .. } => unreachable!("slack in structural cut"),
        })
        .collect();
    Cut { coeffs, rhs, space: CutSpace::Original, source: cut.source }
}

fn to_integer(v: f64) -> Result<i64, CutError> {
    let r = v.round();
    if (v - r).abs() > 1e-6 {
        return Err(CutError::NonIntegralSplit(v));
    }
    Ok(r as i64)
}

/// Maps a nonbasic-space split of `res` to the original variables.
pub fn split_to_original(split: &SplitDisjunction, sf: &StandardForm, res: &LpResult) -> Result<SplitDisjunction, CutError> {
    let (pi_std, pi0_std) = match split.space {
        CutSpace::Original => return Ok(split.clone()),
        CutSpace::Nonbasic => {
            let terms: Vec<(usize, f64)> = split.pi.iter().map(|&(i, p)| (i, p as f64)).collect();
            let (coef, constant) = local_to_structural(&terms, res);
            (coef, split.pi0 as f64 - constant)
        }
        CutSpace::Standard => {
            let mut coef = vec![0.0; sf.n_structural];
            for &(i, p) in &split.pi {
                coef[i] = p as f64;
            }
            (coef, split.pi0 as f64)
        }
    };
    let mut pi0 = pi0_std;
    let mut pi = Vec::new();
    for (k, &a) in pi_std.iter().enumerate() {
        if a.abs() < 1e-9 {
            continue;
        }
        let p = match sf.var_map[k] {
            VarOrigin::Shifted { shift, .. } => {
                pi0 += a * shift;
                a
            }
            VarOrigin::Negated { upper, .. } => {
                pi0 -= a * upper;
                -a
            }
            VarOrigin::Slack { .. } => unreachable!(),
        };
        pi.push((k, to_integer(p)?));
    }
    Ok(SplitDisjunction { pi, pi0: to_integer(pi0)?, space: CutSpace::Original })
}

/// Where efficacy is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EfficacySpace {
    /// After conversion to standard structural variables.
    #[default]
    Structural,
    /// In complemented nonbasic space, where efficacy is `1/||gamma||`.
    Nonbasic,
}

/// Efficacy of a nonbasic-space cut at the LP point of `res`, together
/// with its standard-space form.
pub fn scored_efficacy(cut: &Cut, sf: &StandardForm, res: &LpResult, space: EfficacySpace) -> Result<(Cut, f64), CutError> {
    let std_cut = to_structural_space(cut, sf, res);
    let eff = match space {
        EfficacySpace::Nonbasic => efficacy(cut, &vec![0.0; res.problem.n_cols()])?,
        EfficacySpace::Structural => efficacy(&std_cut, res.structural())?,
    };
    Ok((std_cut, eff))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationSettings {
    pub gmi: GmiSettings,
    pub eff_min: f64,
    pub max_cuts: usize,
    pub space: EfficacySpace,
    pub int_tol: f64,
}

impl Default for SeparationSettings {
    fn default() -> Self {
        SeparationSettings {
            gmi: GmiSettings::default(),
            eff_min: 1e-4,
            max_cuts: 10,
            space: EfficacySpace::Structural,
            int_tol: crate::model::INT_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoredCut {
    /// Standard structural space.
    pub cut: Cut,
    pub nonbasic: Cut,
    pub row: TableauRow,
    pub efficacy: f64,
}

impl ScoredCut {
    pub fn var(&self) -> usize {
        self.row.basic_var
    }
}

/// Integer structural variables that are basic with a fractional value.
pub fn fractional_basic_rows(res: &LpResult, int_tol: f64) -> Vec<usize> {
    let prob = &res.problem;
    (0..prob.n_structural)
        .filter(|&j| prob.integer[j] && res.basis.status[j] == VarStatus::Basic)
        .filter(|&j| {
            let f = frac(res.x[j]);
            f > int_tol && f < 1.0 - int_tol
        })
        .collect()
}

/// One GMI cut attempt per fractional basic integer row; gated rows are
/// skipped. No efficacy filtering is applied here.
pub fn generate_round(sf: &StandardForm, res: &LpResult, settings: &SeparationSettings) -> Vec<ScoredCut> {
    let mut out = Vec::new();
    for j in fractional_basic_rows(res, settings.int_tol) {
        let Ok(row) = simplex::tableau_row(res, j) else { continue };
        let Ok(nb) = gmi_from_row(&row, &res.problem.integer, &settings.gmi) else { continue };
        let Ok((cut, eff)) = scored_efficacy(&nb, sf, res, settings.space) else { continue };
        if cut.coeffs.is_empty() {
            continue;
        }
        out.push(ScoredCut { cut, nonbasic: nb, row, efficacy: eff });
    }
    out
}

/// Drops cuts below `eff_min` and keeps the `max_cuts` most efficacious,
/// ties by lower generating variable.
pub fn select_cuts(mut cands: Vec<ScoredCut>, settings: &SeparationSettings) -> Vec<ScoredCut> {
    cands.retain(|c| c.efficacy >= settings.eff_min);
    cands.sort_by(|a, b| b.efficacy.total_cmp(&a.efficacy).then(a.var().cmp(&b.var())));
    cands.truncate(settings.max_cuts);
    cands
}

pub fn separate_round(sf: &StandardForm, res: &LpResult, settings: &SeparationSettings) -> Vec<(Cut, f64)> {
    if !res.is_optimal() {
        return Vec::new();
    }
    select_cuts(generate_round(sf, res, settings), settings)
        .into_iter()
        .map(|c| (c.cut, c.efficacy))
        .collect()
}

/// Exhaustive enumeration of the integer grid of a small problem, used to
/// certify cuts and splits.
pub struct ValidityOracle {
    problem: Milp,
    int_vars: Vec<usize>,
    cont_vars: Vec<usize>,
    /// Integer assignments (full-length vectors, continuous entries zero)
    /// for which the continuous remainder is feasible.
    assignments: Vec<Vec<f64>>,
}

pub const MAX_ENUMERATION: u64 = 1_000_000;

impl ValidityOracle {
    pub fn new(p: &Milp) -> Result<Self, CutError> {
        p.validate()?;
        let int_vars: Vec<usize> = p.integer_indices().collect();
        let cont_vars: Vec<usize> = (0..p.n_vars()).filter(|&i| !p.integer[i]).collect();
        let mut ranges = Vec::with_capacity(int_vars.len());
        let mut total: u64 = 1;
        for &i in &int_vars {
            let (l, u) = p.effective_bounds(i);
            if !l.is_finite() || !u.is_finite() {
                return Err(CutError::TooLargeToEnumerate(MAX_ENUMERATION));
            }
            if l > u {
                ranges.push((0i64, -1i64));
                total = 0;
                continue;
            }
            let (l, u) = (l as i64, u as i64);
            total = total.saturating_mul((u - l + 1) as u64);
            if total > MAX_ENUMERATION {
                return Err(CutError::TooLargeToEnumerate(MAX_ENUMERATION));
            }
            ranges.push((l, u));
        }
        let mut oracle = ValidityOracle { problem: p.clone(), int_vars, cont_vars, assignments: Vec::new() };
        if total == 0 {
            return Ok(oracle);
        }
        let mut point = vec![0.0; p.n_vars()];
        let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            for (k, &i) in oracle.int_vars.iter().enumerate() {
                point[i] = cur[k] as f64;
            }
            if oracle.assignment_feasible(&point)? {
                oracle.assignments.push(point.clone());
            }
            // odometer increment
            let mut k = 0;
            loop {
                if k == cur.len() {
                    return Ok(oracle);
                }
                if cur[k] < ranges[k].1 {
                    cur[k] += 1;
                    break;
                }
                cur[k] = ranges[k].0;
                k += 1;
            }
        }
    }

    pub fn feasible_assignments(&self) -> &[Vec<f64>] {
        &self.assignments
    }

    fn assignment_feasible(&self, point: &[f64]) -> Result<bool, CutError> {
        if self.cont_vars.is_empty() {
            return Ok(check_feasible_with(&self.problem, point, 1e-9, None));
        }
        let res = self.continuous_lp(point, &[])?;
        Ok(res.is_some_and(|(status, _)| status != LpStatus::Infeasible))
    }

    /// Maximizes `objective` (over continuous variables) with the integer part fixed.
    /// Returns `None` when the restriction is trivially infeasible.
    fn continuous_lp(&self, point: &[f64], objective: &[(usize, f64)]) -> Result<Option<(LpStatus, f64)>, CutError> {
        let p = &self.problem;
        let pos: std::collections::HashMap<usize, usize> =
            self.cont_vars.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut q = Milp::new("restriction", self.cont_vars.len());
        for (k, &i) in self.cont_vars.iter().enumerate() {
            q.lower[k] = p.lower[i];
            q.upper[k] = p.upper[i];
        }
        for &(i, a) in objective {
            if let Some(&k) = pos.get(&i) {
                q.objective[k] = -a;
            }
        }
        for row in &p.constraints {
            let mut rhs = row.rhs;
            let mut coeffs = Vec::new();
            for &(i, a) in &row.coeffs {
                match pos.get(&i) {
                    Some(&k) => coeffs.push((k, a)),
                    None => rhs -= a * point[i],
                }
            }
            if coeffs.is_empty() {
                let ok = match row.sense {
                    Sense::Le => rhs >= -1e-9,
                    Sense::Ge => rhs <= 1e-9,
                    Sense::Eq => rhs.abs() <= 1e-9,
                };
                if !ok {
                    return Ok(None);
                }
                continue;
            }
            q.add_constraint(coeffs, row.sense, rhs);
        }
        let sf = standardize(&q)?;
        let res = simplex::solve_lp(&sf, &[], &BoundOverrides::new(), None, &LpLimits::default())?;
        Ok(Some((res.status, -res.objective)))
    }

    /// True iff no mixed-integer feasible point violates `cut` by more than `tol`.
    pub fn is_valid(&self, cut: &Cut, tol: f64) -> Result<bool, CutError> {
        self.is_valid_within(cut, &[], tol)
    }

    /// Like [`ValidityOracle::is_valid`], restricted to the feasible points
    /// whose integer variables lie in `bounds` (`(var, lower, upper)`,
    /// original space), as for a cut generated at a branch-and-bound node.
    pub fn is_valid_within(&self, cut: &Cut, bounds: &[(usize, f64, f64)], tol: f64) -> Result<bool, CutError> {
        assert_eq!(cut.space, CutSpace::Original);
        let int_part: Vec<(usize, f64)> =
            cut.coeffs.iter().copied().filter(|&(i, _)| self.problem.integer[i]).collect();
        let cont_part: Vec<(usize, f64)> =
            cut.coeffs.iter().copied().filter(|&(i, _)| !self.problem.integer[i]).collect();
        let inside = |x: &[f64]| bounds.iter().all(|&(i, lo, hi)| x[i] >= lo - 1e-9 && x[i] <= hi + 1e-9);
        for point in self.assignments.iter().filter(|x| inside(x)) {
            let int_act: f64 = int_part.iter().map(|&(i, a)| a * point[i]).sum();
            let cont_max = if cont_part.is_empty() {
                0.0
            } else {
                match self.continuous_lp(point, &cont_part)? {
                    None => continue,
                    Some((LpStatus::Optimal, v)) => v,
                    Some((LpStatus::Infeasible, _)) => continue,
                    Some((LpStatus::Unbounded, _)) => return Ok(false),
                    Some((LpStatus::IterationLimit, _)) => {
                        return Err(LpError::NumericalFailure("iteration limit in validity check".into()).into())
                    }
                }
            };
            if int_act + cont_max > cut.rhs + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True iff no feasible integer assignment lies strictly inside the strip of `split`.
    pub fn split_is_sound(&self, split: &SplitDisjunction, tol: f64) -> bool {
        assert_eq!(split.space, CutSpace::Original);
        if split.pi.iter().any(|&(i, p)| p != 0 && !self.problem.integer[i]) {
            return false;
        }
        self.assignments.iter().all(|x| !split.strictly_inside(x, tol))
    }
}

/// Exhaustive check that `cut` (original space) removes no mixed-integer feasible point.
pub fn check_cut_validity(p: &Milp, cut: &Cut, tol: f64) -> Result<bool, CutError> {
    ValidityOracle::new(p)?.is_valid(cut, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::RowEntry;

    fn row(rhs: f64, entries: &[(usize, f64)]) -> TableauRow {
        TableauRow {
            basic_var: 0,
            rhs,
            entries: entries
                .iter()
                .map(|&(var, coef)| RowEntry { var, coef, complemented: false, bound: 0.0 })
                .collect(),
        }
    }

    fn geq(c: &Cut) -> Vec<(usize, f64)> {
        c.geq_coefficients()
    }

    #[test]
    fn gmi_half_integral_row() {
        // x_j = 0.5 - 1.5 x_N  ->  x_j + 1.5 x_N = 0.5
        let r = row(0.5, &[(1, 1.5)]);
        let mask = [true, true];
        let c = gmi_from_row(&r, &mask, &GmiSettings::default()).unwrap();
        assert_eq!(geq(&c), vec![(1, 1.0)]);
        assert_eq!(c.rhs, -1.0);
        assert_eq!(c.source, Some(CutSource { var: 0, kind: CutKind::Gmi }));
        let w = weak_gmi_from_row(&r, &GmiSettings::default()).unwrap();
        assert_eq!(geq(&w), vec![(1, 3.0)]);
    }

    #[test]
    fn gmi_coefficient_cases() {
        let r = row(2.25, &[(1, 0.75), (2, -2.0)]);
        let mask = [true, true, false];
        let c = gmi_from_row(&r, &mask, &GmiSettings::default()).unwrap();
        let g = geq(&c);
        assert!((g[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((g[1].1 - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weak_equals_gmi_on_continuous_rows() {
        let r = row(1.3, &[(1, 0.4), (2, -1.7)]);
        let mask = [true, false, false];
        let s = GmiSettings::default();
        let a = gmi_from_row(&r, &mask, &s).unwrap();
        let b = weak_gmi_from_row(&r, &s).unwrap();
        assert_eq!(a.coeffs, b.coeffs);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn rhs_gate() {
        let r = row(3.000001, &[(1, 1.0)]);
        assert!(matches!(weak_gmi_from_row(&r, &GmiSettings::default()), Err(CutError::RhsTooIntegral(_))));
        let r = row(0.99999, &[(1, 1.0)]);
        assert!(matches!(gmi_from_row(&r, &[true, true], &GmiSettings::default()), Err(CutError::RhsTooIntegral(_))));
    }

    #[test]
    fn dynamism_and_empty_gates() {
        let r = row(0.5, &[(1, 1e-11), (2, 100.0)]);
        let mask = [false; 3];
        assert!(matches!(gmi_from_row(&r, &mask, &GmiSettings::default()), Err(CutError::Dynamism(_))));
        let r = row(0.5, &[(1, 2.0)]);
        // integral coefficient on an integer column contributes nothing
        assert_eq!(gmi_from_row(&r, &[true, true], &GmiSettings::default()), Err(CutError::EmptyCut));
    }

    #[test]
    fn efficacy_examples() {
        let c = Cut::new(vec![(0, 3.0), (1, 4.0)], 1.0, CutSpace::Original);
        assert!((efficacy(&c, &[1.0, 1.0]).unwrap() - 1.2).abs() < 1e-15);
        let c = Cut::new(vec![(0, 1.0), (1, 1.0)], 2.0, CutSpace::Original);
        assert_eq!(efficacy(&c, &[1.0, 1.0]).unwrap(), 0.0);
        let c = Cut::new(vec![(0, 1.0), (1, 0.0)], 0.0, CutSpace::Original);
        assert_eq!(efficacy(&c, &[-1.0, 0.0]).unwrap(), -1.0);
        let z = Cut::new(vec![], 0.0, CutSpace::Original);
        assert_eq!(efficacy(&z, &[1.0]), Err(CutError::ZeroNorm));
    }

    #[test]
    fn elementary_split_examples() {
        let s = elementary_split(3, 2.3).unwrap();
        assert_eq!((s.pi, s.pi0), (vec![(3, 1)], 2));
        let s = elementary_split(0, -0.5).unwrap();
        assert_eq!((s.pi, s.pi0), (vec![(0, 1)], -1));
        assert_eq!(elementary_split(1, 2.0), Err(CutError::NotFractional(2.0)));
    }

    #[test]
    fn split_of_gmi_examples() {
        let mask = [true, true];
        let s = split_of_gmi(&row(0.5, &[(1, 1.5)]), &mask, &GmiSettings::default()).unwrap();
        assert_eq!((s.pi, s.pi0), (vec![(0, 1), (1, 1)], 0));
        let s = split_of_gmi(&row(2.7, &[(1, -0.4)]), &[true, false], &GmiSettings::default()).unwrap();
        assert_eq!((s.pi, s.pi0), (vec![(0, 1)], 2));
        let s = split_of_gmi(&row(0.25, &[(1, 0.75)]), &mask, &GmiSettings::default()).unwrap();
        assert_eq!(s.pi, vec![(0, 1), (1, 1)]);
    }

    #[test]
    fn validity_oracle_detects_invalid_cut() {
        let mut p = Milp::new("t", 2);
        p.integer = vec![true, true];
        p.upper = vec![1.0, 1.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        // x0 >= 1 as -x0 <= -1 removes (0, 0)
        let bad = Cut::new(vec![(0, -1.0)], -1.0, CutSpace::Original);
        assert!(!check_cut_validity(&p, &bad, 1e-6).unwrap());
        let good = Cut::new(vec![(0, 1.0), (1, 1.0)], 1.0, CutSpace::Original);
        assert!(check_cut_validity(&p, &good, 1e-6).unwrap());
    }

    #[test]
    fn validity_oracle_continuous_only() {
        let mut p = Milp::new("t", 2);
        p.upper = vec![1.0, 1.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.5);
        let o = ValidityOracle::new(&p).unwrap();
        assert_eq!(o.feasible_assignments().len(), 1);
        assert!(o.is_valid(&Cut::new(vec![(0, 1.0), (1, 1.0)], 1.5, CutSpace::Original), 1e-6).unwrap());
        assert!(!o.is_valid(&Cut::new(vec![(0, 1.0), (1, 1.0)], 1.4, CutSpace::Original), 1e-6).unwrap());
    }

    #[test]
    fn validity_oracle_rejects_huge_grids() {
        let mut p = Milp::new("t", 3);
        p.integer = vec![true; 3];
        p.upper = vec![1000.0; 3];
        assert!(matches!(ValidityOracle::new(&p), Err(CutError::TooLargeToEnumerate(_))));
    }
}
