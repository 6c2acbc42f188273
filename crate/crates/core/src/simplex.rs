//! Bounded-variable primal simplex over a [`StandardForm`], plus access to
//! individual tableau rows of the final basis.
//!
//! The basis inverse is kept dense and updated in product form, with a fresh
//! inversion every [`REFACTOR_INTERVAL`] pivots. Pricing is Dantzig's rule
//! until [`LpLimits::bland_after`] consecutive degenerate pivots, after which
//! Bland's rule takes over for the rest of the phase.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::cutgen::{Cut, CutSpace};
use crate::model::{StandardForm, VarOrigin};

pub const REFACTOR_INTERVAL: usize = 50;
const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const ROW_DROP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("variable {0} is not basic")]
    NotBasic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// What an LP column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    /// Structural column; same index as the original variable.
    Structural,
    /// Slack of LP row `row` (a standard-form row or an appended cut row).
    Slack { row: usize },
}

/// One LP row: `coeffs·x_struct + slack = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDef {
    pub coeffs: Vec<(usize, f64)>,
    pub slack: Option<usize>,
    pub rhs: f64,
}

/// Per-variable bound changes in LP column space (branching decisions).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundOverrides(BTreeMap<usize, (f64, f64)>);

impl BoundOverrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, j: usize) -> Option<(f64, f64)> {
        self.0.get(&j).copied()
    }

    /// Intersects the current interval of `j` (defaulting to `default`) with `[lo, hi]`.
    pub fn tighten(&mut self, j: usize, lo: f64, hi: f64, default: (f64, f64)) {
        let (a, b) = self.0.get(&j).copied().unwrap_or(default);
        self.0.insert(j, (a.max(lo), b.min(hi)));
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.0.iter().map(|(&j, &(a, b))| (j, a, b))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The equality-form LP handed to the simplex: standard-form rows followed
/// by cut rows, each inequality carrying its own slack column.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub n_structural: usize,
    /// Columns of the underlying standard form (structurals and their slacks).
    pub n_sf_cols: usize,
    pub rows: Vec<RowDef>,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub kinds: Vec<ColumnKind>,
    pub obj_offset: f64,
}

impl LpProblem {
    /// Builds the LP of `sf` with `cuts` (standard structural space) appended as rows.
    pub fn new(sf: &StandardForm, cuts: &[Cut]) -> Self {
        let mut rows: Vec<RowDef> = sf
            .rows
            .iter()
            .map(|r| RowDef { coeffs: r.coeffs.clone(), slack: r.slack, rhs: r.rhs })
            .collect();
        let mut cost = sf.cost.clone();
        let mut upper = sf.upper.clone();
        let mut integer = sf.integer.clone();
        let mut kinds: Vec<ColumnKind> = sf
            .var_map
            .iter()
            .map(|v| match v {
                VarOrigin::Slack { row } => ColumnKind::Slack { row: *row },
                _ => ColumnKind::Structural,
            })
            .collect();
        for cut in cuts {
            assert_eq!(cut.space, CutSpace::Standard, "LP rows need standard-space cuts");
            let scale = cut.coeffs.iter().fold(0.0f64, |m, &(_, a)| m.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let col = cost.len();
            rows.push(RowDef {
                coeffs: cut.coeffs.iter().map(|&(j, a)| (j, a / scale)).collect(),
                slack: Some(col),
                rhs: cut.rhs / scale,
            });
            cost.push(0.0);
            upper.push(f64::INFINITY);
            integer.push(false);
            kinds.push(ColumnKind::Slack { row: rows.len() - 1 });
        }
        let mut cols = vec![Vec::new(); cost.len()];
        for (r, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((r, a));
                }
            }
            if let Some(s) = row.slack {
                cols[s].push((r, 1.0));
            }
        }
        LpProblem {
            n_structural: sf.n_structural,
            n_sf_cols: sf.n_cols(),
            lower: vec![0.0; cost.len()],
            rows,
            cols,
            cost,
            upper,
            integer,
            kinds,
            obj_offset: sf.obj_offset,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn bounds_with(&self, overrides: &BoundOverrides) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        for (j, a, b) in overrides.iter() {
            lo[j] = lo[j].max(a);
            hi[j] = hi[j].min(b);
        }
        (lo, hi)
    }

    /// `max_r |row_r·x - rhs_r|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
                    + row.slack.map_or(0.0, |s| x[s]);
                (act - row.rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Dense basis inverse together with the artificial column signs it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFactor {
    m: usize,
    binv: Vec<f64>,
    art_sign: Vec<f64>,
}

impl BasisFactor {
    /// Row `r` of the basis inverse.
    pub fn inverse_row(&self, r: usize) -> &[f64] {
        &self.binv[r * self.m..(r + 1) * self.m]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    /// Basic column per row; indices `>= n_cols` denote the artificial of that row.
    pub basic: Vec<usize>,
    /// Status of every column including artificials.
    pub status: Vec<VarStatus>,
    pub factor: Option<Arc<BasisFactor>>,
}

impl Basis {
    pub fn row_of(&self, j: usize) -> Option<usize> {
        self.basic.iter().position(|&b| b == j)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpLimits {
    pub max_iterations: usize,
    pub deadline: Option<Instant>,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpLimits {
    fn default() -> Self {
        LpLimits { max_iterations: 100_000, deadline: None, bland_after: 1000 }
    }
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective in the original space (standard-form offset included).
    pub objective: f64,
    /// Values of every LP column.
    pub x: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub problem: Arc<LpProblem>,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Structural part of the primal solution.
    pub fn structural(&self) -> &[f64] {
        &self.x[..self.problem.n_structural]
    }

    /// Phase-2 reduced costs of the real columns at the final basis.
    pub fn reduced_costs(&self) -> Vec<f64> {
        let Some(factor) = &self.basis.factor else {
            return Vec::new();
        };
        let prob = &self.problem;
        let m = factor.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basis.basic.iter().enumerate() {
            let c = if bj < prob.n_cols() { prob.cost[bj] } else { 0.0 };
            if c != 0.0 {
                for k in 0..m {
                    y[k] += c * factor.binv[i * m + k];
                }
            }
        }
        (0..prob.n_cols())
            .map(|j| prob.cost[j] - prob.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>())
            .collect()
    }
}

/// Solves the LP of `sf` with extra cut rows and bound overrides.
pub fn solve_lp(
    sf: &StandardForm,
    extra_cuts: &[Cut],
    overrides: &BoundOverrides,
    start: Option<&Basis>,
    limits: &LpLimits,
) -> Result<LpResult, LpError> {
    let prob = Arc::new(LpProblem::new(sf, extra_cuts));
    solve_problem(&prob, overrides, start, limits)
}

/// Solves a prebuilt LP. A warm start is used only when `start` is
/// primal feasible under the given bounds; otherwise the solve starts cold.
pub fn solve_problem(
    prob: &Arc<LpProblem>,
    overrides: &BoundOverrides,
    start: Option<&Basis>,
    limits: &LpLimits,
) -> Result<LpResult, LpError> {
    let (lower, upper) = prob.bounds_with(overrides);
    if let Some(j) = (0..prob.n_cols()).find(|&j| lower[j] > upper[j] + PRIMAL_TOL) {
        let _ = j;
        return Ok(infeasible_result(prob, lower, upper));
    }
    if let Some(basis) = start {
        let mut s = Simplex::new(prob, &lower, &upper, limits);
        if s.warm_start(basis).is_ok() {
            if let Ok(status) = s.run_phase2() { return Ok(s.finish(status, lower, upper)) }
        }
    }
    let mut s = Simplex::new(prob, &lower, &upper, limits);
    match s.run_cold() {
        Ok(status) => Ok(s.finish(status, lower, upper)),
        Err(e) => Err(e),
    }
}

fn infeasible_result(prob: &Arc<LpProblem>, lower: Vec<f64>, upper: Vec<f64>) -> LpResult {
    let n = prob.n_cols();
    LpResult {
        status: LpStatus::Infeasible,
        objective: f64::INFINITY,
        x: vec![0.0; n],
        basis: Basis { basic: Vec::new(), status: vec![VarStatus::AtLower; n + prob.n_rows()], factor: None },
        iterations: 0,
        lower,
        upper,
        problem: Arc::clone(prob),
    }
}

struct Simplex<'a> {
    prob: &'a Arc<LpProblem>,
    limits: &'a LpLimits,
    m: usize,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    art_sign: Vec<f64>,
    basic: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl<'a> Simplex<'a> {
    fn new(prob: &'a Arc<LpProblem>, lower: &[f64], upper: &[f64], limits: &'a LpLimits) -> Self {
        let m = prob.n_rows();
        let n = prob.n_cols();
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        lo.extend(std::iter::repeat_n(0.0, m));
        hi.extend(std::iter::repeat_n(0.0, m));
        Simplex {
            prob,
            limits,
            m,
            n,
            lower: lo,
            upper: hi,
            cost: vec![0.0; n + m],
            art_sign: vec![1.0; m],
            basic: Vec::new(),
            status: vec![VarStatus::AtLower; n + m],
            x: vec![0.0; n + m],
            binv: vec![0.0; m * m],
            since_refactor: 0,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for &(r, a) in &self.prob.cols[j] {
                out[r] = a;
            }
        } else {
            let r = j - self.n;
            out[r] = self.art_sign[r];
        }
    }

    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            self.prob.cols[j].iter().map(|&(r, a)| y[r] * a).sum()
        } else {
            let r = j - self.n;
            y[r] * self.art_sign[r]
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtUpper => self.upper[j],
            _ => self.lower[j],
        }
    }

    /// Residual `b - N x_N` for the current nonbasic values.
    fn nonbasic_residual(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.prob.rows.iter().map(|row| row.rhs).collect();
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for &(row, a) in &self.prob.cols[j] {
                    r[row] -= a * v;
                }
            } else {
                let row = j - self.n;
                r[row] -= self.art_sign[row] * v;
            }
        }
        r
    }

    fn run_cold(&mut self) -> Result<LpStatus, LpError> {
        let (m, n) = (self.m, self.n);
        for j in 0..n {
            self.status[j] = VarStatus::AtLower;
            self.x[j] = self.lower[j];
        }
        for k in 0..m {
            self.status[n + k] = VarStatus::AtLower;
            self.x[n + k] = 0.0;
        }
        // slacks are basic at zero in the residual computation
        let mut r: Vec<f64> = self.prob.rows.iter().map(|row| row.rhs).collect();
        for j in 0..n {
            if self.x[j] != 0.0 && !matches!(self.prob.kinds[j], ColumnKind::Slack { .. }) {
                for &(row, a) in &self.prob.cols[j] {
                    r[row] -= a * self.x[j];
                }
            }
        }
        // slack columns start at their lower bound unless used as the initial basic
        for (j, kind) in self.prob.kinds.iter().enumerate() {
            if let ColumnKind::Slack { row } = *kind {
                r[row] -= self.x[j];
            }
        }
        self.basic = vec![usize::MAX; m];
        for k in 0..m {
            let slack = self.prob.rows[k].slack;
            match slack {
                Some(s) if r[k] + self.lower[s] >= 0.0 && r[k] + self.lower[s] <= self.upper[s] => {
                    self.basic[k] = s;
                    self.status[s] = VarStatus::Basic;
                    self.x[s] = r[k] + self.lower[s];
                    self.art_sign[k] = 1.0;
                    self.upper[n + k] = 0.0;
                }
                _ => {
                    self.art_sign[k] = if r[k] >= 0.0 { 1.0 } else { -1.0 };
                    self.basic[k] = n + k;
                    self.status[n + k] = VarStatus::Basic;
                    self.x[n + k] = r[k].abs();
                    self.upper[n + k] = f64::INFINITY;
                }
            }
        }
        self.refactor()?;
        let needs_phase1 = (0..m).any(|k| self.basic[k] >= n);
        if needs_phase1 {
            self.cost.iter_mut().for_each(|c| *c = 0.0);
            for k in 0..m {
                if self.upper[n + k] > 0.0 {
                    self.cost[n + k] = 1.0;
                }
            }
            match self.iterate()? {
                LpStatus::Optimal => {}
                LpStatus::IterationLimit => return Ok(LpStatus::IterationLimit),
                LpStatus::Unbounded => {
                    return Err(LpError::NumericalFailure("phase 1 reported unbounded".into()))
                }
                LpStatus::Infeasible => unreachable!(),
            }
            let infeas: f64 = (0..m).map(|k| self.x[n + k].max(0.0)).sum();
            if infeas > PHASE1_TOL {
                return Ok(LpStatus::Infeasible);
            }
            for k in 0..m {
                self.upper[n + k] = 0.0;
                if self.status[n + k] != VarStatus::Basic {
                    self.status[n + k] = VarStatus::AtLower;
                    self.x[n + k] = 0.0;
                }
            }
        }
        self.run_phase2()
    }

    fn warm_start(&mut self, basis: &Basis) -> Result<(), LpError> {
        let (m, n) = (self.m, self.n);
        if basis.basic.len() != m || basis.status.len() != n + m {
            return Err(LpError::NumericalFailure("basis dimension mismatch".into()));
        }
        if let Some(f) = &basis.factor {
            self.art_sign.copy_from_slice(&f.art_sign);
        }
        self.basic = basis.basic.clone();
        self.status = basis.status.clone();
        for j in 0..n + m {
            if self.status[j] == VarStatus::AtUpper && !self.upper[j].is_finite() {
                self.status[j] = VarStatus::AtLower;
            }
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.refactor()?;
        for &bj in &self.basic {
            let v = self.x[bj];
            if v < self.lower[bj] - PRIMAL_TOL || v > self.upper[bj] + PRIMAL_TOL {
                return Err(LpError::NumericalFailure("warm start basis infeasible".into()));
            }
        }
        Ok(())
    }

    fn run_phase2(&mut self) -> Result<LpStatus, LpError> {
        for j in 0..self.n {
            self.cost[j] = self.prob.cost[j];
        }
        for k in 0..self.m {
            self.cost[self.n + k] = 0.0;
        }
        self.bland = false;
        self.degenerate_run = 0;
        // re-verify on a fresh factorization before declaring optimality
        for _ in 0..5 {
            let status = self.iterate()?;
            if status != LpStatus::Optimal {
                return Ok(status);
            }
            self.refactor()?;
            if self.price().is_none() {
                return Ok(LpStatus::Optimal);
            }
        }
        Ok(LpStatus::Optimal)
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &bj) in self.basic.iter().enumerate() {
            let c = self.cost[bj];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += c * row[k];
                }
            }
        }
        y
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self) -> Option<(usize, f64)> {
        let y = self.duals();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let d = self.cost[j] - self.dot_column(&y, j);
            let dir = match st {
                VarStatus::AtLower if d < -DUAL_TOL => 1.0,
                VarStatus::AtUpper if d > DUAL_TOL => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| d.abs() > s) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn iterate(&mut self) -> Result<LpStatus, LpError> {
        let mut w = vec![0.0; self.m];
        let mut a = vec![0.0; self.m];
        loop {
            if self.iterations >= self.limits.max_iterations {
                return Ok(LpStatus::IterationLimit);
            }
            if let Some(deadline) = self.limits.deadline {
                if self.iterations.is_multiple_of(16) && Instant::now() >= deadline {
                    return Ok(LpStatus::IterationLimit);
                }
            }
            match self.step(&mut w, &mut a)? {
                Step::Optimal => return Ok(LpStatus::Optimal),
                Step::Unbounded => return Ok(LpStatus::Unbounded),
                Step::Continue => {}
            }
        }
    }

    fn step(&mut self, w: &mut [f64], a: &mut [f64]) -> Result<Step, LpError> {
        let Some((q, dir)) = self.price() else {
            return Ok(Step::Optimal);
        };
        self.iterations += 1;
        let m = self.m;
        self.column(q, a);
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            w[i] = row.iter().zip(a.iter()).map(|(b, v)| b * v).sum();
        }
        // Harris pass 1: largest step keeping basics within bounds relaxed by PRIMAL_TOL
        let mut relaxed = f64::INFINITY;
        for i in 0..m {
            if w[i].abs() <= PIVOT_TOL {
                continue;
            }
            let bj = self.basic[i];
            let delta = -dir * w[i];
            let lim = if delta < 0.0 {
                (self.x[bj] - self.lower[bj] + PRIMAL_TOL) / -delta
            } else if self.upper[bj].is_finite() {
                (self.upper[bj] - self.x[bj] + PRIMAL_TOL) / delta
            } else {
                continue;
            };
            relaxed = relaxed.min(lim);
        }
        // pass 2: among rows within the relaxed step, the largest pivot (or smallest index under Bland)
        let mut leave: Option<(usize, f64)> = None;
        if relaxed.is_finite() {
            let mut best_piv = 0.0;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                if w[i].abs() <= PIVOT_TOL {
                    continue;
                }
                let bj = self.basic[i];
                let delta = -dir * w[i];
                let ratio = if delta < 0.0 {
                    (self.x[bj] - self.lower[bj]) / -delta
                } else if self.upper[bj].is_finite() {
                    (self.upper[bj] - self.x[bj]) / delta
                } else {
                    continue;
                };
                if ratio > relaxed {
                    continue;
                }
                let better = if self.bland {
                    ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12
                            && leave.is_none_or(|(r, _)| bj < self.basic[r]))
                } else {
                    w[i].abs() > best_piv
                };
                if better {
                    best_piv = w[i].abs();
                    best_ratio = ratio;
                    leave = Some((i, ratio.max(0.0)));
                }
            }
        }
        let span = self.upper[q] - self.lower[q];
        let row_step = leave.map_or(f64::INFINITY, |(_, t)| t);
        if span <= row_step {
            if !span.is_finite() {
                return Ok(Step::Unbounded);
            }
            // bound flip, basis unchanged
            for i in 0..m {
                let bj = self.basic[i];
                self.x[bj] -= dir * span * w[i];
            }
            if dir > 0.0 {
                self.status[q] = VarStatus::AtUpper;
                self.x[q] = self.upper[q];
            } else {
                self.status[q] = VarStatus::AtLower;
                self.x[q] = self.lower[q];
            }
            self.degenerate_run = 0;
            return Ok(Step::Continue);
        }
        let (r, t) = leave.expect("finite row step implies a leaving row");
        for i in 0..m {
            let bj = self.basic[i];
            self.x[bj] -= dir * t * w[i];
        }
        self.x[q] += dir * t;
        let leaving = self.basic[r];
        if -dir * w[r] < 0.0 {
            self.status[leaving] = VarStatus::AtLower;
            self.x[leaving] = self.lower[leaving];
        } else {
            self.status[leaving] = VarStatus::AtUpper;
            self.x[leaving] = self.upper[leaving];
        }
        self.basic[r] = q;
        self.status[q] = VarStatus::Basic;
        self.pivot_inverse(r, w);
        if t <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run >= self.limits.bland_after {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_INTERVAL {
            self.refactor()?;
        }
        Ok(Step::Continue)
    }

    fn pivot_inverse(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i == r || w[i] == 0.0 {
                continue;
            }
            let f = w[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
    }

    /// Inverts the basis matrix from scratch and recomputes basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        self.since_refactor = 0;
        let mut mat = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (i, &bj) in self.basic.iter().enumerate() {
            self.column(bj, &mut col);
            for r in 0..m {
                mat[r * m + i] = col[r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| mat[a * m + c].abs().total_cmp(&mat[b * m + c].abs()))
                .expect("nonempty range");
            if mat[p * m + c].abs() < 1e-11 {
                return Err(LpError::NumericalFailure("singular basis".into()));
            }
            if p != c {
                for k in 0..m {
                    mat.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = mat[c * m + c];
            for k in 0..m {
                mat[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = mat[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        mat[r * m + k] -= f * mat[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // B^-1 maps rows to basis positions: (B^-1)_{i,*} gives basic i
        self.binv = inv;
        let rhs = self.nonbasic_residual();
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.x[self.basic[i]] = v;
        }
        Ok(())
    }

    fn finish(self, status: LpStatus, lower: Vec<f64>, upper: Vec<f64>) -> LpResult {
        let n = self.n;
        let mut x = self.x[..n].to_vec();
        if status == LpStatus::Optimal {
            // snap nonbasic values exactly onto their bounds
            for j in 0..n {
                if self.status[j] != VarStatus::Basic {
                    x[j] = match self.status[j] {
                        VarStatus::AtUpper => upper[j],
                        _ => lower[j],
                    };
                }
            }
        }
        let objective = match status {
            LpStatus::Optimal | LpStatus::IterationLimit => {
                self.prob.cost.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + self.prob.obj_offset
            }
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        let factor = Arc::new(BasisFactor { m: self.m, binv: self.binv, art_sign: self.art_sign });
        LpResult {
            status,
            objective,
            x,
            basis: Basis { basic: self.basic, status: self.status, factor: Some(factor) },
            iterations: self.iterations,
            lower,
            upper,
            problem: Arc::clone(self.prob),
        }
    }
}

/// One nonbasic term of a tableau row, expressed in its local variable
/// `x' = x - bound` (or `bound - x` when complemented), which is zero at
/// the basic solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowEntry {
    pub var: usize,
    pub coef: f64,
    pub complemented: bool,
    pub bound: f64,
}

impl RowEntry {
    pub fn local_value(&self, x: f64) -> f64 {
        if self.complemented {
            self.bound - x
        } else {
            x - self.bound
        }
    }
}

/// `x_j + sum coef_i x'_i = rhs`, the row of basic variable `x_j` written
/// in complemented nonbasic variables. Fixed nonbasics and artificials are
/// omitted since their local value is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TableauRow {
    pub basic_var: usize,
    pub rhs: f64,
    pub entries: Vec<RowEntry>,
}

impl TableauRow {
    /// `rhs - x_j - sum coef_i x'_i` at an arbitrary LP-column point.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let lhs: f64 =
            x[self.basic_var] + self.entries.iter().map(|e| e.coef * e.local_value(x[e.var])).sum::<f64>();
        self.rhs - lhs
    }
}

pub fn tableau_row(res: &LpResult, j: usize) -> Result<TableauRow, LpError> {
    let prob = &res.problem;
    let factor = res.basis.factor.as_ref().ok_or(LpError::NotBasic(j))?;
    let r = res.basis.row_of(j).ok_or(LpError::NotBasic(j))?;
    if j >= prob.n_cols() {
        return Err(LpError::NotBasic(j));
    }
    let rho = factor.inverse_row(r);
    let mut entries = Vec::new();
    for i in 0..prob.n_cols() {
        let st = res.basis.status[i];
        if st == VarStatus::Basic || res.upper[i] - res.lower[i] <= 0.0 {
            continue;
        }
        let abar: f64 = prob.cols[i].iter().map(|&(row, a)| rho[row] * a).sum();
        if abar.abs() < ROW_DROP_TOL {
            continue;
        }
        let entry = match st {
            VarStatus::AtUpper => RowEntry { var: i, coef: -abar, complemented: true, bound: res.upper[i] },
            _ => RowEntry { var: i, coef: abar, complemented: false, bound: res.lower[i] },
        };
        entries.push(entry);
    }
    Ok(TableauRow { basic_var: j, rhs: res.x[j], entries })
}

/// Integer structural variables whose value (in original space) is at least
/// `int_tol` from the nearest integer, with their fractional part.
pub fn fractional_basics(res: &LpResult, sf: &StandardForm, int_tol: f64) -> Vec<(usize, f64)> {
    let orig = sf.to_original(res.structural());
    (0..sf.n_structural)
        .filter(|&j| sf.integer[j])
        .filter_map(|j| {
            let v = orig[j];
            let f = v - v.floor();
            (f > int_tol && f < 1.0 - int_tol).then_some((j, f))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{standardize, Milp, Sense};

    fn solve(p: &Milp) -> LpResult {
        let sf = standardize(p).unwrap();
        solve_lp(&sf, &[], &BoundOverrides::new(), None, &LpLimits::default()).unwrap()
    }

    #[test]
    fn two_var_box() {
        let mut p = Milp::new("t", 2);
        p.objective = vec![-1.0, -1.0];
        p.upper = vec![1.0, 1.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.5);
        let res = solve(&p);
        assert_eq!(res.status, LpStatus::Optimal);
        assert!((res.objective + 1.5).abs() < 1e-9);
        assert!(res.problem.residual(&res.x) < 1e-9);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut p = Milp::new("t", 1);
        p.objective = vec![1.0];
        p.add_constraint(vec![(0, 1.0)], Sense::Ge, 2.0);
        p.add_constraint(vec![(0, 1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut p = Milp::new("t", 1);
        p.objective = vec![-1.0];
        assert_eq!(solve(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_need_phase_one() {
        let mut p = Milp::new("t", 3);
        p.objective = vec![1.0, 2.0, 3.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 4.0);
        p.add_constraint(vec![(0, 1.0), (2, -1.0)], Sense::Eq, 1.0);
        p.upper = vec![2.0, 10.0, 10.0];
        let res = solve(&p);
        assert_eq!(res.status, LpStatus::Optimal);
        // x0 = 2, x2 = 1, x1 = 1 -> 2 + 2 + 3 = 7
        assert!((res.objective - 7.0).abs() < 1e-9, "{}", res.objective);
    }

    #[test]
    fn tableau_row_of_single_constraint() {
        // min -x1 s.t. x1 + x2 <= 1.5 with x1 <= 2; basis {x1}
        let mut p = Milp::new("t", 2);
        p.objective = vec![-1.0, 0.0];
        p.upper = vec![2.0, f64::INFINITY];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.5);
        let res = solve(&p);
        assert_eq!(res.basis.basic, vec![0]);
        let row = tableau_row(&res, 0).unwrap();
        assert_eq!(row.rhs, 1.5);
        assert_eq!(row.entries.len(), 2);
        assert!(row.entries.iter().all(|e| (e.coef - 1.0).abs() < 1e-12 && !e.complemented));
        assert_eq!(tableau_row(&res, 1), Err(LpError::NotBasic(1)));
    }

    #[test]
    fn redundant_row_slack_is_basic() {
        let mut p = Milp::new("t", 2);
        p.objective = vec![-1.0, 0.0];
        p.upper = vec![1.0, 1.0];
        p.add_constraint(vec![(1, 1.0)], Sense::Le, 5.0);
        let res = solve(&p);
        let slack = res.problem.n_structural;
        let row = tableau_row(&res, slack).unwrap();
        assert!((row.rhs - 5.0).abs() < 1e-12);
        assert!(row.entries.iter().all(|e| e.var == 1));
    }

    #[test]
    fn fractional_basics_tolerance() {
        let mut p = Milp::new("t", 3);
        p.integer = vec![true; 3];
        p.upper = vec![10.0; 3];
        p.objective = vec![-1.0, -1.0, -1.0];
        p.add_constraint(vec![(0, 1.0)], Sense::Le, 2.3);
        p.add_constraint(vec![(1, 1.0)], Sense::Le, 1.0);
        p.add_constraint(vec![(2, 1.0)], Sense::Le, 0.5);
        let sf = standardize(&p).unwrap();
        let res = solve_lp(&sf, &[], &BoundOverrides::new(), None, &LpLimits::default()).unwrap();
        let fb = fractional_basics(&res, &sf, 1e-6);
        assert_eq!(fb.len(), 2);
        assert_eq!(fb[0].0, 0);
        assert!((fb[0].1 - 0.3).abs() < 1e-9);
        assert_eq!(fb[1], (2, 0.5));

        let mut q = p.clone();
        q.constraints[2].rhs = 0.9999999;
        let sf = standardize(&q).unwrap();
        let res = solve_lp(&sf, &[], &BoundOverrides::new(), None, &LpLimits::default()).unwrap();
        assert_eq!(fractional_basics(&res, &sf, 1e-6).len(), 1);
    }

    #[test]
    fn warm_start_reuses_feasible_basis() {
        let mut p = Milp::new("t", 2);
        p.objective = vec![-3.0, -2.0];
        p.upper = vec![4.0, 4.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 4.0);
        p.add_constraint(vec![(0, 1.0), (1, 3.0)], Sense::Le, 6.0);
        let sf = standardize(&p).unwrap();
        let prob = Arc::new(LpProblem::new(&sf, &[]));
        let cold = solve_problem(&prob, &BoundOverrides::new(), None, &LpLimits::default()).unwrap();
        let warm = solve_problem(&prob, &BoundOverrides::new(), Some(&cold.basis), &LpLimits::default()).unwrap();
        assert_eq!(warm.iterations, 0);
        assert_eq!(warm.objective, cold.objective);
        // an infeasible warm start falls back to a cold start
        let mut ov = BoundOverrides::new();
        ov.tighten(0, 0.0, 1.0, (0.0, 4.0));
        let child = solve_problem(&prob, &ov, Some(&cold.basis), &LpLimits::default()).unwrap();
        let fresh = solve_problem(&prob, &ov, None, &LpLimits::default()).unwrap();
        assert!((child.objective - fresh.objective).abs() < 1e-9);
    }
}
