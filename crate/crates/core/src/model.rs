//! Problem representation: the mixed-integer program as loaded, its
//! equality/nonnegative standard form, and solution evaluation.

use thiserror::Error;

/// Default tolerance for constraint and bound satisfaction.
pub const FEAS_TOL: f64 = 1e-7;
/// Default tolerance for integrality.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable {0} is free (both bounds infinite); free variables are not supported")]
    FreeVariableUnsupported(usize),
    #[error("variable {var} has inconsistent bounds [{lower}, {upper}]")]
    InconsistentBounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("index {index} out of range for {n_vars} variables")]
    IndexOutOfRange { index: usize, n_vars: usize },
    #[error("integer variable {0} has no finite bound")]
    UnboundedInteger(usize),
    #[error("vector length {got} does not match {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sparse row, sorted by variable index.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, mut coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        coeffs.sort_by_key(|&(i, _)| i);
        Constraint { name: name.into(), coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization MILP: `min c·x  s.t.  rows, l <= x <= u, x_J integer`.
#[derive(Debug, Clone, PartialEq)]
pub struct Milp {
    pub name: String,
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
}

impl Milp {
    /// An empty problem over `n` continuous variables in `[0, +inf)` with zero objective.
    pub fn new(name: impl Into<String>, n: usize) -> Self {
        Milp {
            name: name.into(),
            var_names: (0..n).map(|i| format!("C{:04}", i + 1)).collect(),
            objective: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            integer: vec![false; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn integer_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.integer.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let name = format!("R{:04}", self.constraints.len() + 1);
        self.constraints.push(Constraint::new(name, coeffs, sense, rhs));
    }

    /// Checks structural well-formedness. Inconsistent bounds are reported
    /// separately by [`Milp::bounds_consistent`] because they denote an
    /// infeasible instance rather than a malformed one.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n_vars();
        for (what, len) in [
            ("var_names", self.var_names.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
            ("integer", self.integer.len()),
        ] {
            if len != n {
                return Err(ModelError::NonFinite(format!("{what} has length {len}, expected {n}")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite("objective".into()));
        }
        for row in &self.constraints {
            if !row.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("rhs of {}", row.name)));
            }
            for &(i, a) in &row.coeffs {
                if i >= n {
                    return Err(ModelError::IndexOutOfRange { index: i, n_vars: n });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(format!("row {}", row.name)));
                }
            }
        }
        for i in 0..n {
            if self.lower[i].is_nan() || self.upper[i].is_nan() {
                return Err(ModelError::NonFinite(format!("bounds of variable {i}")));
            }
            if self.integer[i] && !self.lower[i].is_finite() && !self.upper[i].is_finite() {
                return Err(ModelError::UnboundedInteger(i));
            }
        }
        Ok(())
    }

    /// First variable whose bounds cannot be satisfied, after rounding
    /// integer bounds inward.
    pub fn bounds_consistent(&self) -> Result<(), ModelError> {
        for i in 0..self.n_vars() {
            let (l, u) = self.effective_bounds(i);
            if l > u {
                return Err(ModelError::InconsistentBounds { var: i, lower: self.lower[i], upper: self.upper[i] });
            }
        }
        Ok(())
    }

    /// Bounds with integer variables rounded inward to integral values.
    pub fn effective_bounds(&self, i: usize) -> (f64, f64) {
        let (l, u) = (self.lower[i], self.upper[i]);
        if self.integer[i] {
            (round_up(l), round_down(u))
        } else {
            (l, u)
        }
    }
}

fn round_up(v: f64) -> f64 {
    if v.is_finite() {
        (v - 1e-9).ceil()
    } else {
        v
    }
}

fn round_down(v: f64) -> f64 {
    if v.is_finite() {
        (v + 1e-9).floor()
    } else {
        v
    }
}

/// `c·x`.
pub fn objective_value(p: &Milp, x: &[f64]) -> Result<f64, ModelError> {
    if x.len() != p.n_vars() {
        return Err(ModelError::LengthMismatch { expected: p.n_vars(), got: x.len() });
    }
    Ok(p.objective.iter().zip(x).map(|(c, v)| c * v).sum())
}

/// True iff `x` satisfies every row and bound within `tol` and every integer
/// variable is within [`INT_TOL`] of an integer.
pub fn check_feasible(p: &Milp, x: &[f64], tol: f64) -> bool {
    check_feasible_with(p, x, tol, Some(INT_TOL))
}

/// Like [`check_feasible`]; `int_tol = None` drops integrality.
pub fn check_feasible_with(p: &Milp, x: &[f64], tol: f64, int_tol: Option<f64>) -> bool {
    if x.len() != p.n_vars() {
        return false;
    }
    for i in 0..p.n_vars() {
        if !x[i].is_finite() || x[i] < p.lower[i] - tol || x[i] > p.upper[i] + tol {
            return false;
        }
        if let Some(itol) = int_tol {
            if p.integer[i] && (x[i] - x[i].round()).abs() > itol {
                return false;
            }
        }
    }
    p.constraints.iter().all(|row| row.violation(x) <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    Limit,
}

impl SolutionStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolutionStatus::Optimal | SolutionStatus::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Point in the original variable space; empty when no solution is known.
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: SolutionStatus,
}

impl Solution {
    pub fn without_point(status: SolutionStatus) -> Self {
        let objective = match status {
            SolutionStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Solution { values: Vec::new(), objective, status }
    }
}

/// How a standard-form variable relates back to the original problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarOrigin {
    /// `x_std = x_orig - shift`.
    Shifted { orig: usize, shift: f64 },
    /// `x_std = upper - x_orig`, used when only the upper bound is finite.
    Negated { orig: usize, upper: f64 },
    /// Slack of standard-form row `row`.
    Slack { row: usize },
}

/// One equality row `coeffs·x_struct + slack = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct StdRow {
    pub coeffs: Vec<(usize, f64)>,
    /// Column index of this row's slack, absent for equality rows.
    pub slack: Option<usize>,
    pub rhs: f64,
}

/// Equality form with every variable bounded below by zero.
///
/// Columns `0..n_structural` correspond one-to-one (same index) to the
/// original variables; slack columns follow.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub base: Milp,
    pub n_structural: usize,
    pub rows: Vec<StdRow>,
    pub cost: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub var_map: Vec<VarOrigin>,
    pub obj_offset: f64,
}

impl StandardForm {
    pub fn n_cols(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn slack_count(&self) -> usize {
        self.n_cols() - self.n_structural
    }

    /// Maps the structural part of a standard-form point back to the original space.
    pub fn to_original(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n_structural)
            .map(|j| match self.var_map[j] {
                VarOrigin::Shifted { shift, .. } => y[j] + shift,
                VarOrigin::Negated { upper, .. } => upper - y[j],
                VarOrigin::Slack { .. } => unreachable!("structural column mapped to slack"),
            })
            .collect()
    }

    /// Maps an original point to standard form, slacks included.
    pub fn to_standard(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols()];
        for j in 0..self.n_structural {
            y[j] = self.std_value(j, x[j]);
        }
        for row in &self.rows {
            if let Some(s) = row.slack {
                let act: f64 = row.coeffs.iter().map(|&(k, a)| a * y[k]).sum();
                y[s] = row.rhs - act;
            }
        }
        y
    }

    /// Standard-space value of structural column `j` given its original value.
    pub fn std_value(&self, j: usize, orig_value: f64) -> f64 {
        match self.var_map[j] {
            VarOrigin::Shifted { shift, .. } => orig_value - shift,
            VarOrigin::Negated { upper, .. } => upper - orig_value,
            VarOrigin::Slack { .. } => unreachable!("not a structural column"),
        }
    }

    /// Original-space interval for structural column `j` restricted to `[lo, hi]` in standard space.
    pub fn original_interval(&self, j: usize, lo: f64, hi: f64) -> (f64, f64) {
        match self.var_map[j] {
            VarOrigin::Shifted { shift, .. } => (lo + shift, hi + shift),
            VarOrigin::Negated { upper, .. } => (upper - hi, upper - lo),
            VarOrigin::Slack { .. } => unreachable!("not a structural column"),
        }
    }

    /// The original problem with structural bounds tightened to the given
    /// standard-space intervals.
    pub fn restricted_milp(&self, std_bounds: impl IntoIterator<Item = (usize, f64, f64)>) -> Milp {
        let mut p = self.base.clone();
        for (j, lo, hi) in std_bounds {
            if j >= self.n_structural {
                continue;
            }
            let (a, b) = self.original_interval(j, lo, hi);
            p.lower[j] = p.lower[j].max(a);
            p.upper[j] = p.upper[j].min(b);
        }
        p
    }

    pub fn objective_std(&self, y: &[f64]) -> f64 {
        self.cost.iter().zip(y).map(|(c, v)| c * v).sum::<f64>() + self.obj_offset
    }
}

/// Converts `p` to equality form over nonnegative variables: shifts finite
/// lower bounds to zero, negates variables with only a finite upper bound,
/// negates `>=` rows and adds one slack per inequality.
pub fn standardize(p: &Milp) -> Result<StandardForm, ModelError> {
    p.validate()?;
    let n = p.n_vars();
    let mut var_map = Vec::with_capacity(n);
    let mut cost = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut obj_offset = 0.0;
    for i in 0..n {
        let (l, u) = p.effective_bounds(i);
        if l > u {
            return Err(ModelError::InconsistentBounds { var: i, lower: p.lower[i], upper: p.upper[i] });
        }
        let c = p.objective[i];
        if l.is_finite() {
            var_map.push(VarOrigin::Shifted { orig: i, shift: l });
            cost.push(c);
            upper.push(u - l);
            obj_offset += c * l;
        } else if u.is_finite() {
            var_map.push(VarOrigin::Negated { orig: i, upper: u });
            cost.push(-c);
            upper.push(f64::INFINITY);
            obj_offset += c * u;
        } else {
            return Err(ModelError::FreeVariableUnsupported(i));
        }
    }
    let mut integer = p.integer.clone();
    let mut rows = Vec::with_capacity(p.constraints.len());
    for (r, con) in p.constraints.iter().enumerate() {
        let flip = if con.sense == Sense::Ge { -1.0 } else { 1.0 };
        let mut rhs = con.rhs * flip;
        let mut coeffs = Vec::with_capacity(con.coeffs.len());
        for &(i, a) in &con.coeffs {
            let a = a * flip;
            match var_map[i] {
                VarOrigin::Shifted { shift, .. } => {
                    rhs -= a * shift;
                    coeffs.push((i, a));
                }
                VarOrigin::Negated { upper, .. } => {
                    rhs -= a * upper;
                    coeffs.push((i, -a));
                }
                VarOrigin::Slack { .. } => unreachable!(),
            }
        }
        let slack = if con.sense == Sense::Eq {
            None
        } else {
            let col = cost.len();
            var_map.push(VarOrigin::Slack { row: r });
            cost.push(0.0);
            upper.push(f64::INFINITY);
            integer.push(row_has_integral_slack(&coeffs, rhs, &p.integer));
            Some(col)
        };
        rows.push(StdRow { coeffs, slack, rhs });
    }
    Ok(StandardForm {
        base: p.clone(),
        n_structural: n,
        rows,
        cost,
        upper,
        integer,
        var_map,
        obj_offset,
    })
}

/// A slack is integral when the row touches only integer variables with
/// integral coefficients and has an integral right-hand side.
fn row_has_integral_slack(coeffs: &[(usize, f64)], rhs: f64, integer: &[bool]) -> bool {
    let is_int = |v: f64| (v - v.round()).abs() <= 1e-9;
    is_int(rhs) && coeffs.iter().all(|&(i, a)| a == 0.0 || (integer[i] && is_int(a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> Milp {
        let mut p = Milp::new("knap", 3);
        p.objective = vec![-5.0, -4.0, -3.0];
        p.upper = vec![1.0; 3];
        p.integer = vec![true; 3];
        p.add_constraint(vec![(0, 2.0), (1, 3.0), (2, 1.0)], Sense::Le, 5.0);
        p
    }

    #[test]
    fn standardize_bounds_already_zero() {
        let mut p = Milp::new("t", 1);
        p.objective = vec![-1.0];
        p.upper = vec![2.0];
        p.add_constraint(vec![(0, 1.0)], Sense::Le, 1.5);
        let sf = standardize(&p).unwrap();
        assert_eq!(sf.n_cols(), 2);
        assert_eq!(sf.slack_count(), 1);
        assert_eq!(sf.rows[0].coeffs, vec![(0, 1.0)]);
        assert_eq!(sf.rows[0].slack, Some(1));
        assert_eq!(sf.rows[0].rhs, 1.5);
        assert_eq!(sf.var_map[0], VarOrigin::Shifted { orig: 0, shift: 0.0 });
        assert_eq!(sf.upper, vec![2.0, f64::INFINITY]);
    }

    #[test]
    fn standardize_shifts_integer_and_negates_ge() {
        let mut p = Milp::new("t", 1);
        p.lower = vec![2.0];
        p.upper = vec![5.0];
        p.integer = vec![true];
        p.add_constraint(vec![(0, 1.0)], Sense::Ge, 3.0);
        let sf = standardize(&p).unwrap();
        assert_eq!(sf.var_map[0], VarOrigin::Shifted { orig: 0, shift: 2.0 });
        assert_eq!(sf.upper[0], 3.0);
        assert_eq!(sf.rows[0].coeffs, vec![(0, -1.0)]);
        assert_eq!(sf.rows[0].rhs, -1.0);
        assert!(sf.integer[1], "slack of an all-integer row is integral");
        let y = sf.to_standard(&[4.0]);
        assert_eq!(y, vec![2.0, 1.0]);
        assert_eq!(sf.to_original(&y), vec![4.0]);
    }

    #[test]
    fn standardize_rejects_free_and_inconsistent() {
        let mut p = Milp::new("t", 1);
        p.lower = vec![f64::NEG_INFINITY];
        assert_eq!(standardize(&p), Err(ModelError::FreeVariableUnsupported(0)));
        p.lower = vec![3.0];
        p.upper = vec![1.0];
        assert!(matches!(standardize(&p), Err(ModelError::InconsistentBounds { var: 0, .. })));
        // integer rounding can empty an interval
        p.lower = vec![0.2];
        p.upper = vec![0.8];
        p.integer = vec![true];
        assert!(matches!(standardize(&p), Err(ModelError::InconsistentBounds { var: 0, .. })));
    }

    #[test]
    fn standardize_negates_upper_only_variables() {
        let mut p = Milp::new("t", 2);
        p.objective = vec![1.0, 2.0];
        p.lower = vec![f64::NEG_INFINITY, 1.0];
        p.upper = vec![4.0, 3.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 3.0);
        let sf = standardize(&p).unwrap();
        assert_eq!(sf.slack_count(), 0);
        let x = [0.5, 2.5];
        let y = sf.to_standard(&x);
        assert_eq!(y, vec![3.5, 1.5]);
        let act: f64 = sf.rows[0].coeffs.iter().map(|&(k, a)| a * y[k]).sum();
        assert!((act - sf.rows[0].rhs).abs() < 1e-12);
        assert!((sf.objective_std(&y) - objective_value(&p, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn standardize_equality_form_only_renames() {
        let mut p = Milp::new("t", 2);
        p.objective = vec![1.0, 1.0];
        p.add_constraint(vec![(0, 1.0), (1, 2.0)], Sense::Eq, 4.0);
        let sf = standardize(&p).unwrap();
        assert_eq!(sf.obj_offset, 0.0);
        assert_eq!(sf.n_cols(), 2);
        assert!(sf.var_map.iter().all(|v| matches!(v, VarOrigin::Shifted { shift, .. } if *shift == 0.0)));
    }

    #[test]
    fn feasibility_checks() {
        let p = knapsack();
        assert!(check_feasible(&p, &[1.0, 1.0, 0.0], FEAS_TOL));
        assert!(!check_feasible(&p, &[1.0, 1.0, 1.0], FEAS_TOL));
        assert!(!check_feasible(&p, &[0.5, 0.0, 0.0], FEAS_TOL));
    }

    #[test]
    fn objective_examples() {
        let p = knapsack();
        assert_eq!(objective_value(&p, &[1.0, 1.0, 0.0]).unwrap(), -9.0);
        let z = Milp::new("z", 3);
        assert_eq!(objective_value(&z, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let mut one = Milp::new("o", 1);
        one.objective = vec![1.0];
        assert_eq!(objective_value(&one, &[2.5]).unwrap(), 2.5);
        assert!(objective_value(&one, &[1.0, 2.0]).is_err());
    }
}
