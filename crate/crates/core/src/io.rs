//! Instance files: free-format MPS, solution vectors, benchmark manifests,
//! and seeded synthetic instance families.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Constraint, Milp, Sense};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported MPS section: {0}")]
    UnsupportedSection(String),
    #[error("line {line}: {msg}")]
    MalformedRecord { line: usize, msg: String },
    #[error("line {line}: duplicate {what}")]
    DuplicateEntry { line: usize, what: String },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
}

fn malformed(line: usize, msg: impl Into<String>) -> IoError {
    IoError::MalformedRecord { line, msg: msg.into() }
}

fn duplicate(line: usize, what: impl Into<String>) -> IoError {
    IoError::DuplicateEntry { line, what: what.into() }
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

// ---------------------------------------------------------------- MPS

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Start,
    Name,
    Rows,
    Columns,
    Rhs,
    Bounds,
    ObjSense,
    End,
}

enum RowRef {
    Objective,
    /// A second N row; its entries are discarded.
    Ignored,
    Constraint(usize),
}

struct MpsBuilder {
    name: String,
    rows: HashMap<String, RowRef>,
    row_names: Vec<String>,
    senses: Vec<Sense>,
    row_coeffs: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    rhs_seen: HashSet<usize>,
    cols: HashMap<String, usize>,
    col_names: Vec<String>,
    objective: Vec<f64>,
    integer: Vec<bool>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    entries: HashSet<(usize, usize)>,
    bounds_seen: HashSet<(String, usize)>,
    has_objective: bool,
    in_int_block: bool,
}

fn number(tok: &str, line: usize) -> Result<f64, IoError> {
    let v: f64 = tok.parse().map_err(|_| malformed(line, format!("expected a number, found `{tok}`")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

impl MpsBuilder {
    fn new() -> Self {
        MpsBuilder {
            name: String::new(),
            rows: HashMap::new(),
            row_names: Vec::new(),
            senses: Vec::new(),
            row_coeffs: Vec::new(),
            rhs: Vec::new(),
            rhs_seen: HashSet::new(),
            cols: HashMap::new(),
            col_names: Vec::new(),
            objective: Vec::new(),
            integer: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            entries: HashSet::new(),
            bounds_seen: HashSet::new(),
            has_objective: false,
            in_int_block: false,
        }
    }

    fn row(&mut self, toks: &[&str], line: usize) -> Result<(), IoError> {
        let [kind, name] = toks else {
            return Err(malformed(line, "ROWS record needs a type and a name"));
        };
        if self.rows.contains_key(*name) {
            return Err(duplicate(line, format!("row `{name}`")));
        }
        let entry = match kind.to_ascii_uppercase().as_str() {
            "N" if !self.has_objective => {
                self.has_objective = true;
                RowRef::Objective
            }
            "N" => RowRef::Ignored,
            s @ ("L" | "G" | "E") => {
                let sense = match s {
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    _ => Sense::Eq,
                };
                self.row_names.push(name.to_string());
                self.senses.push(sense);
                self.row_coeffs.push(Vec::new());
                self.rhs.push(0.0);
                RowRef::Constraint(self.row_names.len() - 1)
            }
            other => return Err(malformed(line, format!("unknown row type `{other}`"))),
        };
        self.rows.insert(name.to_string(), entry);
        Ok(())
    }

    fn column(&mut self, toks: &[&str], line: usize) -> Result<(), IoError> {
        if toks.len() == 3 && toks[1].trim_matches('\'') == "MARKER" {
            match toks[2].trim_matches('\'') {
                "INTORG" if !self.in_int_block => self.in_int_block = true,
                "INTEND" if self.in_int_block => self.in_int_block = false,
                m => return Err(malformed(line, format!("unexpected marker `{m}`"))),
            }
            return Ok(());
        }
        if toks.len() != 3 && toks.len() != 5 {
            return Err(malformed(line, "COLUMNS record needs a column and one or two row/value pairs"));
        }
        let name = toks[0];
        let j = match self.cols.get(name) {
            Some(&j) if j + 1 == self.col_names.len() => j,
            Some(_) => return Err(duplicate(line, format!("column `{name}` (entries must be contiguous)"))),
            None => {
                self.cols.insert(name.to_string(), self.col_names.len());
                self.col_names.push(name.to_string());
                self.objective.push(0.0);
                self.integer.push(self.in_int_block);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.col_names.len() - 1
            }
        };
        for pair in toks[1..].chunks(2) {
            let v = number(pair[1], line)?;
            match self.rows.get(pair[0]) {
                None => return Err(malformed(line, format!("unknown row `{}`", pair[0]))),
                Some(RowRef::Ignored) => {}
                Some(RowRef::Objective) => {
                    if !self.entries.insert((usize::MAX, j)) {
                        return Err(duplicate(line, format!("objective entry for `{name}`")));
                    }
                    self.objective[j] = v;
                }
                Some(&RowRef::Constraint(i)) => {
                    if !self.entries.insert((i, j)) {
                        return Err(duplicate(line, format!("entry ({}, {name})", pair[0])));
                    }
                    self.row_coeffs[i].push((j, v));
                }
            }
        }
        Ok(())
    }

    fn rhs(&mut self, toks: &[&str], line: usize) -> Result<(), IoError> {
        // the set name is optional when a single pair follows
        let pairs = match toks.len() {
            2 | 4 => toks,
            3 | 5 => &toks[1..],
            _ => return Err(malformed(line, "RHS record needs one or two row/value pairs")),
        };
        for pair in pairs.chunks(2) {
            let v = number(pair[1], line)?;
            match self.rows.get(pair[0]) {
                None => return Err(malformed(line, format!("unknown row `{}`", pair[0]))),
                Some(RowRef::Objective) | Some(RowRef::Ignored) => {
                    return Err(malformed(line, "right-hand side on an objective row is not supported"))
                }
                Some(&RowRef::Constraint(i)) => {
                    if !self.rhs_seen.insert(i) {
                        return Err(duplicate(line, format!("right-hand side for `{}`", pair[0])));
                    }
                    self.rhs[i] = v;
                }
            }
        }
        Ok(())
    }

    fn bound(&mut self, toks: &[&str], line: usize) -> Result<(), IoError> {
        let kind = toks.first().map(|s| s.to_ascii_uppercase()).unwrap_or_default();
        let needs_value = matches!(kind.as_str(), "LO" | "UP" | "FX" | "UI" | "LI");
        // `TYPE [set] column [value]`
        let (col, value) = match (needs_value, toks.len()) {
            (true, 4) => (toks[2], Some(toks[3])),
            (true, 3) => (toks[1], Some(toks[2])),
            (false, 3) => (toks[2], None),
            (false, 2) => (toks[1], None),
            _ => return Err(malformed(line, format!("malformed {kind} bound record"))),
        };
        let Some(&j) = self.cols.get(col) else {
            return Err(malformed(line, format!("bound on unknown column `{col}`")));
        };
        if !self.bounds_seen.insert((kind.clone(), j)) {
            return Err(duplicate(line, format!("{kind} bound on `{col}`")));
        }
        let v = value.map(|t| number(t, line)).transpose()?;
        match (kind.as_str(), v) {
            ("LO", Some(v)) => self.lower[j] = v,
            ("UP", Some(v)) => self.upper[j] = v,
            ("FX", Some(v)) => {
                self.lower[j] = v;
                self.upper[j] = v;
            }
            ("LI", Some(v)) => {
                self.lower[j] = v;
                self.integer[j] = true;
            }
            ("UI", Some(v)) => {
                self.upper[j] = v;
                self.integer[j] = true;
            }
            ("FR", None) => {
                self.lower[j] = f64::NEG_INFINITY;
                self.upper[j] = f64::INFINITY;
            }
            ("MI", None) => self.lower[j] = f64::NEG_INFINITY,
            ("PL", None) => self.upper[j] = f64::INFINITY,
            ("BV", None) => {
                self.lower[j] = 0.0;
                self.upper[j] = 1.0;
                self.integer[j] = true;
            }
            _ => return Err(malformed(line, format!("unknown bound type `{kind}`"))),
        }
        Ok(())
    }

    fn finish(self) -> Milp {
        let constraints = self
            .row_names
            .into_iter()
            .zip(self.row_coeffs)
            .zip(self.senses.into_iter().zip(self.rhs))
            .map(|((name, coeffs), (sense, rhs))| Constraint::new(name, coeffs, sense, rhs))
            .collect();
        Milp {
            name: self.name,
            var_names: self.col_names,
            objective: self.objective,
            constraints,
            lower: self.lower,
            upper: self.upper,
            integer: self.integer,
        }
    }
}

/// Parses free-format MPS. The first `N` row is the (minimized) objective.
/// Unmarked columns default to `[0, +inf)`, integer ones included; `BV`
/// gives `[0, 1]`.
pub fn parse_mps(text: &str) -> Result<Milp, IoError> {
    let mut b = MpsBuilder::new();
    let mut section = Section::Start;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if section == Section::End {
            return Err(malformed(line, "content after ENDATA"));
        }
        if !raw.starts_with(char::is_whitespace) {
            let head = toks[0].to_ascii_uppercase();
            section = match head.as_str() {
                "NAME" => {
                    b.name = toks[1..].join(" ");
                    Section::Name
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "OBJSENSE" => match toks.get(1).map(|s| s.to_ascii_uppercase()) {
                    None => Section::ObjSense,
                    Some(s) if s == "MIN" || s == "MINIMIZE" => Section::Name,
                    Some(s) => return Err(IoError::UnsupportedSection(format!("OBJSENSE {s} (only minimization is supported)"))),
                },
                "RANGES" => return Err(IoError::UnsupportedSection("RANGES (ranged rows are not supported)".into())),
                other => return Err(IoError::UnsupportedSection(other.to_string())),
            };
            continue;
        }
        match section {
            Section::Rows => b.row(&toks, line)?,
            Section::Columns => b.column(&toks, line)?,
            Section::Rhs => b.rhs(&toks, line)?,
            Section::Bounds => b.bound(&toks, line)?,
            Section::ObjSense => match toks[0].to_ascii_uppercase().as_str() {
                "MIN" | "MINIMIZE" => section = Section::Name,
                s => return Err(IoError::UnsupportedSection(format!("OBJSENSE {s} (only minimization is supported)"))),
            },
            Section::Start | Section::Name | Section::End => {
                return Err(malformed(line, "data record outside of a section"));
            }
        }
    }
    if section != Section::End {
        return Err(malformed(text.lines().count(), "missing ENDATA"));
    }
    if b.in_int_block {
        return Err(malformed(text.lines().count(), "INTORG marker without INTEND"));
    }
    if !b.has_objective {
        return Err(malformed(0, "no objective (N) row"));
    }
    Ok(b.finish())
}

pub fn read_mps(path: &Path) -> Result<Milp, IoError> {
    parse_mps(&read_file(path)?)
}

/// Writes `p` as free-format MPS. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_mps(p: &Milp) -> String {
    let mut obj_name = "OBJ".to_string();
    while p.constraints.iter().any(|c| c.name == obj_name) {
        obj_name.push('_');
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", p.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {obj_name}");
    for c in &p.constraints {
        let s = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {s} {}", c.name);
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.n_vars()];
    for (i, c) in p.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            by_col[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_block = false;
    let mut markers = 0;
    for j in 0..p.n_vars() {
        if p.integer[j] != in_block {
            let tag = if p.integer[j] { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " M{markers:04} 'MARKER' '{tag}'");
            markers += 1;
            in_block = p.integer[j];
        }
        let name = &p.var_names[j];
        if p.objective[j] != 0.0 || by_col[j].is_empty() {
            let _ = writeln!(out, " {name} {obj_name} {}", p.objective[j]);
        }
        for &(i, a) in &by_col[j] {
            let _ = writeln!(out, " {name} {} {a}", p.constraints[i].name);
        }
    }
    if in_block {
        let _ = writeln!(out, " M{markers:04} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in &p.constraints {
        if c.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", c.name, c.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for j in 0..p.n_vars() {
        let (l, u, name) = (p.lower[j], p.upper[j], &p.var_names[j]);
        if l == u {
            let _ = writeln!(out, " FX BND {name} {l}");
            continue;
        }
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            let _ = writeln!(out, " FR BND {name}");
            continue;
        }
        if l == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND {name}");
        } else if l != 0.0 {
            let _ = writeln!(out, " LO BND {name} {l}");
        }
        if u != f64::INFINITY {
            let _ = writeln!(out, " UP BND {name} {u}");
        }
    }
    out.push_str("ENDATA\n");
    out
}

// ---------------------------------------------------------------- solutions

/// `name value` per line; unlisted variables are zero.
pub fn parse_solution(text: &str, p: &Milp) -> Result<Vec<f64>, IoError> {
    let index: HashMap<&str, usize> = p.var_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut x = vec![0.0; p.n_vars()];
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let [name, value] = toks[..] else {
            return Err(malformed(line, "expected `name value`"));
        };
        let Some(&j) = index.get(name) else {
            return Err(malformed(line, format!("unknown variable `{name}`")));
        };
        if !seen.insert(j) {
            return Err(duplicate(line, format!("value for `{name}`")));
        }
        x[j] = number(value, line)?;
    }
    Ok(x)
}

pub fn write_solution(p: &Milp, x: &[f64]) -> String {
    let mut out = String::new();
    for (name, v) in p.var_names.iter().zip(x) {
        let _ = writeln!(out, "{name} {v}");
    }
    out
}

// ---------------------------------------------------------------- manifest

const MANIFEST_TAG: &str = "# splitbranch-manifest v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub optimal: Option<f64>,
}

/// Instance list, one `<path> [optimal_objective]` per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InstanceManifest {
    pub entries: Vec<ManifestEntry>,
}

impl InstanceManifest {
    pub fn push(&mut self, path: impl Into<PathBuf>, optimal: Option<f64>) -> Result<(), IoError> {
        let path = path.into();
        let line = self.entries.len() + 1;
        if self.entries.iter().any(|e| e.path == path) {
            return Err(duplicate(line, format!("manifest path `{}`", path.display())));
        }
        if optimal.is_some_and(|v| !v.is_finite()) {
            return Err(malformed(line, "optimal objective must be finite"));
        }
        self.entries.push(ManifestEntry { path, optimal });
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut m = InstanceManifest::default();
        let mut lines = text.lines().enumerate().peekable();
        if let Some((_, first)) = lines.peek() {
            let first = first.trim();
            if first.starts_with("# splitbranch-manifest") && first != MANIFEST_TAG {
                return Err(malformed(1, format!("unsupported manifest version `{first}`")));
            }
        }
        for (idx, raw) in lines {
            let line = idx + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = raw.split_whitespace().collect();
            let optimal = match toks.len() {
                1 => None,
                2 => Some(number(toks[1], line)?),
                _ => return Err(malformed(line, "expected `<path> [optimal_objective]`")),
            };
            m.push(toks[0], optimal).map_err(|e| match e {
                IoError::DuplicateEntry { what, .. } => IoError::DuplicateEntry { line, what },
                other => other,
            })?;
        }
        Ok(m)
    }

    /// Reads a manifest; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let mut m = Self::parse(&read_file(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for e in &mut m.entries {
            if e.path.is_relative() {
                e.path = dir.join(&e.path);
            }
        }
        Ok(m)
    }
}

impl fmt::Display for InstanceManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{MANIFEST_TAG}")?;
        for e in &self.entries {
            match e.optimal {
                Some(v) => writeln!(f, "{} {v}", e.path.display())?,
                None => writeln!(f, "{}", e.path.display())?,
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- generators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Multi-dimensional knapsack over bounded integers.
    Knapsack,
    /// Weighted set cover over binaries.
    SetCover,
    /// General rows over bounded integers and continuous variables.
    Mixed,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Knapsack, Family::SetCover, Family::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Knapsack => "knapsack",
            Family::SetCover => "setcover",
            Family::Mixed => "mixed",
        }
    }
}

impl FromStr for Family {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| IoError::InvalidParams(format!("unknown family `{s}` (knapsack, setcover, mixed)")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MAX_GEN_VARS: usize = 500;
pub const MAX_GEN_ROWS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    /// Number of variables (set-cover columns).
    pub n: usize,
    /// Number of constraints (set-cover rows).
    pub m: usize,
    /// Constraint coefficients are drawn from `1..=max_coef` in magnitude.
    pub max_coef: u32,
    /// Upper bound of the integer variables; 1 gives binaries.
    pub int_upper: u32,
    /// Share of continuous variables in the mixed family, at least 0.2.
    pub cont_fraction: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { n: 10, m: 5, max_coef: 20, int_upper: 5, cont_fraction: 0.3 }
    }
}

impl GenParams {
    pub fn sized(n: usize, m: usize) -> Self {
        GenParams { n, m, ..GenParams::default() }
    }

    fn check(&self, family: Family) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::InvalidParams(m));
        if self.n == 0 || self.n > MAX_GEN_VARS {
            return bad(format!("n = {} outside 1..={MAX_GEN_VARS}", self.n));
        }
        if self.m == 0 || self.m > MAX_GEN_ROWS {
            return bad(format!("m = {} outside 1..={MAX_GEN_ROWS}", self.m));
        }
        if self.max_coef == 0 || self.int_upper == 0 {
            return bad("max_coef and int_upper must be positive".into());
        }
        if family == Family::Mixed {
            if !(0.2..1.0).contains(&self.cont_fraction) {
                return bad(format!("cont_fraction {} outside [0.2, 1)", self.cont_fraction));
            }
            if self.n < 2 {
                return bad("mixed instances need at least 2 variables".into());
            }
        }
        Ok(())
    }
}

fn family_salt(f: Family) -> u64 {
    match f {
        Family::Knapsack => 0x6b6e_6170,
        Family::SetCover => 0x7363_6f76,
        Family::Mixed => 0x6d69_7864,
    }
}

/// A feasible, bounded instance drawn deterministically from `(family, params, seed)`.
pub fn generate_instance(family: Family, params: &GenParams, seed: u64) -> Result<Milp, IoError> {
    params.check(family)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ family_salt(family).rotate_left(17));
    let name = format!("{}_n{}_m{}_s{}", family, params.n, params.m, seed);
    Ok(match family {
        Family::Knapsack => knapsack(name, params, &mut rng),
        Family::SetCover => setcover(name, params, &mut rng),
        Family::Mixed => mixed(name, params, &mut rng),
    })
}

/// `min -v·x  s.t.  W x <= cap, 0 <= x <= U` with values correlated to weights.
fn knapsack(name: String, p: &GenParams, rng: &mut ChaCha8Rng) -> Milp {
    let (n, m) = (p.n, p.m);
    let ub = p.int_upper as f64;
    let mut milp = Milp::new(name, n);
    let mut weight_sum = vec![0u32; n];
    for _ in 0..m {
        let w: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=p.max_coef)).collect();
        let total: f64 = w.iter().map(|&v| v as f64 * ub).sum();
        let cap = (total * rng.gen_range(0.3..0.6)).floor().max(1.0);
        for (s, &v) in weight_sum.iter_mut().zip(&w) {
            *s += v;
        }
        milp.add_constraint(w.iter().enumerate().map(|(j, &v)| (j, v as f64)).collect(), Sense::Le, cap);
    }
    for j in 0..n {
        let avg = weight_sum[j] as f64 / m as f64;
        let noise = rng.gen_range(0..=p.max_coef.div_ceil(4)) as f64;
        milp.objective[j] = -(avg.round() + noise + 1.0);
        milp.upper[j] = ub;
        milp.integer[j] = true;
    }
    milp
}

/// `min c·x  s.t.  every row covered, x binary`; each row has at least two columns.
fn setcover(name: String, p: &GenParams, rng: &mut ChaCha8Rng) -> Milp {
    let (n, m) = (p.n, p.m);
    let mut milp = Milp::new(name, n);
    let density = (3.0 / n as f64).clamp(0.2, 0.6);
    let cols: Vec<usize> = (0..n).collect();
    for _ in 0..m {
        let mut row: Vec<usize> = (0..n).filter(|_| rng.gen_bool(density)).collect();
        let want = 2.min(n);
        while row.len() < want {
            let &j = cols.choose(rng).expect("n > 0");
            if !row.contains(&j) {
                row.push(j);
            }
        }
        row.sort_unstable();
        milp.add_constraint(row.into_iter().map(|j| (j, 1.0)).collect(), Sense::Ge, 1.0);
    }
    for j in 0..n {
        milp.objective[j] = rng.gen_range(1..=p.max_coef) as f64;
        milp.upper[j] = 1.0;
        milp.integer[j] = true;
    }
    milp
}

/// Bounded integer and continuous variables, rows of mixed sign built
/// around a hidden feasible point.
fn mixed(name: String, p: &GenParams, rng: &mut ChaCha8Rng) -> Milp {
    let (n, m) = (p.n, p.m);
    let n_cont = ((p.cont_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut milp = Milp::new(name, n);
    let mut is_int: Vec<bool> = (0..n).map(|j| j >= n_cont).collect();
    is_int.shuffle(rng);
    let ub = p.int_upper as f64;
    let cont_ub = (p.int_upper as f64 * 2.0).max(2.0);
    let point: Vec<f64> = (0..n)
        .map(|j| if is_int[j] { rng.gen_range(0..=p.int_upper) as f64 } else { rng.gen_range(0..=(cont_ub as u32 * 4)) as f64 / 4.0 })
        .collect();
    let k = p.max_coef as i64;
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let mut a = rng.gen_range(-k / 3..=k);
                if a == 0 {
                    a = 1;
                }
                coeffs.push((j, a as f64));
            }
        }
        if coeffs.is_empty() {
            coeffs.push((rng.gen_range(0..n), rng.gen_range(1..=k) as f64));
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        let slack = rng.gen_range(0..=k) as f64 / 2.0;
        if rng.gen_bool(0.75) {
            milp.add_constraint(coeffs, Sense::Le, act + slack);
        } else {
            milp.add_constraint(coeffs, Sense::Ge, act - slack);
        }
    }
    for j in 0..n {
        milp.integer[j] = is_int[j];
        milp.upper[j] = if is_int[j] { ub } else { cont_ub };
        let c = rng.gen_range(1..=k) as f64;
        milp.objective[j] = if rng.gen_bool(0.8) { -c } else { c };
    }
    milp
}

#[cfg(test)]
mod tests {
    use super::*;

    const KNAPSACK: &str = "\
NAME knap3
ROWS
 N obj
 L cap
COLUMNS
    MARKER 'MARKER' 'INTORG'
    x1 obj -5 cap 2
    x2 obj -4 cap 3
    x3 obj -3 cap 1
    MARKER 'MARKER' 'INTEND'
RHS
    RHS cap 5
BOUNDS
 BV BND x1
 BV BND x2
 BV BND x3
ENDATA
";

    #[test]
    fn parses_binary_knapsack() {
        let p = parse_mps(KNAPSACK).unwrap();
        assert_eq!(p.name, "knap3");
        assert_eq!(p.var_names, vec!["x1", "x2", "x3"]);
        assert_eq!(p.objective, vec![-5.0, -4.0, -3.0]);
        assert_eq!(p.integer, vec![true; 3]);
        assert_eq!(p.upper, vec![1.0; 3]);
        assert_eq!(p.lower, vec![0.0; 3]);
        assert_eq!(p.constraints.len(), 1);
        let c = &p.constraints[0];
        assert_eq!(c.sense, Sense::Le);
        assert_eq!(c.rhs, 5.0);
        assert_eq!(c.coeffs, vec![(0, 2.0), (1, 3.0), (2, 1.0)]);
        assert_eq!(parse_mps(&write_mps(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_bad_files() {
        let no_end = KNAPSACK.replace("ENDATA\n", "");
        assert!(matches!(parse_mps(&no_end), Err(IoError::MalformedRecord { .. })));
        let ranges = KNAPSACK.replace("BOUNDS", "RANGES\n    RNG cap 2\nBOUNDS");
        assert!(matches!(parse_mps(&ranges), Err(IoError::UnsupportedSection(_))));
        let max = KNAPSACK.replace("ROWS", "OBJSENSE\n    MAX\nROWS");
        assert!(matches!(parse_mps(&max), Err(IoError::UnsupportedSection(_))));
        let dup = KNAPSACK.replace(" L cap", " L cap\n L cap");
        assert!(matches!(parse_mps(&dup), Err(IoError::DuplicateEntry { .. })));
        let dup_bound = KNAPSACK.replace(" BV BND x3", " BV BND x3\n BV BND x3");
        assert!(matches!(parse_mps(&dup_bound), Err(IoError::DuplicateEntry { .. })));
        let unknown_row = KNAPSACK.replace("x3 obj -3 cap 1", "x3 obj -3 lim 1");
        assert!(matches!(parse_mps(&unknown_row), Err(IoError::MalformedRecord { .. })));
    }

    #[test]
    fn all_bound_kinds_round_trip() {
        let mut p = Milp::new("bounds", 6);
        p.lower = vec![2.5, f64::NEG_INFINITY, f64::NEG_INFINITY, -3.0, 4.0, 0.0];
        p.upper = vec![2.5, f64::INFINITY, 7.0, f64::INFINITY, 9.0, 1.0];
        p.integer = vec![false, false, false, true, true, true];
        p.objective = vec![1.0, 0.0, -0.125, 3.0, 1e-7, 0.1];
        p.add_constraint(vec![(0, 1.0), (3, -2.0)], Sense::Eq, 0.3);
        p.add_constraint(vec![(1, 1.0), (2, 1.0), (5, 4.0)], Sense::Ge, -1.0);
        let text = write_mps(&p);
        assert!(text.contains(" FX BND C0001 2.5"));
        assert!(text.contains(" FR BND C0002"));
        assert_eq!(parse_mps(&text).unwrap(), p);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_instance(Family::Knapsack, &GenParams::sized(8, 2), 1).unwrap();
        let b = generate_instance(Family::Knapsack, &GenParams::sized(8, 2), 1).unwrap();
        assert_eq!(a, b);
        let mixed = generate_instance(Family::Mixed, &GenParams::sized(10, 4), 7).unwrap();
        assert!(mixed.n_vars() - mixed.n_integer() >= 2);
        let sc = generate_instance(Family::SetCover, &GenParams::sized(12, 6), 3).unwrap();
        assert_eq!(sc.constraints.len(), 6);
        assert!(sc.constraints.iter().all(|c| !c.coeffs.is_empty()));
        assert!(generate_instance(Family::Mixed, &GenParams { cont_fraction: 0.1, ..GenParams::default() }, 1).is_err());
        assert!(generate_instance(Family::Knapsack, &GenParams::sized(0, 1), 1).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let m = InstanceManifest::parse("# splitbranch-manifest v1\na.mps -12.5\nb.mps\n").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].optimal, Some(-12.5));
        assert_eq!(InstanceManifest::parse(&m.to_string()).unwrap(), m);
        assert!(matches!(InstanceManifest::parse("a.mps\na.mps 1\n"), Err(IoError::DuplicateEntry { .. })));
        assert!(InstanceManifest::parse("a.mps inf\n").is_err());
    }

    #[test]
    fn solution_vectors() {
        let p = parse_mps(KNAPSACK).unwrap();
        let x = parse_solution("x1 1\nx3 1\n", &p).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 1.0]);
        assert_eq!(parse_solution(&write_solution(&p, &x), &p).unwrap(), x);
        assert!(parse_solution("y 1\n", &p).is_err());
    }
}
