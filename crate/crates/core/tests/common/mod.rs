#![allow(dead_code)]

use splitbranch::io::{generate_instance, Family, GenParams};
use splitbranch::model::{Milp, Sense};

/// One linear constraint over dense coefficients.
#[derive(Clone, Debug)]
pub struct Row {
    pub a: Vec<f64>,
    pub sense: Sense,
    pub b: f64,
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        rhs.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                if f != 0.0 {
                    for q in c..k {
                        m[r][q] -= f * m[c][q];
                    }
                    rhs[r] -= f * rhs[c];
                }
            }
        }
    }
    Some((0..k).map(|i| rhs[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Minimum of `c·x` over `rows` and the finite box `[lo, hi]` by enumerating
/// vertices (every choice of `n` tight constraints). `None` when infeasible.
pub fn lp_vertex_min(c: &[f64], rows: &[Row], lo: &[f64], hi: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    if n == 0 {
        let ok = rows.iter().all(|r| satisfied(r, &[], 1e-9));
        return ok.then(|| (0.0, Vec::new()));
    }
    let mut tight: Vec<(Vec<f64>, f64)> = rows.iter().map(|r| (r.a.clone(), r.b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        tight.push((e.clone(), lo[j]));
        tight.push((e, hi[j]));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(tight.len(), n, &mut |idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| tight[i].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| tight[i].1).collect();
        let Some(x) = solve_square(m, rhs) else { return };
        let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-9 * scale;
        if (0..n).any(|j| x[j] < lo[j] - tol || x[j] > hi[j] + tol) {
            return;
        }
        if !rows.iter().all(|r| satisfied(r, &x, tol)) {
            return;
        }
        let v: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, x));
        }
    });
    best
}

fn satisfied(r: &Row, x: &[f64], tol: f64) -> bool {
    let lhs: f64 = r.a.iter().zip(x).map(|(a, b)| a * b).sum();
    let tol = tol * (1.0 + r.b.abs());
    match r.sense {
        Sense::Le => lhs <= r.b + tol,
        Sense::Ge => lhs >= r.b - tol,
        Sense::Eq => (lhs - r.b).abs() <= tol,
    }
}

/// Exact optimum of a small MILP: every integer assignment in the box,
/// with the continuous remainder solved by vertex enumeration.
pub fn brute_force_optimum(p: &Milp) -> Option<f64> {
    let ints: Vec<usize> = p.integer_indices().collect();
    let conts: Vec<usize> = (0..p.n_vars()).filter(|&j| !p.integer[j]).collect();
    let ranges: Vec<(i64, i64)> = ints
        .iter()
        .map(|&j| (p.lower[j].ceil() as i64, p.upper[j].floor() as i64))
        .collect();
    if ranges.iter().any(|r| r.0 > r.1) {
        return None;
    }
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut best: Option<f64> = None;
    loop {
        let mut fixed_obj = 0.0;
        let mut rows = Vec::with_capacity(p.constraints.len());
        for (k, &j) in ints.iter().enumerate() {
            fixed_obj += p.objective[j] * cur[k] as f64;
        }
        for con in &p.constraints {
            let mut a = vec![0.0; conts.len()];
            let mut b = con.rhs;
            for &(j, v) in &con.coeffs {
                match ints.iter().position(|&i| i == j) {
                    Some(k) => b -= v * cur[k] as f64,
                    None => a[conts.iter().position(|&i| i == j).unwrap()] = v,
                }
            }
            rows.push(Row { a, sense: con.sense, b });
        }
        let c: Vec<f64> = conts.iter().map(|&j| p.objective[j]).collect();
        let lo: Vec<f64> = conts.iter().map(|&j| p.lower[j]).collect();
        let hi: Vec<f64> = conts.iter().map(|&j| p.upper[j]).collect();
        if let Some((v, _)) = lp_vertex_min(&c, &rows, &lo, &hi) {
            let total = fixed_obj + v;
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
        let mut k = 0;
        loop {
            if k == cur.len() {
                return best;
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

/// Number of integer assignments the brute-force oracle visits.
pub fn grid_size(p: &Milp) -> u64 {
    p.integer_indices().map(|j| (p.upper[j].floor() - p.lower[j].ceil() + 1.0).max(0.0) as u64).product()
}

/// Small instances with at most 8 integer variables, 5 constraints and
/// integer bound ranges of at most 5, cycling through the three families.
pub fn oracle_tier(count: usize) -> Vec<Milp> {
    let mut out = Vec::with_capacity(count);
    let mut k: u64 = 0;
    while out.len() < count {
        k += 1;
        let family = Family::ALL[(k % 3) as usize];
        let m = 1 + (k as usize * 7 % 5);
        let params = match family {
            Family::Knapsack => {
                let n = 4 + (k as usize % 5);
                let int_upper = [1, 2, 3, 5][k as usize / 3 % 4];
                GenParams { n, m, max_coef: 15, int_upper, cont_fraction: 0.3 }
            }
            Family::SetCover => GenParams { n: 5 + (k as usize % 4), m, max_coef: 10, int_upper: 1, cont_fraction: 0.3 },
            Family::Mixed => {
                let n = 5 + (k as usize % 5);
                GenParams { n, m, max_coef: 12, int_upper: [1, 2, 2][k as usize / 3 % 3], cont_fraction: 0.3 }
            }
        };
        let p = generate_instance(family, &params, 1000 + k).expect("valid params");
        if grid_size(&p) <= 50_000 && p.n_integer() <= 8 {
            out.push(p);
        }
    }
    out
}
