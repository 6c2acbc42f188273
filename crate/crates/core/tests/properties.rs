mod common;

use common::{lp_vertex_min, Row};
use proptest::prelude::*;
use splitbranch::bench::{shifted_geometric_mean, wilcoxon_signed_rank};
use splitbranch::cutgen::{generate_round, to_original_space, SeparationSettings, ValidityOracle};
use splitbranch::io::{generate_instance, parse_mps, write_mps, Family, GenParams};
use splitbranch::model::{standardize, Milp, Sense};
use splitbranch::simplex::{solve_lp, BoundOverrides, LpLimits, LpStatus};

fn sense() -> impl Strategy<Value = Sense> {
    prop_oneof![Just(Sense::Le), Just(Sense::Ge), Just(Sense::Eq)]
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Knapsack), Just(Family::SetCover), Just(Family::Mixed)]
}

prop_compose! {
    fn small_lp()(n in 1usize..=3)(
        obj in prop::collection::vec(-5i32..=5, n),
        lo in prop::collection::vec(-3i32..=1, n),
        width in prop::collection::vec(1i32..=4, n),
        rows in prop::collection::vec((prop::collection::vec(-4i32..=4, n), sense(), -6i32..=8), 0..=3),
    ) -> Milp {
        let n = obj.len();
        let mut p = Milp::new("lp", n);
        for j in 0..n {
            p.objective[j] = obj[j] as f64;
            p.lower[j] = lo[j] as f64;
            p.upper[j] = (lo[j] + width[j]) as f64;
        }
        for (a, s, b) in rows {
            let coeffs = a.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, &v)| (j, v as f64)).collect();
            p.add_constraint(coeffs, s, b as f64);
        }
        p
    }
}

fn dense_rows(p: &Milp) -> Vec<Row> {
    p.constraints
        .iter()
        .map(|c| {
            let mut a = vec![0.0; p.n_vars()];
            for &(j, v) in &c.coeffs {
                a[j] = v;
            }
            Row { a, sense: c.sense, b: c.rhs }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration(p in small_lp()) {
        let want = lp_vertex_min(&p.objective, &dense_rows(&p), &p.lower, &p.upper);
        let sf = standardize(&p).unwrap();
        let res = solve_lp(&sf, &[], &BoundOverrides::new(), None, &LpLimits::default()).unwrap();
        match want {
            None => prop_assert_eq!(res.status, LpStatus::Infeasible),
            Some((v, _)) => {
                prop_assert_eq!(res.status, LpStatus::Optimal);
                prop_assert!((res.objective - v).abs() <= 1e-6, "{} vs {}", res.objective, v);
                let x = sf.to_original(res.structural());
                for c in &p.constraints {
                    prop_assert!(c.violation(&x) <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn standard_form_round_trip(p in small_lp(), t in prop::collection::vec(0.0f64..=1.0, 3)) {
        let sf = standardize(&p).unwrap();
        let x: Vec<f64> = (0..p.n_vars()).map(|j| p.lower[j] + t[j] * (p.upper[j] - p.lower[j])).collect();
        let back = sf.to_original(&sf.to_standard(&x));
        for j in 0..x.len() {
            prop_assert!((back[j] - x[j]).abs() <= 1e-12);
        }
        let obj: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        prop_assert!((sf.objective_std(&sf.to_standard(&x)) - obj).abs() <= 1e-9);
    }

    #[test]
    fn mps_round_trip(f in family(), seed in any::<u64>(), n in 2usize..40, m in 1usize..12) {
        let p = generate_instance(f, &GenParams { n, m, ..GenParams::default() }, seed).unwrap();
        prop_assert_eq!(parse_mps(&write_mps(&p)).unwrap(), p);
    }

    #[test]
    fn sgm_between_min_and_max(v in prop::collection::vec(0.0f64..1e6, 1..40), shift in 0.0f64..100.0) {
        let g = shifted_geometric_mean(&v, shift).unwrap();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(0.0, f64::max);
        prop_assert!(g >= lo && g <= hi);
    }

    #[test]
    fn sgm_monotone(v in prop::collection::vec(0.0f64..1e4, 1..20), i in any::<prop::sample::Index>(), d in 0.0f64..1e3) {
        let mut w = v.clone();
        w[i.index(v.len())] += d;
        let a = shifted_geometric_mean(&v, 10.0).unwrap();
        let b = shifted_geometric_mean(&w, 10.0).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn wilcoxon_rank_sums_and_symmetry(d in prop::collection::vec(-20i32..=20, 1..40)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        prop_assume!(d.iter().any(|&v| v != 0.0));
        let w = wilcoxon_signed_rank(&d).unwrap();
        let n = w.n as f64;
        prop_assert!((w.w_plus + w.w_minus - n * (n + 1.0) / 2.0).abs() < 1e-9);
        for p in [w.p_two_sided, w.p_greater, w.p_less] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let m = wilcoxon_signed_rank(&neg).unwrap();
        prop_assert!((m.p_greater - w.p_less).abs() < 1e-9);
        prop_assert!((m.p_two_sided - w.p_two_sided).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn root_gmi_cuts_are_valid(f in family(), seed in 0u64..10_000, n in 4usize..8, m in 1usize..5) {
        let params = GenParams { n, m, max_coef: 12, int_upper: 2, cont_fraction: 0.3 };
        let p = generate_instance(f, &params, seed).unwrap();
        let sf = standardize(&p).unwrap();
        let res = solve_lp(&sf, &[], &BoundOverrides::new(), None, &LpLimits::default()).unwrap();
        prop_assume!(res.is_optimal());
        let oracle = ValidityOracle::new(&p).unwrap();
        let x = sf.to_original(res.structural());
        for sc in generate_round(&sf, &res, &SeparationSettings::default()) {
            let cut = to_original_space(&sc.cut, &sf);
            prop_assert!(oracle.is_valid(&cut, 1e-6).unwrap(), "invalid cut from row {}", sc.var());
            prop_assert!(cut.violation(&x) > 0.0, "cut from row {} does not separate", sc.var());
        }
    }
}
