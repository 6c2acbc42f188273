mod common;

use std::fs;
use std::path::Path;

use common::brute_force_optimum;
use splitbranch::bench::{read_records, run_experiment, ExperimentConfig, RunStatus};
use splitbranch::branching::RuleSpec;
use splitbranch::io::{generate_instance, write_mps, Family, GenParams, InstanceManifest};

fn write_instances(dir: &Path) -> (InstanceManifest, Vec<f64>) {
    let mut manifest = InstanceManifest::default();
    let mut optima = Vec::new();
    for seed in 1..=3 {
        let params = GenParams { n: 7, m: 2, max_coef: 15, int_upper: 2, cont_fraction: 0.3 };
        let p = generate_instance(Family::Knapsack, &params, seed).unwrap();
        let path = dir.join(format!("k{seed}.mps"));
        fs::write(&path, write_mps(&p)).unwrap();
        manifest.push(path, None).unwrap();
        optima.push(brute_force_optimum(&p).expect("knapsack is feasible"));
    }
    (manifest, optima)
}

fn config() -> ExperimentConfig {
    ExperimentConfig {
        rules: vec![RuleSpec::new("pseudocost"), RuleSpec::new("random"), RuleSpec::with_weight("hybridgmi", 1e-5)],
        seeds: vec![1, 2],
        threads: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn grid_runs_every_triple_with_correct_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, optima) = write_instances(dir.path());
    let out = dir.path().join("runs.csv");
    let res = run_experiment(&manifest, &config(), &out).unwrap();
    assert_eq!(res.records.len(), 3 * 3 * 2);
    assert_eq!(read_records(&out).unwrap().len(), 18);
    for r in &res.records {
        assert_eq!(r.status, RunStatus::Optimal, "{r:?}");
        let k: usize = r.instance[1..].parse().unwrap();
        assert!((r.objective.unwrap() - optima[k - 1]).abs() < 1e-6, "{r:?}");
    }
    assert_eq!(res.tables.len(), 2);
}

#[test]
fn resume_only_runs_missing_triples() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_instances(dir.path());
    let out = dir.path().join("runs.csv");
    let first = run_experiment(&manifest, &config(), &out).unwrap();
    let text = fs::read_to_string(&out).unwrap();

    let again = run_experiment(&manifest, &config(), &out).unwrap();
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
    assert_eq!(again.records, first.records);

    let mut lines: Vec<&str> = text.lines().collect();
    lines.truncate(lines.len() - 4);
    fs::write(&out, lines.join("\n") + "\n").unwrap();
    let resumed = run_experiment(&manifest, &config(), &out).unwrap();
    assert_eq!(read_records(&out).unwrap().len(), 18);
    let strip = |v: &[splitbranch::bench::RunRecord]| {
        v.iter().map(|r| (r.key(), r.status, r.nodes, r.objective)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&resumed.records), strip(&first.records));
}
