use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use splitbranch::bench::{analyze, read_records, relative_improvements, run_experiment, ExperimentConfig, Improvement};
use splitbranch::bnb::{root_cut_loop, solve_named, RowCutEvent, SolveObserver, SolveSettings};
use splitbranch::branching::{BranchHistory, RuleRegistry, RuleSpec};
use splitbranch::cutgen::{scored_efficacy, EfficacySpace};
use splitbranch::io::{
    generate_instance, parse_solution, read_file, read_mps, write_file, write_mps, write_solution, Family, GenParams,
    InstanceManifest,
};
use splitbranch::model::{standardize, SolutionStatus};
use splitbranch::simplex::{solve_lp, BoundOverrides, LpLimits, LpStatus};

#[derive(Parser)]
#[command(name = "splitbranch", version, about = "Branch-and-cut MILP solver with cut-driven branching rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one MPS instance.
    Solve(SolveArgs),
    /// Run a rule x instance x seed grid and summarize it.
    Compare(CompareArgs),
    /// Write seeded synthetic instances and a manifest.
    Gen(GenArgs),
    /// Dump the GMI cuts of the root separation rounds as CSV.
    Cuts(CutsArgs),
}

#[derive(Args, Clone)]
struct LimitArgs {
    /// Wall-clock limit per solve, in seconds.
    #[arg(long, env = "SPLITBRANCH_TIME_LIMIT")]
    time_limit: Option<f64>,
    #[arg(long, env = "SPLITBRANCH_NODE_LIMIT")]
    node_limit: Option<usize>,
    /// Weight of the GMI history term in hybridgmi.
    #[arg(long, env = "SPLITBRANCH_GMI_WEIGHT")]
    gmi_weight: Option<f64>,
    #[arg(long, env = "SPLITBRANCH_ROOT_CUT_ROUNDS", default_value_t = 5)]
    root_cut_rounds: usize,
}

impl LimitArgs {
    fn settings(&self) -> Result<SolveSettings> {
        let mut s = SolveSettings { root_cut_rounds: self.root_cut_rounds, node_limit: self.node_limit, ..SolveSettings::default() };
        if let Some(t) = self.time_limit {
            s.time_limit = Some(Duration::try_from_secs_f64(t).context("invalid time limit")?);
        }
        if let Some(w) = self.gmi_weight {
            s.branch.gmi_weight = w;
        }
        Ok(s)
    }
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, env = "SPLITBRANCH_RULE", default_value = "hybridgmi")]
    rule: String,
    #[arg(long, env = "SPLITBRANCH_SEED", default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    limits: LimitArgs,
    /// Solution file (`name value` lines) installed as the initial incumbent.
    #[arg(long)]
    provide_solution: Option<PathBuf>,
    /// Write the best solution found to this file.
    #[arg(long)]
    write_solution: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, env = "SPLITBRANCH_MANIFEST")]
    manifest: PathBuf,
    /// Comma-separated rule names; `name@w` sets the GMI weight.
    #[arg(long, env = "SPLITBRANCH_RULES", default_value = "random,fullstrong,pseudocost,gmi,weakgmi,hybridgmi")]
    rules: String,
    /// `a..b` or a comma-separated list.
    #[arg(long, env = "SPLITBRANCH_SEEDS", default_value = "1..5")]
    seeds: String,
    #[arg(long, env = "SPLITBRANCH_OUT", default_value = "results.csv")]
    out: PathBuf,
    /// Install known solutions as incumbents (`<instance>.sol`, or solved first).
    #[arg(long)]
    provided_solutions: bool,
    #[arg(long, env = "SPLITBRANCH_THREADS", default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    limits: LimitArgs,
    /// Markdown summary destination; printed to stdout when absent.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Per-pair relative improvements over the first rule, as CSV.
    #[arg(long)]
    improvements: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Variables (set-cover columns).
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Constraints (set-cover rows).
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    max_coef: u32,
    #[arg(long, default_value_t = 5)]
    int_upper: u32,
    #[arg(long, default_value_t = 0.3)]
    cont_fraction: f64,
    /// Skip solving; the manifest then lists no optima.
    #[arg(long)]
    no_solve: bool,
    #[arg(long, env = "SPLITBRANCH_TIME_LIMIT", default_value_t = 60.0)]
    time_limit: f64,
}

#[derive(Args)]
struct CutsArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    #[arg(long, default_value = "cuts.csv")]
    out: PathBuf,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim_start_matches('=').trim().parse()?);
        if a > b {
            bail!("empty seed range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`"))).collect()
}

fn parse_rules(s: &str, weight: Option<f64>) -> Result<Vec<RuleSpec>> {
    let registry = RuleRegistry::default();
    let mut out = Vec::new();
    for tok in s.split(',').filter(|t| !t.trim().is_empty()) {
        let mut spec: RuleSpec = tok.parse().map_err(anyhow::Error::msg)?;
        if !registry.contains(&spec.name) {
            bail!("unknown rule `{}` (known: {})", spec.name, registry.names().collect::<Vec<_>>().join(", "));
        }
        if spec.gmi_weight.is_none() && spec.name == "hybridgmi" {
            spec.gmi_weight = weight;
        }
        out.push(spec);
    }
    Ok(out)
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let p = read_mps(&a.file)?;
    let mut settings = a.limits.settings()?;
    settings.seed = a.seed;
    if let Some(path) = &a.provide_solution {
        settings.provided_solution = Some(parse_solution(&read_file(path)?, &p)?);
    }
    let rule = parse_rules(&a.rule, a.limits.gmi_weight)?.pop().context("no rule given")?;
    let (sol, stats) = solve_named(&p, &rule, &settings)?;
    println!("instance        {}", p.name);
    println!("rule            {}", rule.label());
    println!("status          {}", stats.status.as_str());
    match sol.status {
        SolutionStatus::Optimal | SolutionStatus::Feasible => println!("objective       {}", sol.objective),
        _ => println!("objective       -"),
    }
    println!("bound           {}", stats.bound);
    println!("nodes           {}", stats.nodes);
    println!("lp iterations   {}", stats.lp_iterations);
    println!("root cuts       {}", stats.cuts_added);
    println!("root lp bound   {}", stats.root_lp_bound);
    println!("root bound      {}", stats.root_bound);
    println!("time (s)        {:.3}", stats.total_time.as_secs_f64());
    println!("branch time (s) {:.3}", stats.branch_time.as_secs_f64());
    if let Some(j) = stats.root_branch_var {
        println!("root branching  {}", p.var_names[j]);
    }
    if let Some(path) = &a.write_solution {
        if sol.status.has_solution() {
            write_file(path, &write_solution(&p, &sol.values))?;
        }
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let manifest = InstanceManifest::load(&a.manifest)?;
    let mut settings = a.limits.settings()?;
    settings.time_limit.get_or_insert(Duration::from_secs(60));
    let config = ExperimentConfig {
        rules: parse_rules(&a.rules, a.limits.gmi_weight)?,
        seeds: parse_seeds(&a.seeds)?,
        settings,
        threads: a.threads,
        provided_solutions: a.provided_solutions,
        ..ExperimentConfig::default()
    };
    let out = run_experiment(&manifest, &config, &a.out)?;
    // re-read so the summary reflects exactly what is on disk
    let records = read_records(&a.out)?;
    let labels: Vec<String> = config.rules.iter().map(RuleSpec::label).collect();
    let summary = analyze(&records, &labels, config.shifts)?;
    eprintln!("{} records, {} instances retained", out.records.len(), summary.kept.len());
    let md = summary.to_markdown();
    match &a.tables {
        Some(path) => write_file(path, &md)?,
        None => print!("{md}"),
    }
    if let Some(path) = &a.improvements {
        let kept: Vec<_> = records.into_iter().filter(|r| summary.kept.contains(&r.instance)).collect();
        let mut w = csv::Writer::from_path(path)?;
        for rule in labels.iter().skip(1) {
            for imp in relative_improvements(&kept, &labels[0], rule) {
                w.serialize::<Improvement>(imp)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let params = GenParams { n: a.n, m: a.m, max_coef: a.max_coef, int_upper: a.int_upper, cont_fraction: a.cont_fraction };
    let settings = SolveSettings {
        time_limit: Some(Duration::try_from_secs_f64(a.time_limit)?),
        ..SolveSettings::default()
    };
    let mut manifest = InstanceManifest::default();
    for k in 0..a.count {
        let seed = a.seed + k as u64;
        let p = generate_instance(a.family, &params, seed)?;
        let file = format!("{}.mps", p.name);
        write_file(&a.out.join(&file), &write_mps(&p))?;
        let mut optimal = None;
        if !a.no_solve {
            let (sol, _) = solve_named(&p, &RuleSpec::new("pseudocost"), &settings)?;
            if sol.status == SolutionStatus::Optimal {
                write_file(&a.out.join(format!("{}.sol", p.name)), &write_solution(&p, &sol.values))?;
                optimal = Some(sol.objective);
            }
        }
        manifest.push(file, optimal)?;
    }
    let path = a.out.join("manifest.txt");
    write_file(&path, &manifest.to_string())?;
    eprintln!("wrote {} instances and {}", a.count, path.display());
    Ok(())
}

struct CutDump<'a> {
    names: &'a [String],
    rows: Vec<(String, &'static str, f64, f64, usize)>,
}

impl SolveObserver for CutDump<'_> {
    fn on_row_cut(&mut self, ev: &RowCutEvent<'_>) {
        let Ok(cut) = ev.cut else { return };
        let Ok((std_cut, eff)) = scored_efficacy(cut, ev.sf, ev.lp, EfficacySpace::Structural) else { return };
        let var = ev.row.basic_var;
        let name = self.names.get(var).cloned().unwrap_or_else(|| format!("col{var}"));
        self.rows.push((name, ev.kind.as_str(), eff, std_cut.norm(), std_cut.support_size()));
    }
}

fn cmd_cuts(a: CutsArgs) -> Result<()> {
    let p = read_mps(&a.file)?;
    let sf = standardize(&p)?;
    let limits = LpLimits::default();
    let root = solve_lp(&sf, &[], &BoundOverrides::new(), None, &limits)?;
    if root.status != LpStatus::Optimal {
        bail!("root LP is {:?}", root.status);
    }
    let settings = SolveSettings::default();
    let mut hist = BranchHistory::new(sf.n_structural, settings.seed);
    let mut dump = CutDump { names: &p.var_names, rows: Vec::new() };
    let out = root_cut_loop(&sf, root, a.rounds, &mut hist, &settings, &limits, &mut dump)?;
    write_cuts(&a.out, &dump.rows)?;
    eprintln!("{} cuts generated over {} rounds, {} added", dump.rows.len(), out.rounds, out.cuts.len());
    Ok(())
}

fn write_cuts(path: &Path, rows: &[(String, &'static str, f64, f64, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generating_var", "kind", "efficacy", "norm", "support_size"])?;
    for (var, kind, eff, norm, support) in rows {
        w.write_record([var.clone(), kind.to_string(), eff.to_string(), norm.to_string(), support.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Cuts(a) => cmd_cuts(a),
    }
}
