use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use tierlab::cost::CostRates;
use tierlab::experiment::{self, ExpError, ExperimentSpec, PolicyKind};
use tierlab::gbt::GbtParams;
use tierlab::importance::{self, ImportanceParams};
use tierlab::labeling::{self, CategoryBoundaries, FeatureVector, HistoryIndex};
use tierlab::model::{self, CategoryModel, HashCategoryModel, LifetimeRegressor, TrainedGbt, TrueCategoryModel};
use tierlab::oracle::{self, Objective, OracleLimits, SolveStatus};
use tierlab::policy::{
    Adaptive, AdaptiveParams, AlwaysHdd, AlwaysSsd, FirstFit, Heuristic, LifetimeTtl, OracleReplay, PlacementPolicy,
};
use tierlab::report;
use tierlab::sim::{self, FootprintModel, SimConfig};
use tierlab::trace::{self, LoadOptions, Trace};
use tierlab::workload::{self, GeneratorConfig};

#[derive(Parser)]
#[command(name = "tierlab", version, about = "SSD/HDD placement simulator for shuffle-style jobs")]
struct Cli {
    /// Worker threads for sweeps and training (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic trace.
    Generate(GenerateArgs),
    /// Compute features and categories for every job in a trace.
    Label(LabelArgs),
    /// Train a category classifier or a lifetime regressor.
    Train(TrainArgs),
    /// Replay a trace under one placement policy.
    Simulate(SimulateArgs),
    /// Solve the clairvoyant placement problem for a trace.
    Oracle(OracleArgs),
    /// Run the policy x quota x seed grid described by a spec file.
    Sweep(SweepArgs),
    /// Feature-group importance by AUC drop.
    Importance(ImportanceArgs),
    /// Threshold and spillover trajectory of an adaptive run.
    ActSeries(ActSeriesArgs),
    /// Hyperparameter grid and category-count sweep for an adaptive policy.
    Sensitivity(SensitivityArgs),
    /// Summarize a sweep results directory.
    Report(ReportArgs),
    /// Cost rates.
    Rates {
        #[command(subcommand)]
        cmd: RatesCmd,
    },
    /// Model files.
    Model {
        #[command(subcommand)]
        cmd: ModelCmd,
    },
}

#[derive(Subcommand)]
enum RatesCmd {
    /// Print the effective rates as TOML.
    Show {
        #[arg(long)]
        rates: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Print tree counts, depth and accuracy.
    Info { path: PathBuf },
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Drop unknown trace keys with a warning instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    rates: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config (TOML); the built-in reference mix when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trace length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long, default_value_t = 15)]
    n: usize,
    /// Reuse saved category boundaries instead of fitting them on this trace.
    #[arg(long)]
    boundaries: Option<PathBuf>,
    #[arg(long)]
    save_boundaries: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainTarget {
    Category,
    Lifetime,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "category")]
    target: TrainTarget,
    /// Labeled examples from `label` (category target).
    #[arg(long)]
    examples: Option<PathBuf>,
    /// Trace to learn lifetimes from (lifetime target).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    rates: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long)]
    max_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct AdaptiveArgs {
    /// Spillover tolerance band as `low,high`.
    #[arg(long)]
    act_range: Option<String>,
    /// Spillover look-back window in seconds.
    #[arg(long)]
    tw: Option<f64>,
    /// Minimum seconds between threshold updates.
    #[arg(long)]
    tl: Option<f64>,
}

impl AdaptiveArgs {
    fn apply(&self, mut p: AdaptiveParams) -> Res<AdaptiveParams> {
        if let Some(r) = &self.act_range {
            let (lo, hi) = r
                .split_once(',')
                .ok_or_else(|| spec_err(anyhow!("--act-range expects `low,high`, got `{r}`")))?;
            p.spill_low = lo.trim().parse().map_err(|e| spec_err(anyhow!("--act-range: {e}")))?;
            p.spill_high = hi.trim().parse().map_err(|e| spec_err(anyhow!("--act-range: {e}")))?;
        }
        if let Some(tw) = self.tw {
            p.t_w = tw;
        }
        if let Some(tl) = self.tl {
            p.t_l = tl;
        }
        p.validate().map_err(spec_err)?;
        Ok(p)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SimPolicy {
    Firstfit,
    Heuristic,
    Lifetime,
    AdaptiveHash,
    AdaptiveRanking,
    AdaptiveTrue,
    AlwaysSsd,
    AlwaysHdd,
    OracleReplay,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long, value_enum)]
    policy: SimPolicy,
    /// SSD quota in bytes.
    #[arg(long, conflicts_with = "quota_fraction")]
    quota: Option<f64>,
    /// SSD quota as a fraction of the unlimited always-SSD peak.
    #[arg(long)]
    quota_fraction: Option<f64>,
    #[arg(long, default_value = "constant")]
    footprint: FootprintModel,
    /// Category model file (adaptive-ranking).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Lifetime model file (lifetime).
    #[arg(long)]
    lifetime_model: Option<PathBuf>,
    /// Oracle solution CSV (oracle-replay).
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Category boundaries for adaptive-true; fitted on the trace otherwise.
    #[arg(long)]
    boundaries: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long, default_value_t = 3600.0)]
    ttl: f64,
    #[arg(long, default_value_t = 900.0)]
    rebuild_interval: f64,
    #[arg(long, default_value_t = 86400.0)]
    heuristic_window: f64,
    #[command(flatten)]
    adaptive: AdaptiveArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long, default_value = "tco")]
    objective: Objective,
    /// SSD capacity in bytes.
    #[arg(long)]
    quota: f64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Branch-and-bound node budget.
    #[arg(long)]
    nodes: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    instance_out: Option<PathBuf>,
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment spec (TOML); built-in defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Override the spec's seeds.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory; overrides the spec.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Labeled examples; the spec's training split for `--seed` when omitted.
    #[arg(long)]
    examples: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    holdout: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ActSeriesArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "adaptive-ranking")]
    policy: PolicyKind,
    /// Quota as a fraction of peak; `inf` for no limit.
    #[arg(long, default_value_t = 0.1)]
    quota: f64,
    #[command(flatten)]
    adaptive: AdaptiveArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "adaptive-ranking")]
    policy: PolicyKind,
    /// Also sweep the category count.
    #[arg(long)]
    n_sweep: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    dir: PathBuf,
    /// Also write savings_vs_quota.svg.
    #[arg(long)]
    plot: bool,
}

enum Failure {
    Spec(anyhow::Error),
    Run(anyhow::Error),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Spec(_) => 2,
            Failure::Run(_) => 3,
            Failure::Invariant(_) => 4,
        }
    }
}

type Res<T> = Result<T, Failure>;

fn spec_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Spec(e.into())
}

fn run_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Run(e.into())
}

fn exp_err(e: ExpError) -> Failure {
    match e {
        ExpError::Run { .. } | ExpError::Policy(_) | ExpError::Io(_) | ExpError::Csv(_) => run_err(e),
        _ => spec_err(e),
    }
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(run_err)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| run_err(anyhow!("cannot create {}: {e}", path.display())))
}

fn open(path: &Path) -> Res<File> {
    File::open(path).map_err(|e| spec_err(anyhow!("cannot open {}: {e}", path.display())))
}

fn load_rates(path: Option<&Path>) -> Res<CostRates> {
    match path {
        Some(p) => CostRates::load(p).map_err(spec_err),
        None => Ok(CostRates::default()),
    }
}

fn load_trace(args: &TraceArgs) -> Res<Trace> {
    trace::load_trace_with(&args.trace, LoadOptions { lenient: args.lenient }).map_err(spec_err)
}

fn load_spec(args: &SpecArgs, jobs: usize) -> Res<ExperimentSpec> {
    let mut spec = match &args.spec {
        Some(p) => ExperimentSpec::load(p).map_err(spec_err)?,
        None => ExperimentSpec::default(),
    };
    if jobs > 0 {
        spec.jobs = jobs;
    }
    spec.validate().map_err(spec_err)?;
    Ok(spec)
}

fn features_for(trace: &Trace, rates: &CostRates) -> Res<Vec<FeatureVector>> {
    let history = HistoryIndex::build(trace, rates).map_err(spec_err)?;
    Ok(trace.jobs().iter().map(|j| history.features(j)).collect())
}

fn cmd_generate(a: &GenerateArgs) -> Res<()> {
    let mut cfg = match &a.config {
        Some(p) => GeneratorConfig::load(p).map_err(spec_err)?,
        None => workload::default_mix(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.duration {
        cfg.duration = d;
    }
    let t = workload::generate(&cfg).map_err(spec_err)?;
    trace::write_trace(&t, create(&a.out)?).map_err(run_err)?;
    println!("{} jobs written to {}", t.len(), a.out.display());
    Ok(())
}

fn cmd_label(a: &LabelArgs) -> Res<()> {
    let t = load_trace(&a.trace)?;
    let rates = load_rates(a.trace.rates.as_deref())?;
    let history = HistoryIndex::build(&t, &rates).map_err(spec_err)?;
    let mut examples = labeling::unlabeled_examples(&t, &history, &rates).map_err(spec_err)?;
    let b = match &a.boundaries {
        Some(p) => CategoryBoundaries::load(p).map_err(spec_err)?,
        None => labeling::fit_on_examples(&examples, a.n).map_err(spec_err)?,
    };
    labeling::label(&mut examples, &b);
    if let Some(p) = &a.save_boundaries {
        b.save(p).map_err(run_err)?;
    }
    labeling::write_training_csv(&examples, create(&a.out)?).map_err(run_err)?;
    let mut counts = vec![0usize; b.n_categories];
    for e in &examples {
        counts[e.category] += 1;
    }
    println!("{} examples, category counts {:?}", examples.len(), counts);
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Res<()> {
    let mut params = GbtParams {
        seed: a.seed,
        ..GbtParams::default()
    };
    if let Some(v) = a.max_trees {
        params.max_trees = v;
    }
    if let Some(v) = a.max_depth {
        params.max_depth = v;
    }
    if let Some(v) = a.learning_rate {
        params.learning_rate = v;
    }
    match a.target {
        TrainTarget::Category => {
            let path = a
                .examples
                .as_ref()
                .ok_or_else(|| spec_err(anyhow!("--examples is required for the category target")))?;
            let examples = labeling::read_training_csv(open(path)?).map_err(spec_err)?;
            let m = model::train_gbt(&examples, a.n, &params).map_err(spec_err)?;
            m.save(&a.out).map_err(run_err)?;
            println!(
                "category model: {} classes, trees {:?}, validation accuracy {:.4}",
                m.n_categories,
                m.tree_counts(),
                m.accuracy
            );
        }
        TrainTarget::Lifetime => {
            let path = a
                .trace
                .as_ref()
                .ok_or_else(|| spec_err(anyhow!("--trace is required for the lifetime target")))?;
            let t = trace::load_trace(path).map_err(spec_err)?;
            let rates = load_rates(a.rates.as_deref())?;
            let feats = features_for(&t, &rates)?;
            let rows: Vec<(FeatureVector, f64)> = feats.into_iter().zip(t.jobs().iter().map(|j| j.duration())).collect();
            let m = model::train_lifetime_regressor(&rows, &params).map_err(spec_err)?;
            m.save(&a.out).map_err(run_err)?;
            println!("lifetime model: {} trees, global sigma {:.1} s", m.ensemble.trees.len(), m.global_sigma);
        }
    }
    Ok(())
}

fn cmd_model_info(path: &Path) -> Res<()> {
    let text = std::fs::read_to_string(path).map_err(|e| spec_err(anyhow!("{}: {e}", path.display())))?;
    if let Ok(m) = TrainedGbt::from_json(&text) {
        println!("format: tierlab-gbt");
        println!("categories: {}", m.n_categories);
        println!("tree counts: {:?}", m.tree_counts());
        println!("max depth: {}", m.max_depth());
        println!("train rows: {}, validation rows: {}", m.train_rows, m.validation_rows);
        println!("validation accuracy: {:.4}", m.accuracy);
        return Ok(());
    }
    let m = LifetimeRegressor::from_json(&text)
        .map_err(|e| spec_err(anyhow!("{} is not a tierlab model: {e}", path.display())))?;
    println!("format: tierlab-lifetime");
    println!("trees: {}", m.ensemble.trees.len());
    println!("max depth: {}", m.ensemble.trees.iter().map(|t| t.depth()).max().unwrap_or(0));
    println!("pipelines with sigma: {}", m.pipeline_sigma.len());
    println!("global sigma: {:.3} s", m.global_sigma);
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Res<()> {
    let t = load_trace(&a.trace)?;
    let rates = load_rates(a.trace.rates.as_deref())?;
    let feats = features_for(&t, &rates)?;
    let quota = match (a.quota, a.quota_fraction) {
        (Some(q), _) => q,
        (None, Some(f)) => {
            let cfg = SimConfig {
                sample_interval: 0.0,
                ..SimConfig::new(f64::INFINITY, a.footprint, rates.clone())
            };
            f * sim::run(&t, &feats, &mut AlwaysSsd, &cfg).map_err(run_err)?.peak_ssd_bytes
        }
        (None, None) => return Err(spec_err(anyhow!("one of --quota or --quota-fraction is required"))),
    };
    let adaptive = a.adaptive.apply(AdaptiveParams::default())?;
    let mut policy: Box<dyn PlacementPolicy> = match a.policy {
        SimPolicy::Firstfit => Box::new(FirstFit),
        SimPolicy::AlwaysSsd => Box::new(AlwaysSsd),
        SimPolicy::AlwaysHdd => Box::new(AlwaysHdd),
        SimPolicy::Heuristic => {
            Box::new(Heuristic::new(rates.clone(), a.rebuild_interval, a.heuristic_window).map_err(spec_err)?)
        }
        SimPolicy::Lifetime => {
            let p = a
                .lifetime_model
                .as_ref()
                .ok_or_else(|| spec_err(anyhow!("--lifetime-model is required for the lifetime policy")))?;
            let m = LifetimeRegressor::load(p).map_err(spec_err)?;
            Box::new(LifetimeTtl::new(Arc::new(m), a.ttl).map_err(spec_err)?)
        }
        SimPolicy::AdaptiveHash => {
            let m: Arc<dyn CategoryModel> = Arc::new(HashCategoryModel::new(a.n).map_err(spec_err)?);
            Box::new(Adaptive::new("adaptive-hash", m, adaptive).map_err(spec_err)?)
        }
        SimPolicy::AdaptiveRanking => {
            let p = a
                .model
                .as_ref()
                .ok_or_else(|| spec_err(anyhow!("--model is required for adaptive-ranking")))?;
            let m: Arc<dyn CategoryModel> = Arc::new(TrainedGbt::load(p).map_err(spec_err)?);
            Box::new(Adaptive::new("adaptive-ranking", m, adaptive).map_err(spec_err)?)
        }
        SimPolicy::AdaptiveTrue => {
            let history = HistoryIndex::build(&t, &rates).map_err(spec_err)?;
            let mut ex = labeling::unlabeled_examples(&t, &history, &rates).map_err(spec_err)?;
            let b = match &a.boundaries {
                Some(p) => CategoryBoundaries::load(p).map_err(spec_err)?,
                None => labeling::fit_on_examples(&ex, a.n).map_err(spec_err)?,
            };
            labeling::label(&mut ex, &b);
            let m: Arc<dyn CategoryModel> = Arc::new(TrueCategoryModel::from_examples(&ex, b.n_categories));
            Box::new(Adaptive::new("adaptive-true", m, adaptive).map_err(spec_err)?)
        }
        SimPolicy::OracleReplay => {
            let p = a
                .solution
                .as_ref()
                .ok_or_else(|| spec_err(anyhow!("--solution is required for oracle-replay")))?;
            let x: HashMap<String, bool> = oracle::read_solution_csv(open(p)?).map_err(spec_err)?;
            Box::new(OracleReplay::new("oracle-replay", x))
        }
    };
    let cfg = SimConfig {
        record_act_series: true,
        ..SimConfig::new(quota, a.footprint, rates)
    };
    let r = sim::run(&t, &feats, policy.as_mut(), &cfg).map_err(run_err)?;
    std::fs::create_dir_all(&a.out_dir).map_err(run_err)?;
    r.write_jobs_csv(create(&a.out_dir.join("jobs.csv"))?).map_err(run_err)?;
    r.write_summary_csv(create(&a.out_dir.join("summary.csv"))?).map_err(run_err)?;
    if let Some(series) = r.act_series.as_ref().filter(|s| !s.is_empty()) {
        experiment::write_act_csv(series, create(&a.out_dir.join("act_series.csv"))?).map_err(run_err)?;
    }
    println!(
        "{} at quota {:.4e} bytes: TCO savings {:.3}%, TCIO savings {:.3}%, {} spills",
        r.policy,
        quota,
        r.tco_savings_percent,
        r.tcio_savings_percent,
        r.spill_count()
    );
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Res<()> {
    let t = load_trace(&a.trace)?;
    let rates = load_rates(a.trace.rates.as_deref())?;
    let inst = oracle::build_instance(&t, &rates, a.quota, a.objective).map_err(spec_err)?;
    let mut limits = OracleLimits {
        time_budget: a.budget.map(std::time::Duration::from_secs_f64),
        ..OracleLimits::default()
    };
    if let Some(n) = a.nodes {
        limits.node_budget = n;
    }
    let sol = oracle::solve(&inst, &limits);
    if !oracle::is_feasible(&inst, &sol.x) {
        return Err(Failure::Invariant("oracle returned an infeasible placement".into()));
    }
    oracle::write_solution_csv(&inst, &sol, create(&a.out)?).map_err(run_err)?;
    if let Some(p) = &a.instance_out {
        oracle::write_instance_csv(&inst, create(p)?).map_err(run_err)?;
    }
    let status = match sol.status {
        SolveStatus::Optimal => "optimal".to_string(),
        SolveStatus::Bounded { gap } => format!("bounded (gap {gap:.6e})"),
    };
    println!(
        "{} objective {:.6e}, upper bound {:.6e}, {status}, {} nodes, {} of {} jobs on SSD",
        a.objective,
        sol.objective_value,
        sol.upper_bound,
        sol.nodes_explored,
        sol.x.iter().filter(|&&x| x).count(),
        sol.x.len()
    );
    Ok(())
}

fn report_dir(dir: &Path, plot: bool) -> Res<()> {
    let rows = report::load_rows(dir).map_err(spec_err)?;
    let r = report::build(&rows);
    let text = report::render(&r);
    print!("{text}");
    std::fs::write(dir.join("report.txt"), &text).map_err(run_err)?;
    if plot {
        std::fs::write(dir.join("savings_vs_quota.svg"), report::savings_svg(&r)).map_err(run_err)?;
    }
    if r.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("{} invariant violation(s)", r.violations.len())))
    }
}

fn cmd_sweep(a: &SweepArgs, jobs: usize) -> Res<()> {
    let mut spec = load_spec(&a.spec, jobs)?;
    if !a.seeds.is_empty() {
        spec.seeds = a.seeds.clone();
    }
    let dir = a
        .out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let result = experiment::sweep(&spec).map_err(exp_err)?;
    experiment::write_sweep_outputs(&result, &dir).map_err(exp_err)?;
    report_dir(&dir, false)
}

fn cmd_importance(a: &ImportanceArgs, jobs: usize) -> Res<()> {
    let spec = load_spec(&a.spec, jobs)?;
    let n = a.n.unwrap_or(spec.n_categories);
    let examples = match &a.examples {
        Some(p) => labeling::read_training_csv(open(p)?).map_err(spec_err)?,
        None => experiment::prepare(&spec, a.seed, n).map_err(exp_err)?.train_examples,
    };
    let params = ImportanceParams {
        holdout_fraction: a.holdout,
        gbt: GbtParams {
            seed: a.seed,
            ..spec.gbt.clone()
        },
        workers: spec.workers(),
    };
    let imp = importance::feature_group_importance(&examples, n, &params).map_err(spec_err)?;
    imp.write_csv(&a.out).map_err(run_err)?;
    println!("category  base_auc      A      B      C      T");
    for r in &imp.rows {
        println!(
            "{:>8}  {:>8.4} {:>6.3} {:>6.3} {:>6.3} {:>6.3}",
            r.category, r.base_auc, r.scores[0], r.scores[1], r.scores[2], r.scores[3]
        );
    }
    Ok(())
}

fn cmd_act_series(a: &ActSeriesArgs, jobs: usize) -> Res<()> {
    let mut spec = load_spec(&a.spec, jobs)?;
    if !a.policy.is_adaptive() {
        return Err(spec_err(anyhow!("{} is not an adaptive policy", a.policy)));
    }
    spec.adaptive = a.adaptive.apply(spec.adaptive)?;
    let ds = experiment::prepare(&spec, a.seed, spec.n_categories).map_err(exp_err)?;
    let series = experiment::act_series(&spec, &ds, a.policy, a.quota * ds.peak_usage).map_err(exp_err)?;
    experiment::write_act_csv(&series, create(&a.out)?).map_err(run_err)?;
    let last = series.last().map(|p| p.act);
    println!("{} decision points, final threshold {:?}", series.len(), last);
    Ok(())
}

fn cmd_sensitivity(a: &SensitivityArgs, jobs: usize) -> Res<()> {
    let spec = load_spec(&a.spec, jobs)?;
    if !a.policy.is_adaptive() {
        return Err(spec_err(anyhow!("{} is not an adaptive policy", a.policy)));
    }
    let ds = experiment::prepare(&spec, a.seed, spec.n_categories).map_err(exp_err)?;
    let rows = experiment::sensitivity(&spec, &ds, a.policy).map_err(exp_err)?;
    std::fs::create_dir_all(&a.out).map_err(run_err)?;
    experiment::write_rows_csv(&rows, create(&a.out.join("sensitivity.csv"))?).map_err(exp_err)?;
    let bands = experiment::sensitivity_bands(&rows);
    experiment::write_rows_csv(&bands, create(&a.out.join("bands.csv"))?).map_err(exp_err)?;
    for b in &bands {
        println!("quota {}: TCO savings band [{:.3}, {:.3}]", b.quota_fraction, b.min, b.max);
    }
    if a.n_sweep {
        let rows = experiment::n_sweep(&spec, a.seed, &experiment::N_SWEEP).map_err(exp_err)?;
        experiment::write_rows_csv(&rows, create(&a.out.join("n_sweep.csv"))?).map_err(exp_err)?;
        for r in &rows {
            println!(
                "N = {:>2}, quota {}: TCO savings {:.3}%, accuracy {:.3}",
                r.n_categories, r.quota_fraction, r.tco_savings_pct, r.model_accuracy
            );
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Label(a) => cmd_label(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Sweep(a) => cmd_sweep(a, cli.jobs),
        Cmd::Importance(a) => cmd_importance(a, cli.jobs),
        Cmd::ActSeries(a) => cmd_act_series(a, cli.jobs),
        Cmd::Sensitivity(a) => cmd_sensitivity(a, cli.jobs),
        Cmd::Report(a) => report_dir(&a.dir, a.plot),
        Cmd::Rates {
            cmd: RatesCmd::Show { rates },
        } => {
            print!("{}", load_rates(rates.as_deref())?.to_toml());
            Ok(())
        }
        Cmd::Model {
            cmd: ModelCmd::Info { path },
        } => cmd_model_info(path),
    }
}

/// Error chain joined by ": ", skipping causes already spelled out by their parent.
fn chain(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Spec(e) => eprintln!("error: {}", chain(e)),
                Failure::Run(e) => eprintln!("run failed: {}", chain(e)),
                Failure::Invariant(m) => eprintln!("invariant violated: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
