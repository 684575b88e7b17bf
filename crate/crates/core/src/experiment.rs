//! Experiment runner: dataset preparation, quota sweeps, threshold series,
//! hyperparameter grids and category-count sweeps.
//!
//! A generated trace covers two weeks. Jobs arriving in the first part train
//! the models and fit the category boundaries; the rest is replayed. History
//! features see the whole trace but only jobs that ended before the arrival
//! in question.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostRates, Device};
use crate::gbt::GbtParams;
use crate::labeling::{
    fit_on_examples, label, unlabeled_examples, CategoryBoundaries, FeatureVector, HistoryIndex,
    LabelError, TrainingExample,
};
use crate::model::{
    parallel_map, train_gbt, train_lifetime_regressor, HashCategoryModel, LifetimeRegressor,
    ModelError, TrainedGbt, TrueCategoryModel,
};
use crate::oracle::{self, Objective, OracleLimits, OracleSolution, SolveStatus};
use crate::policy::{
    ActPoint, Adaptive, AdaptiveParams, AlwaysHdd, AlwaysSsd, FirstFit, Heuristic, LifetimeTtl,
    OracleReplay, PlacementPolicy, PolicyError,
};
use crate::sim::{self, FootprintModel, SimConfig, SimError, SimResult};
use crate::trace::{load_trace, Trace, TraceError};
use crate::workload::{default_mix, generate, GenError, GeneratorConfig, WEEK_SECONDS};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("run ({policy}, quota {quota}, seed {seed}) failed: {source}")]
    Run {
        policy: String,
        quota: f64,
        seed: u64,
        source: SimError,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Firstfit,
    Heuristic,
    Lifetime,
    AdaptiveHash,
    AdaptiveRanking,
    AdaptiveTrue,
    AlwaysSsd,
    AlwaysHdd,
}

impl PolicyKind {
    pub const DEFAULT_SET: [PolicyKind; 6] = [
        PolicyKind::Firstfit,
        PolicyKind::Heuristic,
        PolicyKind::Lifetime,
        PolicyKind::AdaptiveHash,
        PolicyKind::AdaptiveRanking,
        PolicyKind::AdaptiveTrue,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Firstfit => "firstfit",
            PolicyKind::Heuristic => "heuristic",
            PolicyKind::Lifetime => "lifetime",
            PolicyKind::AdaptiveHash => "adaptive-hash",
            PolicyKind::AdaptiveRanking => "adaptive-ranking",
            PolicyKind::AdaptiveTrue => "adaptive-true",
            PolicyKind::AlwaysSsd => "always-ssd",
            PolicyKind::AlwaysHdd => "always-hdd",
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(
            self,
            PolicyKind::AdaptiveHash | PolicyKind::AdaptiveRanking | PolicyKind::AdaptiveTrue
        )
    }

    /// Whether the policy depends on a learned model.
    pub fn is_learned(&self) -> bool {
        matches!(self, PolicyKind::AdaptiveRanking | PolicyKind::AdaptiveTrue)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            PolicyKind::Firstfit,
            PolicyKind::Heuristic,
            PolicyKind::Lifetime,
            PolicyKind::AdaptiveHash,
            PolicyKind::AdaptiveRanking,
            PolicyKind::AdaptiveTrue,
            PolicyKind::AlwaysSsd,
            PolicyKind::AlwaysHdd,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

/// Everything a sweep needs. Paths are resolved against the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Trace file; when absent a trace is generated per seed.
    pub trace: Option<PathBuf>,
    /// Generator config file; defaults to the reference mix.
    pub generator: Option<PathBuf>,
    /// Length of generated traces in seconds.
    pub generated_duration: f64,
    pub rates: Option<PathBuf>,
    pub policies: Vec<PolicyKind>,
    /// Quotas as fractions of the peak unconstrained SSD usage.
    pub quotas: Vec<f64>,
    /// Absolute quotas in bytes; replaces `quotas` when non-empty.
    pub quota_bytes: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n_categories: usize,
    pub footprint_model: FootprintModel,
    /// Share of the trace's arrival span used for training.
    pub train_fraction: f64,
    pub oracle: bool,
    pub oracle_node_budget: u64,
    /// Optional wall-clock cap per oracle solve, seconds.
    pub oracle_time_budget: Option<f64>,
    pub ttl: f64,
    pub rebuild_interval: f64,
    pub heuristic_window: f64,
    pub adaptive: AdaptiveParams,
    pub gbt: GbtParams,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
    #[serde(skip)]
    pub generator_config: Option<GeneratorConfig>,
    #[serde(skip)]
    pub rates_config: Option<CostRates>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            trace: None,
            generator: None,
            generated_duration: 2.0 * WEEK_SECONDS,
            rates: None,
            policies: PolicyKind::DEFAULT_SET.to_vec(),
            quotas: vec![0.01, 0.1, 0.5, 1.0],
            quota_bytes: Vec::new(),
            seeds: vec![1, 2, 3],
            n_categories: 15,
            footprint_model: FootprintModel::Constant,
            train_fraction: 0.5,
            oracle: true,
            oracle_node_budget: 200_000,
            oracle_time_budget: None,
            ttl: 3600.0,
            rebuild_interval: 900.0,
            heuristic_window: 86_400.0,
            adaptive: AdaptiveParams::default(),
            gbt: GbtParams::default(),
            output_dir: None,
            jobs: 0,
            generator_config: None,
            rates_config: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self, ExpError> {
        let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| ExpError::Spec(e.to_string()))?;
        if let Some(base) = base {
            for p in [&mut spec.trace, &mut spec.generator, &mut spec.rates, &mut spec.output_dir]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExpError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<(), ExpError> {
        let fail = |m: &str| Err(ExpError::Spec(m.to_string()));
        if self.policies.is_empty() {
            return fail("policy list is empty");
        }
        if self.quotas.is_empty() && self.quota_bytes.is_empty() {
            return fail("quota grid is empty");
        }
        if self.quotas.iter().chain(&self.quota_bytes).any(|q| !(q >= &0.0)) {
            return fail("quotas must be non-negative");
        }
        if self.seeds.is_empty() {
            return fail("seed list is empty");
        }
        if self.n_categories < 2 {
            return fail("n_categories must be at least 2");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction must lie in (0, 1)");
        }
        if !(self.ttl > 0.0 && self.rebuild_interval > 0.0 && self.heuristic_window > 0.0) {
            return fail("ttl, rebuild_interval and heuristic_window must be positive");
        }
        self.adaptive.validate()?;
        Ok(())
    }

    pub fn resolved_rates(&self) -> Result<CostRates, ExpError> {
        if let Some(r) = &self.rates_config {
            return Ok(r.clone());
        }
        match &self.rates {
            Some(p) => Ok(CostRates::load(p)?),
            None => Ok(CostRates::default()),
        }
    }

    fn generator_for(&self, seed: u64) -> Result<GeneratorConfig, ExpError> {
        let mut cfg = match (&self.generator_config, &self.generator) {
            (Some(c), _) => c.clone(),
            (None, Some(p)) => GeneratorConfig::load(p)?,
            (None, None) => {
                let mut c = default_mix();
                c.duration = self.generated_duration;
                c
            }
        };
        cfg.seed = seed;
        Ok(cfg)
    }

    pub fn workers(&self) -> usize {
        let cores = std::thread::available_parallelism().map_or(1, |p| p.get());
        if self.jobs == 0 {
            cores
        } else {
            self.jobs.min(cores).max(1)
        }
    }

    pub fn oracle_limits(&self) -> OracleLimits {
        OracleLimits {
            node_budget: self.oracle_node_budget,
            time_budget: self.oracle_time_budget.map(std::time::Duration::from_secs_f64),
        }
    }
}

/// Train/eval split with fitted models for one seed and category count.
pub struct Dataset {
    pub seed: u64,
    pub n_categories: usize,
    pub rates: CostRates,
    pub train: Trace,
    pub eval: Trace,
    pub eval_features: Vec<FeatureVector>,
    pub train_examples: Vec<TrainingExample>,
    pub eval_examples: Vec<TrainingExample>,
    pub boundaries: CategoryBoundaries,
    pub gbt: Arc<TrainedGbt>,
    pub lifetime: Arc<LifetimeRegressor>,
    /// Peak SSD usage of the eval trace with every job on SSD and no quota.
    pub peak_usage: f64,
}

pub fn load_trace_for(spec: &ExperimentSpec, seed: u64) -> Result<Trace, ExpError> {
    match &spec.trace {
        Some(p) => Ok(load_trace(p)?),
        None => Ok(generate(&spec.generator_for(seed)?)?),
    }
}

pub fn split_time(trace: &Trace, train_fraction: f64) -> f64 {
    let jobs = trace.jobs();
    match (jobs.first(), jobs.last()) {
        (Some(f), Some(l)) => f.arrival_time + train_fraction * (l.arrival_time - f.arrival_time),
        _ => 0.0,
    }
}

pub fn prepare(spec: &ExperimentSpec, seed: u64, n_categories: usize) -> Result<Dataset, ExpError> {
    let trace = load_trace_for(spec, seed)?;
    prepare_from_trace(spec, &trace, seed, n_categories)
}

pub fn prepare_from_trace(
    spec: &ExperimentSpec,
    trace: &Trace,
    seed: u64,
    n_categories: usize,
) -> Result<Dataset, ExpError> {
    let rates = spec.resolved_rates()?;
    let cut = split_time(trace, spec.train_fraction);
    let (train, eval) = trace.split_at(cut);
    if train.is_empty() || eval.is_empty() {
        return Err(ExpError::Spec("train or eval split is empty".into()));
    }
    let history = HistoryIndex::build(trace, &rates)?;
    let mut train_examples = unlabeled_examples(&train, &history, &rates)?;
    let boundaries = fit_on_examples(&train_examples, n_categories)?;
    label(&mut train_examples, &boundaries);
    let mut eval_examples = unlabeled_examples(&eval, &history, &rates)?;
    label(&mut eval_examples, &boundaries);
    let eval_features = eval_examples.iter().map(|e| e.features.clone()).collect();

    let params = GbtParams {
        seed,
        ..spec.gbt.clone()
    };
    let gbt = train_gbt(&train_examples, n_categories, &params)?;
    let lifetimes: Vec<(FeatureVector, f64)> = train
        .jobs()
        .iter()
        .zip(&train_examples)
        .map(|(j, e)| (e.features.clone(), j.duration()))
        .collect();
    let lifetime = train_lifetime_regressor(&lifetimes, &params)?;

    let unlimited = SimConfig {
        sample_interval: 0.0,
        ..SimConfig::new(f64::INFINITY, spec.footprint_model, rates.clone())
    };
    let peak = sim::run(&eval, &eval_examples.iter().map(|e| e.features.clone()).collect::<Vec<_>>(), &mut AlwaysSsd, &unlimited)
        .map_err(|source| ExpError::Run {
            policy: "always-ssd".into(),
            quota: f64::INFINITY,
            seed,
            source,
        })?
        .peak_ssd_bytes;
    Ok(Dataset {
        seed,
        n_categories,
        rates,
        train,
        eval,
        eval_features,
        train_examples,
        eval_examples,
        boundaries,
        gbt: Arc::new(gbt),
        lifetime: Arc::new(lifetime),
        peak_usage: peak,
    })
}

pub fn make_policy(
    spec: &ExperimentSpec,
    ds: &Dataset,
    kind: PolicyKind,
    adaptive: AdaptiveParams,
) -> Result<Box<dyn PlacementPolicy>, ExpError> {
    Ok(match kind {
        PolicyKind::Firstfit => Box::new(FirstFit),
        PolicyKind::AlwaysSsd => Box::new(AlwaysSsd),
        PolicyKind::AlwaysHdd => Box::new(AlwaysHdd),
        PolicyKind::Heuristic => {
            let mut h = Heuristic::new(ds.rates.clone(), spec.rebuild_interval, spec.heuristic_window)?;
            let mut done: Vec<_> = ds.train.jobs().iter().collect();
            done.sort_by(|a, b| a.end_time.total_cmp(&b.end_time));
            h.warm(done);
            Box::new(h)
        }
        PolicyKind::Lifetime => Box::new(LifetimeTtl::new(ds.lifetime.clone(), spec.ttl)?),
        PolicyKind::AdaptiveHash => Box::new(Adaptive::new(
            kind.name(),
            Arc::new(HashCategoryModel::new(ds.n_categories)?),
            adaptive,
        )?),
        PolicyKind::AdaptiveRanking => Box::new(Adaptive::new(kind.name(), ds.gbt.clone(), adaptive)?),
        PolicyKind::AdaptiveTrue => Box::new(Adaptive::new(
            kind.name(),
            Arc::new(TrueCategoryModel::from_examples(&ds.eval_examples, ds.n_categories)),
            adaptive,
        )?),
    })
}

pub fn run_policy(
    spec: &ExperimentSpec,
    ds: &Dataset,
    kind: PolicyKind,
    quota: f64,
    adaptive: AdaptiveParams,
    record_act_series: bool,
) -> Result<SimResult, ExpError> {
    let mut policy = make_policy(spec, ds, kind, adaptive)?;
    let cfg = SimConfig {
        record_act_series,
        ..SimConfig::new(quota, spec.footprint_model, ds.rates.clone())
    };
    sim::run(&ds.eval, &ds.eval_features, policy.as_mut(), &cfg).map_err(|source| ExpError::Run {
        policy: kind.name().into(),
        quota,
        seed: ds.seed,
        source,
    })
}

/// Solves the oracle and replays its placement in constant-footprint mode.
pub fn run_oracle(
    spec: &ExperimentSpec,
    ds: &Dataset,
    quota: f64,
    objective: Objective,
    incumbent: Option<&[bool]>,
) -> Result<(OracleSolution, SimResult), ExpError> {
    let inst = oracle::build_instance(&ds.eval, &ds.rates, quota, objective)?;
    let sol = oracle::solve_with_incumbent(&inst, &spec.oracle_limits(), incumbent);
    let ids: Vec<String> = inst.jobs.iter().map(|j| j.id.clone()).collect();
    let label = format!("oracle-{objective}");
    let mut replay = OracleReplay::from_vectors(label.clone(), &ids, &sol.x);
    let cfg = SimConfig::new(quota, FootprintModel::Constant, ds.rates.clone());
    let result = sim::run(&ds.eval, &ds.eval_features, &mut replay, &cfg).map_err(|source| ExpError::Run {
        policy: label,
        quota,
        seed: ds.seed,
        source,
    })?;
    Ok((sol, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: String,
    pub quota_fraction: f64,
    pub quota_bytes: f64,
    pub seed: u64,
    pub footprint_model: FootprintModel,
    pub tco_savings_pct: f64,
    pub tcio_savings_pct: f64,
    /// Oracle rows: proven bound minus value, in percent of the baseline.
    pub oracle_gap_pct: Option<f64>,
    pub oracle_status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub train_jobs: usize,
    pub eval_jobs: usize,
    pub peak_usage_bytes: f64,
    pub model_accuracy: f64,
    pub baseline_tco: f64,
    pub baseline_tcio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub datasets: Vec<DatasetSummary>,
}

fn quota_points(spec: &ExperimentSpec, peak: f64) -> Vec<(f64, f64)> {
    if spec.quota_bytes.is_empty() {
        spec.quotas.iter().map(|&f| (f, f * peak)).collect()
    } else {
        spec.quota_bytes
            .iter()
            .map(|&b| (if peak > 0.0 { b / peak } else { 0.0 }, b))
            .collect()
    }
}

/// Rows for one prepared dataset.
pub fn sweep_dataset(spec: &ExperimentSpec, ds: &Dataset) -> Result<Vec<SweepRow>, ExpError> {
    let points = quota_points(spec, ds.peak_usage);
    let tasks: Vec<(usize, PolicyKind)> = (0..points.len())
        .flat_map(|q| spec.policies.iter().map(move |&k| (q, k)))
        .collect();
    let results = parallel_map(spec.workers(), tasks.len(), |t| {
        let (q, kind) = tasks[t];
        run_policy(spec, ds, kind, points[q].1, spec.adaptive, false)
    });
    let mut rows = Vec::new();
    for (&(q, _), r) in tasks.iter().zip(results) {
        let r = r?;
        rows.push(SweepRow {
            policy: r.policy.clone(),
            quota_fraction: points[q].0,
            quota_bytes: points[q].1,
            seed: ds.seed,
            footprint_model: spec.footprint_model,
            tco_savings_pct: r.tco_savings_percent,
            tcio_savings_pct: r.tcio_savings_percent,
            oracle_gap_pct: None,
            oracle_status: None,
        });
    }
    if spec.oracle {
        for objective in [Objective::Tco, Objective::Tcio] {
            // Ascending quotas, each warm-started from the previous optimum.
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by(|&a, &b| points[a].1.total_cmp(&points[b].1));
            let mut previous: Option<Vec<bool>> = None;
            let mut oracle_rows = vec![None; points.len()];
            for q in order {
                let (sol, r) = run_oracle(spec, ds, points[q].1, objective, previous.as_deref())?;
                let baseline = match objective {
                    Objective::Tco => r.baseline_tco,
                    Objective::Tcio => r.baseline_tcio,
                };
                let (gap, status) = match sol.status {
                    SolveStatus::Optimal => (0.0, "optimal".to_string()),
                    SolveStatus::Bounded { gap } => (gap, "bounded".to_string()),
                };
                oracle_rows[q] = Some(SweepRow {
                    policy: r.policy.clone(),
                    quota_fraction: points[q].0,
                    quota_bytes: points[q].1,
                    seed: ds.seed,
                    footprint_model: FootprintModel::Constant,
                    tco_savings_pct: r.tco_savings_percent,
                    tcio_savings_pct: r.tcio_savings_percent,
                    oracle_gap_pct: Some(if baseline > 0.0 { 100.0 * gap / baseline } else { 0.0 }),
                    oracle_status: Some(status),
                });
                previous = Some(sol.x);
            }
            rows.extend(oracle_rows.into_iter().flatten());
        }
    }
    Ok(rows)
}

pub fn summarize(ds: &Dataset) -> DatasetSummary {
    let costs: Vec<_> = ds
        .eval
        .jobs()
        .iter()
        .filter_map(|j| crate::cost::JobCosts::compute(j, &ds.rates).ok())
        .collect();
    DatasetSummary {
        seed: ds.seed,
        train_jobs: ds.train.len(),
        eval_jobs: ds.eval.len(),
        peak_usage_bytes: ds.peak_usage,
        model_accuracy: ds.gbt.accuracy,
        baseline_tco: costs.iter().map(|c| c.tco_hdd).sum(),
        baseline_tcio: costs.iter().map(|c| c.tcio_hdd).sum(),
    }
}

pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.quota_fraction.total_cmp(&b.quota_fraction))
            .then(a.quota_bytes.total_cmp(&b.quota_bytes))
            .then(a.policy.cmp(&b.policy))
    });
}

/// The full grid: every (policy, quota, seed) plus oracle rows.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepResult, ExpError> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut datasets = Vec::new();
    for &seed in &spec.seeds {
        let ds = prepare(spec, seed, spec.n_categories)?;
        log::info!(
            "seed {seed}: {} train / {} eval jobs, peak {:.3e} bytes, accuracy {:.3}",
            ds.train.len(),
            ds.eval.len(),
            ds.peak_usage,
            ds.gbt.accuracy
        );
        rows.extend(sweep_dataset(spec, &ds)?);
        datasets.push(summarize(&ds));
    }
    sort_rows(&mut rows);
    Ok(SweepResult { rows, datasets })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), ExpError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "quota_fraction",
        "quota_bytes",
        "seed",
        "footprint_model",
        "tco_savings_pct",
        "tcio_savings_pct",
        "oracle_gap_pct",
        "oracle_status",
    ])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.quota_fraction.to_string(),
            r.quota_bytes.to_string(),
            r.seed.to_string(),
            r.footprint_model.to_string(),
            r.tco_savings_pct.to_string(),
            r.tcio_savings_pct.to_string(),
            r.oracle_gap_pct.map(|g| g.to_string()).unwrap_or_default(),
            r.oracle_status.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>, ExpError> {
    #[derive(Deserialize)]
    struct Raw {
        policy: String,
        quota_fraction: f64,
        quota_bytes: f64,
        seed: u64,
        footprint_model: String,
        tco_savings_pct: f64,
        tcio_savings_pct: f64,
        oracle_gap_pct: Option<f64>,
        oracle_status: Option<String>,
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<Raw>()
        .map(|row| {
            let row = row?;
            Ok(SweepRow {
                policy: row.policy,
                quota_fraction: row.quota_fraction,
                quota_bytes: row.quota_bytes,
                seed: row.seed,
                footprint_model: row.footprint_model.parse().map_err(ExpError::Spec)?,
                tco_savings_pct: row.tco_savings_pct,
                tcio_savings_pct: row.tcio_savings_pct,
                oracle_gap_pct: row.oracle_gap_pct,
                oracle_status: row.oracle_status.filter(|s| !s.is_empty()),
            })
        })
        .collect()
}

pub fn write_datasets_csv<W: Write>(datasets: &[DatasetSummary], out: W) -> Result<(), ExpError> {
    let mut w = csv::Writer::from_writer(out);
    for d in datasets {
        w.serialize(d)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sweep.csv` and `datasets.csv` into `dir`.
pub fn write_sweep_outputs(result: &SweepResult, dir: &Path) -> Result<(), ExpError> {
    std::fs::create_dir_all(dir)?;
    write_sweep_csv(&result.rows, std::fs::File::create(dir.join("sweep.csv"))?)?;
    write_datasets_csv(&result.datasets, std::fs::File::create(dir.join("datasets.csv"))?)?;
    Ok(())
}

/// Threshold trajectory of one adaptive run.
pub fn act_series(
    spec: &ExperimentSpec,
    ds: &Dataset,
    kind: PolicyKind,
    quota: f64,
) -> Result<Vec<ActPoint>, ExpError> {
    if !kind.is_adaptive() {
        return Err(ExpError::Spec(format!("{kind} has no threshold series")));
    }
    let r = run_policy(spec, ds, kind, quota, spec.adaptive, true)?;
    Ok(r.act_series.unwrap_or_default())
}

pub fn write_act_csv<W: Write>(series: &[ActPoint], out: W) -> Result<(), ExpError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "act", "spillover"])?;
    for p in series {
        w.write_record([p.time.to_string(), p.act.to_string(), p.spillover.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Spillover tolerance ranges of the hyperparameter grid.
pub const SPILL_RANGES: [(f64, f64); 3] = [(0.005, 0.03), (0.01, 0.15), (0.05, 0.25)];
pub const WINDOWS: [f64; 3] = [600.0, 900.0, 1800.0];
pub const DECISION_INTERVALS: [f64; 3] = [600.0, 900.0, 1800.0];
/// Category counts of the N sweep.
pub const N_SWEEP: [usize; 5] = [2, 5, 15, 25, 35];

pub fn sensitivity_grid() -> Vec<AdaptiveParams> {
    let mut grid = Vec::with_capacity(27);
    for &(lo, hi) in &SPILL_RANGES {
        for &t_w in &WINDOWS {
            for &t_l in &DECISION_INTERVALS {
                grid.push(AdaptiveParams {
                    spill_low: lo,
                    spill_high: hi,
                    t_w,
                    t_l,
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub seed: u64,
    pub quota_fraction: f64,
    pub spill_low: f64,
    pub spill_high: f64,
    pub t_w: f64,
    pub t_l: f64,
    pub tco_savings_pct: f64,
}

/// Adaptive runs over the whole hyperparameter grid at each quota.
pub fn sensitivity(
    spec: &ExperimentSpec,
    ds: &Dataset,
    kind: PolicyKind,
) -> Result<Vec<SensitivityRow>, ExpError> {
    let grid = sensitivity_grid();
    let points = quota_points(spec, ds.peak_usage);
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|q| (0..grid.len()).map(move |g| (q, g)))
        .collect();
    let results = parallel_map(spec.workers(), tasks.len(), |t| {
        let (q, g) = tasks[t];
        run_policy(spec, ds, kind, points[q].1, grid[g], false)
    });
    tasks
        .iter()
        .zip(results)
        .map(|(&(q, g), r)| {
            let p = grid[g];
            Ok(SensitivityRow {
                seed: ds.seed,
                quota_fraction: points[q].0,
                spill_low: p.spill_low,
                spill_high: p.spill_high,
                t_w: p.t_w,
                t_l: p.t_l,
                tco_savings_pct: r?.tco_savings_percent,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub quota_fraction: f64,
    pub min: f64,
    pub max: f64,
}

pub fn sensitivity_bands(rows: &[SensitivityRow]) -> Vec<Band> {
    let mut by_quota: BTreeMap<u64, Band> = BTreeMap::new();
    for r in rows {
        let b = by_quota.entry(r.quota_fraction.to_bits()).or_insert(Band {
            quota_fraction: r.quota_fraction,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        });
        b.min = b.min.min(r.tco_savings_pct);
        b.max = b.max.max(r.tco_savings_pct);
    }
    let mut bands: Vec<Band> = by_quota.into_values().collect();
    bands.sort_by(|a, b| a.quota_fraction.total_cmp(&b.quota_fraction));
    bands
}

pub fn write_rows_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<(), ExpError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSweepRow {
    pub seed: u64,
    pub n_categories: usize,
    pub quota_fraction: f64,
    pub tco_savings_pct: f64,
    pub tcio_savings_pct: f64,
    pub model_accuracy: f64,
}

/// Adaptive-ranking savings and model accuracy per category count.
pub fn n_sweep(spec: &ExperimentSpec, seed: u64, ns: &[usize]) -> Result<Vec<NSweepRow>, ExpError> {
    let trace = load_trace_for(spec, seed)?;
    let mut rows = Vec::new();
    for &n in ns {
        let ds = prepare_from_trace(spec, &trace, seed, n)?;
        for (fraction, quota) in quota_points(spec, ds.peak_usage) {
            let r = run_policy(spec, &ds, PolicyKind::AdaptiveRanking, quota, spec.adaptive, false)?;
            rows.push(NSweepRow {
                seed,
                n_categories: n,
                quota_fraction: fraction,
                tco_savings_pct: r.tco_savings_percent,
                tcio_savings_pct: r.tcio_savings_percent,
                model_accuracy: ds.gbt.accuracy,
            });
        }
    }
    Ok(rows)
}

/// Share of SSD-scheduled decisions, for diagnostics.
pub fn ssd_share(r: &SimResult) -> f64 {
    if r.records.is_empty() {
        return 0.0;
    }
    r.records.iter().filter(|x| x.device == Device::Ssd).count() as f64 / r.records.len() as f64
}
