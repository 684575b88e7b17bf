//! End-to-end acceptance checks on synthetic clusters.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero when any fails.
//! Reference values below come from the committed reference run and are held
//! to a relative tolerance of `FROZEN_TOLERANCE`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tierlab::cost::CostRates;
use tierlab::experiment::{
    self, n_sweep, prepare, run_policy, sensitivity, sensitivity_bands, write_sweep_outputs, Dataset, ExperimentSpec,
    PolicyKind, SweepRow, N_SWEEP,
};
use tierlab::gbt::GbtParams;
use tierlab::harness::brute_force_oracle;
use tierlab::labeling::{build_training_set, FeatureVector, HistoryIndex, TrainingExample};
use tierlab::model::{train_gbt, CategoryModel, TrueCategoryModel};
use tierlab::oracle::{self, Objective, OracleInstance, OracleJob, OracleLimits, SolveStatus};
use tierlab::policy::{ActPoint, Adaptive, AdaptiveParams, AlwaysSsd, FirstFit, PlacementPolicy};
use tierlab::report::check_invariants;
use tierlab::sim::{self, FootprintModel, SimConfig, SimResult};
use tierlab::trace::{load_trace, Trace};
use tierlab::workload::{default_mix, generate, ArchetypeConfig, GeneratorConfig, DEFAULT_EPOCH};

const FROZEN_TOLERANCE: f64 = 0.10;

/// Per seed at quota 0.01: oracle-tco − true, true − ranking, ranking − hash,
/// ranking − firstfit (TCO savings points).
const REF_MARGINS: [(u64, [f64; 4]); 3] = [
    (1, [3.3113, 0.6214, 2.7689, 1.4661]),
    (2, [3.1522, 0.0704, 2.1308, 1.0361]),
    (3, [4.8656, 0.5067, 1.7327, 1.5093]),
];

/// Per seed at quota 0.1: |true − ranking| and ranking − firstfit.
const REF_GAPS: [(u64, [f64; 2]); 3] = [(1, [1.0766, 10.5125]), (2, [0.0210, 6.6749]), (3, [0.5779, 7.3326])];

/// Per seed at quota 0.1: min–max spread of ranking savings over the
/// hyperparameter grid.
const REF_SPREADS: [(u64, f64); 3] = [(1, 0.7705), (2, 0.7148), (3, 0.8254)];

struct Outcome {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn outcome(name: &'static str, failures: Vec<String>, summary: String) -> Outcome {
    let ok = failures.is_empty();
    let detail = if ok { summary } else { format!("{summary}; {}", failures.join("; ")) };
    Outcome { name, ok, detail }
}

fn frozen(what: &str, got: f64, want: f64, failures: &mut Vec<String>) {
    if (got - want).abs() > FROZEN_TOLERANCE * want.abs() + 5e-5 {
        failures.push(format!("{what} = {got:.4}, reference {want:.4}"));
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/micro")
}

fn features(t: &Trace, rates: &CostRates) -> Vec<FeatureVector> {
    let h = HistoryIndex::build(t, rates).unwrap();
    t.jobs().iter().map(|j| h.features(j)).collect()
}

fn savings(rows: &[SweepRow], seed: u64, quota: f64, policy: &str) -> f64 {
    rows.iter()
        .find(|r| r.seed == seed && r.quota_fraction == quota && r.policy == policy)
        .unwrap_or_else(|| panic!("no row for {policy} seed {seed} quota {quota}"))
        .tco_savings_pct
}

// ---------------------------------------------------------------------------

fn oracle_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1e);
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut sizes = BTreeMap::new();
    for k in 0..200 {
        let n = rng.random_range(1..=15);
        *sizes.entry(n).or_insert(0) += 1;
        let mut jobs: Vec<OracleJob> = (0..n)
            .map(|i| {
                let a = rng.random_range(0..100) as f64;
                OracleJob {
                    id: format!("o{i:02}"),
                    arrival: a,
                    end: a + rng.random_range(1..60) as f64,
                    size: rng.random_range(1..40),
                    gain: rng.random_range(-3.0..10.0),
                }
            })
            .collect();
        jobs.sort_by(|x, y| x.arrival.total_cmp(&y.arrival).then(x.id.cmp(&y.id)));
        let inst = OracleInstance {
            jobs,
            capacity: rng.random_range(10..90) as f64,
            objective: Objective::Tco,
        };
        let sol = oracle::solve(&inst, &OracleLimits::default());
        let brute = brute_force_oracle(&inst).unwrap();
        if sol.status != SolveStatus::Optimal {
            failures.push(format!("instance {k}: status {:?}", sol.status));
        }
        if sol.objective_value != brute.objective_value {
            failures.push(format!("instance {k}: {} vs brute force {}", sol.objective_value, brute.objective_value));
        }
        if !oracle::is_feasible(&inst, &sol.x) {
            failures.push(format!("instance {k}: infeasible selection"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(60) {
        failures.push(format!("took {elapsed:.1?}"));
    }
    let big = sizes.range(13..).map(|(_, c)| c).sum::<usize>();
    outcome("oracle exactness", failures, format!("200 instances ({big} with 13-15 jobs) in {elapsed:.1?}"))
}

fn oracle_dominance(rows: &[SweepRow], elapsed: Duration) -> Outcome {
    let mut failures: Vec<String> = check_invariants(rows).iter().map(ToString::to_string).collect();
    if elapsed >= Duration::from_secs(600) {
        failures.push(format!("sweep took {elapsed:.1?}"));
    }
    let cells: BTreeSet<(u64, u64)> = rows.iter().map(|r| (r.seed, r.quota_fraction.to_bits())).collect();
    let policies: BTreeSet<&str> = rows.iter().map(|r| r.policy.as_str()).collect();
    let bounded = rows.iter().filter(|r| r.oracle_status.as_deref() == Some("bounded")).count();
    outcome(
        "oracle dominance and TCIO-oracle monotonicity",
        failures,
        format!(
            "{} (seed, quota) cells x {} policies, {} bounded oracle solves, sweep {elapsed:.1?}",
            cells.len(),
            policies.len(),
            bounded
        ),
    )
}

fn headroom_ordering(rows: &[SweepRow], seeds: &[u64]) -> Outcome {
    let q = 0.01;
    let mut failures = Vec::new();
    let mut holding = 0;
    let mut per_seed = Vec::new();
    for &s in seeds {
        let oracle = savings(rows, s, q, "oracle-tco");
        let truth = savings(rows, s, q, "adaptive-true");
        let gbt = savings(rows, s, q, "adaptive-ranking");
        let hash = savings(rows, s, q, "adaptive-hash");
        let ff = savings(rows, s, q, "firstfit");
        let ordered = oracle >= truth && truth >= gbt && gbt >= hash && gbt >= ff;
        holding += ordered as usize;
        per_seed.push(format!("seed {s} {}", if ordered { "ordered" } else { "not ordered" }));
        let margins = [oracle - truth, truth - gbt, gbt - hash, gbt - ff];
        if let Some((_, want)) = REF_MARGINS.iter().find(|(rs, _)| *rs == s) {
            for (k, (&got, &w)) in margins.iter().zip(want).enumerate() {
                frozen(&format!("seed {s} margin {k}"), got, w, &mut failures);
            }
        }
    }
    if holding < 2 {
        failures.push(format!("ordering holds for {holding} of {} seeds", seeds.len()));
    }
    outcome("headroom ordering at quota 0.01", failures, per_seed.join(", "))
}

fn true_vs_predicted(rows: &[SweepRow], seeds: &[u64]) -> Outcome {
    let q = 0.1;
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for &s in seeds {
        let truth = savings(rows, s, q, "adaptive-true");
        let gbt = savings(rows, s, q, "adaptive-ranking");
        let ff = savings(rows, s, q, "firstfit");
        let (small, large) = ((truth - gbt).abs(), gbt - ff);
        parts.push(format!("seed {s} {small:.3} vs {large:.3}"));
        if small > 0.5 * large {
            failures.push(format!("seed {s}: gap {small:.3} > half of {large:.3}"));
        }
        if let Some((_, want)) = REF_GAPS.iter().find(|(rs, _)| *rs == s) {
            frozen(&format!("seed {s} true-vs-predicted gap"), small, want[0], &mut failures);
            frozen(&format!("seed {s} predicted-vs-firstfit gap"), large, want[1], &mut failures);
        }
    }
    outcome("true-vs-predicted gap at quota 0.1", failures, parts.join(", "))
}

fn label_balance(datasets: &[Dataset]) -> Outcome {
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    let mut sets: Vec<(String, Vec<TrainingExample>)> = datasets
        .iter()
        .map(|ds| (format!("seed {} train split", ds.seed), ds.train_examples.clone()))
        .collect();
    let (week, _) = build_training_set(&generate(&default_mix()).unwrap(), &CostRates::default(), 15).unwrap();
    sets.push(("default mix week".into(), week));
    for (name, ex) in &sets {
        let distinct: BTreeSet<u64> = ex.iter().map(|e| e.n.to_bits()).collect();
        if distinct.len() < 1000 {
            failures.push(format!("{name}: only {} distinct densities", distinct.len()));
            continue;
        }
        let mut counts = [0usize; 15];
        for e in ex {
            counts[e.category] += 1;
            if (e.category == 0) != (e.m < 0.0) {
                failures.push(format!("{name}: {} has category {} with m = {}", e.job_id, e.category, e.m));
            }
        }
        let (lo, hi) = (counts[1..].iter().min().unwrap(), counts[1..].iter().max().unwrap());
        if hi - lo > 1 {
            failures.push(format!("{name}: bucket sizes {lo}..{hi}"));
        }
        parts.push(format!("{name} {lo}..{hi}"));
    }
    outcome("label balance with N = 15", failures, parts.join(", "))
}

fn check_act_series(label: &str, series: &[ActPoint], n: usize, t_l: f64, failures: &mut Vec<String>) {
    let mut prev: Option<&ActPoint> = None;
    for p in series {
        if p.act < 1 || p.act > n - 1 {
            failures.push(format!("{label}: ACT {} at t={}", p.act, p.time));
        }
        if let Some(q) = prev {
            if p.act.abs_diff(q.act) > 1 {
                failures.push(format!("{label}: ACT jumps {} -> {} at t={}", q.act, p.act, p.time));
            }
            if p.time < q.time + t_l {
                failures.push(format!("{label}: updates {} s apart at t={}", p.time - q.time, p.time));
            }
        } else if p.act > 2 {
            failures.push(format!("{label}: first ACT {}", p.act));
        }
        prev = Some(p);
    }
}

fn adaptive_mechanics(spec: &ExperimentSpec, ds: &Dataset) -> Outcome {
    let mut failures = Vec::new();
    let n = ds.n_categories;
    let t_l = spec.adaptive.t_l;
    let mut parts = Vec::new();
    for (label, quota) in [
        ("unlimited", f64::INFINITY),
        ("quota 1e-4", 1e-4 * ds.peak_usage),
        ("quota 0.01", 0.01 * ds.peak_usage),
        ("quota 0.1", 0.1 * ds.peak_usage),
    ] {
        for kind in [PolicyKind::AdaptiveRanking, PolicyKind::AdaptiveTrue, PolicyKind::AdaptiveHash] {
            let series = experiment::act_series(spec, ds, kind, quota).unwrap();
            let label = format!("{kind} {label}");
            check_act_series(&label, &series, n, t_l, &mut failures);
            if quota.is_infinite() && !series.iter().all(|p| p.act == 1) {
                failures.push(format!("{label}: ACT leaves 1 with unlimited SSD"));
            }
            if quota < 0.001 * ds.peak_usage {
                match series.iter().position(|p| p.act == n - 1) {
                    None => failures.push(format!("{label}: ACT never reaches {}", n - 1)),
                    Some(i) => {
                        let held = series[i..].iter().filter(|p| p.act == n - 1).count() as f64 / (series.len() - i) as f64;
                        parts.push(format!("{kind} reaches N-1 at {:.1} h, held {:.0}%", series[i].time / 3600.0 - ds.eval.jobs()[0].arrival_time / 3600.0, 100.0 * held));
                        if series[i..].iter().any(|p| p.act < n - 2) {
                            // An empty window reads as zero spillover, so sparse top-category arrivals pull ACT down.
                            let exits: Vec<_> = series[i..].windows(2).filter(|w| w[0].act == n - 1 && w[1].act < n - 1).collect();
                            let empty = exits.iter().filter(|w| w[1].spillover == 0.0).count();
                            failures.push(format!(
                                "{label}: ACT falls back below N-2 after reaching N-1 ({empty} of {} exits from N-1 follow a zero-spillover window)",
                                exits.len()
                            ));
                        }
                    }
                }
            }
        }
    }

    // Scripted two-window trace with known labels, replayed at M = inf and M = 0.
    let exp: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("expected.json")).unwrap()).unwrap();
    let case = &exp["algorithm1"];
    let rates = CostRates::load(fixtures().join("rates.toml")).unwrap();
    let trace = load_trace(fixtures().join(case["trace"].as_str().unwrap())).unwrap();
    let feats = features(&trace, &rates);
    let labels: HashMap<String, usize> = case["labels"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v.as_u64().unwrap() as usize))
        .collect();
    let sn = case["n_categories"].as_u64().unwrap() as usize;
    let p = &case["params"];
    let params = AdaptiveParams {
        spill_low: p["spill_low"].as_f64().unwrap(),
        spill_high: p["spill_high"].as_f64().unwrap(),
        t_w: p["t_w"].as_f64().unwrap(),
        t_l: p["t_l"].as_f64().unwrap(),
    };
    let model: std::sync::Arc<dyn CategoryModel> = std::sync::Arc::new(TrueCategoryModel::new(sn, labels));
    for (label, quota, target) in [("script unlimited", f64::INFINITY, 1), ("script zero quota", 0.0, sn - 1)] {
        let mut policy = Adaptive::new("adaptive-true", model.clone(), params).unwrap();
        let cfg = SimConfig {
            record_act_series: true,
            ..SimConfig::new(quota, FootprintModel::Constant, rates.clone())
        };
        let r = sim::run(&trace, &feats, &mut policy, &cfg).unwrap();
        let series = r.act_series.unwrap();
        check_act_series(label, &series, sn, params.t_l, &mut failures);
        if series.last().map(|p| p.act) != Some(target) {
            failures.push(format!("{label}: final ACT {:?}, expected {target}", series.last().map(|p| p.act)));
        }
    }
    outcome("adaptive threshold mechanics", failures, parts.join(", "))
}

fn spillover_metric(spec: &ExperimentSpec, ds: &Dataset) -> Outcome {
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut check = |label: String, r: &SimResult, trace: &Trace, rates: &CostRates, failures: &mut Vec<String>| {
        runs += 1;
        for s in &r.spillover_series {
            if !(0.0..=1.0).contains(&s.spillover) {
                failures.push(format!("{label}: spillover {} at t={}", s.spillover, s.time));
            }
        }
        let end = trace.jobs().iter().map(|j| j.end_time).fold(0.0, f64::max);
        let pairs: Vec<_> = r.records.iter().zip(trace.jobs()).collect();
        let total = sim::spillover_percentage(&pairs, end, rates).unwrap();
        if !(0.0..=1.0).contains(&total) {
            failures.push(format!("{label}: whole-run spillover {total}"));
        }
    };
    for frac in [1e-4, 0.01, 0.1, 0.5, 1.0] {
        for &kind in PolicyKind::DEFAULT_SET.iter().chain(&[PolicyKind::AlwaysSsd]) {
            let r = run_policy(spec, ds, kind, frac * ds.peak_usage, spec.adaptive, false).unwrap();
            check(format!("{kind} at {frac}"), &r, &ds.eval, &ds.rates, &mut failures);
        }
    }
    for fm in [FootprintModel::Constant, FootprintModel::LinearGrowth] {
        let cfg = SimConfig::new(0.05 * ds.peak_usage, fm, ds.rates.clone());
        let r = sim::run(&ds.eval, &ds.eval_features, &mut AlwaysSsd, &cfg).unwrap();
        check(format!("always-ssd {fm}"), &r, &ds.eval, &ds.rates, &mut failures);
    }

    let exp: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("expected.json")).unwrap()).unwrap();
    let rates = CostRates::load(fixtures().join("rates.toml")).unwrap();
    let mut exact = 0;
    for case in exp["spillover"].as_array().unwrap() {
        let trace = load_trace(fixtures().join(case["trace"].as_str().unwrap())).unwrap();
        let feats = features(&trace, &rates);
        let fm: FootprintModel = case["footprint"].as_str().unwrap().parse().unwrap();
        let cfg = SimConfig::new(case["quota"].as_f64().unwrap(), fm, rates.clone());
        let mut policy: Box<dyn PlacementPolicy> = match case["policy"].as_str().unwrap() {
            "always-ssd" => Box::new(AlwaysSsd),
            _ => Box::new(FirstFit),
        };
        let r = sim::run(&trace, &feats, policy.as_mut(), &cfg).unwrap();
        let pairs: Vec<_> = r.records.iter().zip(trace.jobs()).collect();
        for c in case["checks"].as_array().unwrap() {
            let t = c["t"].as_f64().unwrap();
            let want = c["value"].as_f64().unwrap();
            let got = sim::spillover_percentage(&pairs, t, &rates).unwrap();
            if (got - want).abs() > 1e-12 * want.abs().max(1.0) {
                failures.push(format!("{} at t={t}: {got} vs {want}", case["trace"]));
            } else {
                exact += 1;
            }
        }
    }
    outcome("spillover metric", failures, format!("{runs} runs in range, {exact} hand values matched"))
}

fn separable_set() -> (Vec<TrainingExample>, usize) {
    let archetype = |name: &str, density: f64, life: f64| ArchetypeConfig {
        name: name.into(),
        arrival_rate: 120.0,
        diurnal_amplitude: 0.3,
        size_mu: (2e9f64).ln(),
        size_sigma: 0.6,
        lifetime_mu: life.ln(),
        lifetime_sigma: 0.6,
        io_density_level: density,
        write_fraction: 0.3,
        cache_hit_fraction: 0.3,
        feature_noise: 0.0,
        pipeline_count: 6,
        op_bytes: 65536.0,
        write_phase_fraction: 0.5,
    };
    let names = ["alpha", "bravo", "charlie", "delta", "echo"];
    let cfg = GeneratorConfig {
        duration: 86_400.0,
        seed: 11,
        epoch: DEFAULT_EPOCH,
        archetypes: names
            .iter()
            .enumerate()
            .map(|(i, n)| archetype(n, 2.0 + i as f64, 1200.0 * (1.0 + (i % 2) as f64)))
            .collect(),
    };
    let trace = generate(&cfg).unwrap();
    let (mut ex, _) = build_training_set(&trace, &CostRates::default(), names.len()).unwrap();
    // the archetype token alone determines the class
    for e in &mut ex {
        let prefix = e.job_id.split('-').next().unwrap();
        e.category = names.iter().position(|n| *n == prefix).unwrap();
    }
    (ex, names.len())
}

fn model_sanity(datasets: &[Dataset]) -> Outcome {
    let mut failures = Vec::new();
    let defaults = GbtParams::default();
    if defaults.max_trees > 300 || defaults.max_depth > 6 {
        failures.push(format!("defaults {} trees depth {}", defaults.max_trees, defaults.max_depth));
    }
    let (sep, n) = separable_set();
    let m = train_gbt(&sep, n, &defaults).unwrap();
    if m.accuracy < 0.99 {
        failures.push(format!("separable validation accuracy {:.4}", m.accuracy));
    }
    let wrong = sep.iter().filter(|e| m.predict(&e.features).unwrap() != e.category).count();
    if wrong > 0 {
        failures.push(format!("{wrong} separable training points mislabeled"));
    }
    let mut parts = vec![format!("separable {:.4} on {} examples", m.accuracy, sep.len())];
    for ds in datasets {
        let acc = ds.gbt.accuracy;
        parts.push(format!("seed {} {acc:.3}", ds.seed));
        if acc <= 1.0 / ds.n_categories as f64 {
            failures.push(format!("seed {}: accuracy {acc:.3} does not beat 1/N", ds.seed));
        }
    }

    let mut cfg = default_mix();
    cfg.duration = 5.0 * 7.0 * 86_400.0;
    let (mut big, _) = build_training_set(&generate(&cfg).unwrap(), &CostRates::default(), 15).unwrap();
    if big.len() < 20_000 {
        failures.push(format!("only {} examples generated", big.len()));
    }
    big.truncate(20_000);
    let start = Instant::now();
    let big_model = train_gbt(&big, 15, &defaults).unwrap();
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(120) {
        failures.push(format!("training on 20k took {elapsed:.1?}"));
    }
    parts.push(format!("20k examples in {elapsed:.1?} ({} trees)", big_model.tree_counts().iter().sum::<usize>()));
    outcome("model sanity", failures, parts.join(", "))
}

fn sensitivity_band(spec: &ExperimentSpec, datasets: &[Dataset], rows: &[SweepRow]) -> Outcome {
    let spec = ExperimentSpec {
        quotas: vec![0.1],
        ..spec.clone()
    };
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for ds in datasets {
        let grid = sensitivity(&spec, ds, PolicyKind::AdaptiveRanking).unwrap();
        if grid.len() != 27 {
            failures.push(format!("seed {}: grid has {} points", ds.seed, grid.len()));
        }
        let band = &sensitivity_bands(&grid)[0];
        let spread = band.max - band.min;
        let lead = savings(rows, ds.seed, 0.1, "adaptive-ranking") - savings(rows, ds.seed, 0.1, "firstfit");
        parts.push(format!("seed {} spread {spread:.3} vs lead {lead:.3}", ds.seed));
        if spread > lead {
            failures.push(format!("seed {}: spread {spread:.3} exceeds lead {lead:.3}", ds.seed));
        }
        if let Some((_, want)) = REF_SPREADS.iter().find(|(s, _)| *s == ds.seed) {
            frozen(&format!("seed {} spread", ds.seed), spread, *want, &mut failures);
        }
    }
    outcome("hyperparameter sensitivity at quota 0.1", failures, parts.join(", "))
}

fn n_sweep_shape(spec: &ExperimentSpec) -> Outcome {
    let spec = ExperimentSpec {
        quotas: vec![0.1],
        ..spec.clone()
    };
    let mut failures = Vec::new();
    let mut mean = vec![0.0; N_SWEEP.len()];
    for &seed in &spec.seeds {
        let rows = n_sweep(&spec, seed, &N_SWEEP).unwrap();
        for (k, r) in rows.iter().enumerate() {
            mean[k] += r.tco_savings_pct / spec.seeds.len() as f64;
        }
        for w in rows.windows(2) {
            if w[1].model_accuracy > w[0].model_accuracy {
                failures.push(format!(
                    "seed {seed}: accuracy rises from {:.3} at N={} to {:.3} at N={}",
                    w[0].model_accuracy, w[0].n_categories, w[1].model_accuracy, w[1].n_categories
                ));
            }
        }
    }
    let best = (0..mean.len()).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap();
    if best == 0 || best == mean.len() - 1 {
        failures.push(format!("mean savings peak at N = {}", N_SWEEP[best]));
    }
    let shape: Vec<String> = N_SWEEP.iter().zip(&mean).map(|(n, s)| format!("N={n}: {s:.2}")).collect();
    outcome("category-count sweep shape", failures, format!("mean over seeds {}", shape.join(", ")))
}

fn determinism(spec: &ExperimentSpec, first: &experiment::SweepResult) -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_sweep_outputs(first, a.path()).unwrap();
    let second = experiment::sweep(spec).unwrap();
    write_sweep_outputs(&second, b.path()).unwrap();
    let mut failures = Vec::new();
    let mut bytes = 0;
    for name in ["sweep.csv", "datasets.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        bytes += x.len();
        if x != y {
            failures.push(format!("{name} differs"));
        }
    }
    outcome("determinism of the default sweep", failures, format!("{bytes} bytes compared"))
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    let mut report = |o: Outcome| {
        println!("{} {}: {}", if o.ok { "PASS" } else { "FAIL" }, o.name, o.detail);
        results.push(o.ok);
    };

    report(oracle_exactness());

    let spec = ExperimentSpec::default();
    let start = Instant::now();
    let sweep = experiment::sweep(&spec).unwrap();
    let sweep_time = start.elapsed();
    report(oracle_dominance(&sweep.rows, sweep_time));
    report(headroom_ordering(&sweep.rows, &spec.seeds));
    report(true_vs_predicted(&sweep.rows, &spec.seeds));

    let datasets: Vec<Dataset> = spec.seeds.iter().map(|&s| prepare(&spec, s, spec.n_categories).unwrap()).collect();
    report(label_balance(&datasets));
    report(adaptive_mechanics(&spec, &datasets[0]));
    report(spillover_metric(&spec, &datasets[0]));
    report(model_sanity(&datasets));
    report(sensitivity_band(&spec, &datasets, &sweep.rows));
    report(n_sweep_shape(&spec));
    report(determinism(&spec, &sweep));

    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
