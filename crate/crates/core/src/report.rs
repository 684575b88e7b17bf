//! Summaries built from sweep CSVs alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::experiment::{read_sweep_csv, ExpError, PolicyKind, SweepRow};
use crate::sim::FootprintModel;

pub const ORACLE_TCO: &str = "oracle-tco";
pub const ORACLE_TCIO: &str = "oracle-tcio";

/// Slack for comparing percentages that went through a CSV round trip.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStat {
    pub policy: String,
    pub seeds: usize,
    pub mean_tco: f64,
    pub min_tco: f64,
    pub max_tco: f64,
    pub mean_tcio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotaReport {
    pub quota_fraction: f64,
    /// Sorted by mean TCO savings, best first.
    pub ranking: Vec<PolicyStat>,
    pub best_learned: Option<(String, f64)>,
    pub best_baseline: Option<(String, f64)>,
}

impl QuotaReport {
    /// Best learned over best baseline mean savings, when the baseline is positive.
    pub fn learned_ratio(&self) -> Option<f64> {
        let (_, l) = self.best_learned.as_ref()?;
        let (_, b) = self.best_baseline.as_ref()?;
        (*b > 0.0).then(|| l / b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A constant-mode policy row beat the oracle-TCO row of the same (quota, seed).
    Dominance {
        policy: String,
        quota_fraction: f64,
        seed: u64,
        policy_pct: f64,
        oracle_pct: f64,
    },
    /// Oracle-TCIO savings fell while the quota grew.
    OracleTcioDecrease {
        seed: u64,
        from_quota: f64,
        to_quota: f64,
        from_pct: f64,
        to_pct: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Dominance {
                policy,
                quota_fraction,
                seed,
                policy_pct,
                oracle_pct,
            } => write!(
                f,
                "{policy} exceeds {ORACLE_TCO} at quota {quota_fraction}, seed {seed}: {policy_pct:.4}% > {oracle_pct:.4}%"
            ),
            Violation::OracleTcioDecrease {
                seed,
                from_quota,
                to_quota,
                from_pct,
                to_pct,
            } => write!(
                f,
                "{ORACLE_TCIO} TCIO savings drop from {from_pct:.4}% (quota {from_quota}) to {to_pct:.4}% (quota {to_quota}), seed {seed}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seeds: Vec<u64>,
    pub quotas: Vec<QuotaReport>,
    pub violations: Vec<Violation>,
}

fn is_oracle(policy: &str) -> bool {
    policy.starts_with("oracle")
}

fn is_learned(policy: &str) -> bool {
    policy.parse::<PolicyKind>().is_ok_and(|k| k.is_learned())
}

fn is_baseline(policy: &str) -> bool {
    matches!(
        policy.parse::<PolicyKind>(),
        Ok(PolicyKind::Firstfit | PolicyKind::Heuristic | PolicyKind::Lifetime)
    )
}

/// Reads `sweep.csv` from a results directory.
pub fn load_rows(dir: &Path) -> Result<Vec<SweepRow>, ExpError> {
    let path = dir.join("sweep.csv");
    let f = std::fs::File::open(&path)
        .map_err(|e| ExpError::Spec(format!("cannot open {}: {e}", path.display())))?;
    read_sweep_csv(f)
}

pub fn build(rows: &[SweepRow]) -> Report {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();

    // quota -> policy -> rows
    let mut by_quota: BTreeMap<u64, BTreeMap<&str, Vec<&SweepRow>>> = BTreeMap::new();
    for r in rows {
        by_quota
            .entry(r.quota_fraction.to_bits())
            .or_default()
            .entry(r.policy.as_str())
            .or_default()
            .push(r);
    }
    let mut quotas: Vec<QuotaReport> = by_quota
        .into_iter()
        .map(|(q, policies)| {
            let mut ranking: Vec<PolicyStat> = policies
                .into_iter()
                .map(|(p, rs)| {
                    let n = rs.len() as f64;
                    PolicyStat {
                        policy: p.to_string(),
                        seeds: rs.len(),
                        mean_tco: rs.iter().map(|r| r.tco_savings_pct).sum::<f64>() / n,
                        min_tco: rs.iter().map(|r| r.tco_savings_pct).fold(f64::INFINITY, f64::min),
                        max_tco: rs.iter().map(|r| r.tco_savings_pct).fold(f64::NEG_INFINITY, f64::max),
                        mean_tcio: rs.iter().map(|r| r.tcio_savings_pct).sum::<f64>() / n,
                    }
                })
                .collect();
            ranking.sort_by(|a, b| b.mean_tco.total_cmp(&a.mean_tco).then(a.policy.cmp(&b.policy)));
            let best = |keep: fn(&str) -> bool| {
                ranking
                    .iter()
                    .find(|s| keep(&s.policy))
                    .map(|s| (s.policy.clone(), s.mean_tco))
            };
            QuotaReport {
                quota_fraction: f64::from_bits(q),
                best_learned: best(is_learned),
                best_baseline: best(is_baseline),
                ranking,
            }
        })
        .collect();
    quotas.sort_by(|a, b| a.quota_fraction.total_cmp(&b.quota_fraction));

    Report {
        seeds,
        quotas,
        violations: check_invariants(rows),
    }
}

pub fn check_invariants(rows: &[SweepRow]) -> Vec<Violation> {
    let mut out = Vec::new();
    let key = |r: &SweepRow| (r.seed, r.quota_fraction.to_bits());
    let oracle: BTreeMap<_, f64> = rows
        .iter()
        .filter(|r| r.policy == ORACLE_TCO)
        .map(|r| (key(r), r.tco_savings_pct))
        .collect();
    for r in rows {
        if is_oracle(&r.policy) || r.footprint_model != FootprintModel::Constant {
            continue;
        }
        if let Some(&o) = oracle.get(&key(r)) {
            if r.tco_savings_pct > o + EPS {
                out.push(Violation::Dominance {
                    policy: r.policy.clone(),
                    quota_fraction: r.quota_fraction,
                    seed: r.seed,
                    policy_pct: r.tco_savings_pct,
                    oracle_pct: o,
                });
            }
        }
    }

    let mut tcio: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.policy == ORACLE_TCIO) {
        tcio.entry(r.seed).or_default().push((r.quota_fraction, r.tcio_savings_pct));
    }
    for (seed, mut pts) in tcio {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pts.windows(2) {
            if w[1].1 + EPS < w[0].1 {
                out.push(Violation::OracleTcioDecrease {
                    seed,
                    from_quota: w[0].0,
                    to_quota: w[1].0,
                    from_pct: w[0].1,
                    to_pct: w[1].1,
                });
            }
        }
    }
    out
}

pub fn render(report: &Report) -> String {
    let mut s = String::new();
    let clusters: Vec<String> = report.seeds.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(
        s,
        "synthetic clusters (generator seeds): {}",
        if clusters.is_empty() { "none".to_string() } else { clusters.join(", ") }
    );
    for q in &report.quotas {
        let _ = writeln!(s, "\nquota {}", q.quota_fraction);
        let _ = writeln!(
            s,
            "  {:<4} {:<18} {:>10} {:>10} {:>10} {:>10} {:>5}",
            "rank", "policy", "tco_mean", "tco_min", "tco_max", "tcio_mean", "seeds"
        );
        for (i, p) in q.ranking.iter().enumerate() {
            let _ = writeln!(
                s,
                "  {:<4} {:<18} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>5}",
                i + 1,
                p.policy,
                p.mean_tco,
                p.min_tco,
                p.max_tco,
                p.mean_tcio,
                p.seeds
            );
        }
        match (&q.best_learned, &q.best_baseline, q.learned_ratio()) {
            (Some((l, lv)), Some((b, bv)), Some(ratio)) => {
                let _ = writeln!(s, "  best learned {l} ({lv:.3}%) / best baseline {b} ({bv:.3}%) = {ratio:.2}x");
            }
            (Some((l, lv)), Some((b, bv)), None) => {
                let _ = writeln!(s, "  best learned {l} ({lv:.3}%), best baseline {b} ({bv:.3}%): ratio undefined");
            }
            _ => {}
        }
    }
    if report.violations.is_empty() {
        let _ = writeln!(s, "\ninvariants: ok");
    } else {
        let _ = writeln!(s, "\ninvariant violations:");
        for v in &report.violations {
            let _ = writeln!(s, "  {v}");
        }
    }
    s
}

/// Mean TCO savings against quota, one polyline per policy.
pub fn savings_svg(report: &Report) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 8] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    ];
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for q in &report.quotas {
        for p in &q.ranking {
            series.entry(&p.policy).or_default().push((q.quota_fraction, p.mean_tco));
        }
    }
    let xs: Vec<f64> = report.quotas.iter().map(|q| q.quota_fraction).collect();
    let ys = series.values().flatten().map(|p| p.1);
    let (ymin, ymax) = ys.fold((0.0f64, 0.0f64), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let yspan = if ymax > ymin { ymax - ymin } else { 1.0 };
    // quotas are spread over decades, so x is evenly spaced by index
    let px = |q: f64| {
        let i = xs.iter().position(|&x| x == q).unwrap_or(0) as f64;
        PAD + i * (W - 2.0 * PAD) / (xs.len().max(2) - 1) as f64
    };
    let py = |y: f64| H - PAD - (y - ymin) / yspan * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, py(0.0), W - PAD);
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    for &q in &xs {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{q}</text>"#, px(q), H - PAD + 15.0);
    }
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" text-anchor="end">{ymax:.1}%</text>"#, PAD - 5.0);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" text-anchor="end">{ymin:.1}%</text>"#, H - PAD + 12.0);
    for (i, (name, pts)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(q, y)| format!("{:.1},{:.1}", px(q), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{name}</text>"#, W - PAD - 100.0, PAD + 14.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}
