//! Feature extraction and importance-category labels.
//!
//! A job's label is 0 when SSD placement loses money; otherwise it is the
//! I/O-density quantile bucket (1 = lowest density, N-1 = highest) among the
//! non-negative-savings jobs of the training set. Bucket intervals are
//! half-open `(low, high]`, so a value equal to a cut point falls in the lower
//! bucket.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostError, CostRates, JobCosts};
use crate::trace::{Job, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    /// Trailing same-pipeline history.
    Historical,
    /// Identity and execution-metadata tokens.
    Metadata,
    /// Scheduler-allocated resources.
    Resources,
    /// Weekday and hour of the arrival.
    Timestamp,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Historical,
        FeatureGroup::Metadata,
        FeatureGroup::Resources,
        FeatureGroup::Timestamp,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            FeatureGroup::Historical => "A",
            FeatureGroup::Metadata => "B",
            FeatureGroup::Resources => "C",
            FeatureGroup::Timestamp => "T",
        }
    }
}

/// Numeric feature names with their group, in column order.
pub const NUMERIC_FEATURES: &[(&str, FeatureGroup)] = &[
    ("num_workers", FeatureGroup::Resources),
    ("num_worker_threads", FeatureGroup::Resources),
    ("num_buckets", FeatureGroup::Resources),
    ("initial_num_buckets", FeatureGroup::Resources),
    ("num_shards", FeatureGroup::Resources),
    ("records_written", FeatureGroup::Resources),
    ("weekday", FeatureGroup::Timestamp),
    ("hour_of_day", FeatureGroup::Timestamp),
    ("avg_tcio", FeatureGroup::Historical),
    ("avg_size", FeatureGroup::Historical),
    ("avg_lifetime", FeatureGroup::Historical),
    ("avg_io_density", FeatureGroup::Historical),
    ("history_missing", FeatureGroup::Historical),
    ("history_count", FeatureGroup::Historical),
];

pub const NUM_NUMERIC: usize = NUMERIC_FEATURES.len();

/// Model inputs for one job, available before it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub job_id: String,
    pub pipeline_id: String,
    pub numeric: Vec<f64>,
    /// Sorted, de-duplicated bag of tokens.
    pub tokens: Vec<String>,
}

/// Splits on non-alphanumeric characters and drops empty pieces.
pub fn split_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|s| !s.is_empty())
}

fn job_tokens(job: &Job) -> Vec<String> {
    let mut tokens: Vec<String> = [&job.pipeline_id, &job.user_id, &job.step_name]
        .into_iter()
        .chain(job.metadata_tokens.iter())
        .flat_map(|s| split_tokens(s))
        .map(str::to_string)
        .collect();
    tokens.sort();
    tokens.dedup();
    tokens
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("need at least {needed} non-negative-savings examples for N = {n}, found {found}")]
    TooFewExamples { needed: usize, n: usize, found: usize },
    #[error("category count must be at least 2, got {0}")]
    BadCategoryCount(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("boundaries file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Total disk-reaching I/O over the lifetime (TCIO-seconds) per byte of
/// peak footprint.
pub fn io_density(job: &Job, rates: &CostRates) -> Result<f64, CostError> {
    if job.peak_bytes == 0 {
        return Err(CostError::ZeroFootprint(job.job_id.clone()));
    }
    let costs = JobCosts::compute(job, rates)?;
    Ok(costs.tcio_hdd / job.peak_bytes as f64)
}

#[derive(Debug, Clone, Copy, Default)]
struct HistoryEntry {
    end: f64,
    tcio: f64,
    size: f64,
    lifetime: f64,
    density: f64,
}

/// Per-pipeline completed-job history for trailing-average features.
///
/// A job only ever sees pipeline jobs that ended strictly before it arrived.
#[derive(Debug, Clone, Default)]
pub struct HistoryIndex {
    /// Entries sorted by end time with running sums; `prefix[k]` holds sums
    /// over the first `k` entries.
    by_pipeline: HashMap<String, (Vec<f64>, Vec<HistoryEntry>)>,
}

impl HistoryIndex {
    pub fn build(trace: &Trace, rates: &CostRates) -> Result<Self, CostError> {
        let mut groups: HashMap<String, Vec<HistoryEntry>> = HashMap::new();
        for job in trace.jobs() {
            let costs = JobCosts::compute(job, rates)?;
            groups.entry(job.pipeline_id.clone()).or_default().push(HistoryEntry {
                end: job.end_time,
                tcio: costs.tcio_hdd,
                size: job.peak_bytes as f64,
                lifetime: job.duration(),
                density: costs.tcio_hdd / job.peak_bytes as f64,
            });
        }
        let by_pipeline = groups
            .into_iter()
            .map(|(k, mut entries)| {
                entries.sort_by(|a, b| a.end.total_cmp(&b.end));
                let ends = entries.iter().map(|e| e.end).collect();
                let mut prefix = Vec::with_capacity(entries.len() + 1);
                let mut acc = HistoryEntry::default();
                prefix.push(acc);
                for e in &entries {
                    acc.tcio += e.tcio;
                    acc.size += e.size;
                    acc.lifetime += e.lifetime;
                    acc.density += e.density;
                    prefix.push(acc);
                }
                (k, (ends, prefix))
            })
            .collect();
        Ok(HistoryIndex { by_pipeline })
    }

    /// `[avg_tcio, avg_size, avg_lifetime, avg_io_density, missing, count]`.
    fn aggregates(&self, pipeline: &str, arrival: f64) -> [f64; 6] {
        let Some((ends, prefix)) = self.by_pipeline.get(pipeline) else {
            return [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        };
        let count = ends.partition_point(|&e| e < arrival);
        if count == 0 {
            return [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        }
        let s = &prefix[count];
        let n = count as f64;
        [s.tcio / n, s.size / n, s.lifetime / n, s.density / n, 0.0, n]
    }

    pub fn features(&self, job: &Job) -> FeatureVector {
        let r = &job.resources;
        let mut numeric = vec![
            r.num_workers as f64,
            r.num_worker_threads as f64,
            r.num_buckets as f64,
            r.initial_num_buckets as f64,
            r.num_shards as f64,
            r.records_written as f64,
            f64::from(r.weekday),
            f64::from(r.hour_of_day),
        ];
        numeric.extend(self.aggregates(&job.pipeline_id, job.arrival_time));
        debug_assert_eq!(numeric.len(), NUM_NUMERIC);
        FeatureVector {
            job_id: job.job_id.clone(),
            pipeline_id: job.pipeline_id.clone(),
            numeric,
            tokens: job_tokens(job),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBoundaries {
    pub n_categories: usize,
    /// Ascending cut points between the N-1 non-negative buckets.
    pub thresholds: Vec<f64>,
    pub training_size: usize,
}

impl CategoryBoundaries {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LabelError> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LabelError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Fits N-2 cut points that split `densities` into N-1 equal-count buckets.
///
/// Cuts sit midway between neighbouring sorted values; when the neighbours
/// are equal the cut is that value, so ties land in the lower bucket and
/// bucket counts may become unequal.
pub fn fit_boundaries(densities: &[f64], n: usize) -> Result<CategoryBoundaries, LabelError> {
    if n < 2 {
        return Err(LabelError::BadCategoryCount(n));
    }
    if densities.len() < n - 1 {
        return Err(LabelError::TooFewExamples {
            needed: n - 1,
            n,
            found: densities.len(),
        });
    }
    let mut sorted = densities.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = sorted.len();
    let buckets = n - 1;
    let thresholds = (1..buckets)
        .map(|k| {
            let idx = ((k * d) as f64 / buckets as f64).round() as usize;
            let (lo, hi) = (sorted[idx - 1], sorted[idx]);
            if lo < hi {
                lo + (hi - lo) / 2.0
            } else {
                lo
            }
        })
        .collect();
    Ok(CategoryBoundaries {
        n_categories: n,
        thresholds,
        training_size: d,
    })
}

pub fn assign_category(savings: f64, density: f64, b: &CategoryBoundaries) -> usize {
    if savings < 0.0 {
        0
    } else {
        1 + b.thresholds.iter().filter(|&&t| t < density).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub job_id: String,
    pub features: FeatureVector,
    /// TCO savings in dollars (HDD minus SSD).
    pub m: f64,
    /// I/O density.
    pub n: f64,
    pub category: usize,
}

/// Features and cost-derived targets for every job of `jobs`, with history
/// drawn from `history`. Categories are left at 0 until [`label`] runs.
pub fn unlabeled_examples(
    jobs: &Trace,
    history: &HistoryIndex,
    rates: &CostRates,
) -> Result<Vec<TrainingExample>, LabelError> {
    jobs.jobs()
        .iter()
        .map(|job| {
            let costs = JobCosts::compute(job, rates)?;
            Ok(TrainingExample {
                job_id: job.job_id.clone(),
                features: history.features(job),
                m: costs.savings(),
                n: costs.tcio_hdd / job.peak_bytes as f64,
                category: 0,
            })
        })
        .collect()
}

pub fn fit_on_examples(
    examples: &[TrainingExample],
    n: usize,
) -> Result<CategoryBoundaries, LabelError> {
    let densities: Vec<f64> = examples.iter().filter(|e| e.m >= 0.0).map(|e| e.n).collect();
    fit_boundaries(&densities, n)
}

pub fn label(examples: &mut [TrainingExample], b: &CategoryBoundaries) {
    for e in examples {
        e.category = assign_category(e.m, e.n, b);
    }
}

/// Labeled examples for every job of `trace`, using the trace itself as history.
pub fn build_training_set(
    trace: &Trace,
    rates: &CostRates,
    n: usize,
) -> Result<(Vec<TrainingExample>, CategoryBoundaries), LabelError> {
    let history = HistoryIndex::build(trace, rates)?;
    let mut examples = unlabeled_examples(trace, &history, rates)?;
    let boundaries = fit_on_examples(&examples, n)?;
    label(&mut examples, &boundaries);
    Ok((examples, boundaries))
}

/// Columnar CSV: identity, targets, numeric features, space-joined tokens.
pub fn write_training_csv<W: Write>(
    examples: &[TrainingExample],
    out: W,
) -> Result<(), LabelError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["job_id", "pipeline_id", "m", "n", "category"];
    header.extend(NUMERIC_FEATURES.iter().map(|(name, _)| *name));
    header.push("tokens");
    w.write_record(&header)?;
    for e in examples {
        let mut row = vec![
            e.job_id.clone(),
            e.features.pipeline_id.clone(),
            e.m.to_string(),
            e.n.to_string(),
            e.category.to_string(),
        ];
        row.extend(e.features.numeric.iter().map(|v| v.to_string()));
        row.push(e.features.tokens.join(" "));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_training_csv<R: std::io::Read>(input: R) -> Result<Vec<TrainingExample>, LabelError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    let bad = |msg: &str| {
        LabelError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()))
    };
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 6 + NUM_NUMERIC {
            return Err(bad("wrong column count"));
        }
        let num = |i: usize| -> Result<f64, LabelError> {
            rec[i].parse().map_err(|_| bad(&format!("bad number {:?}", &rec[i])))
        };
        let numeric = (0..NUM_NUMERIC).map(|i| num(5 + i)).collect::<Result<_, _>>()?;
        out.push(TrainingExample {
            job_id: rec[0].to_string(),
            m: num(2)?,
            n: num(3)?,
            category: rec[4].parse().map_err(|_| bad("bad category"))?,
            features: FeatureVector {
                job_id: rec[0].to_string(),
                pipeline_id: rec[1].to_string(),
                numeric,
                tokens: rec[5 + NUM_NUMERIC]
                    .split(' ')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            },
        });
    }
    Ok(out)
}
