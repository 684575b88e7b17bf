//! Category predictors and the lifetime regressor.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbt::{self, BinnedData, BoostTask, Ensemble, FeatureSchema, GbtParams, Loss};
use crate::labeling::{FeatureVector, TrainingExample, NUMERIC_FEATURES};
use crate::workload::fnv1a;

pub const GBT_FORMAT: &str = "tierlab-gbt";
pub const LIFETIME_FORMAT: &str = "tierlab-lifetime";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature vector has {got} numeric features, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("no label for job {0}")]
    UnknownJob(String),
    #[error("training set is empty")]
    Empty,
    #[error("need at least 2 training examples, got {0}")]
    TooFew(usize),
    #[error("category {category} outside [0, {n})")]
    BadLabel { category: usize, n: usize },
    #[error("category {0} has no examples")]
    CategoryAbsent(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("not a {expected} model file (found `{found}` v{version})")]
    Format {
        expected: &'static str,
        found: String,
        version: u32,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A predictor from pre-execution features to a category in `[0, N)`.
pub trait CategoryModel: Send + Sync {
    fn n_categories(&self) -> usize;
    fn predict(&self, features: &FeatureVector) -> Result<usize, ModelError>;
    fn name(&self) -> &str;
}

/// Clairvoyant lookup of ground-truth labels by job id.
#[derive(Debug, Clone)]
pub struct TrueCategoryModel {
    n: usize,
    labels: HashMap<String, usize>,
}

impl TrueCategoryModel {
    pub fn new(n: usize, labels: HashMap<String, usize>) -> Self {
        TrueCategoryModel { n, labels }
    }

    pub fn from_examples(examples: &[TrainingExample], n: usize) -> Self {
        Self::new(n, examples.iter().map(|e| (e.job_id.clone(), e.category)).collect())
    }
}

impl CategoryModel for TrueCategoryModel {
    fn n_categories(&self) -> usize {
        self.n
    }

    fn predict(&self, f: &FeatureVector) -> Result<usize, ModelError> {
        self.labels
            .get(&f.job_id)
            .copied()
            .ok_or_else(|| ModelError::UnknownJob(f.job_id.clone()))
    }

    fn name(&self) -> &str {
        "true"
    }
}

/// `1 + fnv1a(pipeline_id) mod (N − 1)`: stable per pipeline, never 0.
#[derive(Debug, Clone)]
pub struct HashCategoryModel {
    n: usize,
}

impl HashCategoryModel {
    pub fn new(n: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::InvalidParams(format!("N = {n}")));
        }
        Ok(HashCategoryModel { n })
    }
}

impl CategoryModel for HashCategoryModel {
    fn n_categories(&self) -> usize {
        self.n
    }

    fn predict(&self, f: &FeatureVector) -> Result<usize, ModelError> {
        Ok(1 + (fnv1a(f.pipeline_id.as_bytes()) % (self.n as u64 - 1)) as usize)
    }

    fn name(&self) -> &str {
        "hash"
    }
}

fn check_params(p: &GbtParams) -> Result<(), ModelError> {
    let ok = p.max_trees >= 1
        && p.max_depth >= 1
        && p.histogram_bins >= 2
        && p.learning_rate > 0.0
        && (0.0..1.0).contains(&p.validation_fraction)
        && p.l2 >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParams(format!("{p:?}")))
    }
}

fn numeric_names() -> Vec<&'static str> {
    NUMERIC_FEATURES.iter().map(|(n, _)| *n).collect()
}

/// Runs `f(i)` for `i in 0..n` on scoped worker threads, results in index order.
pub fn parallel_map<T: Send>(workers: usize, n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<(usize, T)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        local.push((i, f(i)));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, v)| v).collect()
}

/// One-vs-rest boosted ensembles with softmax-normalized scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedGbt {
    pub format: String,
    pub version: u32,
    pub n_categories: usize,
    pub params: GbtParams,
    pub schema: FeatureSchema,
    /// `None` for categories without training examples.
    pub classes: Vec<Option<Ensemble>>,
    pub train_rows: usize,
    pub validation_rows: usize,
    /// Top-1 accuracy on the validation split (training split when empty).
    pub accuracy: f64,
}

pub fn train_gbt(
    examples: &[TrainingExample],
    n_categories: usize,
    params: &GbtParams,
) -> Result<TrainedGbt, ModelError> {
    check_params(params)?;
    if examples.is_empty() {
        return Err(ModelError::Empty);
    }
    if examples.len() < 2 {
        return Err(ModelError::TooFew(examples.len()));
    }
    if n_categories < 2 {
        return Err(ModelError::InvalidParams(format!("N = {n_categories}")));
    }
    for e in examples {
        if e.category >= n_categories {
            return Err(ModelError::BadLabel {
                category: e.category,
                n: n_categories,
            });
        }
        if e.features.numeric.len() != NUMERIC_FEATURES.len() {
            return Err(ModelError::SchemaMismatch {
                expected: NUMERIC_FEATURES.len(),
                got: e.features.numeric.len(),
            });
        }
    }
    let rows: Vec<&FeatureVector> = examples.iter().map(|e| &e.features).collect();
    let (train_rows, valid_rows) = gbt::split_rows(rows.len(), params.validation_fraction, params.seed);
    let train_refs: Vec<&FeatureVector> = train_rows.iter().map(|&r| rows[r as usize]).collect();
    let schema = FeatureSchema::fit(&numeric_names(), &train_refs, params);
    let data = BinnedData::new(&schema, &rows);
    let mask = vec![true; schema.n_features()];
    let mut present = vec![false; n_categories];
    for &r in &train_rows {
        present[examples[r as usize].category] = true;
    }

    let cores = std::thread::available_parallelism().map_or(1, |p| p.get());
    let classes = parallel_map(cores, n_categories, |c| {
        if !present[c] {
            return None;
        }
        let targets: Vec<f64> = examples
            .iter()
            .map(|e| if e.category == c { 1.0 } else { 0.0 })
            .collect();
        Some(gbt::boost(
            &BoostTask {
                data: &data,
                schema: &schema,
                targets: &targets,
                train_rows: &train_rows,
                valid_rows: &valid_rows,
                mask: &mask,
                loss: Loss::Logistic,
            },
            params,
        ))
    });

    let eval_rows = if valid_rows.is_empty() { &train_rows } else { &valid_rows };
    let correct = eval_rows
        .iter()
        .filter(|&&r| {
            let scores: Vec<f64> = classes
                .iter()
                .map(|c| c.as_ref().map_or(f64::NEG_INFINITY, |e| e.predict_binned(&data, r as usize)))
                .collect();
            argmax(&scores) == examples[r as usize].category
        })
        .count();
    Ok(TrainedGbt {
        format: GBT_FORMAT.into(),
        version: FORMAT_VERSION,
        n_categories,
        params: params.clone(),
        schema,
        classes,
        train_rows: train_rows.len(),
        validation_rows: valid_rows.len(),
        accuracy: correct as f64 / eval_rows.len() as f64,
    })
}

/// Index of the largest score; the lowest index wins ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl TrainedGbt {
    fn raw_scores(&self, f: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        let row = self.schema.encode(f).ok_or(ModelError::SchemaMismatch {
            expected: self.schema.n_numeric(),
            got: f.numeric.len(),
        })?;
        Ok(self
            .classes
            .iter()
            .map(|c| c.as_ref().map_or(f64::NEG_INFINITY, |e| e.predict(&row)))
            .collect())
    }

    pub fn predict_proba(&self, f: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        let scores = self.raw_scores(f)?;
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        Ok(exp.into_iter().map(|e| e / total).collect())
    }

    pub fn tree_counts(&self) -> Vec<usize> {
        self.classes
            .iter()
            .map(|c| c.as_ref().map_or(0, |e| e.trees.len()))
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.classes
            .iter()
            .flatten()
            .flat_map(|e| e.trees.iter().map(|t| t.depth()))
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: TrainedGbt = serde_json::from_str(text)?;
        if m.format != GBT_FORMAT || m.version != FORMAT_VERSION {
            return Err(ModelError::Format {
                expected: GBT_FORMAT,
                found: m.format,
                version: m.version,
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl CategoryModel for TrainedGbt {
    fn n_categories(&self) -> usize {
        self.n_categories
    }

    fn predict(&self, f: &FeatureVector) -> Result<usize, ModelError> {
        Ok(argmax(&self.raw_scores(f)?))
    }

    fn name(&self) -> &str {
        "gbt"
    }
}

/// Boosted regression on log-lifetime plus per-pipeline residual spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeRegressor {
    pub format: String,
    pub version: u32,
    pub schema: FeatureSchema,
    pub ensemble: Ensemble,
    /// Residual standard deviation in seconds per pipeline with ≥ 2 samples.
    pub pipeline_sigma: BTreeMap<String, f64>,
    pub global_sigma: f64,
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

pub fn train_lifetime_regressor(
    train: &[(FeatureVector, f64)],
    params: &GbtParams,
) -> Result<LifetimeRegressor, ModelError> {
    check_params(params)?;
    if train.is_empty() {
        return Err(ModelError::Empty);
    }
    if let Some((_, l)) = train.iter().find(|(_, l)| !(*l > 0.0)) {
        return Err(ModelError::InvalidParams(format!("lifetime {l} must be positive")));
    }
    let rows: Vec<&FeatureVector> = train.iter().map(|(f, _)| f).collect();
    let (train_rows, valid_rows) = gbt::split_rows(rows.len(), params.validation_fraction, params.seed);
    let train_refs: Vec<&FeatureVector> = train_rows.iter().map(|&r| rows[r as usize]).collect();
    let schema = FeatureSchema::fit(&numeric_names(), &train_refs, params);
    let data = BinnedData::new(&schema, &rows);
    let mask = vec![true; schema.n_features()];
    let targets: Vec<f64> = train.iter().map(|(_, l)| l.ln()).collect();
    let ensemble = gbt::boost(
        &BoostTask {
            data: &data,
            schema: &schema,
            targets: &targets,
            train_rows: &train_rows,
            valid_rows: &valid_rows,
            mask: &mask,
            loss: Loss::Squared,
        },
        params,
    );
    let mut by_pipeline: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::with_capacity(train.len());
    for (r, (f, l)) in train.iter().enumerate() {
        let residual = l - ensemble.predict_binned(&data, r).exp();
        all.push(residual);
        by_pipeline.entry(f.pipeline_id.as_str()).or_default().push(residual);
    }
    let pipeline_sigma = by_pipeline
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(k, v)| (k.to_string(), std_dev(&v)))
        .collect();
    Ok(LifetimeRegressor {
        format: LIFETIME_FORMAT.into(),
        version: FORMAT_VERSION,
        schema,
        ensemble,
        pipeline_sigma,
        global_sigma: std_dev(&all),
    })
}

impl LifetimeRegressor {
    /// `(μ, σ)` in seconds.
    pub fn predict(&self, f: &FeatureVector) -> Result<(f64, f64), ModelError> {
        let row = self.schema.encode(f).ok_or(ModelError::SchemaMismatch {
            expected: self.schema.n_numeric(),
            got: f.numeric.len(),
        })?;
        let mu = self.ensemble.predict(&row).exp();
        let sigma = self
            .pipeline_sigma
            .get(&f.pipeline_id)
            .copied()
            .unwrap_or(self.global_sigma);
        Ok((mu, sigma))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: LifetimeRegressor = serde_json::from_str(text)?;
        if m.format != LIFETIME_FORMAT || m.version != FORMAT_VERSION {
            return Err(ModelError::Format {
                expected: LIFETIME_FORMAT,
                found: m.format,
                version: m.version,
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
