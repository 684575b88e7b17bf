//! Feature-group importance by AUC drop.
//!
//! For every category a one-vs-rest classifier is trained on all features and
//! once more with each group removed. A group's score is the holdout AUC lost
//! when it is excluded, clamped at zero and normalized per category.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gbt::{self, BinnedData, BoostTask, FeatureSchema, GbtParams, Loss};
use crate::labeling::{FeatureGroup, FeatureVector, TrainingExample, NUMERIC_FEATURES};
use crate::model::{parallel_map, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceParams {
    pub holdout_fraction: f64,
    pub gbt: GbtParams,
    pub workers: usize,
}

impl Default for ImportanceParams {
    fn default() -> Self {
        ImportanceParams {
            holdout_fraction: 0.25,
            gbt: GbtParams::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryImportance {
    pub category: usize,
    pub base_auc: f64,
    /// AUC drop per group, in `FeatureGroup::ALL` order, before normalization.
    pub drops: [f64; 4],
    /// Drops normalized to sum to 1; uniform when no group matters.
    pub scores: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupImportance {
    pub n_categories: usize,
    pub rows: Vec<CategoryImportance>,
}

impl GroupImportance {
    pub fn score(&self, category: usize, group: FeatureGroup) -> Option<f64> {
        let g = FeatureGroup::ALL.iter().position(|&x| x == group)?;
        self.rows
            .iter()
            .find(|r| r.category == category)
            .map(|r| r.scores[g])
    }

    /// Matrix CSV: one row per category, one column per group.
    pub fn write_csv(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        let mut header = vec!["category".to_string(), "base_auc".to_string()];
        header.extend(FeatureGroup::ALL.iter().map(|g| g.code().to_string()));
        w.write_record(&header).map_err(csv_io)?;
        for r in &self.rows {
            let mut rec = vec![r.category.to_string(), format!("{}", r.base_auc)];
            rec.extend(r.scores.iter().map(|s| format!("{s}")));
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> ModelError {
    ModelError::Io(std::io::Error::other(e))
}

/// Group of each schema feature: numeric columns by table, tokens are metadata.
fn feature_groups(schema: &FeatureSchema) -> Vec<FeatureGroup> {
    let mut g: Vec<FeatureGroup> = NUMERIC_FEATURES.iter().map(|&(_, g)| g).collect();
    g.resize(schema.n_features(), FeatureGroup::Metadata);
    g
}

fn normalize(drops: &[f64; 4]) -> [f64; 4] {
    let total: f64 = drops.iter().sum();
    if total <= 0.0 {
        return [0.25; 4];
    }
    let mut s = drops.map(|d| d / total);
    // push the rounding residue onto the largest entry so the row sums to 1
    let resid = 1.0 - s.iter().sum::<f64>();
    let top = (0..4).fold(0, |b, i| if s[i] > s[b] { i } else { b });
    s[top] += resid;
    s
}

pub fn feature_group_importance(
    examples: &[TrainingExample],
    n_categories: usize,
    params: &ImportanceParams,
) -> Result<GroupImportance, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::Empty);
    }
    if !(params.holdout_fraction > 0.0 && params.holdout_fraction < 1.0) {
        return Err(ModelError::InvalidParams(format!(
            "holdout_fraction = {}",
            params.holdout_fraction
        )));
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

    let (rest, holdout) = gbt::split_rows(examples.len(), params.holdout_fraction, params.gbt.seed);
    if holdout.is_empty() {
        return Err(ModelError::TooFew(examples.len()));
    }
    // early stopping uses a slice of the non-holdout rows, never the holdout
    let (fit_idx, valid_idx) = gbt::split_rows(rest.len(), params.gbt.validation_fraction, params.gbt.seed ^ 1);
    let train_rows: Vec<u32> = fit_idx.iter().map(|&i| rest[i as usize]).collect();
    let valid_rows: Vec<u32> = valid_idx.iter().map(|&i| rest[i as usize]).collect();

    for c in 0..n_categories {
        let in_train = train_rows.iter().any(|&r| examples[r as usize].category == c);
        let in_hold = holdout.iter().any(|&r| examples[r as usize].category == c);
        let all_same = holdout.iter().all(|&r| examples[r as usize].category == c);
        if !in_train || !in_hold || all_same {
            return Err(ModelError::CategoryAbsent(c));
        }
    }

    let rows: Vec<&FeatureVector> = examples.iter().map(|e| &e.features).collect();
    let fit_refs: Vec<&FeatureVector> = train_rows.iter().map(|&r| rows[r as usize]).collect();
    let names: Vec<&str> = NUMERIC_FEATURES.iter().map(|(n, _)| *n).collect();
    let schema = FeatureSchema::fit(&names, &fit_refs, &params.gbt);
    let data = BinnedData::new(&schema, &rows);
    let groups = feature_groups(&schema);

    let masks: Vec<Vec<bool>> = std::iter::once(vec![true; groups.len()])
        .chain(
            FeatureGroup::ALL
                .iter()
                .map(|&drop| groups.iter().map(|&g| g != drop).collect()),
        )
        .collect();

    let hold_labels: Vec<Vec<bool>> = (0..n_categories)
        .map(|c| holdout.iter().map(|&r| examples[r as usize].category == c).collect())
        .collect();

    let tasks = n_categories * masks.len();
    let aucs = parallel_map(params.workers.max(1), tasks, |t| {
        let (c, m) = (t / masks.len(), t % masks.len());
        let targets: Vec<f64> = examples
            .iter()
            .map(|e| if e.category == c { 1.0 } else { 0.0 })
            .collect();
        let ens = gbt::boost(
            &BoostTask {
                data: &data,
                schema: &schema,
                targets: &targets,
                train_rows: &train_rows,
                valid_rows: &valid_rows,
                mask: &masks[m],
                loss: Loss::Logistic,
            },
            &params.gbt,
        );
        let scores: Vec<f64> = holdout
            .iter()
            .map(|&r| ens.predict_binned(&data, r as usize))
            .collect();
        gbt::roc_auc(&scores, &hold_labels[c]).unwrap_or(0.5)
    });

    let rows = (0..n_categories)
        .map(|c| {
            let a = &aucs[c * masks.len()..(c + 1) * masks.len()];
            let base = a[0];
            let drops = [0, 1, 2, 3].map(|g| (base - a[g + 1]).max(0.0));
            CategoryImportance {
                category: c,
                base_auc: base,
                drops,
                scores: normalize(&drops),
            }
        })
        .collect();
    Ok(GroupImportance { n_categories, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ex(i: usize, numeric: Vec<f64>, tokens: Vec<String>, category: usize) -> TrainingExample {
        TrainingExample {
            job_id: format!("j{i}"),
            features: FeatureVector {
                job_id: format!("j{i}"),
                pipeline_id: "p".into(),
                numeric,
                tokens,
            },
            m: 1.0,
            n: 1.0,
            category,
        }
    }

    fn quick() -> ImportanceParams {
        ImportanceParams {
            gbt: GbtParams {
                max_trees: 40,
                max_depth: 3,
                learning_rate: 0.3,
                ..GbtParams::default()
            },
            ..ImportanceParams::default()
        }
    }

    #[test]
    fn token_group_dominates_when_it_determines_the_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let examples: Vec<_> = (0..600)
            .map(|i| {
                let c = i % 3;
                let numeric = (0..NUMERIC_FEATURES.len()).map(|_| rng.random::<f64>()).collect();
                ex(i, numeric, vec![format!("tag{c}"), "common".into()], c)
            })
            .collect();
        let imp = feature_group_importance(&examples, 3, &quick()).unwrap();
        for c in 0..3 {
            let b = imp.score(c, FeatureGroup::Metadata).unwrap();
            for g in FeatureGroup::ALL {
                assert!(b >= imp.score(c, g).unwrap());
            }
            assert!(b > 0.9, "category {c}: {b}");
        }
    }

    #[test]
    fn redundant_copy_scores_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let examples: Vec<_> = (0..600)
            .map(|i| {
                let c = i % 2;
                let signal = c as f64 + rng.random::<f64>() * 0.5;
                let mut numeric: Vec<f64> = (0..NUMERIC_FEATURES.len()).map(|_| rng.random::<f64>()).collect();
                numeric[0] = signal; // resources
                numeric[8] = signal; // historical copy
                ex(i, numeric, vec![], c)
            })
            .collect();
        let imp = feature_group_importance(&examples, 2, &quick()).unwrap();
        for r in &imp.rows {
            assert!(r.drops.iter().all(|&d| d < 0.01), "{:?}", r.drops);
        }
    }

    #[test]
    fn scores_sum_to_one() {
        assert!((normalize(&[0.1, 0.2, 0.0, 0.3]).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(normalize(&[0.0; 4]), [0.25; 4]);
    }

    #[test]
    fn absent_category_is_an_error() {
        let examples: Vec<_> = (0..40)
            .map(|i| ex(i, vec![i as f64; NUMERIC_FEATURES.len()], vec![], i % 2))
            .collect();
        assert!(matches!(
            feature_group_importance(&examples, 3, &quick()),
            Err(ModelError::CategoryAbsent(2))
        ));
    }
}
