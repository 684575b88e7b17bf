//! Properties of labeling, the category models and trace serialization.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use tierlab::cost::CostRates;
use tierlab::gbt::GbtParams;
use tierlab::labeling::{assign_category, build_training_set, fit_boundaries, FeatureVector, TrainingExample, NUM_NUMERIC};
use tierlab::model::{train_gbt, CategoryModel, HashCategoryModel, TrainedGbt};
use tierlab::trace::{parse_trace, trace_to_string, LoadOptions};
use tierlab::workload::{default_mix, generate};

use common::{job_specs, trace_from};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn label_buckets_differ_by_at_most_one(
        raw in prop::collection::btree_set(0u64..1_000_000_000, 1000..1400),
        n in 2usize..=15,
    ) {
        let densities: Vec<f64> = raw.iter().map(|&v| v as f64 * 1e-7).collect();
        let b = fit_boundaries(&densities, n).unwrap();
        prop_assert_eq!(b.thresholds.len(), n - 2);
        let mut counts = vec![0usize; n];
        for &d in &densities {
            counts[assign_category(1.0, d, &b)] += 1;
        }
        prop_assert_eq!(counts[0], 0);
        let lo = counts[1..].iter().min().unwrap();
        let hi = counts[1..].iter().max().unwrap();
        prop_assert!(hi - lo <= 1, "{counts:?}");
    }

    #[test]
    fn category_zero_iff_negative_savings(m in -1e3..1e3f64, density in 0.0..10.0f64, n in 2usize..=15) {
        let densities: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let b = fit_boundaries(&densities, n).unwrap();
        let c = assign_category(m, density, &b);
        prop_assert!(c < n);
        prop_assert_eq!(c == 0, m < 0.0);
    }

    #[test]
    fn hash_model_predicts_nonzero_categories(pipeline in "[a-z0-9/_-]{0,24}", n in 2usize..40) {
        let model = HashCategoryModel::new(n).unwrap();
        let f = FeatureVector { job_id: "x".into(), pipeline_id: pipeline, numeric: vec![0.0; NUM_NUMERIC], tokens: vec![] };
        let c = model.predict(&f).unwrap();
        prop_assert!(c >= 1 && c < n);
        prop_assert_eq!(c, model.predict(&f).unwrap());
    }

    #[test]
    fn trace_text_round_trip(specs in job_specs(30)) {
        let t = trace_from(&specs);
        let text = trace_to_string(&t);
        let back = parse_trace(&text, LoadOptions::default()).unwrap();
        prop_assert_eq!(back.jobs(), t.jobs());
        prop_assert_eq!(back.epoch(), t.epoch());
        prop_assert_eq!(trace_to_string(&back), text);
    }
}

fn synthetic(rows: usize, n: usize, seed: u64) -> Vec<TrainingExample> {
    // two informative numeric columns plus one token per class; labels are noisy
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..rows)
        .map(|i| {
            let x = next();
            let y = next();
            let noise = next();
            let c = if noise < 0.2 { (i * 7) % n } else { ((x * n as f64) as usize).min(n - 1) };
            let mut numeric = vec![0.0; NUM_NUMERIC];
            numeric[0] = x;
            numeric[1] = y;
            let id = format!("e{i:05}");
            TrainingExample {
                job_id: id.clone(),
                features: FeatureVector {
                    job_id: id,
                    pipeline_id: format!("p{}", i % 5),
                    numeric,
                    tokens: vec![format!("t{}", (i + c) % 3)],
                },
                m: c as f64 - 0.5,
                n: x,
                category: c,
            }
        })
        .collect()
}

fn small_params(seed: u64) -> GbtParams {
    GbtParams { max_trees: 25, max_depth: 3, seed, ..GbtParams::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gbt_training_loss_never_rises(rows in 60usize..300, n in 2usize..6, seed in any::<u64>()) {
        let ex = synthetic(rows, n, seed);
        let m = train_gbt(&ex, n, &small_params(seed)).unwrap();
        for e in m.classes.iter().flatten() {
            for w in e.train_loss.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", e.train_loss);
            }
        }
        prop_assert!(m.tree_counts().iter().all(|&k| k <= 25));
        prop_assert!(m.max_depth() <= 3);
    }

    #[test]
    fn gbt_predictions_are_valid_categories(rows in 60usize..300, n in 2usize..6, seed in any::<u64>()) {
        let ex = synthetic(rows, n, seed);
        let m = train_gbt(&ex, n, &small_params(seed)).unwrap();
        for e in &ex {
            let c = m.predict(&e.features).unwrap();
            prop_assert!(c < n);
            let p = m.predict_proba(&e.features).unwrap();
            prop_assert_eq!(p.len(), n);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn gbt_json_round_trip_preserves_predictions(rows in 60usize..200, n in 2usize..5, seed in any::<u64>()) {
        let ex = synthetic(rows, n, seed);
        let m = train_gbt(&ex, n, &small_params(seed)).unwrap();
        let back = TrainedGbt::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), m.to_json());
        for e in &ex {
            prop_assert_eq!(back.predict_proba(&e.features).unwrap(), m.predict_proba(&e.features).unwrap());
        }
    }

    #[test]
    fn gbt_training_is_deterministic(rows in 60usize..200, n in 2usize..5, seed in any::<u64>()) {
        let ex = synthetic(rows, n, seed);
        let a = train_gbt(&ex, n, &small_params(seed)).unwrap();
        let b = train_gbt(&ex, n, &small_params(seed)).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }
}

#[test]
fn default_mix_labels_are_balanced() {
    let trace = generate(&default_mix()).unwrap();
    let (ex, b) = build_training_set(&trace, &CostRates::default(), 15).unwrap();
    let distinct: BTreeSet<u64> = ex.iter().filter(|e| e.m >= 0.0).map(|e| e.n.to_bits()).collect();
    assert!(distinct.len() >= 1000, "only {} distinct densities", distinct.len());
    let mut counts = vec![0usize; 15];
    for e in &ex {
        assert_eq!(e.category == 0, e.m < 0.0, "{}", e.job_id);
        counts[e.category] += 1;
    }
    let nonneg = &counts[1..];
    assert!(nonneg.iter().max().unwrap() - nonneg.iter().min().unwrap() <= 1, "{counts:?}");
    assert_eq!(b.thresholds.len(), 13);
}

#[test]
fn generator_is_seeded() {
    let mut cfg = default_mix();
    cfg.duration = 6.0 * 3600.0;
    let a = trace_to_string(&generate(&cfg).unwrap());
    assert_eq!(a, trace_to_string(&generate(&cfg).unwrap()));
    cfg.seed += 1;
    assert_ne!(a, trace_to_string(&generate(&cfg).unwrap()));
}
