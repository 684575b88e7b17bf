//! Histogram-based gradient-boosted regression trees.
//!
//! Numeric features are bucketed into at most `histogram_bins` quantile bins
//! fitted on the training rows; token features are binary indicators over a
//! top-K vocabulary and are stored sparsely per row. Split search scans
//! features in index order and bins in ascending order and only replaces the
//! incumbent on a strictly larger gain, so ties resolve to the lowest feature
//! index and then the lowest threshold.
//!
//! Each boosting stage is line-searched (halving the step) so the training
//! loss never increases from one stage to the next.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::labeling::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub max_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub histogram_bins: usize,
    pub validation_fraction: f64,
    pub early_stop_rounds: usize,
    pub seed: u64,
    /// Vocabulary size for token indicator features.
    pub top_k_tokens: usize,
    pub l2: f64,
    pub min_samples_leaf: usize,
    pub min_child_hessian: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_trees: 300,
            max_depth: 6,
            learning_rate: 0.1,
            histogram_bins: 64,
            validation_fraction: 0.1,
            early_stop_rounds: 20,
            seed: 0,
            top_k_tokens: 256,
            l2: 1.0,
            min_samples_leaf: 3,
            min_child_hessian: 1e-6,
        }
    }
}

/// Column layout shared by training and prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub numeric_names: Vec<String>,
    pub vocab: Vec<String>,
    /// Ascending bin cut points per numeric feature.
    pub cuts: Vec<Vec<f64>>,
}

impl FeatureSchema {
    pub fn n_numeric(&self) -> usize {
        self.numeric_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.numeric_names.len() + self.vocab.len()
    }

    /// Fits the vocabulary (document frequency, ties lexicographic) and the
    /// numeric bin cuts on `rows`.
    pub fn fit(numeric_names: &[&str], rows: &[&FeatureVector], params: &GbtParams) -> Self {
        let mut df: HashMap<&str, usize> = HashMap::new();
        for r in rows {
            for t in &r.tokens {
                *df.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut vocab: Vec<(&str, usize)> = df.into_iter().collect();
        vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        vocab.truncate(params.top_k_tokens);
        let mut vocab: Vec<String> = vocab.into_iter().map(|(t, _)| t.to_string()).collect();
        vocab.sort();

        let cuts = (0..numeric_names.len())
            .map(|f| {
                let mut v: Vec<f64> = rows.iter().map(|r| r.numeric[f]).collect();
                v.sort_by(f64::total_cmp);
                quantile_cuts(&v, params.histogram_bins.clamp(2, MAX_BINS))
            })
            .collect();
        FeatureSchema {
            numeric_names: numeric_names.iter().map(|s| s.to_string()).collect(),
            vocab,
            cuts,
        }
    }

    pub fn encode(&self, f: &FeatureVector) -> Option<EncodedRow> {
        if f.numeric.len() != self.n_numeric() {
            return None;
        }
        let mut tokens: Vec<u32> = f
            .tokens
            .iter()
            .filter_map(|t| self.vocab.binary_search(t).ok())
            .map(|i| i as u32)
            .collect();
        tokens.sort_unstable();
        tokens.dedup();
        Some(EncodedRow {
            numeric: f.numeric.clone(),
            tokens,
        })
    }
}

/// Cut points between distinct values; at most `bins - 1` of them.
fn quantile_cuts(sorted: &[f64], bins: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = sorted.to_vec();
    distinct.dedup();
    let mid = |a: f64, b: f64| a + (b - a) / 2.0;
    if distinct.len() <= bins {
        return distinct.windows(2).map(|w| mid(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        let idx = (k * n) / bins;
        let (lo, hi) = (sorted[idx - 1], sorted[idx]);
        let c = if lo < hi {
            mid(lo, hi)
        } else {
            // Step to the next distinct value above `lo`.
            match distinct.binary_search_by(|x| x.total_cmp(&lo)) {
                Ok(i) if i + 1 < distinct.len() => mid(lo, distinct[i + 1]),
                _ => continue,
            }
        };
        if cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    }
    cuts
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRow {
    pub numeric: Vec<f64>,
    /// Sorted vocabulary indices present in the row.
    pub tokens: Vec<u32>,
}

/// Training matrix: column-major numeric bins plus per-row token lists.
#[derive(Debug, Clone)]
pub struct BinnedData {
    n_rows: usize,
    n_numeric: usize,
    n_tokens: usize,
    bins: Vec<Vec<u8>>,
    tokens: Vec<Vec<u32>>,
    n_bins: Vec<usize>,
}

impl BinnedData {
    pub fn new(schema: &FeatureSchema, rows: &[&FeatureVector]) -> Self {
        let n_numeric = schema.n_numeric();
        let bins = (0..n_numeric)
            .map(|f| {
                let cuts = &schema.cuts[f];
                rows.iter()
                    .map(|r| cuts.partition_point(|&c| c < r.numeric[f]) as u8)
                    .collect()
            })
            .collect();
        let tokens = rows
            .iter()
            .map(|r| schema.encode(r).map(|e| e.tokens).unwrap_or_default())
            .collect();
        BinnedData {
            n_rows: rows.len(),
            n_numeric,
            n_tokens: schema.vocab.len(),
            bins,
            tokens,
            n_bins: schema.cuts.iter().map(|c| c.len() + 1).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_numeric + self.n_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Numeric: `x <= threshold` goes left. Token: absent goes left.
    Split {
        feature: u32,
        bin: u16,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &EncodedRow) -> f64 {
        let n_numeric = row.numeric.len() as u32;
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let go_left = if *feature < n_numeric {
                        row.numeric[*feature as usize] <= *threshold
                    } else {
                        row.tokens.binary_search(&(feature - n_numeric)).is_err()
                    };
                    i = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    fn predict_binned(&self, data: &BinnedData, r: usize) -> f64 {
        let n_numeric = data.n_numeric as u32;
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    bin,
                    left,
                    right,
                    ..
                } => {
                    let go_left = if *feature < n_numeric {
                        u16::from(data.bins[*feature as usize][r]) <= *bin
                    } else {
                        data.tokens[r].binary_search(&(feature - n_numeric)).is_err()
                    };
                    i = if go_left { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_features(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    fn scale(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// Binary log-loss on raw scores; targets are 0 or 1.
    Logistic,
    /// Half squared error.
    Squared,
}

impl Loss {
    fn base_score(&self, targets: &[f64]) -> f64 {
        let mean = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
        match self {
            Loss::Squared => mean,
            Loss::Logistic => {
                let p = mean.clamp(1e-6, 1.0 - 1e-6);
                (p / (1.0 - p)).ln()
            }
        }
    }

    fn grad_hess(&self, score: f64, y: f64) -> (f64, f64) {
        match self {
            Loss::Squared => (score - y, 1.0),
            Loss::Logistic => {
                let p = sigmoid(score);
                (p - y, (p * (1.0 - p)).max(1e-16))
            }
        }
    }

    fn value(&self, score: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (score - y) * (score - y),
            Loss::Logistic => {
                // log(1 + e^s) - y s, computed stably
                let softplus = if score > 0.0 {
                    score + (-score).exp().ln_1p()
                } else {
                    score.exp().ln_1p()
                };
                softplus - y * score
            }
        }
    }

    fn mean(&self, scores: &[f64], targets: &[f64], rows: &[u32]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter()
            .map(|&r| self.value(scores[r as usize], targets[r as usize]))
            .sum::<f64>()
            / rows.len() as f64
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// An additive model: `base + Σ trees`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub base: f64,
    pub trees: Vec<Tree>,
    /// Mean training loss before the first tree and after every stage.
    pub train_loss: Vec<f64>,
    pub best_valid_loss: Option<f64>,
}

impl Ensemble {
    pub fn predict(&self, row: &EncodedRow) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_binned(&self, data: &BinnedData, r: usize) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict_binned(data, r)).sum::<f64>()
    }
}

#[derive(Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    c: f64,
}

impl Bin {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.c += 1.0;
    }

    fn minus(&self, o: &Bin) -> Bin {
        Bin {
            g: self.g - o.g,
            h: self.h - o.h,
            c: self.c - o.c,
        }
    }
}

struct Histogram {
    total: Bin,
    numeric: Vec<Bin>,
    tokens: Vec<Bin>,
}

const MAX_BINS: usize = 256;

struct TreeBuilder<'a> {
    data: &'a BinnedData,
    params: &'a GbtParams,
    mask: &'a [bool],
    grad: &'a [f64],
    hess: &'a [f64],
    nodes: Vec<Node>,
    /// Leaf value assigned to each training row of the tree being built.
    row_value: &'a mut [f64],
}

struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl<'a> TreeBuilder<'a> {
    fn histogram(&self, rows: &[u32]) -> Histogram {
        let d = self.data;
        let mut numeric = vec![Bin::default(); d.n_numeric * MAX_BINS];
        let mut tokens = vec![Bin::default(); d.n_tokens];
        let mut total = Bin::default();
        for &r in rows {
            let r = r as usize;
            total.add(self.grad[r], self.hess[r]);
        }
        for f in 0..d.n_numeric {
            if !self.mask[f] {
                continue;
            }
            let col = &d.bins[f];
            let hist = &mut numeric[f * MAX_BINS..(f + 1) * MAX_BINS];
            for &r in rows {
                let r = r as usize;
                hist[col[r] as usize].add(self.grad[r], self.hess[r]);
            }
        }
        for &r in rows {
            let r = r as usize;
            for &t in &d.tokens[r] {
                tokens[t as usize].add(self.grad[r], self.hess[r]);
            }
        }
        Histogram {
            total,
            numeric,
            tokens,
        }
    }

    fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
        Histogram {
            total: parent.total.minus(&child.total),
            numeric: parent
                .numeric
                .iter()
                .zip(&child.numeric)
                .map(|(p, c)| p.minus(c))
                .collect(),
            tokens: parent
                .tokens
                .iter()
                .zip(&child.tokens)
                .map(|(p, c)| p.minus(c))
                .collect(),
        }
    }

    fn score(&self, b: &Bin) -> f64 {
        b.g * b.g / (b.h + self.params.l2)
    }

    fn admissible(&self, b: &Bin) -> bool {
        b.c >= self.params.min_samples_leaf as f64 - 0.5 && b.h >= self.params.min_child_hessian
    }

    fn best_split(&self, hist: &Histogram) -> Option<Candidate> {
        let d = self.data;
        let parent = self.score(&hist.total);
        let mut best: Option<Candidate> = None;
        let consider = |gain: f64, feature: usize, bin: usize, best: &mut Option<Candidate>| {
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                *best = Some(Candidate { gain, feature, bin });
            }
        };
        for f in 0..d.n_numeric {
            if !self.mask[f] {
                continue;
            }
            let hist_f = &hist.numeric[f * MAX_BINS..];
            let mut left = Bin::default();
            for b in 0..d.n_bins[f].saturating_sub(1) {
                left.g += hist_f[b].g;
                left.h += hist_f[b].h;
                left.c += hist_f[b].c;
                let right = hist.total.minus(&left);
                if !self.admissible(&left) || !self.admissible(&right) {
                    continue;
                }
                consider(self.score(&left) + self.score(&right) - parent, f, b, &mut best);
            }
        }
        for t in 0..d.n_tokens {
            let f = d.n_numeric + t;
            if !self.mask[f] {
                continue;
            }
            let right = hist.tokens[t];
            let left = hist.total.minus(&right);
            if !self.admissible(&left) || !self.admissible(&right) {
                continue;
            }
            consider(self.score(&left) + self.score(&right) - parent, f, 0, &mut best);
        }
        best
    }

    fn goes_left(&self, feature: usize, bin: usize, r: usize) -> bool {
        let d = self.data;
        if feature < d.n_numeric {
            (d.bins[feature][r] as usize) <= bin
        } else {
            d.tokens[r]
                .binary_search(&((feature - d.n_numeric) as u32))
                .is_err()
        }
    }

    fn leaf(&mut self, rows: &[u32], hist: &Histogram) -> u32 {
        let value = -hist.total.g / (hist.total.h + self.params.l2);
        for &r in rows {
            self.row_value[r as usize] = value;
        }
        self.nodes.push(Node::Leaf { value });
        (self.nodes.len() - 1) as u32
    }

    fn build(&mut self, rows: &mut [u32], hist: Histogram, depth: usize, schema: &FeatureSchema) -> u32 {
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(rows, &hist);
        }
        let Some(split) = self.best_split(&hist) else {
            return self.leaf(rows, &hist);
        };
        // In-place partition, left rows first.
        let mut boundary = 0;
        for i in 0..rows.len() {
            if self.goes_left(split.feature, split.bin, rows[i] as usize) {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let l = self.histogram(left_rows);
            let r = Self::subtract(&hist, &l);
            (l, r)
        } else {
            let r = self.histogram(right_rows);
            let l = Self::subtract(&hist, &r);
            (l, r)
        };
        drop(hist);
        let threshold = if split.feature < self.data.n_numeric {
            schema.cuts[split.feature][split.bin]
        } else {
            0.5
        };
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.build(left_rows, left_hist, depth + 1, schema);
        let right = self.build(right_rows, right_hist, depth + 1, schema);
        self.nodes[idx] = Node::Split {
            feature: split.feature as u32,
            bin: split.bin as u16,
            threshold,
            left,
            right,
        };
        idx as u32
    }
}

/// Inputs to one boosting run.
pub struct BoostTask<'a> {
    pub data: &'a BinnedData,
    pub schema: &'a FeatureSchema,
    pub targets: &'a [f64],
    pub train_rows: &'a [u32],
    pub valid_rows: &'a [u32],
    /// Enabled features (numeric then tokens).
    pub mask: &'a [bool],
    pub loss: Loss,
}

/// Stage-wise boosting with early stopping on the validation rows; the
/// returned ensemble is truncated to the best validation stage.
pub fn boost(task: &BoostTask<'_>, params: &GbtParams) -> Ensemble {
    let n = task.data.n_rows();
    let train_targets: Vec<f64> = task.train_rows.iter().map(|&r| task.targets[r as usize]).collect();
    let base = task.loss.base_score(&train_targets);
    let mut scores = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut row_value = vec![0.0; n];
    let mut trees: Vec<Tree> = Vec::new();
    let mut train_loss = vec![task.loss.mean(&scores, task.targets, task.train_rows)];

    let has_valid = !task.valid_rows.is_empty();
    let mut best_valid = task.loss.mean(&scores, task.targets, task.valid_rows);
    let mut best_len = 0usize;
    let mut rows: Vec<u32> = task.train_rows.to_vec();

    for _ in 0..params.max_trees {
        for &r in task.train_rows {
            let r = r as usize;
            let (g, h) = task.loss.grad_hess(scores[r], task.targets[r]);
            grad[r] = g;
            hess[r] = h;
        }
        rows.copy_from_slice(task.train_rows);
        let mut builder = TreeBuilder {
            data: task.data,
            params,
            mask: task.mask,
            grad: &grad,
            hess: &hess,
            nodes: Vec::new(),
            row_value: &mut row_value,
        };
        let root = builder.histogram(&rows);
        builder.build(&mut rows, root, 0, task.schema);
        let mut tree = Tree {
            nodes: builder.nodes,
        };
        if tree.nodes.len() == 1 && matches!(tree.nodes[0], Node::Leaf { value } if value.abs() < 1e-15) {
            break;
        }

        // Backtracking keeps the training loss non-increasing.
        let prev = *train_loss.last().expect("seeded with the initial loss");
        let mut step = params.learning_rate;
        let mut accepted = None;
        for _ in 0..30 {
            let loss: f64 = task
                .train_rows
                .iter()
                .map(|&r| {
                    let r = r as usize;
                    task.loss.value(scores[r] + step * row_value[r], task.targets[r])
                })
                .sum::<f64>()
                / task.train_rows.len() as f64;
            if loss <= prev {
                accepted = Some(loss);
                break;
            }
            step *= 0.5;
        }
        let Some(loss) = accepted else { break };
        tree.scale(step);
        for &r in task.train_rows {
            let r = r as usize;
            scores[r] += step * row_value[r];
        }
        for &r in task.valid_rows {
            let r = r as usize;
            scores[r] += tree.predict_binned(task.data, r);
        }
        trees.push(tree);
        train_loss.push(loss);

        if has_valid {
            let v = task.loss.mean(&scores, task.targets, task.valid_rows);
            if v < best_valid {
                best_valid = v;
                best_len = trees.len();
            } else if trees.len() - best_len >= params.early_stop_rounds {
                break;
            }
        } else {
            best_len = trees.len();
        }
    }
    trees.truncate(best_len);
    train_loss.truncate(best_len + 1);
    Ensemble {
        base,
        trees,
        train_loss,
        best_valid_loss: has_valid.then_some(best_valid),
    }
}

/// Seeded split of `0..n` into (train, validation) row lists.
pub fn split_rows(n: usize, validation_fraction: f64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let n_valid = if n >= 10 {
        ((n as f64 * validation_fraction).round() as usize).min(n - 1)
    } else {
        0
    };
    if n_valid == 0 {
        return (idx, Vec::new());
    }
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let valid = idx.split_off(n - n_valid);
    let mut train = idx;
    train.sort_unstable();
    let mut valid = valid;
    valid.sort_unstable();
    (train, valid)
}

/// Area under the ROC curve with midrank tie handling; `None` if either class
/// is missing.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(numeric: Vec<f64>, tokens: &[&str]) -> FeatureVector {
        FeatureVector {
            job_id: String::new(),
            pipeline_id: String::new(),
            numeric,
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn quantile_cuts_distinct_small() {
        assert_eq!(quantile_cuts(&[1.0, 2.0, 2.0, 4.0], 64), vec![1.5, 3.0]);
        assert!(quantile_cuts(&[3.0, 3.0], 64).is_empty());
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        let c = quantile_cuts(&v, 4);
        assert_eq!(c, vec![249.5, 499.5, 749.5]);
    }

    #[test]
    fn bins_agree_with_thresholds() {
        let rows: Vec<FeatureVector> = (0..200).map(|i| fv(vec![(i % 37) as f64 * 1.5], &[])).collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let params = GbtParams {
            histogram_bins: 8,
            ..GbtParams::default()
        };
        let schema = FeatureSchema::fit(&["x"], &refs, &params);
        let data = BinnedData::new(&schema, &refs);
        for (r, row) in rows.iter().enumerate() {
            for (b, &cut) in schema.cuts[0].iter().enumerate() {
                assert_eq!((data.bins[0][r] as usize) <= b, row.numeric[0] <= cut);
            }
        }
    }

    #[test]
    fn regression_fits_step_function_and_loss_never_rises() {
        let rows: Vec<FeatureVector> = (0..300).map(|i| fv(vec![i as f64], &[])).collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let targets: Vec<f64> = (0..300).map(|i| if i < 150 { 1.0 } else { 5.0 }).collect();
        let params = GbtParams {
            max_trees: 100,
            learning_rate: 0.3,
            ..GbtParams::default()
        };
        let schema = FeatureSchema::fit(&["x"], &refs, &params);
        let data = BinnedData::new(&schema, &refs);
        let train: Vec<u32> = (0..300).collect();
        let mask = vec![true; data.n_features()];
        let e = boost(
            &BoostTask {
                data: &data,
                schema: &schema,
                targets: &targets,
                train_rows: &train,
                valid_rows: &[],
                mask: &mask,
                loss: Loss::Squared,
            },
            &params,
        );
        assert!(e.train_loss.windows(2).all(|w| w[1] <= w[0]));
        let row = schema.encode(&fv(vec![10.0], &[])).unwrap();
        assert!((e.predict(&row) - 1.0).abs() < 0.05);
        let row = schema.encode(&fv(vec![290.0], &[])).unwrap();
        assert!((e.predict(&row) - 5.0).abs() < 0.05);
    }

    #[test]
    fn token_split_separates_classes() {
        let rows: Vec<FeatureVector> = (0..100)
            .map(|i| fv(vec![0.0], if i % 2 == 0 { &["hot"] } else { &["cold"] }))
            .collect();
        let refs: Vec<&FeatureVector> = rows.iter().collect();
        let targets: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let params = GbtParams::default();
        let schema = FeatureSchema::fit(&["x"], &refs, &params);
        let data = BinnedData::new(&schema, &refs);
        let train: Vec<u32> = (0..100).collect();
        let mask = vec![true; data.n_features()];
        let e = boost(
            &BoostTask {
                data: &data,
                schema: &schema,
                targets: &targets,
                train_rows: &train,
                valid_rows: &[],
                mask: &mask,
                loss: Loss::Logistic,
            },
            &params,
        );
        let hot = e.predict(&schema.encode(&fv(vec![0.0], &["hot"])).unwrap());
        let cold = e.predict(&schema.encode(&fv(vec![0.0], &["cold"])).unwrap());
        assert!(sigmoid(hot) > 0.95 && sigmoid(cold) < 0.05);
    }

    #[test]
    fn auc_hand_values() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.3, 0.4], &[false, false, true, true]), Some(1.0));
        assert_eq!(roc_auc(&[0.4, 0.3, 0.2, 0.1], &[false, false, true, true]), Some(0.0));
        assert_eq!(roc_auc(&[0.5, 0.5], &[false, true]), Some(0.5));
        assert_eq!(roc_auc(&[0.5, 0.6], &[true, true]), None);
        // one inversion out of four pairs
        assert_eq!(roc_auc(&[0.1, 0.3, 0.2, 0.4], &[false, false, true, true]), Some(0.75));
    }

    #[test]
    fn split_rows_is_seeded() {
        let (t1, v1) = split_rows(100, 0.1, 7);
        let (t2, v2) = split_rows(100, 0.1, 7);
        assert_eq!((t1.clone(), v1.clone()), (t2, v2));
        assert_eq!(v1.len(), 10);
        assert_eq!(t1.len(), 90);
        assert!(split_rows(5, 0.1, 7).1.is_empty());
    }
}
