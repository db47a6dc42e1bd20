//! Random forest of CART trees: Gini splits, bootstrap sampling, no depth
//! limit. Numerical splits are axis-aligned thresholds; categorical splits
//! test a single category against the rest.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MaxFeatures, Predictor, TrainParams};
use crate::error::{Error, Result};
use crate::schema::{Dataset, Domain, FeatureKind, Instance, Schema, Value};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    /// Go left when `value <= threshold`.
    NumLe(f64),
    /// Go left when the category id equals the tested one.
    CatEq(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf { counts: Vec<u32> },
    Split { feature: usize, test: SplitTest, left: usize, right: usize },
}

/// One decision tree stored as a flat arena; the root is the last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Class vote of this tree: argmax of the reached leaf histogram, ties
    /// broken by the lowest class id.
    pub fn predict(&self, x: &Instance) -> usize {
        let mut node = self.nodes.len() - 1;
        loop {
            match &self.nodes[node] {
                Node::Leaf { counts } => return argmax_lowest(counts.iter().map(|&c| c as u64)),
                Node::Split { feature, test, left, right } => {
                    let go_left = match test {
                        SplitTest::NumLe(thr) => x.num(*feature) <= *thr,
                        SplitTest::CatEq(cat) => x.cat(*feature) == *cat,
                    };
                    node = if go_left { *left } else { *right };
                }
            }
        }
    }
}

/// Summary of the schema a model was trained against, stored with the model
/// so later runs can detect mismatched datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub categories: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub class_names: Vec<String>,
    pub features: Vec<FeatureSummary>,
    pub params: TrainParams,
    pub seed: u64,
    /// Set when training data carried a single class; the model then predicts
    /// that class unconditionally.
    pub degenerate: bool,
    pub trees: Vec<Tree>,
}

impl Predictor for ForestModel {
    fn predict(&self, x: &Instance) -> usize {
        let mut votes = vec![0u64; self.class_names.len()];
        for tree in &self.trees {
            votes[tree.predict(x)] += 1;
        }
        argmax_lowest(votes.into_iter())
    }
}

impl ForestModel {
    /// Errors with [`Error::ModelSchemaMismatch`] unless `schema` matches the
    /// schema the model was trained on (names, kinds, categories, classes).
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if self.class_names != schema.class_names {
            return Err(Error::ModelSchemaMismatch(format!(
                "model classes {:?} vs dataset classes {:?}",
                self.class_names, schema.class_names
            )));
        }
        if self.features.len() != schema.d() {
            return Err(Error::ModelSchemaMismatch(format!(
                "model has {} features, dataset has {}",
                self.features.len(),
                schema.d()
            )));
        }
        for (summary, feature) in self.features.iter().zip(&schema.features) {
            let expected = summarize(feature);
            if *summary != expected {
                return Err(Error::ModelSchemaMismatch(format!(
                    "feature {:?} differs between model and dataset",
                    feature.name
                )));
            }
        }
        Ok(())
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.n() == 0 {
            return 0.0;
        }
        let hits = data
            .instances
            .iter()
            .zip(&data.labels)
            .filter(|(x, &l)| self.predict(x) == l)
            .count();
        hits as f64 / data.n() as f64
    }
}

fn summarize(feature: &crate::schema::Feature) -> FeatureSummary {
    FeatureSummary {
        name: feature.name.clone(),
        kind: feature.kind(),
        categories: match &feature.domain {
            Domain::Categorical { categories } => Some(categories.clone()),
            Domain::Numerical { .. } => None,
        },
    }
}

fn argmax_lowest(counts: impl Iterator<Item = u64>) -> usize {
    let mut best = 0usize;
    let mut best_count = 0u64;
    for (i, c) in counts.enumerate() {
        if i == 0 || c > best_count {
            best = i;
            best_count = c;
        }
    }
    best
}

/// Trains a random forest. Each tree gets an independent seeded RNG stream,
/// so training is deterministic per seed and invariant to thread count.
///
/// Single-class data yields a constant predictor with the `degenerate` flag
/// set rather than an error.
pub fn train_forest(data: &Dataset, params: &TrainParams, seed: u64) -> Result<ForestModel> {
    if data.n() == 0 {
        return Err(Error::DegenerateData("cannot train on an empty dataset".into()));
    }
    if params.n_trees == 0 || params.min_samples_split < 2 {
        return Err(Error::Config(format!(
            "invalid forest parameters: n_trees {}, min_samples_split {}",
            params.n_trees, params.min_samples_split
        )));
    }
    let n_classes = data.schema.n_classes();
    let features: Vec<FeatureSummary> = data.schema.features.iter().map(summarize).collect();
    let mut counts = vec![0u32; n_classes];
    for &l in &data.labels {
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        // Constant predictor; callers may warn but can still proceed.
        let trees = vec![Tree { nodes: vec![Node::Leaf { counts }] }; params.n_trees];
        return Ok(ForestModel {
            class_names: data.schema.class_names.clone(),
            features,
            params: *params,
            seed,
            degenerate: true,
            trees,
        });
    }
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeding::rng(seed, &[0x74726565, t as u64]);
            let sample: Vec<usize> = (0..data.n()).map(|_| rng.gen_range(0..data.n())).collect();
            let mut builder = TreeBuilder { data, params, rng, nodes: Vec::new() };
            builder.grow(sample);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Ok(ForestModel {
        class_names: data.schema.class_names.clone(),
        features,
        params: *params,
        seed,
        degenerate: false,
        trees,
    })
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    params: &'a TrainParams,
    rng: rand_chacha::ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    test: SplitTest,
}

impl TreeBuilder<'_> {
    /// Grows the subtree over `idx` and returns its arena index.
    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let n_classes = self.data.schema.n_classes();
        let mut counts = vec![0u32; n_classes];
        for &i in &idx {
            counts[self.data.labels[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if idx.len() < self.params.min_samples_split || pure {
            self.nodes.push(Node::Leaf { counts });
            return self.nodes.len() - 1;
        }
        match self.best_split(&idx, &counts) {
            None => {
                self.nodes.push(Node::Leaf { counts });
                self.nodes.len() - 1
            }
            Some(best) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| {
                        let x = &self.data.instances[i];
                        match best.test {
                            SplitTest::NumLe(thr) => x.num(best.feature) <= thr,
                            SplitTest::CatEq(cat) => x.cat(best.feature) == cat,
                        }
                    });
                debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());
                let left = self.grow(left_idx);
                let right = self.grow(right_idx);
                self.nodes.push(Node::Split { feature: best.feature, test: best.test, left, right });
                self.nodes.len() - 1
            }
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.schema.d();
        let m = match self.params.max_features {
            MaxFeatures::AllD => d,
            MaxFeatures::SqrtD => (d as f64).sqrt().ceil() as usize,
        };
        if m >= d {
            (0..d).collect()
        } else {
            rand::seq::index::sample(&mut self.rng, d, m).into_vec()
        }
    }

    fn best_split(&mut self, idx: &[usize], parent_counts: &[u32]) -> Option<BestSplit> {
        let n = idx.len() as f64;
        let parent_impurity = gini(parent_counts, n);
        let features = self.candidate_features();
        let mut best: Option<BestSplit> = None;
        for &f in &features {
            let candidate = match self.data.schema.features[f].domain {
                Domain::Numerical { .. } => self.best_numerical(f, idx, parent_impurity),
                Domain::Categorical { .. } => self.best_categorical(f, idx, parent_impurity),
            };
            if let Some(c) = candidate {
                if best.as_ref().map_or(true, |b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_numerical(&self, f: usize, idx: &[usize], parent_impurity: f64) -> Option<BestSplit> {
        let n_classes = self.data.schema.n_classes();
        let mut rows: Vec<(f64, usize)> = idx
            .iter()
            .map(|&i| (self.data.instances[i].num(f), self.data.labels[i]))
            .collect();
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));
        let n = rows.len() as f64;
        let mut left_counts = vec![0u32; n_classes];
        let mut total = vec![0u32; n_classes];
        for &(_, l) in &rows {
            total[l] += 1;
        }
        let mut best: Option<BestSplit> = None;
        for i in 0..rows.len() - 1 {
            left_counts[rows[i].1] += 1;
            if rows[i].0 == rows[i + 1].0 {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = n - nl;
            let right_counts: Vec<u32> =
                total.iter().zip(&left_counts).map(|(&t, &l)| t - l).collect();
            let gain =
                parent_impurity - (nl * gini(&left_counts, nl) + nr * gini(&right_counts, nr)) / n;
            if gain > MIN_GAIN && best.as_ref().map_or(true, |b| gain > b.gain) {
                let threshold = rows[i].0 + (rows[i + 1].0 - rows[i].0) / 2.0;
                best = Some(BestSplit { gain, feature: f, test: SplitTest::NumLe(threshold) });
            }
        }
        best
    }

    fn best_categorical(&self, f: usize, idx: &[usize], parent_impurity: f64) -> Option<BestSplit> {
        let n_classes = self.data.schema.n_classes();
        let k = self.data.schema.features[f].n_categories();
        let mut per_cat = vec![vec![0u32; n_classes]; k];
        let mut total = vec![0u32; n_classes];
        for &i in idx {
            per_cat[self.data.instances[i].cat(f)][self.data.labels[i]] += 1;
            total[self.data.labels[i]] += 1;
        }
        let n = idx.len() as f64;
        let mut best: Option<BestSplit> = None;
        for cat in 0..k {
            let nl: u32 = per_cat[cat].iter().sum();
            if nl == 0 || nl as usize == idx.len() {
                continue;
            }
            let right_counts: Vec<u32> =
                total.iter().zip(&per_cat[cat]).map(|(&t, &l)| t - l).collect();
            let nl = nl as f64;
            let nr = n - nl;
            let gain = parent_impurity
                - (nl * gini(&per_cat[cat], nl) + nr * gini(&right_counts, nr)) / n;
            if gain > MIN_GAIN && best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(BestSplit { gain, feature: f, test: SplitTest::CatEq(cat) });
            }
        }
        best
    }
}

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

fn gini(counts: &[u32], n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for &c in counts {
        let p = c as f64 / n;
        sum += p * p;
    }
    1.0 - sum
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string(model).expect("model serialization");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}
