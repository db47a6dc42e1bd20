//! Black-box classifiers and their evaluation scaffolding.
//!
//! The search side of this crate only ever talks to a classifier through the
//! [`Predictor`] trait, so the in-repo random forest, closures over analytic
//! rules, and external subprocesses are interchangeable.

mod external;
mod forest;

pub use external::ExternalPredictor;
pub use forest::{load_model, save_model, ForestModel, Node, SplitTest, Tree};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Dataset, Instance};
use crate::seeding;

/// A deterministic, pure classifier over instances.
///
/// Implementations must return the same class for the same instance and must
/// not mutate internal state; searches call this from multiple threads.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: &Instance) -> usize;

    fn predict_batch(&self, xs: &[Instance]) -> Vec<usize> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: &Instance) -> usize {
        (**self).predict(x)
    }

    fn predict_batch(&self, xs: &[Instance]) -> Vec<usize> {
        (**self).predict_batch(xs)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&self, x: &Instance) -> usize {
        (**self).predict(x)
    }

    fn predict_batch(&self, xs: &[Instance]) -> Vec<usize> {
        (**self).predict_batch(xs)
    }
}

/// Wraps a closure as a [`Predictor`]; handy for analytic labeling rules.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&Instance) -> usize + Send + Sync,
{
    fn predict(&self, x: &Instance) -> usize {
        (self.0)(x)
    }
}

/// How many features each split considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))` features, sampled per split without replacement.
    SqrtD,
    /// All features.
    AllD,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { n_trees: 50, min_samples_split: 2, max_features: MaxFeatures::SqrtD }
    }
}

/// Hyper-parameter grid; cells are visited in declared order and ties in
/// cross-validated accuracy keep the earliest cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_trees: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_trees: vec![50, 500],
            min_samples_split: vec![2, 8],
            max_features: vec![MaxFeatures::SqrtD, MaxFeatures::AllD],
        }
    }
}

impl Grid {
    pub fn cells(&self) -> Vec<TrainParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &min_samples_split in &self.min_samples_split {
                for &max_features in &self.max_features {
                    out.push(TrainParams { n_trees, min_samples_split, max_features });
                }
            }
        }
        out
    }
}

/// Assignment of every row to one of `k` folds.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Stratified k-fold split: within every class, fold sizes differ by at most
/// one. Errors with [`Error::TooFewPerClass`] if a class has fewer than `k`
/// members.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {}", k)));
    }
    if labels.is_empty() {
        return Err(Error::DegenerateData("no rows to split into folds".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut assignment = vec![0usize; labels.len()];
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::TooFewPerClass { class: class.to_string(), count: members.len(), k });
        }
        let mut rng = seeding::rng(seed, &[0x666f6c64, class as u64]);
        rand::seq::SliceRandom::shuffle(&mut members[..], &mut rng);
        for (pos, &row) in members.iter().enumerate() {
            assignment[row] = pos % k;
        }
    }
    Ok(FoldPlan { k, assignment })
}

/// Trains a forest with every grid cell under stratified k-fold
/// cross-validation on `train` and returns the best cell with its mean
/// accuracy. Ties keep the earliest cell, so the result is deterministic.
pub fn grid_search(train: &Dataset, grid: &Grid, k: usize, seed: u64) -> Result<(TrainParams, f64)> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Config("empty hyper-parameter grid".into()));
    }
    let folds = stratified_folds(&train.labels, train.schema.n_classes(), k, seeding::mix(seed, &[0x6376]))?;
    let mut best: Option<(TrainParams, f64)> = None;
    for (cell_idx, params) in cells.iter().enumerate() {
        let mut acc_sum = 0.0;
        for fold in 0..k {
            let tr = train.subset(&folds.train_indices(fold));
            let te_idx = folds.test_indices(fold);
            let model =
                forest::train_forest(&tr, params, seeding::mix(seed, &[0x6376, cell_idx as u64, fold as u64]))?;
            let mut hits = 0usize;
            for &i in &te_idx {
                if model.predict(&train.instances[i]) == train.labels[i] {
                    hits += 1;
                }
            }
            acc_sum += hits as f64 / te_idx.len().max(1) as f64;
        }
        let acc = acc_sum / k as f64;
        if best.as_ref().map_or(true, |&(_, b)| acc > b) {
            best = Some((*params, acc));
        }
    }
    Ok(best.expect("at least one grid cell"))
}

pub use forest::train_forest;
