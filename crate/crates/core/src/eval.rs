//! K-fold cross-validation and regression metrics.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::binarize;
use crate::model::{self, Model, ModelError, Sample, TrainConfig};
use crate::seed::derive_seed;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot split {n} examples into {k} folds")]
    Plan { n: usize, k: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Partition of `0..n` into `k` validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }

    /// Every index outside fold `i`, in fold order.
    pub fn train_indices(&self, i: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

/// Seeded Fisher–Yates shuffle of `0..n`, then the first `n mod k` folds take
/// `⌈n/k⌉` indices and the rest `⌊n/k⌋`.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(EvalError::Plan { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut rest = order.as_slice();
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let (fold, tail) = rest.split_at(size);
        folds.push(fold.to_vec());
        rest = tail;
    }
    Ok(FoldPlan { n, seed, folds })
}

/// Anything that maps a feature vector to a sarcasm level.
pub trait Predict {
    fn predict(&self, x: &[f64]) -> Result<f64, ModelError>;
}

impl Predict for Model {
    fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        model::predict(&self.params, x)
    }
}

/// Fits a fresh predictor on a training subset.
pub trait Learner: Sync {
    type Fitted: Predict + Send;

    /// `seed` is already specific to `fold`.
    fn fit(&self, data: &[Sample], train: &[usize], seed: u64) -> Result<Self::Fitted, ModelError>;

    /// Configuration echoed into the report.
    fn describe(&self) -> serde_json::Value;
}

/// The feed-forward regressor, trained from a fresh init per fold.
#[derive(Debug, Clone)]
pub struct MlpLearner {
    pub config: TrainConfig,
}

impl Learner for MlpLearner {
    type Fitted = Model;

    fn fit(&self, data: &[Sample], train: &[usize], seed: u64) -> Result<Model, ModelError> {
        let config = TrainConfig {
            seed,
            ..self.config.clone()
        };
        Ok(model::train_subset(data, train, &config)?.model)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub mse: f64,
    pub mae: f64,
    /// Agreement of `binarize(ŷ)` with `binarize(y)`.
    pub accuracy: f64,
}

pub fn metrics_from_predictions(preds: &[f64], targets: &[f64], threshold: f64) -> Result<Metrics> {
    if preds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mse = model::mse_loss(preds, targets)?;
    let n = preds.len() as f64;
    let mae = preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let agree = preds
        .iter()
        .zip(targets)
        .filter(|&(&p, &t)| binarize(p, threshold) == binarize(t, threshold))
        .count();
    Ok(Metrics {
        count: preds.len(),
        mse,
        mae,
        accuracy: agree as f64 / n,
    })
}

pub fn evaluate<P: Predict + ?Sized>(model: &P, data: &[Sample], threshold: f64) -> Result<Metrics> {
    evaluate_subset(model, data, &(0..data.len()).collect::<Vec<_>>(), threshold)
}

fn evaluate_subset<P: Predict + ?Sized>(
    model: &P,
    data: &[Sample],
    indices: &[usize],
    threshold: f64,
) -> Result<Metrics> {
    let preds = indices
        .iter()
        .map(|&i| model.predict(data[i].features.as_slice()))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<f64> = indices.iter().map(|&i| data[i].target).collect();
    metrics_from_predictions(&preds, &targets, threshold)
}

pub const FINAL_LOSS_RULE: &str = "unweighted_mean_of_fold_losses";

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_losses: Vec<f64>,
    pub final_loss: f64,
    pub final_loss_rule: String,
    pub threshold: f64,
    pub metrics: Vec<Metrics>,
    pub config: serde_json::Value,
}

impl CvReport {
    pub fn mean_of_folds(&self) -> f64 {
        self.fold_losses.iter().sum::<f64>() / self.fold_losses.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Aligned two-column table: one row per fold, then the final loss.
    pub fn to_text(&self) -> String {
        let rows: Vec<(String, String)> = self
            .fold_losses
            .iter()
            .enumerate()
            .map(|(i, loss)| (format!("Fold {}", i + 1), format!("{loss:.9}")))
            .chain(std::iter::once(("Final loss".to_owned(), format!("{:.9}", self.final_loss))))
            .collect();
        let left = rows
            .iter()
            .map(|(l, _)| l.len())
            .chain(["Fold Number".len()])
            .max()
            .unwrap_or(0);
        let right = rows
            .iter()
            .map(|(_, r)| r.len())
            .chain(["Evaluation loss".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<left$} | Evaluation loss", "Fold Number");
        let _ = writeln!(out, "{}-+-{}", "-".repeat(left), "-".repeat(right));
        for (l, r) in rows {
            let _ = writeln!(out, "{l:<left$} | {r}");
        }
        out
    }
}

/// Train on `k - 1` folds and score the held-out fold, for each fold. Folds
/// run in parallel; results are assembled in fold order.
pub fn cross_validate<L: Learner>(
    data: &[Sample],
    learner: &L,
    k: usize,
    seed: u64,
    threshold: f64,
) -> Result<CvReport> {
    let plan = kfold_indices(data.len(), k, derive_seed(seed, "folds"))?;
    let metrics = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train = plan.train_indices(fold);
            let fold_seed = derive_seed(seed, &format!("fold-{fold}"));
            let fitted = learner
                .fit(data, &train, fold_seed)
                .map_err(|source| EvalError::Fold { fold: fold + 1, source })?;
            evaluate_subset(&fitted, data, &plan.folds[fold], threshold).map_err(|e| match e {
                EvalError::Model(source) => EvalError::Fold { fold: fold + 1, source },
                other => other,
            })
        })
        .collect::<Result<Vec<Metrics>>>()?;
    let fold_losses: Vec<f64> = metrics.iter().map(|m| m.mse).collect();
    let final_loss = fold_losses.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        k,
        seed,
        fold_losses,
        final_loss,
        final_loss_rule: FINAL_LOSS_RULE.to_owned(),
        threshold,
        metrics,
        config: learner.describe(),
    })
}
