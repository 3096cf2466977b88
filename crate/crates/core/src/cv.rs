//! Stratified k-fold planning and a generic cross-validation driver.

use std::collections::BTreeMap;
use std::error::Error as StdError;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ClassReport;

pub const CV_SUMMARY_SCHEMA_VERSION: u32 = 1;

type BoxError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum CvError {
    #[error("fold count must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("{n} samples cannot fill {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("fold {fold}: training failed: {source}")]
    Trainer {
        fold: usize,
        #[source]
        source: BoxError,
    },
    #[error("fold {fold}: evaluation failed: {source}")]
    Evaluator {
        fold: usize,
        #[source]
        source: BoxError,
    },
    #[error("fold {fold}: sample {index} is in both the training and validation sets")]
    Leakage { fold: usize, index: usize },
    #[error("no fold results")]
    EmptyResults,
    #[error("fold {0} has no loss log")]
    MissingLossLog(usize),
    #[error("fold {fold} loss log has {found} epochs, expected {expected}")]
    LengthMismatch {
        fold: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    seed: u64,
    assignments: Vec<usize>,
    warnings: Vec<String>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold index of every sample.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Classes too small to appear in every fold.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified assignment: samples are grouped by class (ascending id),
/// shuffled within each class by a generator seeded from `seed`, and dealt
/// round-robin over the folds with one cursor shared across classes. Per
/// class, fold sizes differ by at most one; overall, likewise.
pub fn plan_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan, CvError> {
    if k < 2 {
        return Err(CvError::InvalidK(k));
    }
    if labels.len() < k {
        return Err(CvError::TooFewSamples { n: labels.len(), k });
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; labels.len()];
    let mut warnings = Vec::new();
    let mut cursor = 0usize;
    for (class, mut members) in by_class {
        if members.len() < k {
            warnings.push(format!(
                "class {class} has {} samples, fewer than {k} folds",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = cursor;
            cursor = (cursor + 1) % k;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// What a trainer hands back for one fold.
#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub loss_log: Option<Vec<LossPoint>>,
}

impl<M> TrainOutcome<M> {
    pub fn new(model: M) -> Self {
        TrainOutcome {
            model,
            loss_log: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult<M> {
    pub fold: usize,
    pub train_metrics: ClassReport,
    pub val_metrics: ClassReport,
    pub model: M,
    pub loss_log: Option<Vec<LossPoint>>,
}

/// Trains and evaluates every fold. Folds run concurrently; results come
/// back in fold order. The trainer only ever sees training indices of its
/// fold; the validation report covers only the held-out indices.
pub fn run_cv<M, E, T, V>(plan: &FoldPlan, trainer: T, evaluator: V) -> Result<Vec<FoldResult<M>>, CvError>
where
    M: Send,
    E: Into<BoxError>,
    T: Fn(&[usize]) -> Result<TrainOutcome<M>, E> + Sync,
    V: Fn(&M, &[usize]) -> Result<ClassReport, E> + Sync,
{
    (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let train = plan.training_indices(fold);
            let val = plan.validation_indices(fold);
            if let Some(&index) = val.iter().find(|i| train.binary_search(i).is_ok()) {
                return Err(CvError::Leakage { fold, index });
            }
            let outcome = trainer(&train).map_err(|e| CvError::Trainer {
                fold,
                source: e.into(),
            })?;
            let eval = |idx: &[usize]| {
                evaluator(&outcome.model, idx).map_err(|e| CvError::Evaluator {
                    fold,
                    source: e.into(),
                })
            };
            let train_metrics = eval(&train)?;
            let val_metrics = eval(&val)?;
            Ok(FoldResult {
                fold,
                train_metrics,
                val_metrics,
                model: outcome.model,
                loss_log: outcome.loss_log,
            })
        })
        .collect()
}

/// Highest validation accuracy; ties go to the lowest fold index.
pub fn select_best<M>(results: &[FoldResult<M>]) -> Result<&FoldResult<M>, CvError> {
    results
        .iter()
        .reduce(|best, r| {
            let better = r.val_metrics.accuracy > best.val_metrics.accuracy
                || (r.val_metrics.accuracy == best.val_metrics.accuracy && r.fold < best.fold);
            if better {
                r
            } else {
                best
            }
        })
        .ok_or(CvError::EmptyResults)
}

/// Pointwise mean of the per-fold loss logs.
pub fn average_loss_curves<M>(results: &[FoldResult<M>]) -> Result<Vec<LossPoint>, CvError> {
    let first = results.first().ok_or(CvError::EmptyResults)?;
    let len = first
        .loss_log
        .as_ref()
        .ok_or(CvError::MissingLossLog(first.fold))?
        .len();
    let mut logs = Vec::with_capacity(results.len());
    for r in results {
        let log = r.loss_log.as_ref().ok_or(CvError::MissingLossLog(r.fold))?;
        if log.len() != len {
            return Err(CvError::LengthMismatch {
                fold: r.fold,
                expected: len,
                found: log.len(),
            });
        }
        logs.push(log);
    }
    let n = logs.len() as f64;
    Ok((0..len)
        .map(|e| LossPoint {
            epoch: logs[0][e].epoch,
            train_loss: logs.iter().map(|l| l[e].train_loss).sum::<f64>() / n,
            val_loss: logs.iter().map(|l| l[e].val_loss).sum::<f64>() / n,
        })
        .collect())
}

pub fn loss_curve_csv(points: &[LossPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "val_loss"])
        .expect("in-memory CSV write");
    for p in points {
        w.write_record([p.epoch.to_string(), p.train_loss.to_string(), p.val_loss.to_string()])
            .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub val_accuracy: f64,
    pub report_path: String,
    pub model_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub schema_version: u32,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub folds: Vec<FoldSummary>,
    pub best_fold: usize,
}
