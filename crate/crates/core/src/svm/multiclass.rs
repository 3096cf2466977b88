use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::kernel::{kernel_eval, KernelConfig, ResolvedKernel};
use super::smo::{smo_train_subset, BinarySvm};
use super::{SolverConfig, SvmError};
use crate::dataset::ClassLabel;

/// One-vs-one ensemble: one [`BinarySvm`] per unordered class pair, sharing
/// a single pool of support vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub(crate) binaries: Vec<BinarySvm>,
    pub(crate) classes: Vec<ClassLabel>,
    pub(crate) kernel_config: KernelConfig,
    pub(crate) kernel: ResolvedKernel,
    pub(crate) feature_dim: usize,
    pub(crate) pool: Arc<Array2<f64>>,
}

/// Outcome of [`SvmModel::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub votes: Vec<u32>,
    /// `votes[c] + confidence[c] / (1 + Σ confidence)`, where `confidence[c]`
    /// sums `|decision|` over the machines that voted for `c`. The fractional
    /// part is below one, so the ordering is votes first, then confidence.
    pub scores: Vec<f64>,
    /// Raw decision value of every binary machine, in model order.
    pub decisions: Vec<f64>,
}

impl SvmModel {
    /// Packages trained binary machines. Support vectors are pooled by their
    /// training row index, so all machines must come from the same training
    /// matrix.
    pub fn new(
        classes: Vec<ClassLabel>,
        kernel_config: KernelConfig,
        kernel: ResolvedKernel,
        feature_dim: usize,
        binaries: Vec<BinarySvm>,
    ) -> Result<Self, SvmError> {
        let mut rows: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for (b, m) in binaries.iter().enumerate() {
            if m.feature_dim() != feature_dim && m.n_support() > 0 {
                return Err(SvmError::DimensionMismatch {
                    expected: feature_dim,
                    found: m.feature_dim(),
                });
            }
            for (k, &g) in m.support_indices.iter().enumerate() {
                rows.entry(g).or_insert((b, k));
            }
        }
        let slot: BTreeMap<usize, usize> = rows.keys().enumerate().map(|(s, &g)| (g, s)).collect();
        let mut pool = Array2::zeros((rows.len(), feature_dim));
        for (s, &(b, k)) in rows.values().enumerate() {
            pool.row_mut(s)
                .assign(&ndarray::ArrayView1::from(binaries[b].support_vector(k)));
        }
        let pool = Arc::new(pool);
        let binaries = binaries
            .into_iter()
            .map(|m| BinarySvm {
                sv_rows: m.support_indices.iter().map(|g| slot[g]).collect(),
                pool: Arc::clone(&pool),
                ..m
            })
            .collect();
        Self::from_parts(classes, kernel_config, kernel, feature_dim, pool, binaries)
    }

    pub(crate) fn from_parts(
        classes: Vec<ClassLabel>,
        kernel_config: KernelConfig,
        kernel: ResolvedKernel,
        feature_dim: usize,
        pool: Arc<Array2<f64>>,
        binaries: Vec<BinarySvm>,
    ) -> Result<Self, SvmError> {
        let k = classes.len();
        if k < 2 {
            return Err(SvmError::TooFewClasses(k));
        }
        let mut pairs = BTreeSet::new();
        for m in &binaries {
            let (p, n) = m.class_pair;
            for id in [p, n] {
                if id >= k {
                    return Err(SvmError::ClassOutOfRange { id, k });
                }
            }
            if p == n || !pairs.insert((p.min(n), p.max(n))) {
                return Err(SvmError::InvalidConfig(format!(
                    "class pair ({p}, {n}) is degenerate or repeated"
                )));
            }
        }
        if pairs.len() != k * (k - 1) / 2 {
            return Err(SvmError::InvalidConfig(format!(
                "{} binary machines for {k} classes, expected {}",
                pairs.len(),
                k * (k - 1) / 2
            )));
        }
        Ok(SvmModel {
            binaries,
            classes,
            kernel_config,
            kernel,
            feature_dim,
            pool,
        })
    }

    pub fn binaries(&self) -> &[BinarySvm] {
        &self.binaries
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn kernel_config(&self) -> &KernelConfig {
        &self.kernel_config
    }

    pub fn kernel(&self) -> &ResolvedKernel {
        &self.kernel
    }

    pub fn gamma_resolved(&self) -> f64 {
        self.kernel.gamma
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Number of distinct support vectors across all machines.
    pub fn n_support(&self) -> usize {
        self.pool.nrows()
    }

    pub fn converged(&self) -> bool {
        self.binaries.iter().all(BinarySvm::converged)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, SvmError> {
        if x.len() != self.feature_dim {
            return Err(SvmError::DimensionMismatch {
                expected: self.feature_dim,
                found: x.len(),
            });
        }
        let pool_kernel: Vec<f64> = self
            .pool
            .outer_iter()
            .map(|sv| kernel_eval(sv.as_slice().expect("pool is standard layout"), x, &self.kernel))
            .collect();
        let k = self.classes.len();
        let mut votes = vec![0u32; k];
        let mut confidence = vec![0.0f64; k];
        let mut decisions = Vec::with_capacity(self.binaries.len());
        for m in &self.binaries {
            let d = m.decision_from_pool(&pool_kernel);
            decisions.push(d);
            // an exact zero is an abstention
            let winner = if d > 0.0 {
                m.class_pair.0
            } else if d < 0.0 {
                m.class_pair.1
            } else {
                continue;
            };
            votes[winner] += 1;
            confidence[winner] += d.abs();
        }
        let mut class = 0;
        for c in 1..k {
            let better = votes[c] > votes[class]
                || (votes[c] == votes[class] && confidence[c] > confidence[class]);
            if better {
                class = c;
            }
        }
        let norm = 1.0 + confidence.iter().sum::<f64>();
        let scores = votes
            .iter()
            .zip(&confidence)
            .map(|(&v, &conf)| v as f64 + conf / norm)
            .collect();
        Ok(Prediction {
            class,
            votes,
            scores,
            decisions,
        })
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Prediction>, SvmError> {
        let x = x.as_standard_layout();
        (0..x.nrows())
            .into_par_iter()
            .map(|i| self.predict(x.row(i).as_slice().expect("standard layout")))
            .collect()
    }
}

/// Trains `K·(K−1)/2` binary machines on the pairwise subsets of `x`.
///
/// Gamma is resolved once on the whole matrix. In the machine for classes
/// `i < j`, class `j` is the positive side. A machine that runs out of its
/// iteration budget is kept and flagged; check [`SvmModel::converged`].
pub fn train_multiclass(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    classes: &[ClassLabel],
    kernel: &KernelConfig,
    solver: &SolverConfig,
) -> Result<SvmModel, SvmError> {
    let k = classes.len();
    if k < 2 {
        return Err(SvmError::TooFewClasses(k));
    }
    if labels.len() != x.nrows() {
        return Err(SvmError::LengthMismatch(labels.len(), x.nrows()));
    }
    if let Some(&id) = labels.iter().find(|&&l| l >= k) {
        return Err(SvmError::ClassOutOfRange { id, k });
    }
    for c in classes {
        if !labels.contains(&c.id) {
            return Err(SvmError::EmptyClass(c.name.clone()));
        }
    }
    solver.validate()?;
    let x = x.as_standard_layout();
    let resolved = kernel.resolve(x.view())?;

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let binaries = pairs
        .par_iter()
        .map(|&(neg, pos)| {
            let idx: Vec<usize> = (0..labels.len())
                .filter(|&r| labels[r] == neg || labels[r] == pos)
                .collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&r| if labels[r] == pos { 1.0 } else { -1.0 })
                .collect();
            let model = match smo_train_subset(x.view(), &idx, &y, resolved, solver) {
                Ok(m) => m,
                Err(SvmError::ConvergenceFailure { model }) => *model,
                Err(e) => {
                    return Err(SvmError::Pair {
                        positive: pos,
                        negative: neg,
                        source: Box::new(e),
                    })
                }
            };
            Ok(BinarySvm {
                class_pair: (pos, neg),
                ..model
            })
        })
        .collect::<Result<Vec<_>, SvmError>>()?;

    SvmModel::new(classes.to_vec(), *kernel, resolved, x.ncols(), binaries)
}
