use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{kernel_eval, KernelCache, ResolvedKernel};
use super::{SolverConfig, SvmError};

// Curvature floor for pairs of identical points.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// `max{-yᵢ∇ᵢ : i ∈ I_up} − min{-yⱼ∇ⱼ : j ∈ I_low}` at exit.
    pub max_violation: f64,
    pub dual_objective: f64,
    pub n_train: usize,
}

/// A trained two-class machine. Decision values are positive for
/// `class_pair.0` and negative for `class_pair.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub(crate) pool: Arc<Array2<f64>>,
    pub(crate) sv_rows: Vec<usize>,
    /// `αᵢ yᵢ` per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: ResolvedKernel,
    pub class_pair: (usize, usize),
    /// Row index of each support vector in the training matrix.
    pub support_indices: Vec<usize>,
    pub diagnostics: TrainDiagnostics,
}

impl BinarySvm {
    pub fn n_support(&self) -> usize {
        self.sv_rows.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.pool.ncols()
    }

    pub fn support_vector(&self, k: usize) -> &[f64] {
        let r = self.sv_rows[k];
        &self.pool.as_slice().expect("pool is standard layout")[r * self.pool.ncols()..(r + 1) * self.pool.ncols()]
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.converged
    }

    /// Decision value given kernel evaluations of the input against every
    /// row of the shared support-vector pool.
    pub(crate) fn decision_from_pool(&self, pool_kernel: &[f64]) -> f64 {
        self.sv_rows
            .iter()
            .zip(&self.dual_coefs)
            .map(|(&r, c)| c * pool_kernel[r])
            .sum::<f64>()
            + self.bias
    }
}

/// `Σ coefᵢ K(svᵢ, x) + bias`.
pub fn binary_decision(m: &BinarySvm, x: &[f64]) -> Result<f64, SvmError> {
    if x.len() != m.feature_dim() {
        return Err(SvmError::DimensionMismatch {
            expected: m.feature_dim(),
            found: x.len(),
        });
    }
    Ok((0..m.n_support())
        .map(|k| m.dual_coefs[k] * kernel_eval(m.support_vector(k), x, &m.kernel))
        .sum::<f64>()
        + m.bias)
}

pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub diagnostics: TrainDiagnostics,
}

fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y < 0.0 && alpha < c) || (y > 0.0 && alpha > 0.0)
}

/// SMO on the rows `idx` of `x` with labels `y` (aligned with `idx`).
pub(crate) fn solve(
    x: ArrayView2<'_, f64>,
    idx: &[usize],
    y: &[f64],
    kernel: ResolvedKernel,
    solver: &SolverConfig,
) -> Solution {
    let n = idx.len();
    let c = solver.c;
    let tol = solver.tolerance;
    let max_iter = solver.max_passes.saturating_mul(n);
    let mut cache = KernelCache::new(x, idx, kernel, solver.cache_bytes);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(solver.seed));

    let mut alpha = vec![0.0f64; n];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0f64; n];
    let mut iterations = 0usize;
    let mut gap;
    let converged = loop {
        let mut up = (f64::NEG_INFINITY, usize::MAX);
        let mut low = (f64::INFINITY, usize::MAX);
        for &t in &order {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], c) && v > up.0 {
                up = (v, t);
            }
            if in_low(alpha[t], y[t], c) && v < low.0 {
                low = (v, t);
            }
        }
        if up.1 == usize::MAX || low.1 == usize::MAX {
            gap = 0.0;
            break true;
        }
        gap = up.0 - low.0;
        if gap <= tol {
            break true;
        }
        if iterations >= max_iter {
            break false;
        }
        iterations += 1;

        let (i, j) = (up.1, low.1);
        let ki = cache.row(i);
        let kj = cache.row(j);
        let (yi, yj) = (y[i], y[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = yi * yj * ki[j];
        if yi != yj {
            let quad = (cache.diag(i) + cache.diag(j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (cache.diag(i) + cache.diag(j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = (alpha[i] - old_i) * yi;
        let dj = (alpha[j] - old_j) * yj;
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    };

    let bias = bias_from_gradient(&alpha, &grad, y, c);
    let dual_objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>();
    Solution {
        alpha,
        bias,
        diagnostics: TrainDiagnostics {
            iterations,
            converged,
            max_violation: gap,
            dual_objective,
            n_train: n,
        },
    }
}

/// Mean of `−yᵢ∇ᵢ` over free multipliers; without free multipliers, the
/// midpoint of the interval allowed by the bounded ones.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    };
    -rho
}

fn check_inputs(x: ArrayView2<'_, f64>, idx: &[usize], y: &[f64]) -> Result<(), SvmError> {
    if idx.len() != y.len() {
        return Err(SvmError::LengthMismatch(y.len(), idx.len()));
    }
    if idx.len() < 2 {
        return Err(SvmError::TooFewSamples(idx.len()));
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidLabel(bad));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClassInput);
    }
    if let Some(&g) = idx.iter().find(|&&g| g >= x.nrows()) {
        return Err(SvmError::LengthMismatch(g + 1, x.nrows()));
    }
    Ok(())
}

/// Trains on the rows `idx` of `x`; `y[k]` is the ±1 label of row `idx[k]`.
/// `support_indices` of the result refer to rows of `x`.
pub fn smo_train_subset(
    x: ArrayView2<'_, f64>,
    idx: &[usize],
    y: &[f64],
    kernel: ResolvedKernel,
    solver: &SolverConfig,
) -> Result<BinarySvm, SvmError> {
    solver.validate()?;
    check_inputs(x, idx, y)?;
    let x = x.as_standard_layout();
    let sol = solve(x.view(), idx, y, kernel, solver);
    let support: Vec<usize> = (0..idx.len()).filter(|&k| sol.alpha[k] > 0.0).collect();
    let support_indices: Vec<usize> = support.iter().map(|&k| idx[k]).collect();
    let dual_coefs: Vec<f64> = support.iter().map(|&k| sol.alpha[k] * y[k]).collect();
    let pool = x.select(ndarray::Axis(0), &support_indices);
    let model = BinarySvm {
        sv_rows: (0..support.len()).collect(),
        pool: Arc::new(pool),
        dual_coefs,
        bias: sol.bias,
        kernel,
        class_pair: (1, 0),
        support_indices,
        diagnostics: sol.diagnostics,
    };
    if model.converged() {
        Ok(model)
    } else {
        Err(SvmError::ConvergenceFailure {
            model: Box::new(model),
        })
    }
}

/// Trains a binary machine on every row of `x`. Labels must be ±1 with both
/// signs present. A run that exhausts its iteration budget returns
/// [`SvmError::ConvergenceFailure`] carrying the partially optimized model.
pub fn smo_train(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    kernel: ResolvedKernel,
    solver: &SolverConfig,
) -> Result<BinarySvm, SvmError> {
    let idx: Vec<usize> = (0..x.nrows()).collect();
    if y.len() != x.nrows() {
        return Err(SvmError::LengthMismatch(y.len(), x.nrows()));
    }
    smo_train_subset(x, &idx, y, kernel, solver)
}
