//! Soft-margin kernel support vector machines.
//!
//! [`smo_train`] solves the binary dual problem
//!
//! ```text
//! maximize   Σ αᵢ − ½ Σᵢ Σⱼ αᵢ αⱼ yᵢ yⱼ K(xᵢ, xⱼ)
//! subject to 0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0
//! ```
//!
//! with sequential minimal optimization over maximal violating pairs.
//! [`train_multiclass`] composes one binary machine per unordered class pair
//! and [`SvmModel::predict`] combines them by majority vote.

mod io;
mod kernel;
mod multiclass;
mod smo;

use std::path::PathBuf;

use thiserror::Error;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_SCHEMA_VERSION};
pub use kernel::{kernel_eval, resolve_gamma, Gamma, KernelConfig, KernelKind, ResolvedKernel};
pub use multiclass::{train_multiclass, Prediction, SvmModel};
pub use smo::{binary_decision, smo_train, smo_train_subset, BinarySvm, TrainDiagnostics};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Box constraint on the dual variables.
    pub c: f64,
    /// Stop once the maximal KKT violation drops to this value.
    pub tolerance: f64,
    /// Iteration budget is `max_passes × n`.
    pub max_passes: usize,
    /// Memory budget for cached kernel rows.
    pub cache_bytes: usize,
    /// Breaks exact ties in working-set selection.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c: 1.0,
            tolerance: 1e-3,
            max_passes: 1000,
            cache_bytes: 256 << 20,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidConfig("max_passes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training needs both +1 and -1 labels")]
    SingleClassInput,
    #[error("training needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("label {0} is not +1 or -1")]
    InvalidLabel(f64),
    #[error("{0} labels for {1} feature rows")]
    LengthMismatch(usize, usize),
    #[error("multiclass training needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0:?} has no training samples")]
    EmptyClass(String),
    #[error("class id {id} out of range for {k} classes")]
    ClassOutOfRange { id: usize, k: usize },
    #[error("expected feature dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(
        "solver stopped after {} iterations with KKT violation {:.3e}",
        .model.diagnostics.iterations,
        .model.diagnostics.max_violation
    )]
    ConvergenceFailure { model: Box<BinarySvm> },
    #[error("pair ({positive}, {negative}): {source}")]
    Pair {
        positive: usize,
        negative: usize,
        #[source]
        source: Box<SvmError>,
    },
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
