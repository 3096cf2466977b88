//! Raw-pixel kernel SVM benchmark toolkit for multiclass food image
//! classification.
//!
//! The crate covers the whole workflow of a small image benchmark:
//!
//! - [`dataset`]: scan an image tree into a manifest, merge or re-split it.
//! - [`features`]: decode, resize and flatten images into raw-intensity
//!   feature vectors, with an optional binary feature cache.
//! - [`svm`]: a from-scratch soft-margin kernel SVM (SMO dual solver) and
//!   its one-vs-one multiclass ensemble.
//! - [`metrics`]: confusion matrices, per-class precision/recall/F1 and the
//!   macro/weighted aggregates, rendered as text, JSON, CSV or SVG.
//! - [`cv`]: stratified k-fold planning and a generic cross-validation driver.
//! - [`interchange`]: the `.predjsonl` prediction format any classifier can
//!   emit, plus two-system comparison reports.
//! - [`cli`]: the `foodbench` command line front end.
//! - [`synth`]: a synthetic colored-texture dataset generator used by the
//!   examples and the acceptance suite.

pub mod cli;
pub mod cv;
pub mod dataset;
pub mod features;
pub mod interchange;
pub mod metrics;
pub mod svg;
pub mod svm;
pub mod synth;
mod util;

pub use dataset::{ClassLabel, DatasetManifest, SampleRef, Split};
pub use features::{FeatureVector, RasterImage};
pub use interchange::{PredictionFile, PredictionRecord};
pub use metrics::{ClassReport, ConfusionMatrix};
pub use svm::{KernelConfig, SolverConfig, SvmModel};
