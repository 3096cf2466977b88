use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::SvmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
    Polynomial,
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rbf" => Ok(KernelKind::Rbf),
            "linear" => Ok(KernelKind::Linear),
            "polynomial" | "poly" => Ok(KernelKind::Polynomial),
            _ => Err(format!("unknown kernel {s:?}")),
        }
    }
}

/// Kernel width: an explicit value or `scale`, resolved against the
/// training matrix as `1 / (d · Var(X))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Scale,
    Value(f64),
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Scale => f.write_str("scale"),
            Gamma::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "scale" {
            return Ok(Gamma::Scale);
        }
        s.parse::<f64>()
            .map(Gamma::Value)
            .map_err(|_| format!("gamma must be \"scale\" or a number, got {s:?}"))
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Gamma::Scale => s.serialize_str("scale"),
            Gamma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Gamma::Value(v)),
            Raw::Name(n) if n == "scale" => Ok(Gamma::Scale),
            Raw::Name(n) => Err(de::Error::custom(format!("unknown gamma {n:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub gamma: Gamma,
    /// Only used by the polynomial kernel.
    pub degree: u32,
    pub coef0: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelKind::Rbf,
            gamma: Gamma::Scale,
            degree: 3,
            coef0: 0.0,
        }
    }
}

impl KernelConfig {
    pub fn linear() -> Self {
        KernelConfig {
            kind: KernelKind::Linear,
            ..Default::default()
        }
    }

    pub fn rbf(gamma: Gamma) -> Self {
        KernelConfig {
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if let Gamma::Value(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(SvmError::InvalidConfig(format!("gamma must be positive, got {g}")));
            }
        }
        if self.kind == KernelKind::Polynomial && self.degree == 0 {
            return Err(SvmError::InvalidConfig("polynomial degree must be at least 1".into()));
        }
        Ok(())
    }

    /// Fixes gamma against `features` (rows are samples).
    pub fn resolve(&self, features: ArrayView2<'_, f64>) -> Result<ResolvedKernel, SvmError> {
        self.validate()?;
        Ok(ResolvedKernel {
            kind: self.kind,
            gamma: resolve_gamma(features, self),
            degree: self.degree,
            coef0: self.coef0,
        })
    }
}

/// A kernel whose gamma is a concrete number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedKernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl ResolvedKernel {
    pub fn linear() -> Self {
        ResolvedKernel {
            kind: KernelKind::Linear,
            gamma: 1.0,
            degree: 3,
            coef0: 0.0,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        ResolvedKernel {
            kind: KernelKind::Rbf,
            gamma,
            degree: 3,
            coef0: 0.0,
        }
    }
}

/// `1 / (d · var)` with the population variance pooled over every entry of
/// the matrix, falling back to `1 / d` for constant data. Explicit gamma
/// values pass through unchanged.
pub fn resolve_gamma(features: ArrayView2<'_, f64>, cfg: &KernelConfig) -> f64 {
    if let Gamma::Value(g) = cfg.gamma {
        return g;
    }
    let d = features.ncols().max(1) as f64;
    let count = features.len();
    if count == 0 {
        return 1.0 / d;
    }
    let first = features.iter().next().copied().unwrap_or(0.0);
    if features.iter().all(|&v| v == first) {
        return 1.0 / d;
    }
    let mean = features.iter().sum::<f64>() / count as f64;
    let var = features.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

fn dot(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

pub fn kernel_eval(x: &[f64], z: &[f64], k: &ResolvedKernel) -> f64 {
    debug_assert_eq!(x.len(), z.len());
    match k.kind {
        KernelKind::Rbf => {
            let dist2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
            (-k.gamma * dist2).exp()
        }
        KernelKind::Linear => dot(x, z),
        KernelKind::Polynomial => (k.gamma * dot(x, z) + k.coef0).powi(k.degree as i32),
    }
}

// Rows shorter than this are computed serially.
const PARALLEL_ROW_WORK: usize = 1 << 16;

/// Kernel rows over a subset of training rows with least-recently-used
/// eviction.
pub(crate) struct KernelCache<'a> {
    x: ArrayView2<'a, f64>,
    idx: &'a [usize],
    kernel: ResolvedKernel,
    rows: Vec<Option<Arc<[f64]>>>,
    last_used: Vec<u64>,
    diag: Vec<f64>,
    capacity: usize,
    cached: usize,
    clock: u64,
}

impl<'a> KernelCache<'a> {
    pub(crate) fn new(
        x: ArrayView2<'a, f64>,
        idx: &'a [usize],
        kernel: ResolvedKernel,
        cache_bytes: usize,
    ) -> Self {
        let n = idx.len();
        let diag = idx
            .iter()
            .map(|&g| {
                let r = x.row(g);
                let r = r.as_slice().expect("feature rows are contiguous");
                kernel_eval(r, r, &kernel)
            })
            .collect();
        let row_bytes = (n * std::mem::size_of::<f64>()).max(1);
        KernelCache {
            x,
            idx,
            kernel,
            rows: vec![None; n],
            last_used: vec![0; n],
            diag,
            capacity: (cache_bytes / row_bytes).max(2),
            cached: 0,
            clock: 0,
        }
    }

    pub(crate) fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn compute_row(&self, i: usize) -> Arc<[f64]> {
        let xi = self.x.row(self.idx[i]);
        let xi = xi.as_slice().expect("feature rows are contiguous");
        let eval = |&g: &usize| {
            let xj = self.x.row(g);
            kernel_eval(xi, xj.as_slice().expect("feature rows are contiguous"), &self.kernel)
        };
        if self.idx.len() * self.x.ncols() >= PARALLEL_ROW_WORK {
            self.idx.par_iter().map(eval).collect::<Vec<_>>().into()
        } else {
            self.idx.iter().map(eval).collect::<Vec<_>>().into()
        }
    }

    pub(crate) fn row(&mut self, i: usize) -> Arc<[f64]> {
        self.clock += 1;
        self.last_used[i] = self.clock;
        if let Some(r) = &self.rows[i] {
            return Arc::clone(r);
        }
        if self.cached >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&k| self.rows[k].is_some() && k != i)
                .min_by_key(|&k| self.last_used[k]);
            if let Some(v) = victim {
                self.rows[v] = None;
                self.cached -= 1;
            }
        }
        let r = self.compute_row(i);
        self.rows[i] = Some(Arc::clone(&r));
        self.cached += 1;
        r
    }
}
