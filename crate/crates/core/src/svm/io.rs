//! Model files: one line of JSON metadata followed by a little-endian binary
//! payload.
//!
//! ```text
//! <envelope JSON>\n
//! "FBSV"
//! pool:     n_pool × feature_dim × f64
//! per machine, in envelope order:
//!           n_support × u32   (row in pool)
//!           n_support × f64   (dual coefficient αᵢyᵢ)
//! ```

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelConfig, ResolvedKernel};
use super::multiclass::SvmModel;
use super::smo::{BinarySvm, TrainDiagnostics};
use super::SvmError;
use crate::dataset::ClassLabel;
use crate::util;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
const PAYLOAD_MAGIC: [u8; 4] = *b"FBSV";
const FORMAT_NAME: &str = "foodbench-svm";

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u32,
    format: String,
    kernel: KernelConfig,
    gamma_resolved: f64,
    classes: Vec<String>,
    feature_dim: usize,
    n_pool: usize,
    payload_bytes: u64,
    binaries: Vec<MachineHeader>,
}

#[derive(Serialize, Deserialize)]
struct MachineHeader {
    positive: usize,
    negative: usize,
    n_support: usize,
    bias: f64,
    support_indices: Vec<usize>,
    diagnostics: TrainDiagnostics,
}

fn payload_len(n_pool: usize, dim: usize, machines: impl Iterator<Item = usize>) -> u64 {
    4 + (n_pool * dim * 8) as u64 + machines.map(|n| (n * 12) as u64).sum::<u64>()
}

pub fn model_to_bytes(m: &SvmModel) -> Vec<u8> {
    let envelope = Envelope {
        schema_version: MODEL_SCHEMA_VERSION,
        format: FORMAT_NAME.to_string(),
        kernel: m.kernel_config,
        gamma_resolved: m.kernel.gamma,
        classes: m.classes.iter().map(|c| c.name.clone()).collect(),
        feature_dim: m.feature_dim,
        n_pool: m.pool.nrows(),
        payload_bytes: payload_len(
            m.pool.nrows(),
            m.feature_dim,
            m.binaries.iter().map(BinarySvm::n_support),
        ),
        binaries: m
            .binaries
            .iter()
            .map(|b| MachineHeader {
                positive: b.class_pair.0,
                negative: b.class_pair.1,
                n_support: b.n_support(),
                bias: b.bias,
                support_indices: b.support_indices.clone(),
                diagnostics: b.diagnostics.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec(&envelope).expect("model envelope serializes");
    out.push(b'\n');
    out.extend_from_slice(&PAYLOAD_MAGIC);
    for v in m.pool.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for b in &m.binaries {
        for &r in &b.sv_rows {
            out.extend_from_slice(&(r as u32).to_le_bytes());
        }
        for c in &b.dual_coefs {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SvmError> {
        if self.bytes.len() < n {
            return Err(SvmError::CorruptModel("payload is truncated".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn f64(&mut self) -> Result<f64, SvmError> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn u32(&mut self) -> Result<u32, SvmError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<SvmModel, SvmError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| SvmError::CorruptModel("missing metadata line".into()))?;
    let raw: serde_json::Value = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| SvmError::CorruptModel(format!("metadata is not JSON: {e}")))?;
    let version = raw
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| SvmError::CorruptModel("metadata lacks schema_version".into()))?;
    if version != MODEL_SCHEMA_VERSION as u64 {
        return Err(SvmError::SchemaMismatch {
            found: version as u32,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let env: Envelope = serde_json::from_value(raw)
        .map_err(|e| SvmError::CorruptModel(format!("bad metadata: {e}")))?;
    if env.format != FORMAT_NAME {
        return Err(SvmError::CorruptModel(format!("unknown format {:?}", env.format)));
    }

    let payload = &bytes[newline + 1..];
    let expected = payload_len(env.n_pool, env.feature_dim, env.binaries.iter().map(|b| b.n_support));
    if payload.len() as u64 != expected {
        return Err(SvmError::CorruptModel(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut cur = Cursor { bytes: payload };
    if cur.take(4)? != PAYLOAD_MAGIC {
        return Err(SvmError::CorruptModel("bad payload magic".into()));
    }
    let mut values = Vec::with_capacity(env.n_pool * env.feature_dim);
    for _ in 0..env.n_pool * env.feature_dim {
        values.push(cur.f64()?);
    }
    let pool = Arc::new(
        Array2::from_shape_vec((env.n_pool, env.feature_dim), values)
            .map_err(|e| SvmError::CorruptModel(e.to_string()))?,
    );
    let kernel = ResolvedKernel {
        kind: env.kernel.kind,
        gamma: env.gamma_resolved,
        degree: env.kernel.degree,
        coef0: env.kernel.coef0,
    };
    let mut binaries = Vec::with_capacity(env.binaries.len());
    for h in env.binaries {
        if h.support_indices.len() != h.n_support {
            return Err(SvmError::CorruptModel("support index count mismatch".into()));
        }
        let mut sv_rows = Vec::with_capacity(h.n_support);
        for _ in 0..h.n_support {
            let r = cur.u32()? as usize;
            if r >= env.n_pool {
                return Err(SvmError::CorruptModel(format!("pool row {r} out of range")));
            }
            sv_rows.push(r);
        }
        let dual_coefs = (0..h.n_support).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        binaries.push(BinarySvm {
            pool: Arc::clone(&pool),
            sv_rows,
            dual_coefs,
            bias: h.bias,
            kernel,
            class_pair: (h.positive, h.negative),
            support_indices: h.support_indices,
            diagnostics: h.diagnostics,
        });
    }
    let classes = env
        .classes
        .into_iter()
        .enumerate()
        .map(|(id, name)| ClassLabel { id, name })
        .collect();
    SvmModel::from_parts(classes, env.kernel, kernel, env.feature_dim, pool, binaries)
        .map_err(|e| SvmError::CorruptModel(e.to_string()))
}

pub fn save_model(m: &SvmModel, path: &Path) -> Result<(), SvmError> {
    util::write_atomic(path, &model_to_bytes(m)).map_err(|source| SvmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SvmModel, SvmError> {
    let bytes = std::fs::read(path).map_err(|source| SvmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::{train_multiclass, SolverConfig};
    use ndarray::array;

    fn two_point_model() -> SvmModel {
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        train_multiclass(
            x.view(),
            &[1, 0],
            &ClassLabel::indexed(2),
            &KernelConfig::linear(),
            &SolverConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = two_point_model();
        let back = model_from_bytes(&model_to_bytes(&m)).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.binaries().iter().zip(back.binaries()) {
            assert_eq!(a.bias.to_bits(), b.bias.to_bits());
            let bits = |v: &[f64]| v.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.dual_coefs), bits(&b.dual_coefs));
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = model_to_bytes(&two_point_model());
        for cut in [bytes.len() - 1, bytes.len() / 2, 3] {
            assert!(matches!(
                model_from_bytes(&bytes[..cut]),
                Err(SvmError::CorruptModel(_))
            ));
        }
    }

    #[test]
    fn older_schema_is_named() {
        let bytes = model_to_bytes(&two_point_model());
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let old = text.replacen("\"schema_version\":1", "\"schema_version\":0", 1);
        match model_from_bytes(old.as_bytes()) {
            Err(e @ SvmError::SchemaMismatch { found: 0, expected: 1 }) => {
                let msg = e.to_string();
                assert!(msg.contains('0') && msg.contains('1'));
            }
            other => panic!("expected schema mismatch, got {other:?}"),
        }
    }
}
