//! The `.predjsonl` prediction interchange format.
//!
//! Line 1 is a JSON header `{schema_version, producer, classes, created_at?}`;
//! every following line is one record
//! `{sample_id, actual, predicted, scores?}`. Unknown fields on the header or
//! on records are kept and written back unchanged.

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dataset::ClassLabel;
use crate::metrics::{self, Averages, ClassReport, MetricsError, ReportFormat};
use crate::svg;
use crate::util::{self, format_half_up, format_percent};

pub const PREDICTIONS_SCHEMA_VERSION: u32 = 1;
pub const COMPARISON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("line {line}: schema version {found} is not supported (expected {expected})")]
    SchemaVersionUnsupported { line: usize, found: u64, expected: u32 },
    #[error("line {line}: malformed: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("header: {0}")]
    InvalidHeader(String),
    #[error("line {line}: duplicate sample id {sample_id:?}")]
    DuplicateSampleId { line: usize, sample_id: String },
    #[error("line {line}: record {sample_id:?} uses unknown class {name:?}")]
    UnknownClassName {
        line: usize,
        sample_id: String,
        name: String,
    },
    #[error("line {line}: record {sample_id:?}: {message}")]
    InvalidScores {
        line: usize,
        sample_id: String,
        message: String,
    },
    #[error("sample sets differ: {} only in first ({}), {} only in second ({})",
        .only_in_a.len(), preview(.only_in_a), .only_in_b.len(), preview(.only_in_b))]
    SampleSetMismatch {
        only_in_a: Vec<String>,
        only_in_b: Vec<String>,
    },
    #[error("class sets differ: only in first {only_in_a:?}, only in second {only_in_b:?}")]
    ClassSetMismatch {
        only_in_a: Vec<String>,
        only_in_b: Vec<String>,
    },
    #[error("sample {sample_id:?} has actual class {a:?} in the first file and {b:?} in the second")]
    GroundTruthMismatch { sample_id: String, a: String, b: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn preview(ids: &[String]) -> String {
    let mut s: Vec<&str> = ids.iter().take(5).map(String::as_str).collect();
    if ids.len() > 5 {
        s.push("...");
    }
    s.join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionHeader {
    pub schema_version: u32,
    pub producer: String,
    pub classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PredictionHeader {
    pub fn new(producer: impl Into<String>, classes: Vec<String>) -> Self {
        PredictionHeader {
            schema_version: PREDICTIONS_SCHEMA_VERSION,
            producer: producer.into(),
            classes,
            created_at: None,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub actual: String,
    pub predicted: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<IndexMap<String, f64>>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PredictionRecord {
    pub fn new(sample_id: impl Into<String>, actual: impl Into<String>, predicted: impl Into<String>) -> Self {
        PredictionRecord {
            sample_id: sample_id.into(),
            actual: actual.into(),
            predicted: predicted.into(),
            scores: None,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub header: PredictionHeader,
    pub records: Vec<PredictionRecord>,
}

fn validate_header(h: &PredictionHeader) -> Result<(), InterchangeError> {
    if h.classes.is_empty() {
        return Err(InterchangeError::InvalidHeader("class list is empty".into()));
    }
    let mut seen = HashSet::new();
    for c in &h.classes {
        if !seen.insert(c) {
            return Err(InterchangeError::InvalidHeader(format!("class {c:?} listed twice")));
        }
    }
    Ok(())
}

fn validate_record(
    r: &PredictionRecord,
    line: usize,
    classes: &HashSet<&str>,
) -> Result<(), InterchangeError> {
    for name in [&r.actual, &r.predicted] {
        if !classes.contains(name.as_str()) {
            return Err(InterchangeError::UnknownClassName {
                line,
                sample_id: r.sample_id.clone(),
                name: name.clone(),
            });
        }
    }
    if let Some(scores) = &r.scores {
        let bad = |message: String| InterchangeError::InvalidScores {
            line,
            sample_id: r.sample_id.clone(),
            message,
        };
        for (name, v) in scores {
            if !classes.contains(name.as_str()) {
                return Err(InterchangeError::UnknownClassName {
                    line,
                    sample_id: r.sample_id.clone(),
                    name: name.clone(),
                });
            }
            if !v.is_finite() {
                return Err(bad(format!("score for {name:?} is not finite")));
            }
        }
        let best = scores.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        match scores.get(&r.predicted) {
            Some(&v) if v >= best => {}
            _ => {
                return Err(bad(format!(
                    "predicted class {:?} does not carry the highest score",
                    r.predicted
                )))
            }
        }
    }
    Ok(())
}

impl PredictionFile {
    pub fn new(header: PredictionHeader, records: Vec<PredictionRecord>) -> Result<Self, InterchangeError> {
        let f = PredictionFile { header, records };
        f.validate()?;
        Ok(f)
    }

    /// Checks every invariant the reader enforces. Line numbers in errors
    /// refer to the serialized layout.
    pub fn validate(&self) -> Result<(), InterchangeError> {
        if self.header.schema_version != PREDICTIONS_SCHEMA_VERSION {
            return Err(InterchangeError::SchemaVersionUnsupported {
                line: 1,
                found: self.header.schema_version as u64,
                expected: PREDICTIONS_SCHEMA_VERSION,
            });
        }
        validate_header(&self.header)?;
        let classes: HashSet<&str> = self.header.classes.iter().map(String::as_str).collect();
        let mut ids = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            if !ids.insert(r.sample_id.as_str()) {
                return Err(InterchangeError::DuplicateSampleId {
                    line,
                    sample_id: r.sample_id.clone(),
                });
            }
            validate_record(r, line, &classes)?;
        }
        Ok(())
    }

    /// Labels in header order.
    pub fn class_labels(&self) -> Vec<ClassLabel> {
        self.header
            .classes
            .iter()
            .enumerate()
            .map(|(id, name)| ClassLabel {
                id,
                name: name.clone(),
            })
            .collect()
    }

    fn id_pairs(&self, classes: &[String]) -> Vec<(usize, usize)> {
        let index = |name: &str| {
            classes
                .iter()
                .position(|c| c == name)
                .expect("record classes are validated against the header")
        };
        self.records
            .iter()
            .map(|r| (index(&r.actual), index(&r.predicted)))
            .collect()
    }

    /// Classification report over all records, classes in header order.
    pub fn evaluate(&self) -> Result<ClassReport, InterchangeError> {
        Ok(metrics::evaluate(
            &self.id_pairs(&self.header.classes),
            &self.class_labels(),
        )?)
    }

    fn evaluate_with(&self, classes: &[String]) -> Result<ClassReport, InterchangeError> {
        let labels: Vec<ClassLabel> = classes
            .iter()
            .enumerate()
            .map(|(id, name)| ClassLabel {
                id,
                name: name.clone(),
            })
            .collect();
        Ok(metrics::evaluate(&self.id_pairs(classes), &labels)?)
    }
}

pub fn write_predictions<W: Write>(f: &PredictionFile, mut w: W) -> Result<(), InterchangeError> {
    f.validate()?;
    let io = |source| InterchangeError::Io {
        path: PathBuf::from("<writer>"),
        source,
    };
    let header = serde_json::to_string(&f.header).expect("header serializes");
    writeln!(w, "{header}").map_err(io)?;
    for r in &f.records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<PredictionFile, InterchangeError> {
    let io = |source| InterchangeError::Io {
        path: PathBuf::from("<reader>"),
        source,
    };
    let mut header: Option<PredictionHeader> = None;
    let mut classes: HashSet<String> = HashSet::new();
    let mut ids: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| InterchangeError::Malformed {
            line: line_no,
            message: e.to_string(),
        };
        match &header {
            None => {
                let raw: Value = serde_json::from_str(&line).map_err(malformed)?;
                let version = raw.get("schema_version").and_then(Value::as_u64).ok_or(
                    InterchangeError::Malformed {
                        line: line_no,
                        message: "header lacks an integer schema_version".into(),
                    },
                )?;
                if version != PREDICTIONS_SCHEMA_VERSION as u64 {
                    return Err(InterchangeError::SchemaVersionUnsupported {
                        line: line_no,
                        found: version,
                        expected: PREDICTIONS_SCHEMA_VERSION,
                    });
                }
                let h: PredictionHeader = serde_json::from_value(raw).map_err(malformed)?;
                validate_header(&h)?;
                classes = h.classes.iter().cloned().collect();
                header = Some(h);
            }
            Some(_) => {
                let r: PredictionRecord = serde_json::from_str(&line).map_err(malformed)?;
                if !ids.insert(r.sample_id.clone()) {
                    return Err(InterchangeError::DuplicateSampleId {
                        line: line_no,
                        sample_id: r.sample_id,
                    });
                }
                let names: HashSet<&str> = classes.iter().map(String::as_str).collect();
                validate_record(&r, line_no, &names)?;
                records.push(r);
            }
        }
    }
    let header = header.ok_or(InterchangeError::MissingHeader)?;
    Ok(PredictionFile { header, records })
}

pub fn save_predictions(f: &PredictionFile, path: &Path) -> Result<(), InterchangeError> {
    let mut buf = Vec::new();
    write_predictions(f, &mut buf)?;
    util::write_atomic(path, &buf).map_err(|source| InterchangeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_predictions(path: &Path) -> Result<PredictionFile, InterchangeError> {
    let file = std::fs::File::open(path).map_err(|source| InterchangeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_predictions(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<Averages> for MetricDelta {
    fn from(a: Averages) -> Self {
        MetricDelta {
            precision: a.precision,
            recall: a.recall,
            f1: a.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub systems: [(String, ClassReport); 2],
    /// First system minus second, per class in the first file's order.
    pub per_class_delta: Vec<(String, MetricDelta)>,
    pub accuracy_delta: f64,
    pub macro_delta: MetricDelta,
    pub weighted_delta: MetricDelta,
    pub common_support: usize,
}

impl ComparisonReport {
    pub fn delta_for(&self, class: &str) -> Option<MetricDelta> {
        self.per_class_delta
            .iter()
            .find(|(n, _)| n == class)
            .map(|(_, d)| *d)
    }
}

fn sorted_difference(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> Vec<String> {
    a.difference(b).map(|s| s.to_string()).collect()
}

/// Evaluates both files on the same sample set and reports `a − b`.
pub fn compare(a: &PredictionFile, b: &PredictionFile) -> Result<ComparisonReport, InterchangeError> {
    let ca: BTreeSet<&str> = a.header.classes.iter().map(String::as_str).collect();
    let cb: BTreeSet<&str> = b.header.classes.iter().map(String::as_str).collect();
    if ca != cb {
        return Err(InterchangeError::ClassSetMismatch {
            only_in_a: sorted_difference(&ca, &cb),
            only_in_b: sorted_difference(&cb, &ca),
        });
    }
    let sa: BTreeSet<&str> = a.records.iter().map(|r| r.sample_id.as_str()).collect();
    let sb: BTreeSet<&str> = b.records.iter().map(|r| r.sample_id.as_str()).collect();
    if sa != sb {
        return Err(InterchangeError::SampleSetMismatch {
            only_in_a: sorted_difference(&sa, &sb),
            only_in_b: sorted_difference(&sb, &sa),
        });
    }
    let truth_b: std::collections::HashMap<&str, &str> = b
        .records
        .iter()
        .map(|r| (r.sample_id.as_str(), r.actual.as_str()))
        .collect();
    for r in &a.records {
        let other = truth_b[r.sample_id.as_str()];
        if other != r.actual {
            return Err(InterchangeError::GroundTruthMismatch {
                sample_id: r.sample_id.clone(),
                a: r.actual.clone(),
                b: other.to_string(),
            });
        }
    }

    let order = &a.header.classes;
    let ra = a.evaluate_with(order)?;
    let rb = b.evaluate_with(order)?;
    let per_class_delta = ra
        .per_class
        .iter()
        .zip(&rb.per_class)
        .map(|(x, y)| {
            (
                x.label.name.clone(),
                MetricDelta {
                    precision: x.precision - y.precision,
                    recall: x.recall - y.recall,
                    f1: x.f1 - y.f1,
                },
            )
        })
        .collect();
    Ok(ComparisonReport {
        accuracy_delta: ra.accuracy - rb.accuracy,
        macro_delta: (ra.macro_avg - rb.macro_avg).into(),
        weighted_delta: (ra.weighted_avg - rb.weighted_avg).into(),
        per_class_delta,
        common_support: a.records.len(),
        systems: [
            (a.header.producer.clone(), ra),
            (b.header.producer.clone(), rb),
        ],
    })
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    schema_version: u32,
    systems: Vec<SystemJson<'a>>,
    per_class_delta: Vec<DeltaJson<'a>>,
    accuracy_delta: f64,
    macro_delta: MetricDelta,
    weighted_delta: MetricDelta,
    common_support: usize,
}

#[derive(Serialize)]
struct SystemJson<'a> {
    name: &'a str,
    report: Value,
}

#[derive(Serialize)]
struct DeltaJson<'a> {
    name: &'a str,
    #[serde(flatten)]
    delta: MetricDelta,
}

pub fn comparison_json(c: &ComparisonReport) -> String {
    let doc = ComparisonJson {
        schema_version: COMPARISON_SCHEMA_VERSION,
        systems: c
            .systems
            .iter()
            .map(|(name, r)| SystemJson {
                name,
                report: serde_json::from_str(&metrics::render_report(r, ReportFormat::Json))
                    .expect("report JSON parses"),
            })
            .collect(),
        per_class_delta: c
            .per_class_delta
            .iter()
            .map(|(name, delta)| DeltaJson { name, delta: *delta })
            .collect(),
        accuracy_delta: c.accuracy_delta,
        macro_delta: c.macro_delta,
        weighted_delta: c.weighted_delta,
        common_support: c.common_support,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("comparison serializes");
    s.push('\n');
    s
}

/// Side-by-side table: per class, precision/recall/F1 for both systems,
/// then accuracy and the two averages, then the `first − second` deltas.
pub fn comparison_text(c: &ComparisonReport) -> String {
    let [(na, ra), (nb, rb)] = &c.systems;
    let name_w = ra
        .per_class
        .iter()
        .map(|m| m.label.name.len())
        .chain([12])
        .max()
        .unwrap_or(12);
    let f = |v: f64| format_half_up(v, 2);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<name_w$}  {:^26}  {:^26}\n",
        "", na, nb
    ));
    let metric_head = format!("{:>9} {:>7} {:>8}", "Precision", "Recall", "F1-score");
    out.push_str(&format!("{:<name_w$}  {metric_head}  {metric_head}\n", "Class"));
    for (x, y) in ra.per_class.iter().zip(&rb.per_class) {
        out.push_str(&format!(
            "{:<name_w$}  {:>9} {:>7} {:>8}  {:>9} {:>7} {:>8}\n",
            x.label.name,
            f(x.precision),
            f(x.recall),
            f(x.f1),
            f(y.precision),
            f(y.recall),
            f(y.f1)
        ));
    }
    out.push_str(&format!(
        "{:<name_w$}  {:^26}  {:^26}\n",
        "Accuracy",
        format_percent(ra.accuracy),
        format_percent(rb.accuracy)
    ));
    for (name, a, b) in [
        ("Macro Avg", ra.macro_avg, rb.macro_avg),
        ("Weighted Avg", ra.weighted_avg, rb.weighted_avg),
    ] {
        out.push_str(&format!(
            "{:<name_w$}  {:>9} {:>7} {:>8}  {:>9} {:>7} {:>8}\n",
            name,
            f(a.precision),
            f(a.recall),
            f(a.f1),
            f(b.precision),
            f(b.recall),
            f(b.f1)
        ));
    }
    out.push_str(&format!("\nDelta ({na} - {nb}), {} common samples\n", c.common_support));
    out.push_str(&format!("{:<name_w$}  {metric_head}\n", "Class"));
    let delta_rows = c
        .per_class_delta
        .iter()
        .map(|(n, d)| (n.as_str(), *d))
        .chain([("Macro Avg", c.macro_delta), ("Weighted Avg", c.weighted_delta)]);
    for (name, d) in delta_rows {
        out.push_str(&format!(
            "{:<name_w$}  {:>9} {:>7} {:>8}\n",
            name,
            f(d.precision),
            f(d.recall),
            f(d.f1)
        ));
    }
    out.push_str(&format!("{:<name_w$}  {:>9}\n", "Accuracy", f(c.accuracy_delta)));
    out
}

/// Per-class grouped bars of precision, recall and F1 for both systems.
pub fn comparison_svg(c: &ComparisonReport) -> String {
    let [(na, ra), (nb, rb)] = &c.systems;
    let categories: Vec<String> = ra.per_class.iter().map(|m| m.label.name.clone()).collect();
    let pick = |r: &ClassReport, f: fn(&metrics::ClassMetrics) -> f64| {
        r.per_class.iter().map(f).collect::<Vec<f64>>()
    };
    let panels = vec![
        ("Precision".to_string(), vec![pick(ra, |m| m.precision), pick(rb, |m| m.precision)]),
        ("Recall".to_string(), vec![pick(ra, |m| m.recall), pick(rb, |m| m.recall)]),
        ("F1-score".to_string(), vec![pick(ra, |m| m.f1), pick(rb, |m| m.f1)]),
    ];
    svg::grouped_bars_svg(
        &format!("{na} vs {nb}"),
        &categories,
        &[na.clone(), nb.clone()],
        &panels,
    )
}
