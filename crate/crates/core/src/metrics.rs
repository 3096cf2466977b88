//! Confusion matrices and the per-class / aggregate classification report.
//!
//! Per-class precision, recall and F1 use the one-vs-rest reduction:
//! `TP = cells[c][c]`, `FP = column c − TP`, `FN = row c − TP`. Accuracy is
//! `trace / total`. A zero denominator yields 0 and sets
//! [`ClassMetrics::zero_division`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ClassLabel;
pub use crate::util::{format_half_up, format_percent, round_half_up};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("record {index}: class id {id} out of range for {k} classes")]
    IdOutOfRange { index: usize, id: usize, k: usize },
    #[error("report has no samples")]
    EmptyReport,
    #[error("inconsistent report: {0}")]
    Inconsistent(String),
    #[error("report schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// K×K counts, rows = actual class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: Vec<ClassLabel>,
    cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_cells(classes: Vec<ClassLabel>, cells: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = classes.len();
        if cells.len() != k || cells.iter().any(|r| r.len() != k) {
            return Err(MetricsError::Inconsistent(format!(
                "confusion matrix must be {k}x{k}"
            )));
        }
        Ok(ConfusionMatrix { classes, cells })
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn cells(&self) -> &[Vec<u64>] {
        &self.cells
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.cells[actual][predicted]
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.cells[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.cells.iter().map(|r| r[c]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|c| self.cells[c][c]).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }
}

/// Tallies `(actual, predicted)` id pairs.
pub fn build_confusion(
    preds: &[(usize, usize)],
    classes: &[ClassLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    let k = classes.len();
    let mut cells = vec![vec![0u64; k]; k];
    for (index, &(a, p)) in preds.iter().enumerate() {
        for id in [a, p] {
            if id >= k {
                return Err(MetricsError::IdOutOfRange { index, id, k });
            }
        }
        cells[a][p] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when precision or recall had a zero denominator.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    cm.classes
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let tp = cm.cells[c][c];
            let (precision, zp) = ratio(tp, cm.col_sum(c));
            let (recall, zr) = ratio(tp, cm.row_sum(c));
            ClassMetrics {
                label: label.clone(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: cm.row_sum(c),
                zero_division: zp || zr,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl std::ops::Sub for Averages {
    type Output = Averages;

    fn sub(self, rhs: Averages) -> Averages {
        Averages {
            precision: self.precision - rhs.precision,
            recall: self.recall - rhs.recall,
            f1: self.f1 - rhs.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total_support: u64,
    pub confusion: ConfusionMatrix,
}

/// Macro (unweighted) and support-weighted means of the per-class values,
/// with accuracy from the confusion matrix trace.
pub fn aggregate(per_class: &[ClassMetrics], cm: &ConfusionMatrix) -> Result<ClassReport, MetricsError> {
    if per_class.len() != cm.k() {
        return Err(MetricsError::Inconsistent(format!(
            "{} per-class entries for a {}-class confusion matrix",
            per_class.len(),
            cm.k()
        )));
    }
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyReport);
    }
    let k = per_class.len() as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
    };
    let support: u64 = per_class.iter().map(|m| m.support).sum();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if support == 0 {
            0.0
        } else {
            per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / support as f64
        }
    };
    let weighted_avg = Averages {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
    };
    Ok(ClassReport {
        per_class: per_class.to_vec(),
        accuracy: cm.trace() as f64 / total as f64,
        macro_avg,
        weighted_avg,
        total_support: support,
        confusion: cm.clone(),
    })
}

/// Confusion matrix, per-class metrics and aggregates in one call.
pub fn evaluate(preds: &[(usize, usize)], classes: &[ClassLabel]) -> Result<ClassReport, MetricsError> {
    let cm = build_confusion(preds, classes)?;
    aggregate(&per_class_metrics(&cm), &cm)
}

impl ClassReport {
    pub fn has_zero_division(&self) -> bool {
        self.per_class.iter().any(|m| m.zero_division)
    }

    /// Checks the algebraic identities a report derived from its own
    /// confusion matrix must satisfy. Returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        const EPS: f64 = 1e-12;
        let cm = &self.confusion;
        let total = cm.total();
        if total != self.total_support {
            return Err(format!("total {total} != support {}", self.total_support));
        }
        if (self.accuracy - cm.trace() as f64 / total as f64).abs() > EPS {
            return Err("accuracy != trace / total".into());
        }
        let mut micro_recall = 0.0;
        for (c, m) in self.per_class.iter().enumerate() {
            if m.support != cm.row_sum(c) {
                return Err(format!("class {}: support != row sum", m.label));
            }
            for (name, v) in [("precision", m.precision), ("recall", m.recall), ("f1", m.f1)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("class {}: {name} {v} outside [0, 1]", m.label));
                }
            }
            if (m.f1 - f1_score(m.precision, m.recall)).abs() > EPS {
                return Err(format!("class {}: f1 is not the harmonic mean", m.label));
            }
            if m.f1 > m.precision.max(m.recall) + EPS || m.f1 < m.precision.min(m.recall) - EPS {
                return Err(format!("class {}: f1 outside [min(P,R), max(P,R)]", m.label));
            }
            micro_recall += m.support as f64 * m.recall;
        }
        if (micro_recall / total as f64 - self.accuracy).abs() > EPS {
            return Err("support-weighted recall != accuracy".into());
        }
        let recomputed = aggregate(&self.per_class, cm).map_err(|e| e.to_string())?;
        for (name, a, b) in [
            ("macro", self.macro_avg, recomputed.macro_avg),
            ("weighted", self.weighted_avg, recomputed.weighted_avg),
        ] {
            let d = a - b;
            if d.precision.abs().max(d.recall.abs()).max(d.f1.abs()) > EPS {
                return Err(format!("{name} averages do not match per-class values"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TextTable,
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    schema_version: u32,
    classes: Vec<String>,
    confusion: Vec<Vec<u64>>,
    per_class: Vec<ClassJson>,
    accuracy: f64,
    macro_avg: Averages,
    weighted_avg: Averages,
}

#[derive(Serialize, Deserialize)]
struct ClassJson {
    name: String,
    precision: f64,
    recall: f64,
    f1: f64,
    support: u64,
    #[serde(default)]
    zero_division: bool,
}

pub fn render_report(r: &ClassReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::TextTable => render_text(r),
        ReportFormat::Json => render_json(r),
        ReportFormat::Csv => render_csv(r),
    }
}

fn render_json(r: &ClassReport) -> String {
    let doc = ReportJson {
        schema_version: REPORT_SCHEMA_VERSION,
        classes: r.confusion.classes.iter().map(|c| c.name.clone()).collect(),
        confusion: r.confusion.cells.clone(),
        per_class: r
            .per_class
            .iter()
            .map(|m| ClassJson {
                name: m.label.name.clone(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: m.support,
                zero_division: m.zero_division,
            })
            .collect(),
        accuracy: r.accuracy,
        macro_avg: r.macro_avg,
        weighted_avg: r.weighted_avg,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<ClassReport, MetricsError> {
    let doc: ReportJson = serde_json::from_str(text)?;
    if doc.schema_version != REPORT_SCHEMA_VERSION {
        return Err(MetricsError::SchemaMismatch {
            found: doc.schema_version,
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    let classes: Vec<ClassLabel> = doc
        .classes
        .into_iter()
        .enumerate()
        .map(|(id, name)| ClassLabel { id, name })
        .collect();
    if doc.per_class.len() != classes.len() {
        return Err(MetricsError::Inconsistent("per_class length != classes".into()));
    }
    let per_class: Vec<ClassMetrics> = doc
        .per_class
        .into_iter()
        .zip(&classes)
        .map(|(m, label)| ClassMetrics {
            label: label.clone(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            support: m.support,
            zero_division: m.zero_division,
        })
        .collect();
    let confusion = ConfusionMatrix::from_cells(classes, doc.confusion)?;
    Ok(ClassReport {
        total_support: per_class.iter().map(|m| m.support).sum(),
        per_class,
        accuracy: doc.accuracy,
        macro_avg: doc.macro_avg,
        weighted_avg: doc.weighted_avg,
        confusion,
    })
}

fn render_text(r: &ClassReport) -> String {
    let name_w = r
        .per_class
        .iter()
        .map(|m| m.label.name.len())
        .chain([12])
        .max()
        .unwrap_or(12);
    let mut out = String::new();
    let row = |out: &mut String, name: &str, p: &str, rc: &str, f: &str, s: &str| {
        out.push_str(&format!("{name:<name_w$}  {p:>9}  {rc:>6}  {f:>8}  {s:>7}\n"));
    };
    row(&mut out, "Class", "Precision", "Recall", "F1-score", "Support");
    for m in &r.per_class {
        row(
            &mut out,
            &m.label.name,
            &format_half_up(m.precision, 2),
            &format_half_up(m.recall, 2),
            &format_half_up(m.f1, 2),
            &m.support.to_string(),
        );
    }
    out.push('\n');
    let total = r.total_support.to_string();
    row(&mut out, "Accuracy", "", "", &format_percent(r.accuracy), &total);
    for (name, a) in [("Macro Avg", r.macro_avg), ("Weighted Avg", r.weighted_avg)] {
        row(
            &mut out,
            name,
            &format_half_up(a.precision, 2),
            &format_half_up(a.recall, 2),
            &format_half_up(a.f1, 2),
            &total,
        );
    }
    if r.has_zero_division() {
        out.push_str("\nwarning: some classes had no predicted or no actual samples; their metrics are 0\n");
    }

    out.push_str("\nConfusion matrix (rows = actual, columns = predicted)\n");
    let cell_w = r
        .confusion
        .cells
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .max()
        .unwrap_or(1)
        .max(3);
    out.push_str(&format!("{:<name_w$}", ""));
    for c in 0..r.confusion.k() {
        out.push_str(&format!("  {:>cell_w$}", c));
    }
    out.push('\n');
    for (c, label) in r.confusion.classes.iter().enumerate() {
        out.push_str(&format!("{:<name_w$}", format!("{c}: {}", label.name)));
        for v in &r.confusion.cells[c] {
            out.push_str(&format!("  {v:>cell_w$}"));
        }
        out.push('\n');
    }
    out
}

fn render_csv(r: &ClassReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut write = |rec: [String; 5]| w.write_record(&rec).expect("in-memory CSV write");
    write(["name", "precision", "recall", "f1", "support"].map(String::from));
    for m in &r.per_class {
        write([
            m.label.name.clone(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.support.to_string(),
        ]);
    }
    let total = r.total_support.to_string();
    write([
        "__accuracy__".into(),
        String::new(),
        String::new(),
        r.accuracy.to_string(),
        total.clone(),
    ]);
    for (name, a) in [("__macro__", r.macro_avg), ("__weighted__", r.weighted_avg)] {
        write([
            name.into(),
            a.precision.to_string(),
            a.recall.to_string(),
            a.f1.to_string(),
            total.clone(),
        ]);
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let classes = ClassLabel::indexed(3);
        let cm = build_confusion(&[(0, 0), (1, 1), (2, 2), (2, 2)], &classes).unwrap();
        assert_eq!(cm.cells(), &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        for m in per_class_metrics(&cm) {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn empty_predictions() {
        let cm = build_confusion(&[], &ClassLabel::indexed(2)).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(
            aggregate(&per_class_metrics(&cm), &cm),
            Err(MetricsError::EmptyReport)
        ));
    }

    #[test]
    fn out_of_range_id() {
        assert!(matches!(
            build_confusion(&[(0, 2)], &ClassLabel::indexed(2)),
            Err(MetricsError::IdOutOfRange { index: 0, id: 2, k: 2 })
        ));
    }

    #[test]
    fn hand_computed_two_class() {
        let cm = build_confusion(&[(0, 1), (0, 1), (1, 1)], &ClassLabel::indexed(2)).unwrap();
        assert_eq!(cm.cells(), &[vec![0, 2], vec![0, 1]]);
        let m = per_class_metrics(&cm);
        assert_eq!((m[0].precision, m[0].recall, m[0].f1), (0.0, 0.0, 0.0));
        assert!(m[0].zero_division);
        assert!((m[1].precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m[1].recall, 1.0);
        assert!((m[1].f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn class_without_samples_or_predictions() {
        let cm = build_confusion(&[(0, 0), (1, 1)], &ClassLabel::indexed(3)).unwrap();
        let m = &per_class_metrics(&cm)[2];
        assert_eq!((m.precision, m.recall, m.f1, m.support), (0.0, 0.0, 0.0, 0));
        assert!(m.zero_division);
    }

    #[test]
    fn perfect_six_class_text_table() {
        let classes = ClassLabel::from_names(["a", "b", "c", "d", "e", "f"]);
        let preds: Vec<(usize, usize)> = (0..6).map(|c| (c, c)).collect();
        let r = evaluate(&preds, &classes).unwrap();
        let text = render_report(&r, ReportFormat::TextTable);
        let rows: Vec<&str> = text.lines().skip(1).take(6).collect();
        assert!(rows.iter().all(|l| l.matches("1.00").count() == 3));
        assert!(text.contains("100%"));
    }

    #[test]
    fn json_round_trip() {
        let classes = ClassLabel::indexed(3);
        let r = evaluate(&[(0, 1), (1, 1), (2, 0), (2, 2), (1, 0)], &classes).unwrap();
        let back = report_from_json(&render_report(&r, ReportFormat::Json)).unwrap();
        assert_eq!(back, r);
        r.check_invariants().unwrap();
    }

    #[test]
    fn csv_layout() {
        let r = evaluate(&[(0, 0), (1, 0)], &ClassLabel::indexed(2)).unwrap();
        let csv = render_report(&r, ReportFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "name,precision,recall,f1,support");
        assert_eq!(lines.len(), 6);
        assert!(lines[3].starts_with("__accuracy__,,,0.5,2"));
        assert!(lines[4].starts_with("__macro__,"));
        assert!(lines[5].starts_with("__weighted__,"));
    }
}
