//! The checked-in `.predjsonl` files reconstruct the published per-class
//! table for both systems. Set `FOODBENCH_BLESS=1` to regenerate them.

mod common;

use common::{fixture_path, reference};
use foodbench::interchange::{self, load_predictions, save_predictions, PredictionFile};
use foodbench::metrics::{format_half_up, format_percent};

fn checked_in(name: &str, expected: &PredictionFile) -> PredictionFile {
    let path = fixture_path(name);
    if std::env::var_os("FOODBENCH_BLESS").is_some() {
        save_predictions(expected, &path).unwrap();
    }
    load_predictions(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn svm_fixture_is_current() {
    assert_eq!(checked_in("reference_svm.predjsonl", &reference::svm_file()), reference::svm_file());
}

#[test]
fn resnet_fixture_is_current() {
    assert_eq!(
        checked_in("reference_resnet.predjsonl", &reference::resnet_file()),
        reference::resnet_file()
    );
}

fn hundredths(v: f64) -> String {
    format_half_up(v, 2)
}

fn assert_rounds_to_table(file: &PredictionFile, table: &[[u64; 3]; 6]) {
    let report = file.evaluate().unwrap();
    report.check_invariants().unwrap();
    for (m, row) in report.per_class.iter().zip(table) {
        let want = row.map(|v| format!("{}.{:02}", v / 100, v % 100));
        assert_eq!(
            [hundredths(m.precision), hundredths(m.recall), hundredths(m.f1)],
            want,
            "class {}",
            m.label.name
        );
    }
    let supports: Vec<u64> = report.per_class.iter().map(|m| m.support).collect();
    assert_eq!(supports, reference::SUPPORT);
    assert_eq!(format_percent(report.accuracy), "81%");
}

#[test]
fn svm_records_reproduce_per_class_cells() {
    assert_rounds_to_table(&reference::svm_file(), &reference::SVM);
}

#[test]
fn resnet_records_reproduce_per_class_cells() {
    assert_rounds_to_table(&reference::resnet_file(), &reference::RESNET);
}

#[test]
fn resnet_fixture_never_predicts_ndole_wrongly() {
    let ndole = reference::CLASSES.iter().position(|&c| c == "ndole").unwrap();
    let col: u64 = (0..6).filter(|&a| a != ndole).map(|a| reference::RESNET_CM[a][ndole]).sum();
    assert_eq!(col, 0);
}

#[test]
fn comparison_of_fixtures() {
    let svm = reference::svm_file();
    let resnet = reference::resnet_file();
    let c = interchange::compare(&svm, &resnet).unwrap();
    assert_eq!(c.common_support, 251);
    assert_eq!(c.accuracy_delta, 203.0 / 251.0 - 204.0 / 251.0);
    let ekwang = c.delta_for("ekwang").unwrap();
    assert!(ekwang.precision > 0.0 && ekwang.recall > 0.0 && ekwang.f1 > 0.0);
    let text = interchange::comparison_text(&c);
    assert_eq!(text.lines().find(|l| l.starts_with("Accuracy")).map(|l| l.matches("81%").count()), Some(2));
    let svg = interchange::comparison_svg(&c);
    // legend swatches plus 3 metrics × 6 classes × 2 systems
    assert_eq!(svg.matches("<rect").count(), 2 + 36);
}
