use foodbench::dataset::ClassLabel;
use foodbench::metrics::{evaluate, render_report, report_from_json, ReportFormat};
use proptest::prelude::*;

fn predictions() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=6).prop_flat_map(|k| (Just(k), prop::collection::vec((0..k, 0..k), 1..200)))
}

/// Per-class (precision, recall, f1, support) by direct counting.
fn brute_force(k: usize, preds: &[(usize, usize)]) -> Vec<(f64, f64, f64, u64)> {
    (0..k)
        .map(|c| {
            let tp = preds.iter().filter(|&&(a, p)| a == c && p == c).count() as f64;
            let fp = preds.iter().filter(|&&(a, p)| a != c && p == c).count() as f64;
            let fn_ = preds.iter().filter(|&&(a, p)| a == c && p != c).count() as f64;
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
            (precision, recall, f1, (tp + fn_) as u64)
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

proptest! {
    #[test]
    fn matches_direct_counting((k, preds) in predictions()) {
        let classes = ClassLabel::indexed(k);
        let report = evaluate(&preds, &classes).unwrap();
        let expected = brute_force(k, &preds);
        for (m, &(p, r, f, s)) in report.per_class.iter().zip(&expected) {
            prop_assert!(close(m.precision, p) && close(m.recall, r) && close(m.f1, f));
            prop_assert_eq!(m.support, s);
        }
        let n = preds.len() as f64;
        let correct = preds.iter().filter(|(a, p)| a == p).count() as f64;
        prop_assert!(close(report.accuracy, correct / n));
        let macro_f1 = expected.iter().map(|e| e.2).sum::<f64>() / k as f64;
        prop_assert!(close(report.macro_avg.f1, macro_f1));
        let weighted_r = expected.iter().map(|e| e.1 * e.3 as f64).sum::<f64>() / n;
        prop_assert!(close(report.weighted_avg.recall, weighted_r));
        // support-weighted recall is accuracy
        prop_assert!(close(report.weighted_avg.recall, report.accuracy));
        prop_assert!(report.check_invariants().is_ok());
        prop_assert_eq!(report.confusion.total(), preds.len() as u64);
    }

    #[test]
    fn json_report_round_trips((k, preds) in predictions()) {
        let report = evaluate(&preds, &ClassLabel::indexed(k)).unwrap();
        let back = report_from_json(&render_report(&report, ReportFormat::Json)).unwrap();
        prop_assert_eq!(back, report);
    }

    #[test]
    fn csv_has_one_row_per_class_plus_three((k, preds) in predictions()) {
        let report = evaluate(&preds, &ClassLabel::indexed(k)).unwrap();
        let csv = render_report(&report, ReportFormat::Csv);
        prop_assert_eq!(csv.lines().count(), 1 + k + 3);
    }
}

#[test]
fn class_never_predicted_is_flagged() {
    let report = evaluate(&[(0, 0), (1, 0)], &ClassLabel::indexed(2)).unwrap();
    assert!(report.has_zero_division());
    assert_eq!(report.per_class[1].precision, 0.0);
    assert_eq!(report.per_class[1].f1, 0.0);
}

#[test]
fn out_of_range_id_rejected() {
    assert!(evaluate(&[(0, 5)], &ClassLabel::indexed(2)).is_err());
}
