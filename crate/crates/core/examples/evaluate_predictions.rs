//! Confusion matrix and per-class report from (actual, predicted) pairs,
//! rendered as text, CSV and SVG.

use foodbench::dataset::ClassLabel;
use foodbench::metrics::{evaluate, format_percent, render_report, ReportFormat};
use foodbench::svg::confusion_svg;

fn main() {
    let classes = ClassLabel::from_names(["bread", "rice", "soup"]);
    let mut preds = Vec::new();
    let cells = [[18, 2, 0], [3, 25, 2], [0, 4, 16]];
    for (actual, row) in cells.iter().enumerate() {
        for (predicted, &n) in row.iter().enumerate() {
            preds.extend(std::iter::repeat_n((actual, predicted), n));
        }
    }

    let report = evaluate(&preds, &classes).expect("evaluate");
    report.check_invariants().expect("invariants");
    print!("{}", render_report(&report, ReportFormat::TextTable));
    println!("\naccuracy {}", format_percent(report.accuracy));
    println!("\n{}", render_report(&report, ReportFormat::Csv));

    let svg = confusion_svg(&report.confusion, "example");
    println!("confusion svg: {} bytes", svg.len());
}
