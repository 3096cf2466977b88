//! Minimal SVG figures: a confusion-matrix heat map and grouped bar panels.

use std::fmt::Write;

use crate::metrics::ConfusionMatrix;
use crate::util::format_half_up;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Heat map of `cm`, shaded by row-normalized counts.
pub fn confusion_svg(cm: &ConfusionMatrix, title: &str) -> String {
    let k = cm.k();
    let cell = 56.0;
    let left = 130.0;
    let top = 60.0;
    let width = left + cell * k as f64 + 20.0;
    let height = top + cell * k as f64 + 110.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (a, label) in cm.classes().iter().enumerate() {
        let row_total = cm.row_sum(a).max(1) as f64;
        let y = top + a as f64 * cell;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell / 2.0 + 4.0,
            escape(&label.name)
        );
        for p in 0..k {
            let v = cm.get(a, p);
            let shade = v as f64 / row_total;
            let x = left + p as f64 * cell;
            // white to dark blue
            let r = (255.0 * (1.0 - 0.85 * shade)).round() as u8;
            let g = (255.0 * (1.0 - 0.65 * shade)).round() as u8;
            let fill = format!("#{r:02x}{g:02x}ff");
            let ink = if shade > 0.5 { "white" } else { "black" };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#888"/><text x="{}" y="{}" text-anchor="middle" fill="{ink}">{v}</text>"##,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    let label_y = top + cell * k as f64 + 10.0;
    for (p, label) in cm.classes().iter().enumerate() {
        let x = left + p as f64 * cell + cell / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{label_y}" text-anchor="end" transform="rotate(-45 {x} {label_y})">{}</text>"#,
            escape(&label.name)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Predicted label (rows: actual)</text>"#,
        width / 2.0,
        height - 8.0
    );
    s.push_str("</svg>\n");
    s
}

/// One panel per metric; within a panel, one group per category with one
/// bar per series. Values are expected in `[0, 1]`.
pub fn grouped_bars_svg(
    title: &str,
    categories: &[String],
    series_names: &[String],
    panels: &[(String, Vec<Vec<f64>>)],
) -> String {
    const PALETTE: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];
    let bar = 14.0;
    let gap = 12.0;
    let group = bar * series_names.len() as f64 + gap;
    let panel_w = 50.0 + group * categories.len() as f64;
    let panel_h = 180.0;
    let width = panel_w * panels.len() as f64 + 20.0;
    let height = panel_h + 150.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-size="15" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, name) in series_names.iter().enumerate() {
        let x = 20.0 + i as f64 * 120.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="32" width="10" height="10" fill="{}"/><text x="{}" y="41">{}</text>"#,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            escape(name)
        );
    }
    let base_y = 60.0 + panel_h;
    for (pi, (metric, values)) in panels.iter().enumerate() {
        let x0 = 10.0 + pi as f64 * panel_w + 40.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="58" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + (panel_w - 50.0) / 2.0,
            escape(metric)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{base_y}" x2="{}" y2="{base_y}" stroke="#333"/>"##,
            x0 + panel_w - 50.0
        );
        for (ci, category) in categories.iter().enumerate() {
            let gx = x0 + ci as f64 * group + gap / 2.0;
            for (si, series) in values.iter().enumerate() {
                let v = series.get(ci).copied().unwrap_or(0.0).clamp(0.0, 1.0);
                let h = v * (panel_h - 20.0);
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{bar}" height="{h}" fill="{}"><title>{} {}: {}</title></rect>"#,
                    gx + si as f64 * bar,
                    base_y - h,
                    PALETTE[si % PALETTE.len()],
                    escape(&series_names[si]),
                    escape(category),
                    format_half_up(v, 2)
                );
            }
            let lx = gx + bar * values.len() as f64 / 2.0;
            let ly = base_y + 10.0;
            let _ = writeln!(
                s,
                r#"<text x="{lx}" y="{ly}" text-anchor="end" transform="rotate(-45 {lx} {ly})">{}</text>"#,
                escape(category)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel;
    use crate::metrics::build_confusion;

    #[test]
    fn heat_map_has_one_cell_per_entry() {
        let classes = ClassLabel::from_names(["a&b", "c"]);
        let cm = build_confusion(&[(0, 0), (0, 1), (1, 1)], &classes).unwrap();
        let svg = confusion_svg(&cm, "test");
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("a&amp;b"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn bar_count_matches_inputs() {
        let cats = vec!["x".to_string(), "y".to_string()];
        let names = vec!["A".to_string(), "B".to_string()];
        let panels = vec![
            ("Precision".to_string(), vec![vec![0.5, 0.7], vec![0.6, 0.1]]),
            ("Recall".to_string(), vec![vec![0.5, 0.7], vec![0.6, 0.1]]),
        ];
        let svg = grouped_bars_svg("cmp", &cats, &names, &panels);
        // 2 legend swatches + 2 panels × 2 categories × 2 series
        assert_eq!(svg.matches("<rect").count(), 2 + 8);
    }
}
