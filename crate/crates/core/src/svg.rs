//! Minimal deterministic SVG charts. Coordinates are printed with two
//! decimals and no metadata, so identical inputs give identical files.

use std::fmt::Write as _;

use crate::evaluate::ConfusionMatrix;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
        w / 2.0,
        escape(title)
    );
}

/// Horizontal bars, one per label, in the given order. Negative values extend
/// left of the axis.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let label_w = 190.0;
    let plot_w = 420.0;
    let row_h = 18.0;
    let top = 32.0;
    let h = top + row_h * labels.len() as f64 + 30.0;
    let w = label_w + plot_w + 80.0;
    let max_abs = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let has_neg = values.iter().any(|&v| v < 0.0);
    let (zero, scale) = if has_neg {
        (label_w + plot_w / 2.0, plot_w / 2.0 / max_abs)
    } else {
        (label_w, plot_w / max_abs)
    };
    let mut out = String::new();
    open(&mut out, w, h, title);
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let y = top + row_h * i as f64;
        let len = v.abs() * scale;
        let x = if v < 0.0 { zero - len } else { zero };
        let color = if v < 0.0 { PALETTE[3] } else { PALETTE[0] };
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{}</text>",
            label_w - 6.0,
            y + 12.0,
            escape(label)
        );
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{len:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
            y + 2.0,
            row_h - 4.0
        );
        let tx = if v < 0.0 { x - 4.0 } else { x + len + 4.0 };
        let anchor = if v < 0.0 { "end" } else { "start" };
        let _ = writeln!(
            out,
            "<text x=\"{tx:.2}\" y=\"{:.2}\" text-anchor=\"{anchor}\" {FONT}>{v:.4}</text>",
            y + 12.0
        );
    }
    let _ = writeln!(
        out,
        "<line x1=\"{zero:.2}\" y1=\"{top:.2}\" x2=\"{zero:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        top + row_h * labels.len() as f64
    );
    out.push_str("</svg>\n");
    out
}

/// ROC staircase with the chance diagonal.
pub fn roc_chart(title: &str, points: &[[f64; 2]], auc: Option<f64>) -> String {
    let (left, top, size) = (50.0, 30.0, 360.0);
    let mut out = String::new();
    open(&mut out, size + 80.0, size + 80.0, title);
    let px = |x: f64| left + x * size;
    let py = |y: f64| top + (1.0 - y) * size;
    let _ = writeln!(
        out,
        "<rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{size:.2}\" height=\"{size:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let path: Vec<String> = points.iter().map(|[x, y]| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>",
        path.join(" "),
        PALETTE[0]
    );
    for t in 0..=5 {
        let v = t as f64 / 5.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>{v:.1}</text>",
            px(v),
            top + size + 14.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{v:.1}</text>",
            left - 4.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>false positive rate</text>",
        px(0.5),
        top + size + 30.0
    );
    if let Some(a) = auc {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>AUC = {a:.4}</text>",
            px(1.0) - 6.0,
            py(0.0) - 8.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// 2x2 confusion matrix heat map; rows are actual classes.
pub fn confusion_chart(title: &str, cm: &ConfusionMatrix) -> String {
    let cell = 120.0;
    let (left, top) = (110.0, 50.0);
    let cells = [[cm.tn, cm.fp], [cm.fn_, cm.tp]];
    let max = cells.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let names = ["Benign", "Keylogger"];
    let mut out = String::new();
    open(&mut out, left + 2.0 * cell + 30.0, top + 2.0 * cell + 40.0, title);
    for (r, row) in cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let shade = 245.0 - 180.0 * v as f64 / max;
            let x = left + c as f64 * cell;
            let y = top + r as f64 * cell;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"rgb({0:.0},{0:.0},255)\" stroke=\"white\"/>",
                shade
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{v}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 5.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>actual {}</text>",
            left - 6.0,
            top + r as f64 * cell + cell / 2.0 + 4.0,
            names[r]
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>predicted {}</text>",
            left + r as f64 * cell + cell / 2.0,
            top - 6.0,
            names[r]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars grouped by category, one colour per series. `values[g][s]`
/// is series `s` in group `g`; missing values are skipped.
pub fn grouped_bar_chart(title: &str, groups: &[String], series: &[String], values: &[Vec<Option<f64>>]) -> String {
    let (left, top, plot_h) = (50.0, 40.0, 260.0);
    let bar_w = 14.0;
    let group_w = bar_w * series.len().max(1) as f64 + 16.0;
    let w = left + group_w * groups.len() as f64 + 160.0;
    let h = top + plot_h + 110.0;
    let max = values
        .iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |a, &v| a.max(v))
        .max(1e-12);
    let mut out = String::new();
    open(&mut out, w, h, title);
    let base = top + plot_h;
    let _ = writeln!(
        out,
        "<line x1=\"{left:.2}\" y1=\"{base:.2}\" x2=\"{:.2}\" y2=\"{base:.2}\" stroke=\"black\"/>",
        left + group_w * groups.len() as f64
    );
    for (g, name) in groups.iter().enumerate() {
        let gx = left + g as f64 * group_w + 8.0;
        for (s, v) in values.get(g).into_iter().flatten().enumerate() {
            if let Some(v) = v {
                let bh = v.max(0.0) / max * plot_h;
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bar_w:.2}\" height=\"{bh:.2}\" fill=\"{}\"/>",
                    gx + s as f64 * bar_w,
                    base - bh,
                    PALETTE[s % PALETTE.len()]
                );
            }
        }
        let cx = gx + bar_w * series.len() as f64 / 2.0;
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"end\" transform=\"rotate(-40 {cx:.2} {:.2})\" {FONT}>{}</text>",
            base + 14.0,
            base + 14.0,
            escape(name)
        );
    }
    let lx = left + group_w * groups.len() as f64 + 16.0;
    for (s, name) in series.iter().enumerate() {
        let ly = top + 16.0 * s as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.2}\" y=\"{ly:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            PALETTE[s % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT}>{}</text>",
            lx + 14.0,
            ly + 9.0,
            escape(name)
        );
    }
    for t in 0..=4 {
        let v = max * t as f64 / 4.0;
        let y = base - plot_h * t as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{v:.2}</text>",
            left - 4.0,
            y + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}
