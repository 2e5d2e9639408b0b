//! Minimal SVG rendering for explanation plots. Output is plain text with
//! fixed precision, so identical inputs give byte-identical files.

use std::fmt::Write;

use crate::explain::{global_shap, SegmentAttribution, ShapExplanation};

const W: f64 = 800.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Segment weights as bars under the context line.
pub fn lime_svg(title: &str, context: &[f64], attr: &SegmentAttribution) -> String {
    let mut out = String::new();
    header(&mut out, W, H, title);
    let n = context.len().max(1) as f64;
    let x_of = |i: f64| PAD + (W - 2.0 * PAD) * i / n;
    let top = (PAD, H * 0.55);
    let (lo, hi) = range(context.iter().copied());
    let y_of = |v: f64| top.1 - (top.1 - top.0) * (v - lo) / (hi - lo);
    let mut path = String::new();
    for (i, v) in context.iter().enumerate() {
        let _ = write!(
            path,
            "{}{:.2},{:.2} ",
            if i == 0 { "M" } else { "L" },
            x_of(i as f64 + 0.5),
            y_of(*v)
        );
    }
    let _ = writeln!(
        out,
        r#"<path d="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        path.trim_end()
    );

    let bar_mid = H * 0.78;
    let bar_half = H * 0.17;
    let wmax = attr.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let _ = writeln!(
        out,
        r#"<line x1="{PAD:.1}" x2="{:.1}" y1="{bar_mid:.1}" y2="{bar_mid:.1}" stroke="gray"/>"#,
        W - PAD
    );
    for (&(a, b), &w) in attr.segment_bounds.iter().zip(&attr.weights) {
        let h = if wmax > 0.0 { bar_half * w.abs() / wmax } else { 0.0 };
        let y = if w >= 0.0 { bar_mid - h } else { bar_mid };
        let color = if w >= 0.0 { "#2b8cbe" } else { "#d7301f" };
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{color}"/>"#,
            x_of(a as f64) + 1.0,
            (x_of(b as f64) - x_of(a as f64) - 2.0).max(0.5)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.08"/>"#,
            x_of(a as f64),
            top.0,
            x_of(b as f64) - x_of(a as f64),
            top.1 - top.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{PAD:.1}" y="{:.1}">r2 = {:.4}{}</text>"#,
        H - 8.0,
        attr.fit_r2,
        if attr.degenerate { " (degenerate)" } else { "" }
    );
    out.push_str("</svg>\n");
    out
}

/// Beeswarm of SHAP values for the `top_k` features by mean |SHAP|, coloured
/// by the feature value (blue low, red high).
pub fn shap_beeswarm_svg(title: &str, expl: &ShapExplanation, top_k: usize) -> String {
    let ranked = global_shap(expl).unwrap_or_default();
    let shown: Vec<usize> = ranked
        .iter()
        .take(top_k)
        .filter_map(|f| expl.feature_names.iter().position(|n| *n == f.feature))
        .collect();
    let row_h = 28.0;
    let height = PAD * 2.0 + row_h * shown.len().max(1) as f64;
    let left = 170.0;
    let mut out = String::new();
    header(&mut out, W, height, title);
    let (lo, hi) = range(
        shown
            .iter()
            .flat_map(|&j| expl.values.iter().map(move |r| r[j]))
            .chain([0.0]),
    );
    let x_of = |v: f64| left + (W - left - PAD) * (v - lo) / (hi - lo);
    let _ = writeln!(
        out,
        r#"<line x1="{:.2}" x2="{:.2}" y1="{PAD:.1}" y2="{:.1}" stroke="gray"/>"#,
        x_of(0.0),
        x_of(0.0),
        height - PAD
    );
    for (k, &j) in shown.iter().enumerate() {
        let y0 = PAD + row_h * (k as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y0 + 4.0,
            escape(&expl.feature_names[j])
        );
        let (flo, fhi) = range(expl.rows.iter().filter_map(|r| r.get(j).copied()));
        let mut order: Vec<usize> = (0..expl.values.len()).collect();
        order.sort_by(|&a, &b| expl.values[a][j].total_cmp(&expl.values[b][j]).then(a.cmp(&b)));
        for (rank, &r) in order.iter().enumerate() {
            let v = expl.values[r][j];
            let t = expl
                .rows
                .get(r)
                .and_then(|row| row.get(j))
                .map_or(0.5, |f| (f - flo) / (fhi - flo));
            let jitter = (((rank * 7919) % 17) as f64 / 16.0 - 0.5) * row_h * 0.6;
            let red = (255.0 * t).round() as u8;
            let blue = (255.0 * (1.0 - t)).round() as u8;
            let _ = writeln!(
                out,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#{red:02x}30{blue:02x}" fill-opacity="0.8"/>"##,
                x_of(v),
                y0 + jitter
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">SHAP value (base {:.4})</text>"#,
        (left + W - PAD) / 2.0,
        height - 15.0,
        expl.base_value
    );
    out.push_str("</svg>\n");
    out
}
