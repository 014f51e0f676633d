//! Hand-written SVG charts. Coordinates are printed with two decimals so
//! files stay diffable.

use std::fmt::Write as _;
use std::path::Path;

use super::{write_text, AnalysisBundle, ReportError};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#000000", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf",
];

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Smallest value of the form {1, 2, 2.5, 5} x 10^e that is >= x.
pub(crate) fn nice_ceiling(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return 0.0;
    }
    let magnitude = 10f64.powf(x.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        let candidate = step * magnitude;
        if candidate >= x * (1.0 - 1e-12) {
            return candidate;
        }
    }
    10.0 * magnitude
}

fn plot_width() -> f64 {
    WIDTH - MARGIN_LEFT - MARGIN_RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text class="title" x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_width() / 2.0,
        escape(title)
    );
}

fn y_axis(out: &mut String, x: f64, max: f64, label: &str, side_right: bool) {
    let bottom = MARGIN_TOP + plot_height();
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{x:.2}" y1="{MARGIN_TOP:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="black"/>"#
    );
    let (anchor, dx) = if side_right { ("start", 6.0) } else { ("end", -6.0) };
    for i in 0..=4 {
        let v = max * i as f64 / 4.0;
        let y = bottom - plot_height() * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text class="y-tick" x="{:.2}" y="{:.2}" text-anchor="{anchor}">{v:.2}</text>"#,
            x + dx,
            y + 4.0
        );
    }
    let lx = if side_right { x + 48.0 } else { x - 48.0 };
    let ly = MARGIN_TOP + plot_height() / 2.0;
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(label)
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    let x = WIDTH - MARGIN_RIGHT + 20.0;
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="14" height="4" fill="{color}"/><text class="legend-entry" x="{:.2}" y="{:.2}">{}</text>"#,
            y - 4.0,
            x + 20.0,
            y + 2.0,
            escape(name)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// x pixel of segment `j` (1-based) out of `k`.
pub(crate) fn segment_x(j: usize, k: usize) -> f64 {
    if k <= 1 {
        MARGIN_LEFT + plot_width() / 2.0
    } else {
        MARGIN_LEFT + plot_width() * (j - 1) as f64 / (k - 1) as f64
    }
}

/// Line chart of every series' segment mass.
pub fn render_distribution_chart(bundle: &AnalysisBundle, path: &Path) -> Result<(), ReportError> {
    let series = bundle.series();
    let k = bundle.k;
    let peak = series
        .iter()
        .flat_map(|(_, m)| m.iter().copied())
        .fold(0.0f64, f64::max);
    let y_max = nice_ceiling(peak).max(0.1);
    let bottom = MARGIN_TOP + plot_height();

    let mut out = String::new();
    header(&mut out, &format!("Positional distribution, {} (K = {k})", bundle.corpus_name));
    y_axis(&mut out, MARGIN_LEFT, y_max, "mass", false);
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{MARGIN_LEFT:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
        MARGIN_LEFT + plot_width()
    );
    for j in 1..=k {
        let _ = writeln!(
            out,
            r#"<text class="x-tick" x="{:.2}" y="{:.2}" text-anchor="middle">{j}</text>"#,
            segment_x(j, k),
            bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">segment</text>"#,
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 16.0
    );

    let mut entries = Vec::with_capacity(series.len());
    for (i, (name, mass)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = mass
            .iter()
            .enumerate()
            .map(|(j, m)| format!("{:.2},{:.2}", segment_x(j + 1, k), bottom - plot_height() * m / y_max))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-series="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(name),
            points.join(" ")
        );
        entries.push((*name, color));
    }
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    write_text(path, &out)
}

/// Paired bars per model: ROUGE-1 on the left axis (0..1), distance on the right.
pub fn render_bias_bars(bundle: &AnalysisBundle, path: &Path) -> Result<(), ReportError> {
    if bundle.reports.is_empty() {
        return Err(ReportError::Empty("bias bars need at least one model"));
    }
    let mut reports: Vec<_> = bundle.reports.iter().collect();
    reports.sort_by(|a, b| a.model_name.cmp(&b.model_name));

    let w_peak = reports.iter().map(|r| r.wasserstein).fold(0.0f64, f64::max);
    let w_max = if w_peak > 0.0 {
        nice_ceiling(w_peak)
    } else {
        // largest possible distance on this support
        let x = bundle.gold.distribution.support_positions();
        x.last().zip(x.first()).map_or(1.0, |(hi, lo)| hi - lo).max(1.0 / bundle.k as f64)
    };
    let bottom = MARGIN_TOP + plot_height();
    let group = plot_width() / reports.len() as f64;
    let bar = group * 0.3;

    let mut out = String::new();
    header(&mut out, &format!("ROUGE-1 and position bias, {}", bundle.corpus_name));
    y_axis(&mut out, MARGIN_LEFT, 1.0, "ROUGE-1", false);
    y_axis(&mut out, MARGIN_LEFT + plot_width(), w_max, "Wasserstein distance", true);
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{MARGIN_LEFT:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
        MARGIN_LEFT + plot_width()
    );

    for (i, r) in reports.iter().enumerate() {
        let gx = MARGIN_LEFT + group * i as f64 + group * 0.2;
        let name = escape(&r.model_name);
        for (slot, (metric, value, scale, color)) in [
            ("r1", r.rouge.r1, 1.0, PALETTE[1]),
            ("wasserstein", r.wasserstein, w_max, PALETTE[2]),
        ]
        .into_iter()
        .enumerate()
        {
            let h = plot_height() * (value / scale).clamp(0.0, 1.0);
            let x = gx + bar * slot as f64;
            let _ = writeln!(
                out,
                r#"<rect class="bar {metric}" data-model="{name}" x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{h:.2}" fill="{color}"/>"#,
                bottom - h
            );
            let _ = writeln!(
                out,
                r#"<text class="value" data-model="{name}" data-metric="{metric}" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{value:.3}</text>"#,
                x + bar / 2.0,
                bottom - h - 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="model-label" x="{:.2}" y="{:.2}" text-anchor="middle">{name}</text>"#,
            gx + bar,
            bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">model</text>"#,
        MARGIN_LEFT + plot_width() / 2.0,
        HEIGHT - 16.0
    );
    legend(&mut out, &[("ROUGE-1", PALETTE[1]), ("Wasserstein", PALETTE[2])]);
    out.push_str("</svg>\n");
    write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_ceilings() {
        assert_eq!(nice_ceiling(0.9), 1.0);
        assert_eq!(nice_ceiling(0.45), 0.5);
        assert_eq!(nice_ceiling(0.21), 0.25);
        assert_eq!(nice_ceiling(1.0), 1.0);
        assert_eq!(nice_ceiling(13.0), 20.0);
        assert_eq!(nice_ceiling(0.0), 0.0);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
