//! Minimal deterministic SVG line plots of trace columns.

use std::path::Path;

use crate::harness::HarnessError;
use crate::trace::read_csv_column;

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

/// Renders `column` of a trace CSV as a self-contained SVG line plot.
/// Identical inputs produce identical bytes.
pub fn plot_column(csv: &Path, column: &str, out: &Path) -> Result<(), HarnessError> {
    let values = read_csv_column(csv, column)
        .map_err(HarnessError::Io)?
        .ok_or_else(|| HarnessError::Config(format!("unknown column {column:?} in {csv:?}")))?;
    if values.is_empty() {
        return Err(HarnessError::Config(format!("trace {csv:?} has no data rows")));
    }
    let svg = render_svg(&values, column);
    std::fs::write(out, svg).map_err(HarnessError::Io)
}

pub fn render_svg(values: &[f64], title: &str) -> String {
    let finite: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let n = values.len();
    let x_of = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n.max(2) - 1) as f64;
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut points = String::new();
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() {
            points.push_str(&format!("{:.3},{:.3} ", x_of(i), y_of(v)));
        }
    }

    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" font-family=\"monospace\" font-size=\"16\" ",
            "text-anchor=\"middle\">{title}</text>\n",
            "<line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xend}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "<text x=\"{m}\" y=\"{ylabel}\" font-family=\"monospace\" font-size=\"12\">0</text>\n",
            "<text x=\"{xend}\" y=\"{ylabel}\" font-family=\"monospace\" font-size=\"12\" ",
            "text-anchor=\"end\">{nlast}</text>\n",
            "<text x=\"8\" y=\"{ybase}\" font-family=\"monospace\" font-size=\"12\">{lo:.6}</text>\n",
            "<text x=\"8\" y=\"{ytop}\" font-family=\"monospace\" font-size=\"12\">{hi:.6}</text>\n",
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"{points}\"/>\n",
            "</svg>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        m = MARGIN,
        tx = WIDTH / 2.0,
        title = title,
        ybase = HEIGHT - MARGIN,
        ylabel = HEIGHT - MARGIN + 16.0,
        ytop = MARGIN,
        xend = WIDTH - MARGIN,
        nlast = n - 1,
        lo = lo,
        hi = hi,
        points = points.trim_end(),
    )
}
