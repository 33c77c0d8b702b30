//! Deterministic SVG line chart of a solution path: raw min/max bound
//! series plus trailing-average overlays. Fixed canvas, fixed precision,
//! no timestamps, so byte-for-byte output depends only on the input.

use std::fmt::Write as _;

use pathbounds::bounds::BoundsTrace;
use pathbounds::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn trailing_means(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for i in 0..values.len() {
        acc += values[i];
        if i >= window {
            acc -= values[i - window];
        }
        let n = (i + 1).min(window) as f64;
        out.push(acc / n);
    }
    out
}

pub fn render_trace(trace: &BoundsTrace, window: usize) -> Result<String> {
    if trace.records.is_empty() {
        return Err(Error::validation("trace has no records to render"));
    }
    let window = window.max(1);
    let mins: Vec<f64> = trace.records.iter().map(|r| r.v_min).collect();
    let maxs: Vec<f64> = trace.records.iter().map(|r| r.v_max).collect();
    let mins_avg = trailing_means(&mins, window);
    let maxs_avg = trailing_means(&maxs, window);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for series in [&mins, &maxs, &mins_avg, &maxs_avg] {
        for &v in series.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::numeric("non-finite values in trace"));
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    let first_iter = trace.records[0].iteration as f64;
    let last_iter = trace.records[trace.records.len() - 1].iteration as f64;
    let span = (last_iter - first_iter).max(1.0);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |it: f64| MARGIN_LEFT + (it - first_iter) / span * plot_w;
    let sy = |v: f64| MARGIN_TOP + (hi - v) / (hi - lo) * plot_h;

    let polyline = |values: &[f64]| -> String {
        let mut pts = String::new();
        for (r, &v) in trace.records.iter().zip(values) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(r.iteration as f64), sy(v));
        }
        pts.trim_end().to_string()
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");

    // axes
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        svg,
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>",
        WIDTH - MARGIN_RIGHT
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{x0:.2}\" y1=\"{MARGIN_TOP:.2}\" x2=\"{x0:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>"
    );

    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">{v:.3}</text>",
            x0 - 8.0,
            y + 4.0
        );
        let it = first_iter + span * k as f64 / 4.0;
        let x = sx(it);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">{:.0}</text>",
            y0 + 20.0,
            it
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">iteration</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );

    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>",
        polyline(&mins)
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#222222\" stroke-width=\"1\"/>",
        polyline(&maxs)
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>",
        polyline(&mins_avg)
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>",
        polyline(&maxs_avg)
    );

    let legend = [
        ("#222222", "upper bound"),
        ("#999999", "lower bound"),
        ("#d62728", "upper trailing mean"),
        ("#1f77b4", "lower trailing mean"),
    ];
    for (k, (color, label)) in legend.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            WIDTH - 190.0,
            y - 4.0,
            WIDTH - 170.0,
            y - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\">{label}</text>",
            WIDTH - 165.0,
            y
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
