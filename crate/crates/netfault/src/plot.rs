//! Minimal deterministic SVG line charts for trace files.
//!
//! The renderer is a pure function of the chart description: identical input
//! produces byte-identical SVG, which keeps generated artifacts diffable.

use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 44.0;
const MARGIN_B: f64 = 52.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
    "#bcbd22", "#e377c2",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Dashed vertical markers, e.g. at leader-mode switches.
    pub vlines: Vec<f64>,
    /// Log-scale y axis; nonpositive values are clamped to the smallest
    /// positive value in the data (or 1e-12 if none).
    pub log_y: bool,
}

impl ChartSpec {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            vlines: Vec::new(),
            log_y: false,
        }
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if mag * mult >= raw {
            return mag * mult;
        }
    }
    mag * 10.0
}

fn linear_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        // Snap values like 0.30000000000000004 back to the grid.
        let snapped = (t / step).round() * step;
        out.push(if snapped == 0.0 { 0.0 } else { snapped });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && (a >= 1e5 || a < 1e-3) {
        format!("{v:e}")
    } else {
        // Round away float grid noise; trim trailing zeros.
        let s = format!("{v:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        let (y, y0, y1) = if self.log_y {
            (y.log10(), self.y0.log10(), self.y1.log10())
        } else {
            (y, self.y0, self.y1)
        };
        MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the chart as a standalone SVG document.
pub fn render_chart(spec: &ChartSpec) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\">\n"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        escape(&spec.title)
    );

    let points: Vec<(f64, f64)> = spec
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    if points.is_empty() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">no data</text>",
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    for &(x, _) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }

    let floor = points
        .iter()
        .map(|&(_, y)| y)
        .filter(|&y| y > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1e-12 };
    let clamp = |y: f64| if spec.log_y && y <= 0.0 { floor } else { y };

    let (y0, y1, y_ticks) = if spec.log_y {
        let lo = 10f64.powf(floor.log10().floor());
        let hi_raw = points.iter().map(|&(_, y)| clamp(y)).fold(floor, f64::max);
        let hi = 10f64.powf(hi_raw.log10().ceil().max(floor.log10().floor() + 1.0));
        let mut ticks = Vec::new();
        let decades = (hi.log10().round() - lo.log10().round()) as i64;
        let every = (decades / 8 + 1).max(1);
        let mut d = lo.log10().round() as i64;
        while d <= hi.log10().round() as i64 {
            ticks.push(10f64.powi(d as i32));
            d += every;
        }
        (lo, hi, ticks)
    } else {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(_, y) in &points {
            lo = lo.min(y);
            hi = hi.max(y);
        }
        if hi <= lo {
            hi = lo + 1.0;
            lo -= 1.0;
        }
        let pad = (hi - lo) * 0.05;
        let (lo, hi) = (lo - pad, hi + pad);
        let ticks = linear_ticks(lo, hi, 6);
        (lo, hi, ticks)
    };

    let frame = Frame {
        x0,
        x1,
        y0,
        y1,
        log_y: spec.log_y,
    };
    let plot_bottom = HEIGHT - MARGIN_B;

    // Grid and ticks.
    for &t in &linear_ticks(x0, x1, 8) {
        let px = frame.px(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{MARGIN_T}\" x2=\"{px:.1}\" y2=\"{plot_bottom:.1}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            plot_bottom + 18.0,
            fmt_tick(t)
        );
    }
    for &t in &y_ticks {
        let py = frame.py(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_L}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>",
            WIDTH - MARGIN_R
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 6.0,
            py + 4.0,
            fmt_tick(t)
        );
    }

    for &x in &spec.vlines {
        if x < x0 || x > x1 {
            continue;
        }
        let px = frame.px(x);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{MARGIN_T}\" x2=\"{px:.1}\" y2=\"{plot_bottom:.1}\" \
             stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>"
        );
    }

    // Axes on top of the grid.
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{plot_bottom:.1}\" \
         stroke=\"black\" stroke-width=\"1\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{plot_bottom:.1}\" x2=\"{:.1}\" y2=\"{plot_bottom:.1}\" \
         stroke=\"black\" stroke-width=\"1\"/>",
        WIDTH - MARGIN_R
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {:.1})\">{}</text>",
        (MARGIN_T + plot_bottom) / 2.0,
        (MARGIN_T + plot_bottom) / 2.0,
        escape(&spec.y_label)
    );

    // Series.
    for (i, series) in spec.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for &(x, y) in &series.points {
            let _ = write!(pts, "{:.2},{:.2} ", frame.px(x), frame.py(clamp(y)));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.trim_end()
        );
    }

    // Legend, top-right inside the plot.
    let legend_x = WIDTH - MARGIN_R - 200.0;
    for (i, series) in spec.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_T + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{legend_x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            legend_x + 22.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>",
            legend_x + 28.0,
            y + 4.0,
            escape(&series.label)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

pub fn write_chart(path: &Path, spec: &ChartSpec) -> std::io::Result<()> {
    std::fs::write(path, render_chart(spec))
}
