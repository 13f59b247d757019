//! SVG line-chart rendering for aggregate results: one mean line plus a
//! shaded 5-95% quantile band per series, with axes, ticks, and a legend.
//! Hand-rolled because the chart is a fixed, small vocabulary of shapes and
//! SVG text is diff-friendly in version control.

use embandit::{Error, Result};

/// One plotted algorithm: per-round mean and quantile band.
pub struct Series {
    pub label: String,
    pub rounds: Vec<f64>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Renders the full SVG document.
pub fn render(series: &[Series], title: &str) -> Result<String> {
    if series.is_empty() {
        return Err(Error::EmptyInput("plot series"));
    }
    for s in series {
        let n = s.rounds.len();
        if n == 0 {
            return Err(Error::EmptyInput("plot series points"));
        }
        if s.mean.len() != n || s.lo.len() != n || s.hi.len() != n {
            return Err(Error::Config(format!(
                "series {:?} has ragged columns ({n} rounds, {} mean, {} lo, {} hi)",
                s.label,
                s.mean.len(),
                s.lo.len(),
                s.hi.len()
            )));
        }
    }

    let (xmin, xmax) = extent(series.iter().flat_map(|s| s.rounds.iter().copied()));
    let (ymin, ymax) = extent(
        series
            .iter()
            .flat_map(|s| s.lo.iter().chain(s.hi.iter()).chain(s.mean.iter()).copied()),
    );
    let (xmin, xmax) = pad_range(xmin, xmax);
    let (ymin, ymax) = pad_range(ymin, ymax);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - xmin) / (xmax - xmin) * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - (y - ymin) / (ymax - ymin) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    if !title.is_empty() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        ));
    }

    // Axes with ticks.
    let x0 = px(xmin);
    let x1 = px(xmax);
    let y0 = py(ymin);
    let y1 = py(ymax);
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    for t in ticks(xmin, xmax) {
        let x = px(t);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 20.0,
            fmt_tick(t)
        ));
    }
    for t in ticks(ymin, ymax) {
        let y = py(t);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            x0 - 9.0,
            y + 4.0,
            fmt_tick(t)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">round</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">cumulative reward</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));

    // Bands first so every mean line stays visible on top.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::from("M");
        for (x, y) in s.rounds.iter().zip(s.hi.iter()) {
            d.push_str(&format!("{:.2},{:.2} ", px(*x), py(*y)));
        }
        for (x, y) in s.rounds.iter().zip(s.lo.iter()).rev() {
            d.push_str(&format!("{:.2},{:.2} ", px(*x), py(*y)));
        }
        d.push('Z');
        svg.push_str(&format!(
            "<path class=\"band\" d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n"
        ));
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .rounds
            .iter()
            .zip(s.mean.iter())
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
    }

    // Legend, top-left inside the plot area.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0
        ));
        svg.push_str(&format!(
            "<text class=\"legend\" x=\"{}\" y=\"{}\">{}</text>\n",
            MARGIN_L + 40.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Round-numbered tick positions: steps of 1, 2, or 5 times a power of ten,
/// aiming for about five intervals.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .expect("10·mag always covers raw");
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(t: f64) -> String {
    if t == t.trunc() && t.abs() < 1e7 {
        format!("{t:.0}")
    } else {
        format!("{t}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
