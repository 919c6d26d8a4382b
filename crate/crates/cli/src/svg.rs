//! Minimal self-contained SVG charts: line series and harmonic bar plots.
//! No external tooling; the output is a single `<svg>` document with axes,
//! ticks and labels.

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

/// Round tick spacing to 1/2/5 times a power of ten.
fn nice_step(span: f64, target_ticks: usize) -> f64 {
    let raw = span / target_ticks as f64;
    let mag = 10f64.powf(raw.abs().log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn axes(out: &mut String, frame: &Frame, title: &str, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{x_label}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{y_label}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    let xstep = nice_step(frame.x_max - frame.x_min, 8);
    let mut t = (frame.x_min / xstep).ceil() * xstep;
    while t <= frame.x_max + 1e-12 {
        let px = frame.x(t);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"#ccc\" stroke-dasharray=\"3,3\"/>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            HEIGHT - MARGIN_B + 16.0,
            fmt_tick(t)
        ));
        t += xstep;
    }
    let ystep = nice_step(frame.y_max - frame.y_min, 6);
    let mut t = (frame.y_min / ystep).ceil() * ystep;
    while t <= frame.y_max + 1e-12 {
        let py = frame.y(t);
        out.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{py:.2}\" x2=\"{}\" y2=\"{py:.2}\" stroke=\"#ccc\" stroke-dasharray=\"3,3\"/>\n",
            WIDTH - MARGIN_R
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            MARGIN_L - 6.0,
            py + 4.0,
            fmt_tick(t)
        ));
        t += ystep;
    }
}

fn bounds(series: &[(String, Vec<(f64, f64)>)]) -> Frame {
    let mut f = Frame {
        x_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_min: f64::INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for (_, pts) in series {
        for &(x, y) in pts {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
    }
    if !f.x_min.is_finite() {
        f = Frame {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
        };
    }
    if f.x_max == f.x_min {
        f.x_max = f.x_min + 1.0;
    }
    if f.y_max == f.y_min {
        f.y_max = f.y_min + 1.0;
    }
    // 5% headroom on y
    let pad = 0.05 * (f.y_max - f.y_min);
    f.y_min -= pad;
    f.y_max += pad;
    f
}

/// Multi-series line chart.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let frame = bounds(series);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    axes(&mut out, &frame, title, x_label, y_label);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            d.push_str(&format!("{cmd}{:.2},{:.2}", frame.x(x), frame.y(y)));
        }
        out.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.4\"/>\n"
        ));
        if series.len() > 1 {
            let ly = MARGIN_T + 18.0 + 18.0 * i as f64;
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{ly:.1}\" x2=\"{}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                MARGIN_L + 10.0,
                MARGIN_L + 38.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{:.1}\" font-size=\"12\">{name}</text>\n",
                MARGIN_L + 44.0,
                ly + 4.0
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Harmonic bar chart (x = order, bar height = magnitude).
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, bars: &[(f64, f64)]) -> String {
    let y_max = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-12);
    let x_max = bars.iter().map(|b| b.0).fold(0.0, f64::max) + 1.0;
    let frame = Frame {
        x_min: 0.0,
        x_max,
        y_min: 0.0,
        y_max: y_max * 1.05,
    };
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    axes(&mut out, &frame, title, x_label, y_label);
    let bw = ((WIDTH - MARGIN_L - MARGIN_R) / frame.x_max * 0.6).min(14.0);
    for &(x, h) in bars {
        let px = frame.x(x);
        let py = frame.y(h);
        out.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{py:.2}\" width=\"{bw:.2}\" height=\"{:.2}\" fill=\"#1f77b4\"/>\n",
            px - bw / 2.0,
            (HEIGHT - MARGIN_B) - py
        ));
    }
    out.push_str("</svg>\n");
    out
}
