//! Minimal static SVG line plots.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    /// SVG `stroke-dasharray`, solid when `None`.
    pub dash: Option<&'static str>,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }
}

/// `1`, `2` or `5` times a power of ten, about `target` ticks over the span.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        let s = format!("{v:.1e}");
        return s.replace(".0e", "e");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Renders the series. On a log axis points with `y ≤ 0` are dropped and
/// break the line.
pub fn line_plot(series: &[Series], axes: &Axes) -> String {
    let keep = |y: f64| y.is_finite() && (!axes.log_y || y > 0.0);
    let (x_lo, x_hi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))).unwrap_or((0.0, 1.0));
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo, x_lo + 1.0) };
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).filter(|&y| keep(y));
    let y_scale = if axes.log_y {
        let (lo, hi) = range(ys.map(f64::log10)).unwrap_or((0.0, 1.0));
        let (lo, hi) = (lo.floor(), hi.ceil());
        Scale { lo, hi: if hi > lo { hi } else { lo + 1.0 }, log: true }
    } else {
        let (lo, hi) = range(ys).unwrap_or((0.0, 1.0));
        let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.5 };
        Scale { lo: lo - pad, hi: hi + pad, log: false }
    };
    let x_scale = Scale { lo: x_lo, hi: x_hi, log: false };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x_scale.map(x) * pw;
    let py = |y: f64| TOP + (1.0 - y_scale.map(y)) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&axes.title)).unwrap();

    // Grid and ticks.
    for t in linear_ticks(x_lo, x_hi) {
        let x = px(t);
        writeln!(svg, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph).unwrap();
        writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t)).unwrap();
    }
    let y_ticks: Vec<(f64, String)> = if y_scale.log {
        let (lo, hi) = (y_scale.lo as i64, y_scale.hi as i64);
        let stride = ((hi - lo) as f64 / 10.0).ceil().max(1.0) as i64;
        (lo..=hi).filter(|k| (k - lo) % stride == 0).map(|k| (10f64.powi(k as i32), format!("1e{k}"))).collect()
    } else {
        linear_ticks(y_scale.lo, y_scale.hi).into_iter().map(|v| (v, label(v))).collect()
    };
    for (v, text) in y_ticks {
        let y = py(v);
        writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
    }
    writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 15.0, escape(&axes.x_label)).unwrap();
    writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&axes.y_label)
    )
    .unwrap();

    for s in series {
        let dash = s.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, svg: &mut String| {
            if segment.len() > 1 {
                writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="2"{dash} points="{}"/>"#,
                    s.color,
                    segment.join(" ")
                )
                .unwrap();
            }
            segment.clear();
        };
        for &(x, y) in &s.points {
            if keep(y) {
                segment.push(format!("{:.2},{:.2}", px(x), py(y)));
            } else {
                flush(&mut segment, &mut svg);
            }
        }
        flush(&mut segment, &mut svg);
    }

    // Legend, top right.
    for (k, s) in series.iter().enumerate() {
        let y = TOP + 16.0 + 18.0 * k as f64;
        let x = LEFT + pw - 150.0;
        let dash = s.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        writeln!(svg, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/>"#, x + 30.0, s.color).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 36.0, y + 4.0, escape(&s.name)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
