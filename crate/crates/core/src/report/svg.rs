use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{PlotSeries, Scale, Style};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 640,
            height: 480,
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
        }
    }
}

impl SvgOptions {
    pub fn titled(title: &str, x_label: &str, y_label: &str) -> Self {
        SvgOptions {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }
}

const PALETTE: [&str; 8] = [
    "#555555", "#c0392b", "#2c7fb8", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#7f8c8d",
];
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn value(&self, v: f64) -> f64 {
        if self.log {
            v.log10()
        } else {
            v
        }
    }

    fn fraction(&self, v: f64) -> f64 {
        (self.value(v) - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions in data units with their labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|k| (10f64.powi(k), decade_label(k)))
                .collect()
        } else {
            let step = nice_step((self.hi - self.lo) / 5.0);
            let decimals = (-step.log10().floor()).max(0.0) as usize;
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last)
                .map(|i| {
                    let v = i as f64 * step;
                    (v, format!("{:.*}", decimals, v))
                })
                .collect()
        }
    }
}

fn decade_label(k: i32) -> String {
    if k >= 0 {
        format!("1{}", "0".repeat(k as usize))
    } else {
        format!("0.{}1", "0".repeat((-k - 1) as usize))
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn axis(values: impl Iterator<Item = f64>, log: bool, include_zero: bool) -> Axis {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        let t = if log { v.log10() } else { v };
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if log {
        lo = lo.floor();
        hi = hi.ceil();
        if hi <= lo {
            hi = lo + 1.0;
        }
    } else {
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        if !(include_zero && lo == 0.0) {
            lo -= pad;
        }
        hi += pad;
    }
    Axis { lo, hi, log }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Self-contained SVG of `series` on shared axes. All series must use the same
/// scale; log-log series must be strictly positive. Output is a deterministic
/// function of the inputs.
pub fn render_svg(series: &[PlotSeries], opts: &SvgOptions) -> Result<String> {
    let first = series.first().ok_or_else(|| Error::Render {
        series: String::new(),
        reason: "empty series set".into(),
    })?;
    for s in series {
        s.check()?;
        if s.scale != first.scale {
            return Err(Error::Render {
                series: s.name.clone(),
                reason: "mixed log-log and linear series".into(),
            });
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Render {
            series: first.name.clone(),
            reason: "no points to draw".into(),
        });
    }
    let log = first.scale == Scale::LogLog;
    let bars = series.iter().any(|s| s.style == Style::Bars);
    let all = || series.iter().flat_map(|s| s.points.iter());
    let mut xa = axis(all().map(|p| p.0), log, false);
    if bars {
        xa.lo = xa.lo.min(0.5);
        xa.hi = xa.hi.max(all().map(|p| p.0).fold(0.0, f64::max) + 0.5);
    }
    let ya = axis(all().map(|p| p.1), log, bars);

    let (w, h) = (opts.width as f64, opts.height as f64);
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + xa.fraction(x) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - ya.fraction(y)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif" font-size="12">"#,
        opts.width, opts.height
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, opts.width, opts.height);
    if !opts.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            w / 2.0,
            escape(&opts.title)
        );
    }
    let (x0, x1) = (MARGIN_LEFT, MARGIN_LEFT + plot_w);
    let (y0, y1) = (MARGIN_TOP, MARGIN_TOP + plot_h);
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );

    out.push_str("<g class=\"ticks\">\n");
    if !bars {
        for (v, label) in xa.ticks() {
            let x = px(v);
            let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y1 + 18.0,
                escape(&label)
            );
        }
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            escape(&label)
        );
    }
    out.push_str("</g>\n");
    if !opts.x_label.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            h - 12.0,
            escape(&opts.x_label)
        );
    }
    if !opts.y_label.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
            (y0 + y1) / 2.0,
            escape(&opts.y_label)
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="series" data-name="{}">"#, escape(&s.name));
        match s.style {
            Style::Points => {
                // Points landing on the same half-pixel as the previous one are
                // not redrawn; the CSV keeps every point.
                let mut last: Option<(i64, i64)> = None;
                for &(x, y) in &s.points {
                    let (cx, cy) = (px(x), py(y));
                    let key = ((cx * 2.0).round() as i64, (cy * 2.0).round() as i64);
                    if last == Some(key) {
                        continue;
                    }
                    last = Some(key);
                    let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="2" fill="{color}"/>"#);
                }
            }
            Style::Line => {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    pts.join(" ")
                );
            }
            Style::Bars => {
                let half = 0.35 * plot_w / (xa.hi - xa.lo);
                let base = py(if log { 10f64.powf(ya.lo) } else { 0.0 });
                for (j, &(x, y)) in s.points.iter().enumerate() {
                    let (cx, top) = (px(x), py(y));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                        cx - half,
                        top.min(base),
                        2.0 * half,
                        (base - top).abs()
                    );
                    if let Some(label) = s.labels.get(j) {
                        let _ = writeln!(
                            out,
                            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                            y1 + 18.0,
                            escape(label)
                        );
                    }
                }
            }
        }
        if s.style != Style::Bars {
            for (j, label) in s.labels.iter().enumerate() {
                if let Some(&(x, y)) = s.points.get(j) {
                    let _ = writeln!(
                        out,
                        r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
                        px(x) + 4.0,
                        py(y) - 4.0,
                        escape(label)
                    );
                }
            }
        }
        out.push_str("</g>\n");
    }

    out.push_str("<g class=\"legend\">\n");
    for (i, s) in series.iter().enumerate() {
        let y = y0 + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"#,
            x1 - 150.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x1 - 135.0, escape(&s.name));
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: Vec<(f64, f64)>) -> PlotSeries {
        PlotSeries::new("line", points, Scale::LogLog, Style::Line)
    }

    #[test]
    fn one_decade_slope() {
        let svg = render_svg(&[line(vec![(1.0, 1.0), (10.0, 0.1)])], &SvgOptions::default()).unwrap();
        assert!(svg.contains(">1</text>"));
        assert!(svg.contains(">10</text>"));
        assert!(svg.contains(">0.1</text>"));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let poly = doc
            .descendants()
            .find(|n| n.has_tag_name("polyline"))
            .unwrap();
        let pts: Vec<(f64, f64)> = poly
            .attribute("points")
            .unwrap()
            .split(' ')
            .map(|p| {
                let (a, b) = p.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect();
        // One decade on each axis spans the full plot; the pixel slope is the
        // aspect ratio with the sign of the data slope.
        let dx = pts[1].0 - pts[0].0;
        let dy = pts[1].1 - pts[0].1;
        let (pw, ph) = (640.0 - MARGIN_LEFT - MARGIN_RIGHT, 480.0 - MARGIN_TOP - MARGIN_BOTTOM);
        assert!((dx - pw).abs() < 0.02);
        assert!((dy - ph).abs() < 0.02);
    }

    #[test]
    fn deterministic_and_well_formed() {
        let mut s = PlotSeries::new(
            "a <b> & \"c\"",
            (1..200).map(|i| (i as f64, 1.0 / i as f64)).collect(),
            Scale::LogLog,
            Style::Points,
        );
        s.labels = vec!["x&y".into()];
        let opts = SvgOptions::titled("T & t", "x", "P(X ≥ x)");
        let a = render_svg(&[s.clone(), line(vec![(1.0, 1.0), (100.0, 0.01)])], &opts).unwrap();
        let b = render_svg(&[s, line(vec![(1.0, 1.0), (100.0, 0.01)])], &opts).unwrap();
        assert_eq!(a, b);
        let doc = roxmltree::Document::parse(&a).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(!a.contains("href"));
    }

    #[test]
    fn errors() {
        assert!(matches!(render_svg(&[], &SvgOptions::default()), Err(Error::Render { .. })));
        let bad = line(vec![(1.0, 1.0), (10.0, -0.1)]);
        match render_svg(&[bad], &SvgOptions::default()) {
            Err(Error::Render { series, .. }) => assert_eq!(series, "line"),
            other => panic!("{other:?}"),
        }
        let lin = PlotSeries::new("lin", vec![(1.0, 1.0)], Scale::Linear, Style::Points);
        assert!(render_svg(&[line(vec![(1.0, 1.0)]), lin], &SvgOptions::default()).is_err());
    }

    #[test]
    fn linear_bars_and_ticks() {
        let mut bars = PlotSeries::new(
            "bars",
            vec![(1.0, 0.55), (2.0, 0.47), (3.0, 0.05)],
            Scale::Linear,
            Style::Bars,
        );
        bars.labels = vec!["twitch".into(), "youtube".into(), "twitter".into()];
        let svg = render_svg(&[bars], &SvgOptions::default()).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
        assert!(svg.contains(">twitch</text>"));
        assert!(svg.contains(">0.0</text>"));
        assert_eq!(decade_label(-3), "0.001");
        assert_eq!(decade_label(3), "1000");
        assert_eq!(nice_step(0.23), 0.5);
        assert_eq!(nice_step(3.0), 5.0);
    }
}
