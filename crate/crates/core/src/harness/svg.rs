//! Minimal SVG line/band charts with an optional log-scaled x axis.

use std::fmt::Write as _;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dash {
    Solid,
    Dashed,
    DashDot,
}

impl Dash {
    fn attr(self) -> &'static str {
        match self {
            Dash::Solid => "",
            Dash::Dashed => r#" stroke-dasharray="6,4""#,
            Dash::DashDot => r#" stroke-dasharray="8,3,2,3""#,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Element {
    /// Shaded region between `lo` and `hi`.
    Band {
        xs: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        color: String,
        label: String,
    },
    Line {
        xs: Vec<f64>,
        ys: Vec<f64>,
        color: String,
        dash: Dash,
        label: String,
    },
    /// Horizontal reference line across the whole plot.
    HLine {
        y: f64,
        color: String,
        dash: Dash,
        label: String,
    },
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    /// Fixed y range; values outside are clamped to it.
    pub y_range: Option<(f64, f64)>,
    pub elements: Vec<Element>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: true,
            y_range: None,
            elements: Vec::new(),
        }
    }

    fn x_extent(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in &self.elements {
            let xs = match e {
                Element::Band { xs, .. } | Element::Line { xs, .. } => xs,
                Element::HLine { .. } => continue,
            };
            for &x in xs.iter().filter(|x| x.is_finite() && (!self.log_x || **x > 0.0)) {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if !lo.is_finite() {
            return if self.log_x { (0.01, 100.0) } else { (0.0, 1.0) };
        }
        if lo == hi {
            return if self.log_x { (lo / 10.0, hi * 10.0) } else { (lo - 1.0, hi + 1.0) };
        }
        (lo, hi)
    }

    fn y_extent(&self) -> (f64, f64) {
        if let Some(r) = self.y_range {
            return r;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut add = |v: f64| {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        };
        for e in &self.elements {
            match e {
                Element::Band { lo: l, hi: h, .. } => l.iter().chain(h).for_each(|&v| add(v)),
                Element::Line { ys, .. } => ys.iter().for_each(|&v| add(v)),
                Element::HLine { y, .. } => add(*y),
            }
        }
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1) = self.x_extent();
        let (y0, y1) = self.y_extent();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let log_x = self.log_x;
        let sx = move |x: f64| {
            let f = if log_x {
                (x.ln() - x0.ln()) / (x1.ln() - x0.ln())
            } else {
                (x - x0) / (x1 - x0)
            };
            LEFT + f * pw
        };
        let sy = move |y: f64| {
            let y = y.clamp(y0, y1);
            TOP + (1.0 - (y - y0) / (y1 - y0)) * ph
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );

        // grid and ticks
        for (v, label) in x_ticks(x0, x1, log_x) {
            let x = sx(v);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{:.1}" stroke="#e0e0e0"/>"##,
                TOP + ph
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
                TOP + ph + 16.0
            );
        }
        for v in nice_ticks(y0, y1, 6) {
            let y = sy(v);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut legend = Vec::new();
        for e in &self.elements {
            match e {
                Element::Band { xs, lo, hi, color, label } => {
                    let mut pts: Vec<String> = Vec::new();
                    for (x, y) in xs.iter().zip(hi) {
                        if x.is_finite() && y.is_finite() {
                            pts.push(format!("{:.1},{:.1}", sx(*x), sy(*y)));
                        }
                    }
                    for (x, y) in xs.iter().zip(lo).rev() {
                        if x.is_finite() && y.is_finite() {
                            pts.push(format!("{:.1},{:.1}", sx(*x), sy(*y)));
                        }
                    }
                    let _ = writeln!(
                        s,
                        r#"<polygon points="{}" fill="{color}" fill-opacity="0.25" stroke="none"/>"#,
                        pts.join(" ")
                    );
                    legend.push((label.clone(), color.clone(), None));
                }
                Element::Line { xs, ys, color, dash, label } => {
                    let pts: Vec<String> = xs
                        .iter()
                        .zip(ys)
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{}/>"#,
                        pts.join(" "),
                        dash.attr()
                    );
                    legend.push((label.clone(), color.clone(), Some(*dash)));
                }
                Element::HLine { y, color, dash, label } => {
                    if *y >= y0 && *y <= y1 {
                        let yy = sy(*y);
                        let _ = writeln!(
                            s,
                            r#"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="{color}" stroke-width="1.5"{}/>"#,
                            LEFT + pw,
                            dash.attr()
                        );
                    }
                    if !label.is_empty() {
                        legend.push((label.clone(), color.clone(), Some(*dash)));
                    }
                }
            }
        }

        let lx = LEFT + pw + 12.0;
        for (i, (label, color, dash)) in legend.iter().filter(|(l, _, _)| !l.is_empty()).enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            match dash {
                None => {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{lx}" y="{:.1}" width="22" height="10" fill="{color}" fill-opacity="0.25"/>"#,
                        y - 5.0
                    );
                }
                Some(d) => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{lx}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="1.8"{}/>"#,
                        lx + 22.0,
                        d.attr()
                    );
                }
            }
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 28.0, y + 4.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn x_ticks(x0: f64, x1: f64, log: bool) -> Vec<(f64, String)> {
    if log {
        let (a, b) = (x0.log10().ceil() as i32, x1.log10().floor() as i32);
        (a..=b)
            .map(|e| {
                let v = 10f64.powi(e);
                (v, fmt_tick(v))
            })
            .collect()
    } else {
        nice_ticks(x0, x1, 6).into_iter().map(|v| (v, fmt_tick(v))).collect()
    }
}

/// Round-number ticks covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks() {
        assert_eq!(nice_ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert!(nice_ticks(1.0, 1.0, 5).is_empty());
        let xt = x_ticks(0.01, 100.0, true);
        assert_eq!(xt.len(), 5);
        assert_eq!(xt[0].1, "0.01");
    }

    #[test]
    fn renders_elements() {
        let mut c = Chart::new("t <x>", "epsilon", "t");
        c.elements.push(Element::Band {
            xs: vec![0.1, 1.0, 10.0],
            lo: vec![-5.0, 1.0, 2.0],
            hi: vec![9.0, 4.0, 3.0],
            color: PALETTE[0].into(),
            label: "K=4".into(),
        });
        c.elements.push(Element::HLine {
            y: 2.0,
            color: "black".into(),
            dash: Dash::DashDot,
            label: "critical t".into(),
        });
        let s = c.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("<polygon"));
        assert!(s.contains("8,3,2,3"));
        assert!(s.contains("t &lt;x&gt;"));
    }
}
