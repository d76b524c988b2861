use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Roc,
    Gain,
    Pov,
}

impl ChartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartKind::Roc => "roc",
            ChartKind::Gain => "gain",
            ChartKind::Pov => "pov",
        }
    }

    fn labels(self) -> (&'static str, &'static str) {
        match self {
            ChartKind::Roc => ("false positive rate", "true positive rate"),
            ChartKind::Gain => ("fraction of population", "fraction of positives captured"),
            ChartKind::Pov => ("number of variables", "cumulative proportion of variance"),
        }
    }
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Standalone SVG line chart of `curve`. ROC and gain charts also draw the
/// diagonal a random ranking would follow. Output depends only on the input.
pub fn render_chart(curve: &[(f64, f64)], kind: ChartKind, title: &str) -> Result<String> {
    if curve.is_empty() {
        return Err(Error::Data("cannot chart an empty curve".into()));
    }
    let x_max = match kind {
        ChartKind::Pov => curve.iter().map(|p| p.0).fold(1.0, f64::max),
        _ => 1.0,
    };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x / x_max * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - y.clamp(0.0, 1.0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
            px(f * x_max),
            HEIGHT - MARGIN + 14.0,
            tick(f * x_max)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{}</text>"#,
            MARGIN - 6.0,
            py(f) + 3.0,
            tick(f)
        );
    }
    let (xl, yl) = kind.labels();
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{xl}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{yl}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    if kind != ChartKind::Pov {
        let _ = writeln!(
            s,
            r#"<polyline class="baseline" points="{:.2},{:.2} {:.2},{:.2}" fill="none" stroke="gray" stroke-dasharray="4 4"/>"#,
            px(0.0),
            py(0.0),
            px(1.0),
            py(1.0)
        );
    }
    let points: Vec<String> = curve
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="series" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        points.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="steelblue">{}</text>"#,
        WIDTH - MARGIN - 100.0,
        MARGIN + 14.0,
        kind.as_str()
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
