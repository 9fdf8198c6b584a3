//! Log–log scatter with fitted lines, as a standalone SVG.

use std::fmt::Write;

use brlab_core::io::fmt_g;

pub struct Series {
    pub label: String,
    /// `(x, y)` in data units; both axes are drawn logarithmically.
    pub points: Vec<(f64, f64)>,
    /// `ln y = slope · ln x + intercept`.
    pub slope: f64,
    pub intercept: f64,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series], comment: &str) -> String {
    let (w, h) = (640.0, 440.0);
    let (x0, y0, pw, ph) = (70.0, 30.0, 420.0, 340.0);
    let logs: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
        if lo > hi {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (xl, xh) = span(&mut logs.iter().map(|p| p.0));
    let (yl, yh) = span(&mut logs.iter().map(|p| p.1));
    let tx = |x: f64| x0 + (x - xl) / (xh - xl) * pw;
    let ty = |y: f64| y0 + ph - (y - yl) / (yh - yl) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<!-- {} -->", comment.replace("--", "- -"));
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (k, ticks) in [(0, (xl, xh)), (1, (yl, yh))] {
        for i in 0..=4 {
            let v = ticks.0 + (ticks.1 - ticks.0) * i as f64 / 4.0;
            let text = fmt_g(v.exp(), 3);
            if k == 0 {
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{text}</text>"#, tx(v), y0 + ph + 16.0);
            } else {
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{text}</text>"#, x0 - 4.0, ty(v) + 4.0);
            }
        }
    }
    for (i, se) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let (a, b) = (xl, xh);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="1.5"/>"#,
            tx(a),
            ty(se.slope * a + se.intercept).clamp(y0 - 20.0, y0 + ph + 20.0),
            tx(b),
            ty(se.slope * b + se.intercept).clamp(y0 - 20.0, y0 + ph + 20.0)
        );
        for &(x, y) in se.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#, tx(x.ln()), ty(y.ln()));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{c}">{} slope {}</text>"#,
            x0 + pw + 10.0,
            y0 + 16.0 * (i as f64 + 1.0),
            escape(&se.label),
            fmt_g(se.slope, 4)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle">{}</text>"#, x0 + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + pw / 2.0, y0 + ph + 36.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
        y0 + ph / 2.0,
        y0 + ph / 2.0,
        escape(ylabel)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
