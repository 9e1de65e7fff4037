//! Minimal log-scale line chart in SVG.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

/// Plots positive `(x, y)` points with y on a log axis. Returns `None`
/// when fewer than two points are positive.
pub fn log_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> Option<String> {
    let pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(x, y)| x.is_finite() && y > 0.0 && y.is_finite()).collect();
    if pts.len() < 2 {
        return None;
    }
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (ly0, ly1) =
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1.log10()), b.max(p.1.log10())));
    let (d0, d1) = (ly0.floor(), ly1.ceil().max(ly0.floor() + 1.0));
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let sx = |x: f64| PAD + (x - x0) / xspan * (W - 2.0 * PAD);
    let sy = |ly: f64| H - PAD - (ly - d0) / (d1 - d0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(s, r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#, H - PAD, W - PAD);
    let step = ((d1 - d0) / 8.0).ceil().max(1.0);
    let mut d = d0;
    while d <= d1 + 1e-9 {
        let y = sy(d);
        let _ = writeln!(s, r##"<line x1="{PAD}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##, W - PAD);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">1e{}</text>"#,
            PAD - 4.0,
            y + 4.0,
            d as i64
        );
        d += step;
    }
    for (i, xv) in [x0, x1].iter().enumerate() {
        let anchor = if i == 0 { "start" } else { "end" };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            sx(*xv),
            H - PAD + 16.0,
            short(*xv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.log10()))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, path.join(" "));
    s.push_str("</svg>\n");
    Some(s)
}

fn short(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_one_polyline_vertex_per_positive_point() {
        let pts: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.5f64.powi(k))).chain([(20.0, 0.0)]).collect();
        let svg = log_chart("gd", "k", "f_err", &pts).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 20);
    }

    #[test]
    fn degenerate_series_yield_nothing() {
        assert!(log_chart("t", "k", "e", &[(0.0, 1.0), (1.0, 0.0)]).is_none());
    }
}
