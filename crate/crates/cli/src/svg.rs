//! Minimal SVG line plots for energy decay curves.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const FLOOR_DB: f64 = -80.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// EDC curves in dB against time, clipped at -80 dB.
pub fn edc_plot(title: &str, curves: &[&[f64]], fs: u32) -> String {
    let n = curves.iter().map(|c| c.len()).max().unwrap_or(1).max(2);
    let t_max = n as f64 / fs as f64;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64;
    let y = |db: f64| PAD + (H - 2.0 * PAD) * (db.clamp(FLOOR_DB, 0.0) / FLOOR_DB);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    for k in 0..=4 {
        let db = FLOOR_DB * k as f64 / 4.0;
        let yy = y(db);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{yy}" x2="{}" y2="{yy}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{db}</text>"##,
            W - PAD,
            PAD - 5.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time (s), 0 to {t_max:.3}</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">EDC (dB)</text>"#,
        H / 2.0,
        H / 2.0
    );
    // Thin long curves to ~1000 points.
    let stride = (n / 1000).max(1);
    for (c, curve) in curves.iter().enumerate() {
        let mut pts = String::new();
        for (i, &v) in curve.iter().enumerate().step_by(stride) {
            let _ = write!(pts, "{:.1},{:.1} ", x(i), y(v));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            COLORS[c % COLORS.len()],
            pts.trim_end()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
