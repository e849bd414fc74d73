//! Minimal static SVG renderings of the plot CSVs.

use std::fmt::Write as _;

const W: f64 = 900.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    s
}

fn map(v: f64, (lo, hi): (f64, f64), a: f64, b: f64) -> f64 {
    a + (v - lo) / (hi - lo) * (b - a)
}

/// Line plot of p-values against the running segment number, with the
/// threshold drawn as a dashed line.
pub fn pvalue_svg(points: &[(usize, f64)], alpha: f64) -> String {
    let xr = range(points.iter().map(|p| p.0 as f64));
    let yr = (0.0, 1.0);
    let mut s = header("Rank-test p-value per segment");
    let mut path = String::new();
    for (k, &(x, p)) in points.iter().enumerate() {
        let cmd = if k == 0 { 'M' } else { 'L' };
        let _ = write!(
            path,
            "{cmd}{:.2},{:.2} ",
            map(x as f64, xr, PAD, W - PAD),
            map(p, yr, H - PAD, PAD)
        );
    }
    let _ = writeln!(
        s,
        r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="1"/>"##,
        path.trim_end()
    );
    let ya = map(alpha.clamp(0.0, 1.0), yr, H - PAD, PAD);
    let _ = writeln!(
        s,
        r##"<line x1="{PAD}" y1="{ya:.2}" x2="{}" y2="{ya:.2}" stroke="#d62728" stroke-dasharray="6,4"/>"##,
        W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{:.2}" text-anchor="end">alpha = {alpha}</text>"#,
        W - PAD - 4.0,
        ya - 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">segment</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">p-value</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Scatter of the 2-D embedding; fill colour is the predicted cluster and
/// each point's tooltip names its true label.
pub fn scatter_svg(coords: &[Vec<f64>], clusters: &[usize], truth: &[String]) -> String {
    let xr = range(coords.iter().map(|c| c[0]));
    let yr = range(coords.iter().map(|c| c.get(1).copied().unwrap_or(0.0)));
    let mut s = header("Event embedding, coloured by cluster");
    for (i, c) in coords.iter().enumerate() {
        let x = map(c[0], xr, PAD + 10.0, W - PAD - 10.0);
        let y = map(c.get(1).copied().unwrap_or(0.0), yr, H - PAD - 10.0, PAD + 10.0);
        let colour = PALETTE[clusters.get(i).copied().unwrap_or(0) % PALETTE.len()];
        let label = truth.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{colour}" stroke="#222" stroke-width="0.5"><title>{label}</title></circle>"##
        );
    }
    s.push_str("</svg>\n");
    s
}
