//! Self-contained SVG charts and a kernel-density mode counter.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    for (v, anchor_x) in [(frame.x.0, l), (frame.x.1, r)] {
        let _ = writeln!(out, r#"<text x="{anchor_x}" y="{}" text-anchor="middle">{v:.3}</text>"#, b + 16.0);
    }
    for (v, anchor_y) in [(frame.y.0, b), (frame.y.1, t)] {
        let _ = writeln!(out, r#"<text x="{}" y="{anchor_y}" text-anchor="end">{v:.3}</text>"#, l - 6.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

pub fn scatter_svg(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let frame = Frame {
        x: extent(points.iter().map(|p| p.0)),
        y: extent(points.iter().map(|p| p.1)),
    };
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel, &frame);
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f77b4" fill-opacity="0.6"/>"##,
            frame.px(x),
            frame.py(y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Equal-width bin counts over the finite range of `values`.
pub fn histogram_counts(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let (lo, hi) = extent(values.iter().copied());
    let bins = bins.max(1);
    let mut counts = vec![0; bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    (lo, hi, counts)
}

pub fn histogram_svg(values: &[f64], bins: usize, title: &str, xlabel: &str) -> String {
    let (lo, hi, counts) = histogram_counts(values, bins);
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame {
        x: (lo, hi),
        y: (0.0, top),
    };
    let mut out = String::new();
    open(&mut out, title, xlabel, "count", &frame);
    let w = (hi - lo) / counts.len() as f64;
    for (i, &c) in counts.iter().enumerate() {
        let x0 = frame.px(lo + i as f64 * w);
        let x1 = frame.px(lo + (i + 1) as f64 * w);
        let y = frame.py(c as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#ff7f0e" stroke="white" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            frame.py(0.0) - y
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grid of `values` (row-major, `ny` rows of `nx`) with row 0 at the bottom.
pub fn heatmap_svg(values: &[f64], nx: usize, ny: usize, title: &str) -> String {
    let (lo, hi) = extent(values.iter().copied());
    let frame = Frame {
        x: (0.0, nx as f64),
        y: (0.0, ny as f64),
    };
    let mut out = String::new();
    open(&mut out, title, "x cell", "y cell", &frame);
    let (cw, ch) = (
        (WIDTH - 2.0 * MARGIN) / nx.max(1) as f64,
        (HEIGHT - 2.0 * MARGIN) / ny.max(1) as f64,
    );
    for iy in 0..ny {
        for ix in 0..nx {
            let v = values.get(iy * nx + ix).copied().unwrap_or(f64::NAN);
            let t = if v.is_finite() { (v - lo) / (hi - lo) } else { 0.0 };
            // white to dark red
            let g = (255.0 * (1.0 - t)).round() as u8;
            let r = (255.0 - 90.0 * t).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="rgb({r},{g},{g})"/>"#,
                frame.px(ix as f64),
                frame.py((iy + 1) as f64)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">range {lo:.3} to {hi:.3}</text>"#,
        WIDTH - MARGIN,
        MARGIN - 8.0
    );
    out.push_str("</svg>\n");
    out
}

/// Gaussian kernel density estimate on `grid` evenly spaced points covering
/// the data range padded by three bandwidths (Silverman's rule).
pub fn kde(values: &[f64], grid: usize) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let n = v.len() as f64;
    if v.is_empty() || grid < 2 {
        return (Vec::new(), Vec::new());
    }
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    let iqr = crate::uq::quantile_sorted(&sorted, 0.75) - crate::uq::quantile_sorted(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 1.0,
    };
    let h = 0.9 * spread * n.powf(-0.2);
    let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
    let xs: Vec<f64> = (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect();
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let ds = xs
        .iter()
        .map(|&x| v.iter().map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    (xs, ds)
}

/// Local maxima of the density estimate at least 5% as high as the global
/// maximum.
pub fn kde_local_maxima(values: &[f64]) -> usize {
    let (_, d) = kde(values, 512);
    let top = d.iter().copied().fold(0.0, f64::max);
    (1..d.len().saturating_sub(1))
        .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] >= 0.05 * top)
        .count()
}
