//! Self-contained SVG figures: line plots, field maps with iso-lines, and
//! trajectory overlays.

use std::fmt::Write as _;

use crate::flow::Point2;
use crate::grid::ScalarField;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 64.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { lo, hi, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

fn frame(s: &mut String, xa: Axis, ya: Axis, xlabel: &str, ylabel: &str, log_y: bool) {
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = xa.lo + f * (xa.hi - xa.lo);
        let yv = ya.lo + f * (ya.hi - ya.lo);
        let (px, py) = (xa.map(xv), ya.map(yv));
        let ylab = if log_y { 10f64.powf(yv) } else { yv };
        let _ = writeln!(
            s,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            H - MARGIN + 18.0,
            tick(xv),
            MARGIN - 6.0,
            py + 4.0,
            tick(ylab)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        W / 2.0,
        H - 18.0,
        escape(xlabel),
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e4) {
        format!("{}", (v * 100.0).round() / 100.0)
    } else {
        format!("{v:.1e}")
    }
}

/// One labelled polyline per series.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)], log_y: bool) -> String {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
        .map(|(x, y)| (x, if log_y { y.log10() } else { y }))
        .collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x0, x1) = if pts.is_empty() { (0.0, 1.0) } else { bounds(|p| p.0) };
    let (y0, y1) = if pts.is_empty() { (0.0, 1.0) } else { bounds(|p| p.1) };
    let pad = 0.05 * (y1 - y0).max(1e-12);
    let xa = Axis::new(x0, x1, MARGIN, W - MARGIN);
    let ya = Axis::new(y0 - pad, y1 + pad, H - MARGIN, MARGIN);
    let mut s = header(title);
    frame(&mut s, xa, ya, xlabel, ylabel, log_y);
    for (idx, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
            .map(|&(x, y)| format!("{:.1},{:.1}", xa.map(x), ya.map(if log_y { y.log10() } else { y })))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", coords.join(" "));
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap();
            let _ = writeln!(s, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3.5\" fill=\"{color}\"/>");
        }
        let ly = MARGIN + 18.0 + 18.0 * idx as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\">{}</text>",
            W - MARGIN - 110.0,
            W - MARGIN - 86.0,
            W - MARGIN - 80.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn color_ramp(t: f64) -> String {
    // white → blue → dark red
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (255.0 * (1.0 - u) + 40.0 * u, 255.0 * (1.0 - u) + 90.0 * u, 255.0 * (1.0 - u) + 200.0 * u)
    } else {
        let u = (t - 0.5) / 0.5;
        (40.0 + 120.0 * u, 90.0 * (1.0 - u), 200.0 * (1.0 - u) + 30.0 * u)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Heat map of `f` (at most `cells²` tiles) with `levels` iso-lines.
/// `scale` converts grid coordinates to physical ones.
pub fn field_map(title: &str, f: &ScalarField, scale: f64, levels: usize, cells: usize) -> String {
    let g = f.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let o = g.origin();
    let h = g.spacing();
    let (lo, hi) = (f.min(), f.max());
    let span = (hi - lo).max(1e-300);
    let ext1 = scale * h * (n1 - 1) as f64;
    let ext2 = scale * h * (n2 - 1) as f64;
    let side = (W - 2.0 * MARGIN).min(H - 2.0 * MARGIN);
    let ratio = ext2 / ext1;
    let (pw, ph) = if ratio <= 1.0 { (side, side * ratio) } else { (side / ratio, side) };
    let xa = Axis::new(scale * o.x1, scale * o.x1 + ext1, MARGIN, MARGIN + pw);
    let ya = Axis::new(scale * o.x2, scale * o.x2 + ext2, MARGIN + ph, MARGIN);
    let mut s = header(title);
    let stride = (n1.max(n2) / cells.max(1)).max(1);
    let tile_w = pw * stride as f64 / (n1 - 1).max(1) as f64;
    let tile_h = ph * stride as f64 / (n2 - 1).max(1) as f64;
    for j in (0..n2).step_by(stride) {
        for i in (0..n1).step_by(stride) {
            let p = g.point_ij(i, j);
            let (px, py) = (xa.map(scale * p.x1), ya.map(scale * p.x2));
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                px - tile_w / 2.0,
                py - tile_h / 2.0,
                tile_w + 0.3,
                tile_h + 0.3,
                color_ramp((f.at(i, j) - lo) / span)
            );
        }
    }
    // marching squares on the subsampled lattice
    let vals = |i: usize, j: usize| f.at(i.min(n1 - 1), j.min(n2 - 1));
    let pix = |i: f64, j: f64| (xa.map(scale * (o.x1 + i * h)), ya.map(scale * (o.x2 + j * h)));
    for l in 1..=levels {
        let level = lo + span * l as f64 / (levels + 1) as f64;
        let mut path = String::new();
        for j in (0..n2.saturating_sub(1)).step_by(stride) {
            for i in (0..n1.saturating_sub(1)).step_by(stride) {
                let (i1, j1) = (i + stride, j + stride);
                let corners = [(i, j), (i1, j), (i1, j1), (i, j1)];
                let v: Vec<f64> = corners.iter().map(|&(a, b)| vals(a, b)).collect();
                let mut hits = Vec::with_capacity(4);
                for e in 0..4 {
                    let (a, b) = (v[e], v[(e + 1) % 4]);
                    if (a - level) * (b - level) < 0.0 {
                        let t = (level - a) / (b - a);
                        let (ca, cb) = (corners[e], corners[(e + 1) % 4]);
                        let x = ca.0 as f64 + t * (cb.0 as f64 - ca.0 as f64);
                        let y = ca.1 as f64 + t * (cb.1 as f64 - ca.1 as f64);
                        hits.push(pix(x, y));
                    }
                }
                for pair in hits.chunks(2).filter(|c| c.len() == 2) {
                    let _ = write!(path, "M{:.1} {:.1}L{:.1} {:.1}", pair[0].0, pair[0].1, pair[1].0, pair[1].1);
                }
            }
        }
        if !path.is_empty() {
            let _ = writeln!(s, "<path d=\"{path}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>");
        }
    }
    frame(&mut s, xa, ya, "x₁", "x₂", false);
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\">min {} max {}</text>",
        MARGIN,
        H - 36.0,
        tick(lo),
        tick(hi)
    );
    s.push_str("</svg>\n");
    s
}

/// Paths drawn over the square `[lo, hi]²`, optionally with the
/// separatrix lattice (integer lines) and a disk of radius `disk`.
pub fn trajectories(title: &str, paths: &[Vec<(f64, Point2)>], lo: f64, hi: f64, disk: Option<f64>) -> String {
    let side = (W - 2.0 * MARGIN).min(H - 2.0 * MARGIN);
    let xa = Axis::new(lo, hi, MARGIN, MARGIN + side);
    let ya = Axis::new(lo, hi, MARGIN + side, MARGIN);
    let mut s = header(title);
    let mut k = lo.ceil() as i64;
    while (k as f64) <= hi {
        let (px, py) = (xa.map(k as f64), ya.map(k as f64));
        let _ = writeln!(
            s,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#bbb\" stroke-width=\"0.6\"/>\
             <line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#bbb\" stroke-width=\"0.6\"/>",
            ya.map(lo),
            ya.map(hi),
            xa.map(lo),
            xa.map(hi)
        );
        k += 1;
    }
    if let Some(r) = disk {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{:.1}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
            xa.map(0.0),
            ya.map(0.0),
            xa.map(r) - xa.map(0.0)
        );
    }
    for (idx, path) in paths.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> =
            path.iter().map(|(_, p)| format!("{:.1},{:.1}", xa.map(p.x1), ya.map(p.x2))).collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"0.7\" stroke-opacity=\"0.85\" points=\"{}\"/>",
            coords.join(" ")
        );
    }
    frame(&mut s, xa, ya, "x₁", "x₂", false);
    s.push_str("</svg>\n");
    s
}
