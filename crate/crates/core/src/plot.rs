//! Standalone SVG figures from trajectory logs.
//!
//! Rendering is a pure function of the rows: coordinates are printed with
//! fixed precision and nothing depends on time or locale, so the same log
//! always yields byte-identical output.

use std::fmt::Write;
use std::str::FromStr;

use crate::logs::TrajectoryRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Actual and goal x, y, z against time.
    Coords,
    /// The four PWM commands against time.
    Pwm,
    /// Orthographic 3D view of the actual and goal paths.
    Traj3d,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::Coords, PlotKind::Pwm, PlotKind::Traj3d];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Coords => "coords",
            PlotKind::Pwm => "pwm",
            PlotKind::Traj3d => "traj3d",
        }
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown plot kind `{s}`; valid kinds: coords, pwm, traj3d"))
    }
}

const WIDTH: f64 = 900.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 120.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 40.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Finite range of `vals`, widened so a constant series still spans a band.
fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Up to five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 4.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 && out.len() < 12 {
        // avoid printing -0.00
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

struct Panel {
    top: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + PANEL_H - (y - self.y0) / (self.y1 - self.y0) * PANEL_H
    }

    fn frame(&self, svg: &mut String, ylabel: &str, xlabel: Option<&str>) {
        let (l, r) = (MARGIN_L, WIDTH - MARGIN_R);
        let (t, b) = (self.top, self.top + PANEL_H);
        let _ = writeln!(svg, r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{PANEL_H:.2}" fill="none" stroke="#444"/>"##, r - l);
        for v in ticks(self.y0, self.y1) {
            let y = self.py(v);
            let _ = writeln!(svg, r##"<line x1="{l:.2}" y1="{y:.2}" x2="{r:.2}" y2="{y:.2}" stroke="#ddd"/>"##);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#, l - 6.0, y + 4.0, fmt_tick(v));
        }
        for v in ticks(self.x0, self.x1) {
            let x = self.px(v);
            let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, b + 4.0);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#, b + 16.0, fmt_tick(v));
        }
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" font-size="13" transform="rotate(-90 16 {:.2})" text-anchor="middle">{}</text>"#,
            t + PANEL_H / 2.0,
            t + PANEL_H / 2.0,
            esc(ylabel)
        );
        if let Some(xl) = xlabel {
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#, (l + r) / 2.0, b + 32.0, esc(xl));
        }
    }

    fn line(&self, svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dashed: bool) {
        polyline(svg, pts.filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (self.px(x), self.py(y))), color, dashed);
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn polyline(svg: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dashed: bool) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.trim_end());
}

fn legend(svg: &mut String, top: f64, entries: &[(&str, &str, bool)]) {
    let x = WIDTH - MARGIN_R + 12.0;
    for (i, (label, color, dashed)) in entries.iter().enumerate() {
        let y = top + 12.0 + 18.0 * i as f64;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#, x + 24.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, x + 30.0, y + 4.0, esc(label));
    }
}

fn document(height: f64, title: &str, body: &str) -> String {
    format!(
        concat!(
            r#"<?xml version="1.0" encoding="UTF-8"?>"#,
            "\n",
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
            "\n",
            r#"<rect width="100%" height="100%" fill="white"/>"#,
            "\n",
            r#"<text x="{cx}" y="24" font-size="15" text-anchor="middle">{title}</text>"#,
            "\n{body}</svg>\n"
        ),
        w = WIDTH,
        h = height,
        cx = WIDTH / 2.0,
        title = esc(title),
        body = body
    )
}

fn time_range(rows: &[TrajectoryRow]) -> (f64, f64) {
    match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if b.t > a.t => (a.t, b.t),
        (Some(a), _) => (a.t, a.t + 1.0),
        _ => (0.0, 1.0),
    }
}

fn coords(rows: &[TrajectoryRow]) -> String {
    let (t0, t1) = time_range(rows);
    let mut body = String::new();
    for (i, axis) in ["x", "y", "z"].into_iter().enumerate() {
        let actual = rows.iter().map(|r| r.state.position[i]);
        let goal = rows.iter().filter_map(|r| r.goal.map(|g| g[i]));
        let (y0, y1) = range(actual.chain(goal));
        let p = Panel {
            top: MARGIN_T + i as f64 * (PANEL_H + GAP),
            x0: t0,
            x1: t1,
            y0,
            y1,
        };
        p.frame(&mut body, &format!("{axis} (m)"), (i == 2).then_some("time (s)"));
        if rows.iter().any(|r| r.goal.is_some()) {
            p.line(&mut body, rows.iter().filter_map(|r| r.goal.map(|g| (r.t, g[i]))), "#888", true);
        }
        p.line(&mut body, rows.iter().map(|r| (r.t, r.state.position[i])), COLORS[i], false);
        legend(&mut body, p.top, &[("actual", COLORS[i], false), ("goal", "#888", true)]);
    }
    document(MARGIN_T + 3.0 * PANEL_H + 2.0 * GAP + 50.0, "Coordinates (NED, z down)", &body)
}

fn pwm(rows: &[TrajectoryRow]) -> String {
    let (t0, t1) = time_range(rows);
    let p = Panel {
        top: MARGIN_T,
        x0: t0,
        x1: t1,
        y0: -0.02,
        y1: 1.02,
    };
    let mut body = String::new();
    p.frame(&mut body, "PWM", Some("time (s)"));
    let names = ["rotor 1", "rotor 2", "rotor 3", "rotor 4"];
    for (k, color) in COLORS.iter().enumerate().take(4) {
        p.line(&mut body, rows.iter().map(|r| (r.t, r.pwm[k])), color, false);
    }
    let entries: Vec<_> = (0..4).map(|k| (names[k], COLORS[k], false)).collect();
    legend(&mut body, p.top, &entries);
    document(MARGIN_T + PANEL_H + 50.0, "Motor PWMs", &body)
}

/// Projects NED points with altitude drawn upward: azimuth 35°, elevation 25°.
fn project(p: [f64; 3]) -> (f64, f64) {
    let (az, el) = (35f64.to_radians(), 25f64.to_radians());
    let (n, e, up) = (p[0], p[1], -p[2]);
    let h = e * az.cos() - n * az.sin();
    let depth = e * az.sin() + n * az.cos();
    let v = up * el.cos() + depth * el.sin();
    (h, v)
}

fn traj3d(rows: &[TrajectoryRow]) -> String {
    let size = 600.0;
    let actual: Vec<[f64; 3]> = rows.iter().map(|r| r.state.position).filter(|p| p.iter().all(|v| v.is_finite())).collect();
    let goal: Vec<[f64; 3]> = rows.iter().filter_map(|r| r.goal).collect();
    let all: Vec<[f64; 3]> = actual.iter().chain(&goal).copied().collect();
    // bounding box of the data, squared up so the axes share a scale
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &all {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if all.is_empty() {
        lo = [-1.0; 3];
        hi = [1.0; 3];
    }
    let half = (0..3).map(|k| hi[k] - lo[k]).fold(0.5, f64::max) / 2.0 * 1.1;
    let c: [f64; 3] = std::array::from_fn(|k| (lo[k] + hi[k]) / 2.0);
    let (blo, bhi) = (c.map(|v| v - half), c.map(|v| v + half));

    let corners: Vec<[f64; 3]> = (0..8)
        .map(|i| [if i & 1 == 0 { blo[0] } else { bhi[0] }, if i & 2 == 0 { blo[1] } else { bhi[1] }, if i & 4 == 0 { blo[2] } else { bhi[2] }])
        .collect();
    let proj: Vec<(f64, f64)> = corners.iter().map(|p| project(*p)).collect();
    let (h0, h1) = range(proj.iter().map(|p| p.0));
    let (v0, v1) = range(proj.iter().map(|p| p.1));
    let scale = (size - 80.0) / (h1 - h0).max(v1 - v0);
    let ox = (WIDTH - (h1 - h0) * scale) / 2.0;
    let oy = MARGIN_T + 20.0;
    let to_px = |p: [f64; 3]| {
        let (h, v) = project(p);
        (ox + (h - h0) * scale, oy + (v1 - v) * scale)
    };

    let mut body = String::new();
    for i in 0..8usize {
        for bit in [1usize, 2, 4] {
            let j = i | bit;
            if j != i {
                let (a, b) = (to_px(corners[i]), to_px(corners[j]));
                let _ = writeln!(body, r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#ccc"/>"##, a.0, a.1, b.0, b.1);
            }
        }
    }
    // axis labels on the three edges leaving the low corner
    for (k, name) in ["x (N)", "y (E)", "z (D)"].into_iter().enumerate() {
        let mut far = blo;
        far[k] = bhi[k];
        let mid: [f64; 3] = std::array::from_fn(|i| (blo[i] + far[i]) / 2.0);
        let (x, y) = to_px(mid);
        let _ = writeln!(body, r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{name} {}..{}</text>"#, y + 16.0, fmt_tick(blo[k]), fmt_tick(bhi[k]));
    }
    if !goal.is_empty() {
        polyline(&mut body, goal.iter().map(|p| to_px(*p)), "#888", true);
    }
    polyline(&mut body, actual.iter().map(|p| to_px(*p)), COLORS[0], false);
    legend(&mut body, MARGIN_T, &[("actual", COLORS[0], false), ("goal", "#888", true)]);
    document(size + MARGIN_T + 20.0, "Trajectory (altitude up)", &body)
}

pub fn render(rows: &[TrajectoryRow], kind: PlotKind) -> String {
    match kind {
        PlotKind::Coords => coords(rows),
        PlotKind::Pwm => pwm(rows),
        PlotKind::Traj3d => traj3d(rows),
    }
}
