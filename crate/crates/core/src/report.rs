//! Text artifacts: sector tables, sweep tables and SVG figures.
//!
//! Every builder returns a `String`; writing files is left to the caller.
//! Numbers are printed with the shortest round-trip representation so
//! totals can be checked against their rows exactly.

use std::fmt::Write as _;

use crate::aep::AepBreakdown;
use crate::constraints::FarmBoundary;
use crate::driver::{RotationRow, SweepRow};
use crate::layout::{Layout, Point};
use crate::turbine::TurbineSpec;
use crate::wake::farm_velocities;

/// `sector,AEP_GWh,wake_loss_pct` with one row per sector and a `total` row.
pub fn sector_table(b: &AepBreakdown) -> String {
    let mut out = String::from("sector,AEP_GWh,wake_loss_pct\n");
    for (s, (aep, loss)) in b.per_sector.iter().zip(&b.wake_loss_per_sector).enumerate() {
        let _ = writeln!(out, "{},{},{}", s + 1, aep, loss);
    }
    let _ = writeln!(out, "total,{},{}", b.total, b.wake_loss_total);
    out
}

/// Side-by-side table of the seed layout and the optimized layout.
pub fn comparison_table(initial: &AepBreakdown, optimal: &AepBreakdown) -> String {
    let mut out = String::from(
        "sector,initial_AEP_GWh,initial_wake_loss_pct,optimal_AEP_GWh,optimal_wake_loss_pct\n",
    );
    let rows = initial
        .per_sector
        .iter()
        .zip(&initial.wake_loss_per_sector)
        .zip(optimal.per_sector.iter().zip(&optimal.wake_loss_per_sector));
    for (s, ((ia, il), (oa, ol))) in rows.enumerate() {
        let _ = writeln!(out, "{},{ia},{il},{oa},{ol}", s + 1);
    }
    let _ = writeln!(
        out,
        "total,{},{},{},{}",
        initial.total, initial.wake_loss_total, optimal.total, optimal.wake_loss_total
    );
    out
}

/// Yearly margin in €, for AEP in GWh and price and cost in €/kWh.
pub fn revenue_eur(aep_gwh: f64, price_eur_per_kwh: f64, cost_eur_per_kwh: f64) -> f64 {
    aep_gwh * 1e6 * (price_eur_per_kwh - cost_eur_per_kwh)
}

/// `(min, q1, median, q3, max)` with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<[f64; 5]> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    Some([v[0], at(0.25), at(0.5), at(0.75), v[v.len() - 1]])
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Per-N summary: capacity density, efficiencies and quartiles of the runs.
pub fn sweep_table(rows: &[SweepRow], rated_power_w: f64, area_m2: f64) -> String {
    let mut out = String::from(
        "n_turbines,status,capacity_mw_per_km2,grid_efficiency_pct,optimized_efficiency_pct,\
         best_aep_gwh,aep_min,aep_q1,aep_median,aep_q3,aep_max,\
         rms_min,rms_q1,rms_median,rms_q3,rms_max\n",
    );
    for r in rows {
        let capacity = r.n_turbines as f64 * rated_power_w / 1e6 / (area_m2 / 1e6);
        let q = |v: &[f64]| {
            quartiles(v).map_or_else(|| ",,,,".to_string(), |q| {
                q.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
            })
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n_turbines,
            r.status.as_str(),
            capacity,
            opt(r.grid_efficiency),
            opt(r.efficiency),
            opt(r.best_aep),
            q(&r.restart_aep),
            q(&r.restart_rms)
        );
    }
    out
}

/// Raw per-run values behind [`sweep_table`]'s quartiles.
pub fn sweep_runs_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("n_turbines,run,aep_gwh,rms_distance_m\n");
    for r in rows {
        for (k, (a, d)) in r.restart_aep.iter().zip(&r.restart_rms).enumerate() {
            let _ = writeln!(out, "{},{},{a},{d}", r.n_turbines, k + 1);
        }
    }
    out
}

pub fn rotation_table(rows: &[RotationRow]) -> String {
    let mut out = String::from(
        "angle_deg,grid_AEP_GWh,grid_wake_loss_pct,optimized_AEP_GWh,optimized_wake_loss_pct\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.angle_deg, r.grid.total, r.grid.wake_loss_total, r.optimized.total, r.optimized.wake_loss_total
        );
    }
    out
}

/// Maps farm coordinates (y up) into an SVG canvas (y down) with a margin.
struct Canvas {
    x0: f64,
    y1: f64,
    scale: f64,
    margin: f64,
    width: f64,
    height: f64,
}

impl Canvas {
    fn around(points: &[Point], margin: f64, max_px: f64) -> Canvas {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let span = (x1 - x0).max(y1 - y0).max(1.0);
        let scale = max_px / span;
        Canvas {
            x0,
            y1,
            scale,
            margin,
            width: (x1 - x0) * scale + 2.0 * margin,
            height: (y1 - y0) * scale + 2.0 * margin,
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            self.margin + (p.x - self.x0) * self.scale,
            self.margin + (self.y1 - p.y) * self.scale,
        )
    }

    fn polygon(&self, pts: &[Point]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Distance from `p` along unit direction `u` until the boundary is left; 0 when outside.
fn exit_distance(boundary: &FarmBoundary, p: Point, u: Point) -> f64 {
    let mut t_exit = f64::INFINITY;
    for e in 0..4 {
        let (a, b) = boundary.edge(e);
        // inward normal of a CCW edge
        let n = Point::new(-(b.y - a.y), b.x - a.x);
        let slack = n.x * (p.x - a.x) + n.y * (p.y - a.y);
        let rate = n.x * u.x + n.y * u.y;
        if rate < 0.0 {
            t_exit = t_exit.min(slack / -rate);
        }
    }
    t_exit.max(0.0)
}

/// Wake figure for wind blowing from `theta_deg` at free-stream `speed`.
///
/// Cones start at the rotor edge and widen by `decay` per meter until they
/// leave the farm; each turbine is labelled with its perturbed speed.
pub fn wake_svg(
    layout: &Layout,
    boundary: &FarmBoundary,
    spec: &TurbineSpec,
    decay: f64,
    theta_deg: f64,
    speed: f64,
) -> String {
    let corners = *boundary.corners();
    let canvas = Canvas::around(&corners, 40.0, 800.0);
    let r = spec.rotor_radius();
    let th = theta_deg.to_radians();
    let u = Point::new(-th.sin(), -th.cos());
    let normal = Point::new(-u.y, u.x);
    let velocities = farm_velocities(layout, spec, decay, theta_deg, speed);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        canvas.width, canvas.height, canvas.width, canvas.height
    );
    let _ = writeln!(
        svg,
        r#"<title>wind from {theta_deg} deg at {speed} m/s</title>"#
    );
    let _ = writeln!(
        svg,
        r##"<polygon class="boundary" points="{}" fill="none" stroke="#333" stroke-width="2"/>"##,
        canvas.polygon(&corners)
    );
    for p in layout.points() {
        let len = exit_distance(boundary, *p, u);
        let far = Point::new(p.x + len * u.x, p.y + len * u.y);
        let rf = r + decay * len;
        let cone = [
            Point::new(p.x + r * normal.x, p.y + r * normal.y),
            Point::new(far.x + rf * normal.x, far.y + rf * normal.y),
            Point::new(far.x - rf * normal.x, far.y - rf * normal.y),
            Point::new(p.x - r * normal.x, p.y - r * normal.y),
        ];
        let _ = writeln!(
            svg,
            r##"<polygon class="wake" points="{}" fill="#4a90d9" fill-opacity="0.25" stroke="none"/>"##,
            canvas.polygon(&cone)
        );
    }
    for (i, (p, v)) in layout.points().iter().zip(&velocities).enumerate() {
        let (x, y) = canvas.map(*p);
        let _ = writeln!(
            svg,
            r##"<circle class="turbine" data-turbine="{}" cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="#c0392b"/>"##,
            i + 1,
            (r * canvas.scale).max(3.0)
        );
        let _ = writeln!(
            svg,
            r#"<text class="velocity" data-turbine="{}" x="{:.2}" y="{:.2}" font-size="12">{v:.2}</text>"#,
            i + 1,
            x + 6.0,
            y - 6.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Efficiency against installed capacity density, one polyline per series.
pub fn efficiency_svg(rows: &[SweepRow], rated_power_w: f64, area_m2: f64) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let cap = |n: usize| n as f64 * rated_power_w / 1e6 / (area_m2 / 1e6);
    let opt_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.efficiency.map(|e| (cap(r.n_turbines), e)))
        .collect();
    let grid_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.grid_efficiency.map(|e| (cap(r.n_turbines), e)))
        .collect();
    let all = opt_pts.iter().chain(&grid_pts);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmin > xmax {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 100.0);
    }
    let xspan = (xmax - xmin).max(1e-9);
    let yspan = (ymax - ymin).max(1e-9);
    let px = |x: f64| m + (x - xmin) / xspan * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - ymin) / yspan * (h - 2.0 * m);
    let line = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="#333"/>"##,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(svg, r##"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="#333"/>"##, h - m);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">capacity, MW/km2 ({xmin:.2} to {xmax:.2})</text>"#,
        w / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})">efficiency, % ({ymin:.2} to {ymax:.2})</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (class, colour, pts) in [("optimized", "#c0392b", &opt_pts), ("grid", "#2c3e50", &grid_pts)] {
        let _ = writeln!(
            svg,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            line(pts)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
