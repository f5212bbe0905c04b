//! Expected annual energy production.
//!
//! For every sector `s` and turbine `i` the energy is
//! `8760 · ρ_s · ∫_{v_ci}^{v_co} f_s(v) · P(v_i(v)) dv`, where `v` is the
//! free-stream hub speed and `v_i(v)` the waked speed at turbine `i`. The
//! integral uses the composite trapezoid rule on the free-stream grid
//! `v_ci, v_ci + dv, ..., v_co`.

use serde::{Deserialize, Serialize};

use crate::layout::Layout;
use crate::turbine::TurbineSpec;
use crate::wake::SectorWake;
use crate::wind_resource::{SectorModel, SpeedModel, WindRose};

pub const HOURS_PER_YEAR: f64 = 8760.0;
/// Default quadrature step over free-stream speed, m/s.
pub const DEFAULT_SPEED_STEP: f64 = 0.1;
const WH_PER_GWH: f64 = 1e9;

/// AEP of a layout, overall and by sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AepBreakdown {
    /// GWh/yr with wakes.
    pub total: f64,
    pub per_sector: Vec<f64>,
    /// GWh/yr with all deficits forced to zero.
    pub no_wake_total: f64,
    pub no_wake_per_sector: Vec<f64>,
    /// `100 · (1 − total / no_wake_total)`.
    pub wake_loss_total: f64,
    /// Sector losses as a percentage of the farm's total no-wake AEP, so they
    /// add up to `wake_loss_total`.
    pub wake_loss_per_sector: Vec<f64>,
}

impl AepBreakdown {
    /// `100 · total / no_wake_total`.
    pub fn efficiency(&self) -> f64 {
        if self.no_wake_total > 0.0 {
            100.0 * (self.total / self.no_wake_total)
        } else {
            100.0
        }
    }
}

/// Quadrature nodes of one sector with weights already folded into GWh.
#[derive(Debug, Clone)]
struct SectorQuadrature {
    theta_deg: f64,
    speeds: Vec<f64>,
    /// `8760 · ρ · pdf(v) · trapezoid weight / 1e9`, so `Σ w · P[W]` is GWh/yr.
    weights: Vec<f64>,
    /// `Σ w · P(v)` for one unwaked turbine.
    free_energy: f64,
}

impl SectorQuadrature {
    fn new(sector: &SectorModel, spec: &TurbineSpec, dv: f64) -> Self {
        let scale = HOURS_PER_YEAR * sector.probability / WH_PER_GWH;
        let (speeds, weights) = if sector.probability == 0.0 {
            (Vec::new(), Vec::new())
        } else {
            match sector.model {
                SpeedModel::Weibull { .. } => {
                    let grid = speed_grid(spec.cut_in(), spec.cut_out(), dv);
                    let tw = trapezoid_weights(&grid);
                    let w = grid
                        .iter()
                        .zip(&tw)
                        .map(|(&v, &t)| scale * t * sector.model.weibull_pdf(v))
                        .collect();
                    (grid, w)
                }
                SpeedModel::PointMass { speed_ms } => {
                    if speed_ms >= spec.cut_in() && speed_ms <= spec.cut_out() {
                        (vec![speed_ms], vec![scale])
                    } else {
                        (Vec::new(), Vec::new())
                    }
                }
            }
        };
        let free_energy = speeds
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| w * spec.power_closed(v))
            .sum();
        SectorQuadrature {
            theta_deg: sector.theta_deg,
            speeds,
            weights,
            free_energy,
        }
    }
}

/// `lo, lo + dv, ...` up to and including `hi`; the last step may be shorter.
fn speed_grid(lo: f64, hi: f64, dv: f64) -> Vec<f64> {
    let steps = ((hi - lo) / dv - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|k| lo + k as f64 * dv).collect();
    grid.push(hi);
    grid
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = 0.5 * (grid[k + 1] - grid[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

/// Reusable AEP evaluator for a fixed turbine, rose, decay factor and step.
///
/// Speed grids and density weights are built once; each evaluation only
/// redoes the wake geometry and the per-node velocity sweep.
#[derive(Debug, Clone)]
pub struct AepEvaluator {
    spec: TurbineSpec,
    decay: f64,
    sectors: Vec<SectorQuadrature>,
}

impl AepEvaluator {
    pub fn new(spec: &TurbineSpec, rose: &WindRose, decay: f64, dv: f64) -> Self {
        assert!(dv > 0.0, "speed step must be positive");
        AepEvaluator {
            spec: spec.clone(),
            decay,
            sectors: rose
                .sectors
                .iter()
                .map(|s| SectorQuadrature::new(s, spec, dv))
                .collect(),
        }
    }

    pub fn spec(&self) -> &TurbineSpec {
        &self.spec
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    fn sector_energy(&self, q: &SectorQuadrature, layout: &Layout, buf: &mut Vec<f64>) -> f64 {
        let n = layout.len();
        if q.weights.is_empty() {
            return 0.0;
        }
        let wake = SectorWake::new(layout, &self.spec, self.decay, q.theta_deg);
        if wake.is_unwaked() {
            return n as f64 * q.free_energy;
        }
        let waked: Vec<usize> = wake.waked_turbines().collect();
        let free_count = (n - waked.len()) as f64;
        buf.resize(n, 0.0);
        let mut energy = 0.0;
        for (&v, &w) in q.speeds.iter().zip(&q.weights) {
            if w == 0.0 {
                continue;
            }
            wake.velocities_into(&self.spec, v, buf);
            let mut power = free_count * self.spec.power_closed(v);
            for &i in &waked {
                power += self.spec.power_closed(buf[i]);
            }
            energy += w * power;
        }
        energy
    }

    /// Total AEP in GWh/yr.
    pub fn total(&self, layout: &Layout) -> f64 {
        let mut buf = Vec::new();
        self.sectors
            .iter()
            .map(|q| self.sector_energy(q, layout, &mut buf))
            .sum()
    }

    /// Energy of every sector in GWh/yr.
    pub fn sector_energies(&self, layout: &Layout) -> Vec<f64> {
        let mut buf = Vec::new();
        self.sectors
            .iter()
            .map(|q| self.sector_energy(q, layout, &mut buf))
            .collect()
    }

    /// Whether turbine `i` wakes, or is waked by, any other turbine for wind from `theta_deg`.
    fn interacts(&self, layout: &Layout, i: usize, theta_deg: f64) -> bool {
        let angle = theta_deg.to_radians();
        let r = self.spec.rotor_radius();
        let pts = layout.points();
        let pi = pts[i].rotated(angle);
        pts.iter().enumerate().any(|(j, p)| {
            if j == i {
                return false;
            }
            let pj = p.rotated(angle);
            let d = (pj.y - pi.y).abs();
            d > 0.0 && (pi.x - pj.x).abs() < 2.0 * r + self.decay * d
        })
    }

    /// Central-difference gradient of the total AEP (GWh/yr per meter) with
    /// step `h`. Only sectors in which the moved turbine interacts with
    /// another turbine, before or after the move, are re-evaluated.
    pub fn fd_gradient(&self, layout: &Layout, h: f64, grad: &mut [f64]) {
        let n = layout.len();
        assert_eq!(grad.len(), 2 * n, "gradient buffer has wrong length");
        let base = self.sector_energies(layout);
        let mut buf = Vec::new();
        let mut xy = layout.to_flat();
        for v in 0..2 * n {
            let i = v / 2;
            let involved: Vec<bool> = self
                .sectors
                .iter()
                .map(|q| self.interacts(layout, i, q.theta_deg))
                .collect();
            let mut side = |delta: f64, xy: &mut Vec<f64>| {
                let x0 = xy[v];
                xy[v] = x0 + delta;
                let moved = Layout::from_flat(xy).expect("finite perturbation");
                xy[v] = x0;
                self.sectors
                    .iter()
                    .zip(&base)
                    .zip(&involved)
                    .map(|((q, &e), &before)| {
                        if before || self.interacts(&moved, i, q.theta_deg) {
                            self.sector_energy(q, &moved, &mut buf)
                        } else {
                            e
                        }
                    })
                    .sum::<f64>()
            };
            let fp = side(h, &mut xy);
            let fm = side(-h, &mut xy);
            grad[v] = (fp - fm) / (2.0 * h);
        }
    }

    /// Wake-free AEP in GWh/yr for `n` turbines.
    pub fn no_wake_total(&self, n: usize) -> f64 {
        self.sectors.iter().map(|q| n as f64 * q.free_energy).sum()
    }

    pub fn breakdown(&self, layout: &Layout) -> AepBreakdown {
        let n = layout.len() as f64;
        let mut buf = Vec::new();
        let per_sector: Vec<f64> = self
            .sectors
            .iter()
            .map(|q| self.sector_energy(q, layout, &mut buf))
            .collect();
        let no_wake_per_sector: Vec<f64> = self.sectors.iter().map(|q| n * q.free_energy).collect();
        let total: f64 = per_sector.iter().sum();
        let no_wake_total: f64 = no_wake_per_sector.iter().sum();
        let pct = |x: f64| if no_wake_total > 0.0 { 100.0 * x / no_wake_total } else { 0.0 };
        AepBreakdown {
            total,
            wake_loss_total: if no_wake_total > 0.0 {
                100.0 * (1.0 - total / no_wake_total)
            } else {
                0.0
            },
            wake_loss_per_sector: per_sector
                .iter()
                .zip(&no_wake_per_sector)
                .map(|(a, b)| pct(b - a))
                .collect(),
            per_sector,
            no_wake_total,
            no_wake_per_sector,
        }
    }
}

/// Energy of one sector in GWh/yr.
pub fn sector_energy(
    layout: &Layout,
    spec: &TurbineSpec,
    sector: &SectorModel,
    decay: f64,
    dv: f64,
) -> f64 {
    assert!(dv > 0.0, "speed step must be positive");
    let q = SectorQuadrature::new(sector, spec, dv);
    let eval = AepEvaluator {
        spec: spec.clone(),
        decay,
        sectors: Vec::new(),
    };
    eval.sector_energy(&q, layout, &mut Vec::new())
}

/// Full breakdown at the default speed step.
pub fn expected_aep(layout: &Layout, spec: &TurbineSpec, rose: &WindRose, decay: f64) -> AepBreakdown {
    AepEvaluator::new(spec, rose, decay, DEFAULT_SPEED_STEP).breakdown(layout)
}
