//! Random feasible, well-spread starting layouts.
//!
//! Pipeline: uniform samples on the reference square `(−1, 1)²`, bilinear map
//! into the farm quadrilateral, a spacing repair, Delaunay triangulation and a
//! fixed-topology maximization of the summed triangle areas.

use nalgebra::DMatrix;
use rand::Rng;

use crate::constraints::{is_feasible, FarmBoundary, FeasibleRegion};
use crate::delaunay::{delaunay, Triangulation};
use crate::error::{Error, Result};
use crate::layout::{Layout, Point};
use crate::nlp::{maximize, NlpProblem, SolveStatus, SolverOptions};

/// Lower bound on every triangle area during the spreading solve, m².
pub const DEFAULT_MIN_TRIANGLE_AREA: f64 = 1.0;
/// Default number of resampling attempts per seed.
pub const DEFAULT_MAX_RETRIES: usize = 200;

/// Scaled margin kept inside every spacing and containment constraint so
/// outputs pass the feasibility check at tolerance zero.
const INTERIOR_SLACK: f64 = 1e-5;
/// Spacing repair stops once all squared distances reach this multiple of `d_min²`.
const SPACING_TARGET: f64 = 1.01;

/// `n` independent uniform points on the open square `(−1, 1)²`.
pub fn sample_unit_square<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let mut draw = || loop {
        let v: f64 = rng.random_range(-1.0..1.0);
        if v > -1.0 {
            return v;
        }
    };
    (0..n).map(|_| (draw(), draw())).collect()
}

/// Bilinear shape functions of the reference square, corner order 1..4.
pub fn shape_functions(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

/// Maps `(ξ, η)` on the reference square onto the quadrilateral.
pub fn bilinear_map(xi: f64, eta: f64, boundary: &FarmBoundary) -> Point {
    let n = shape_functions(xi, eta);
    let c = boundary.corners();
    Point::new(
        (0..4).map(|l| n[l] * c[l].x).sum(),
        (0..4).map(|l| n[l] * c[l].y).sum(),
    )
}

/// Spacing repair: maximize `t` subject to `d_ij² / d_min² >= t`, containment and `t <= SPACING_TARGET`.
struct SpreadProblem {
    region: FeasibleRegion,
    n: usize,
}

impl NlpProblem for SpreadProblem {
    fn dimension(&self) -> usize {
        2 * self.n + 1
    }

    fn constraint_count(&self) -> usize {
        self.region.constraint_count(self.n) + 1
    }

    fn objective(&self, x: &[f64]) -> f64 {
        x[2 * self.n]
    }

    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        grad[2 * self.n] = 1.0;
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let t = x[2 * self.n];
        let pairs = self.n * (self.n - 1) / 2;
        let m = self.region.constraint_count(self.n);
        self.region.margins_into(&x[..2 * self.n], &mut out[..m]);
        for (k, g) in out[..m].iter_mut().enumerate() {
            *g -= if k < pairs { t - 1.0 } else { INTERIOR_SLACK };
        }
        out[m] = SPACING_TARGET - t;
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let pairs = self.n * (self.n - 1) / 2;
        let m = self.region.constraint_count(self.n);
        let mut sub = DMatrix::zeros(m, 2 * self.n);
        self.region.jacobian_into(&x[..2 * self.n], &mut sub);
        jac.fill(0.0);
        jac.view_mut((0, 0), (m, 2 * self.n)).copy_from(&sub);
        for k in 0..pairs {
            jac[(k, 2 * self.n)] = -1.0;
        }
        jac[(m, 2 * self.n)] = -1.0;
    }

    fn variable_scale(&self, i: usize) -> f64 {
        if i < 2 * self.n {
            self.region.min_distance
        } else {
            1.0
        }
    }
}

/// Maximize the summed triangle areas with the triangulation topology frozen.
struct AreaProblem<'a> {
    region: FeasibleRegion,
    triangles: &'a [[usize; 3]],
    n: usize,
    area_scale: f64,
    min_area: f64,
}

fn triangle_area(x: &[f64], [a, b, c]: [usize; 3]) -> f64 {
    0.5 * ((x[2 * b] - x[2 * a]) * (x[2 * c + 1] - x[2 * a + 1])
        - (x[2 * c] - x[2 * a]) * (x[2 * b + 1] - x[2 * a + 1]))
}

fn triangle_area_gradient(x: &[f64], [a, b, c]: [usize; 3], scale: f64, out: &mut [f64]) {
    let (xa, ya, xb, yb, xc, yc) = (
        x[2 * a],
        x[2 * a + 1],
        x[2 * b],
        x[2 * b + 1],
        x[2 * c],
        x[2 * c + 1],
    );
    out[2 * a] += 0.5 * (yb - yc) * scale;
    out[2 * a + 1] += 0.5 * (xc - xb) * scale;
    out[2 * b] += 0.5 * (yc - ya) * scale;
    out[2 * b + 1] += 0.5 * (xa - xc) * scale;
    out[2 * c] += 0.5 * (ya - yb) * scale;
    out[2 * c + 1] += 0.5 * (xb - xa) * scale;
}

impl AreaProblem<'_> {
    fn area_row_scale(&self) -> f64 {
        1.0 / (self.region.min_distance * self.region.min_distance)
    }
}

impl NlpProblem for AreaProblem<'_> {
    fn dimension(&self) -> usize {
        2 * self.n
    }

    fn constraint_count(&self) -> usize {
        self.region.constraint_count(self.n) + self.triangles.len()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.triangles.iter().map(|&t| triangle_area(x, t)).sum::<f64>() / self.area_scale
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        for &t in self.triangles {
            triangle_area_gradient(x, t, 1.0 / self.area_scale, grad);
        }
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let m = self.region.constraint_count(self.n);
        self.region.margins_into(x, &mut out[..m]);
        out[..m].iter_mut().for_each(|g| *g -= INTERIOR_SLACK);
        let s = self.area_row_scale();
        for (k, &t) in self.triangles.iter().enumerate() {
            // enforced with a margin of one extra `min_area` to absorb solver tolerance
            out[m + k] = (triangle_area(x, t) - 2.0 * self.min_area) * s;
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let m = self.region.constraint_count(self.n);
        let mut sub = DMatrix::zeros(m, 2 * self.n);
        self.region.jacobian_into(x, &mut sub);
        jac.fill(0.0);
        jac.view_mut((0, 0), (m, 2 * self.n)).copy_from(&sub);
        let s = self.area_row_scale();
        let mut row = vec![0.0; 2 * self.n];
        for (k, &t) in self.triangles.iter().enumerate() {
            row.fill(0.0);
            triangle_area_gradient(x, t, s, &mut row);
            for (i, v) in row.iter().enumerate() {
                jac[(m + k, i)] = *v;
            }
        }
    }

    fn variable_scale(&self, _i: usize) -> f64 {
        self.region.min_distance
    }
}

/// Output of the spreading step.
#[derive(Debug, Clone)]
pub struct Widespread {
    pub layout: Layout,
    /// Fixed topology used by the area maximization; `None` below three turbines.
    pub triangulation: Option<Triangulation>,
    /// Summed triangle areas at the returned points, m².
    pub total_area: f64,
}

/// Repairs spacing, triangulates, then maximizes the summed triangle areas.
///
/// Fails (signalling a resample) when spacing cannot be repaired from these
/// points or the area solve ends infeasible.
pub fn widespread(
    points: &[Point],
    boundary: &FarmBoundary,
    d_min: f64,
    min_triangle_area: f64,
) -> Result<Widespread> {
    let n = points.len();
    if n == 0 {
        return Err(Error::invalid("no points to spread"));
    }
    let region = FeasibleRegion::new(*boundary, d_min);
    let mut xy: Vec<f64> = points.iter().flat_map(|p| [p.x, p.y]).collect();

    if n >= 2 {
        let spread = SpreadProblem { region, n };
        let pairs = n * (n - 1) / 2;
        let mut g = vec![0.0; region.constraint_count(n)];
        region.margins_into(&xy, &mut g);
        let t0 = g[..pairs].iter().fold(f64::INFINITY, |a, &m| a.min(m + 1.0));
        xy.push(t0.min(SPACING_TARGET) - 1e-9);
        let r = maximize(&spread, &xy, &SolverOptions::coarse());
        if r.status == SolveStatus::Infeasible || r.x[2 * n] < 1.0 {
            return Err(Error::Solver(format!(
                "spacing repair reached only {:.4} of the minimum squared distance",
                r.x[2 * n]
            )));
        }
        xy = r.x[..2 * n].to_vec();
    }

    let mut layout = Layout::from_flat(&xy)?;
    let triangulation = if n >= 3 {
        match delaunay(layout.points()) {
            Ok(tri) => {
                let problem = AreaProblem {
                    region,
                    triangles: &tri.triangles,
                    n,
                    area_scale: boundary.area(),
                    min_area: min_triangle_area,
                };
                let r = maximize(&problem, &xy, &SolverOptions::coarse());
                if matches!(r.status, SolveStatus::Infeasible | SolveStatus::NumericalFailure) {
                    return Err(Error::Solver(format!("area maximization ended {:?}", r.status)));
                }
                layout = Layout::from_flat(&r.x)?;
                Some(Triangulation {
                    points: layout.points().to_vec(),
                    triangles: tri.triangles,
                })
            }
            Err(Error::Collinear) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    if !is_feasible(&layout, boundary, d_min, 0.0).feasible {
        return Err(Error::Solver("spread layout is not strictly feasible".into()));
    }
    let total_area = triangulation.as_ref().map_or(0.0, Triangulation::total_area);
    Ok(Widespread {
        layout,
        triangulation,
        total_area,
    })
}

/// A feasible random start with its diagnostics.
#[derive(Debug, Clone)]
pub struct Seed {
    pub layout: Layout,
    pub total_area: f64,
    /// Attempts used, including the successful one.
    pub attempts: usize,
}

/// Sample, map, spread; resample on failure up to `max_retries` attempts.
pub fn seed_layout<R: Rng + ?Sized>(
    n_turbines: usize,
    boundary: &FarmBoundary,
    d_min: f64,
    rng: &mut R,
    max_retries: usize,
) -> Result<Seed> {
    if n_turbines == 0 {
        return Err(Error::invalid("number of turbines must be at least 1"));
    }
    let attempts = max_retries.max(1);
    for attempt in 1..=attempts {
        let points: Vec<Point> = sample_unit_square(n_turbines, rng)
            .into_iter()
            .map(|(xi, eta)| bilinear_map(xi, eta, boundary))
            .collect();
        match widespread(&points, boundary, d_min, DEFAULT_MIN_TRIANGLE_AREA) {
            Ok(w) => {
                return Ok(Seed {
                    layout: w.layout,
                    total_area: w.total_area,
                    attempts: attempt,
                })
            }
            Err(e) => log::debug!("seed attempt {attempt} rejected: {e}"),
        }
    }
    Err(Error::Infeasible {
        n_turbines,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(side: f64) -> FarmBoundary {
        FarmBoundary::rectangle(0.0, 0.0, side, side).unwrap()
    }

    #[test]
    fn bilinear_nodal_and_center() {
        let b = square(2.0);
        assert_eq!(bilinear_map(-1.0, -1.0, &b), Point::new(0.0, 0.0));
        assert_eq!(bilinear_map(1.0, 1.0, &b), Point::new(2.0, 2.0));
        assert_eq!(bilinear_map(0.0, 0.0, &b), Point::new(1.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (xi, eta) in sample_unit_square(10_000, &mut rng) {
            assert!((shape_functions(xi, eta).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn skewed_quadrilateral_edges_map_to_edges() {
        let b = FarmBoundary::new([
            Point::new(0.0, 0.0),
            Point::new(1800.0, 200.0),
            Point::new(2100.0, 1900.0),
            Point::new(-100.0, 1700.0),
        ])
        .unwrap();
        for k in 0..=20 {
            let s = -1.0 + 0.1 * k as f64;
            for (xi, eta, e) in [(s, -1.0, 0), (1.0, s, 1), (s, 1.0, 2), (-1.0, s, 3)] {
                let p = bilinear_map(xi, eta, &b);
                let (a, c) = b.edge(e);
                let det = crate::constraints::edge_determinant(p, a, c);
                assert!(det.abs() < 1e-6 * a.distance(c), "edge {e} at {s}: {det}");
            }
        }
    }

    #[test]
    fn samples_are_reproducible_and_open() {
        let a = sample_unit_square(50, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_unit_square(50, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.iter().all(|&(x, y)| x > -1.0 && x < 1.0 && y > -1.0 && y < 1.0));
        let many = sample_unit_square(100_000, &mut ChaCha8Rng::seed_from_u64(1));
        let mx = many.iter().map(|p| p.0).sum::<f64>() / 1e5;
        let my = many.iter().map(|p| p.1).sum::<f64>() / 1e5;
        assert!(mx.abs() < 0.01 && my.abs() < 0.01);
    }

    #[test]
    fn four_points_reach_the_corners() {
        let b = square(2000.0);
        let pts = [
            Point::new(800.0, 700.0),
            Point::new(1300.0, 800.0),
            Point::new(1200.0, 1250.0),
            Point::new(750.0, 1200.0),
        ];
        let w = widespread(&pts, &b, 10.0, 1.0).unwrap();
        assert!((w.total_area - b.area()).abs() < 1e-3 * b.area(), "{}", w.total_area);
        for (p, c) in w.layout.points().iter().zip(b.corners()) {
            assert!(p.distance(*c) < 1.0, "{p:?} vs {c:?}");
        }
    }

    #[test]
    fn twelve_in_two_km_square() {
        let b = square(2000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let s = seed_layout(12, &b, 504.0, &mut rng, 50).unwrap();
        assert!(is_feasible(&s.layout, &b, 504.0, 0.0).feasible);
        assert!(s.total_area >= 0.95 * b.area(), "{}", s.total_area);
        let tri = delaunay(s.layout.points()).unwrap();
        assert!(tri.triangles.len() >= 10);
    }

    #[test]
    fn single_turbine() {
        let b = square(2000.0);
        let s = seed_layout(1, &b, 504.0, &mut ChaCha8Rng::seed_from_u64(0), 1).unwrap();
        assert_eq!(s.layout.len(), 1);
        assert!(is_feasible(&s.layout, &b, 504.0, 0.0).feasible);
    }

    #[test]
    fn seeding_is_deterministic() {
        let b = square(2000.0);
        let a = seed_layout(8, &b, 504.0, &mut ChaCha8Rng::seed_from_u64(77), 20).unwrap();
        let c = seed_layout(8, &b, 504.0, &mut ChaCha8Rng::seed_from_u64(77), 20).unwrap();
        assert_eq!(a.layout, c.layout);
    }
}
