//! Feasible region of the layout problem.
//!
//! Two families of inequality constraints, each feasible when `>= 0`:
//!
//! * minimum spacing, `|p_i − p_j|² / d_min² − 1` for every pair `i < j`;
//! * containment in a convex counter-clockwise quadrilateral, the 3×3
//!   determinant `det[[x_i, y_i, 1], [x_a, y_a, 1], [x_b, y_b, 1]]` for every
//!   turbine and consecutive corner pair `(a, b)`.
//!
//! The solver and feasibility verdicts use a scaled containment margin, the
//! determinant divided by `edge_length · d_min`, i.e. the signed distance to the
//! edge in units of the minimum spacing, so both families share one scale.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{Layout, Point};

/// Minimum spacing in rotor diameters.
pub const MIN_SPACING_DIAMETERS: f64 = 4.0;
/// Default feasibility tolerance on scaled margins.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

/// Strictly convex quadrilateral, corners counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 4]", into = "[[f64; 2]; 4]")]
pub struct FarmBoundary {
    corners: [Point; 4],
}

impl TryFrom<[[f64; 2]; 4]> for FarmBoundary {
    type Error = Error;

    fn try_from(c: [[f64; 2]; 4]) -> Result<Self> {
        FarmBoundary::new(c.map(|[x, y]| Point::new(x, y)))
    }
}

impl From<FarmBoundary> for [[f64; 2]; 4] {
    fn from(b: FarmBoundary) -> Self {
        b.corners.map(|p| [p.x, p.y])
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl FarmBoundary {
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        if corners.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("boundary corners must be finite"));
        }
        let turns: Vec<f64> = (0..4)
            .map(|i| cross(corners[i], corners[(i + 1) % 4], corners[(i + 2) % 4]))
            .collect();
        if turns.iter().all(|&t| t < 0.0) {
            return Err(Error::invalid(
                "boundary corners are clockwise; list them counter-clockwise (reverse the order)",
            ));
        }
        if !turns.iter().all(|&t| t > 0.0) {
            return Err(Error::invalid(
                "boundary must be a strictly convex quadrilateral with counter-clockwise corners",
            ));
        }
        Ok(FarmBoundary { corners })
    }

    /// Axis-aligned rectangle `[x0, x0 + width] × [y0, y0 + height]`.
    pub fn rectangle(x0: f64, y0: f64, width: f64, height: f64) -> Result<Self> {
        FarmBoundary::new([
            Point::new(x0, y0),
            Point::new(x0 + width, y0),
            Point::new(x0 + width, y0 + height),
            Point::new(x0, y0 + height),
        ])
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.corners
    }

    /// Edge `e` runs from corner `e` to corner `e + 1 (mod 4)`.
    pub fn edge(&self, e: usize) -> (Point, Point) {
        (self.corners[e], self.corners[(e + 1) % 4])
    }

    pub fn area(&self) -> f64 {
        0.5 * (0..4)
            .map(|i| {
                let (a, b) = self.edge(i);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    pub fn centroid(&self) -> Point {
        let c = &self.corners;
        Point::new(
            0.25 * (c[0].x + c[1].x + c[2].x + c[3].x),
            0.25 * (c[0].y + c[1].y + c[2].y + c[3].y),
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> FarmBoundary {
        FarmBoundary {
            corners: self.corners.map(|p| Point::new(p.x + dx, p.y + dy)),
        }
    }

    /// Clockwise (compass) rotation about the origin.
    pub fn rotated_clockwise(&self, angle_deg: f64) -> FarmBoundary {
        let a = -angle_deg.to_radians();
        FarmBoundary {
            corners: self.corners.map(|p| p.rotated(a)),
        }
    }
}

/// Orientation determinant of `p` against edge `(a, b)`; positive inside.
pub fn edge_determinant(p: Point, a: Point, b: Point) -> f64 {
    p.x * (a.y - b.y) - p.y * (a.x - b.x) + (a.x * b.y - b.x * a.y)
}

/// `|p_i − p_j|² / d_min² − 1` for all pairs `i < j` in lexicographic order.
pub fn min_distance_margins(layout: &Layout, min_distance: f64) -> Vec<f64> {
    let pts = layout.points();
    let inv = 1.0 / (min_distance * min_distance);
    let mut out = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d2 = (pts[i].x - pts[j].x).powi(2) + (pts[i].y - pts[j].y).powi(2);
            out.push(d2 * inv - 1.0);
        }
    }
    out
}

/// Raw orientation determinants, turbine-major: entry `4·i + e` is turbine `i` against edge `e`.
pub fn containment_margins(layout: &Layout, boundary: &FarmBoundary) -> Vec<f64> {
    let mut out = Vec::with_capacity(4 * layout.len());
    for &p in layout.points() {
        for e in 0..4 {
            let (a, b) = boundary.edge(e);
            out.push(edge_determinant(p, a, b));
        }
    }
    out
}

/// Identifies one scalar constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintId {
    /// Pair of 0-based turbine indices.
    MinDistance { i: usize, j: usize },
    /// 0-based turbine and edge indices.
    Containment { turbine: usize, edge: usize },
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConstraintId::MinDistance { i, j } => {
                write!(f, "minimum distance between turbines {} and {}", i + 1, j + 1)
            }
            ConstraintId::Containment { turbine, edge } => write!(
                f,
                "turbine {} outside boundary edge {}-{}",
                turbine + 1,
                edge + 1,
                (edge + 1) % 4 + 1
            ),
        }
    }
}

/// Scaled constraint evaluation shared by the feasibility check and the solvers.
#[derive(Debug, Clone, Copy)]
pub struct FeasibleRegion {
    pub boundary: FarmBoundary,
    pub min_distance: f64,
    edge_scale: [f64; 4],
}

impl FeasibleRegion {
    pub fn new(boundary: FarmBoundary, min_distance: f64) -> Self {
        assert!(min_distance > 0.0, "minimum distance must be positive");
        let edge_scale = std::array::from_fn(|e| {
            let (a, b) = boundary.edge(e);
            1.0 / (a.distance(b) * min_distance)
        });
        FeasibleRegion {
            boundary,
            min_distance,
            edge_scale,
        }
    }

    pub fn constraint_count(&self, n: usize) -> usize {
        n * n.saturating_sub(1) / 2 + 4 * n
    }

    /// Constraint behind entry `k` of [`margins_into`](Self::margins_into).
    pub fn constraint_id(&self, n: usize, k: usize) -> ConstraintId {
        let pairs = n * n.saturating_sub(1) / 2;
        if k < pairs {
            let mut rem = k;
            for i in 0..n {
                let row = n - i - 1;
                if rem < row {
                    return ConstraintId::MinDistance { i, j: i + 1 + rem };
                }
                rem -= row;
            }
            unreachable!()
        } else {
            let c = k - pairs;
            ConstraintId::Containment {
                turbine: c / 4,
                edge: c % 4,
            }
        }
    }

    /// Scaled margins from a flat `[x1, y1, ...]` vector: pair constraints first, then containment.
    pub fn margins_into(&self, xy: &[f64], out: &mut [f64]) {
        let n = xy.len() / 2;
        let inv = 1.0 / (self.min_distance * self.min_distance);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = xy[2 * i] - xy[2 * j];
                let dy = xy[2 * i + 1] - xy[2 * j + 1];
                out[k] = (dx * dx + dy * dy) * inv - 1.0;
                k += 1;
            }
        }
        for i in 0..n {
            let p = Point::new(xy[2 * i], xy[2 * i + 1]);
            for e in 0..4 {
                let (a, b) = self.boundary.edge(e);
                out[k] = edge_determinant(p, a, b) * self.edge_scale[e];
                k += 1;
            }
        }
    }

    pub fn margins(&self, layout: &Layout) -> Vec<f64> {
        let xy = layout.to_flat();
        let mut out = vec![0.0; self.constraint_count(layout.len())];
        self.margins_into(&xy, &mut out);
        out
    }

    /// Jacobian of [`margins_into`](Self::margins_into), rows = constraints.
    pub fn jacobian_into(&self, xy: &[f64], jac: &mut DMatrix<f64>) {
        let n = xy.len() / 2;
        jac.fill(0.0);
        let inv = 1.0 / (self.min_distance * self.min_distance);
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = 2.0 * (xy[2 * i] - xy[2 * j]) * inv;
                let dy = 2.0 * (xy[2 * i + 1] - xy[2 * j + 1]) * inv;
                jac[(k, 2 * i)] = dx;
                jac[(k, 2 * i + 1)] = dy;
                jac[(k, 2 * j)] = -dx;
                jac[(k, 2 * j + 1)] = -dy;
                k += 1;
            }
        }
        for i in 0..n {
            for e in 0..4 {
                let (a, b) = self.boundary.edge(e);
                jac[(k, 2 * i)] = (a.y - b.y) * self.edge_scale[e];
                jac[(k, 2 * i + 1)] = -(a.x - b.x) * self.edge_scale[e];
                k += 1;
            }
        }
    }
}

/// Result of a feasibility check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Smallest scaled margin; negative means violated.
    pub worst_margin: f64,
    /// Constraint attaining `worst_margin`.
    pub worst: ConstraintId,
}

/// Feasible iff every scaled margin is `>= -tol`.
pub fn is_feasible(
    layout: &Layout,
    boundary: &FarmBoundary,
    min_distance: f64,
    tol: f64,
) -> FeasibilityReport {
    let region = FeasibleRegion::new(*boundary, min_distance);
    let margins = region.margins(layout);
    let (k, &worst_margin) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("containment margins exist for every turbine");
    FeasibilityReport {
        feasible: worst_margin >= -tol,
        worst_margin,
        worst: region.constraint_id(layout.len(), k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> FarmBoundary {
        FarmBoundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn boundary_validation() {
        assert!((unit().area() - 1.0).abs() < 1e-15);
        let cw = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let err = FarmBoundary::try_from(cw).unwrap_err();
        assert!(err.to_string().contains("clockwise"));
        let concave = [[0.0, 0.0], [2.0, 0.0], [0.5, 0.5], [0.0, 2.0]];
        assert!(FarmBoundary::try_from(concave).is_err());
        let degenerate = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        assert!(FarmBoundary::try_from(degenerate).is_err());
    }

    #[test]
    fn distance_margin_values() {
        let l = Layout::from_flat(&[0.0, 0.0, 504.0, 0.0]).unwrap();
        assert_eq!(min_distance_margins(&l, 4.0 * 126.0), vec![0.0]);
        let l = Layout::from_flat(&[0.0, 0.0, 0.0, 1008.0]).unwrap();
        assert_eq!(min_distance_margins(&l, 504.0), vec![3.0]);
        let l = Layout::from_flat(&[0.0, 0.0, 4.0, 0.0]).unwrap();
        assert_eq!(min_distance_margins(&l, 4.0), vec![0.0]);
        assert!(min_distance_margins(&Layout::from_flat(&[1.0, 1.0]).unwrap(), 4.0).is_empty());
    }

    #[test]
    fn containment_values() {
        let b = unit();
        let m = containment_margins(&Layout::from_flat(&[0.5, 0.5]).unwrap(), &b);
        assert_eq!(m, vec![0.5; 4]);
        let m = containment_margins(&Layout::from_flat(&[0.5, 0.0]).unwrap(), &b);
        assert_eq!(m[0], 0.0);
        let m = containment_margins(&Layout::from_flat(&[1.5, 0.5]).unwrap(), &b);
        assert!(m.iter().any(|&d| d < 0.0));
    }

    #[test]
    fn feasibility_reports() {
        let b = FarmBoundary::rectangle(0.0, 0.0, 2000.0, 2000.0).unwrap();
        let ok = Layout::from_flat(&[500.0, 500.0, 1500.0, 1500.0]).unwrap();
        let r = is_feasible(&ok, &b, 504.0, 0.0);
        assert!(r.feasible && r.worst_margin > 0.0);

        let same = Layout::from_flat(&[700.0, 700.0, 700.0, 700.0]).unwrap();
        let r = is_feasible(&same, &b, 504.0, 1e-6);
        assert!(!r.feasible);
        assert_eq!(r.worst_margin, -1.0);
        assert_eq!(r.worst, ConstraintId::MinDistance { i: 0, j: 1 });

        let out = Layout::from_flat(&[1000.0, 1000.0, 2001.0, 300.0]).unwrap();
        let r = is_feasible(&out, &b, 504.0, 1e-6);
        assert!(!r.feasible);
        assert_eq!(r.worst, ConstraintId::Containment { turbine: 1, edge: 1 });
        assert!((r.worst_margin + 1.0 / 504.0).abs() < 1e-12);
    }

    #[test]
    fn constraint_ids_cover_all_entries() {
        let region = FeasibleRegion::new(unit(), 0.1);
        let n = 5;
        let mut seen = Vec::new();
        for k in 0..region.constraint_count(n) {
            seen.push(region.constraint_id(n, k));
        }
        assert_eq!(seen[0], ConstraintId::MinDistance { i: 0, j: 1 });
        assert_eq!(seen[4], ConstraintId::MinDistance { i: 1, j: 2 });
        assert_eq!(seen[9], ConstraintId::MinDistance { i: 3, j: 4 });
        assert_eq!(seen[10], ConstraintId::Containment { turbine: 0, edge: 0 });
        assert_eq!(seen[29], ConstraintId::Containment { turbine: 4, edge: 3 });
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let b = FarmBoundary::new([
            Point::new(0.0, 0.0),
            Point::new(1800.0, 200.0),
            Point::new(2100.0, 1900.0),
            Point::new(-100.0, 1700.0),
        ])
        .unwrap();
        let region = FeasibleRegion::new(b, 504.0);
        let xy = [300.0, 400.0, 900.0, 1300.0, 1500.0, 700.0];
        let m = region.constraint_count(3);
        let mut jac = DMatrix::zeros(m, 6);
        region.jacobian_into(&xy, &mut jac);
        let h = 1e-3;
        for v in 0..6 {
            let mut plus = xy;
            let mut minus = xy;
            plus[v] += h;
            minus[v] -= h;
            let mut gp = vec![0.0; m];
            let mut gm = vec![0.0; m];
            region.margins_into(&plus, &mut gp);
            region.margins_into(&minus, &mut gm);
            for k in 0..m {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                assert!((fd - jac[(k, v)]).abs() < 1e-9, "k={k} v={v}");
            }
        }
    }

    /// Ray-casting point-in-polygon, independent of the determinant test.
    fn inside_by_ray(p: Point, poly: &[Point; 4]) -> bool {
        let mut inside = false;
        for e in 0..4 {
            let (a, b) = (poly[e], poly[(e + 1) % 4]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn determinant_test_agrees_with_ray_casting() {
        let b = FarmBoundary::new([
            Point::new(0.0, 0.0),
            Point::new(1800.0, 200.0),
            Point::new(2100.0, 1900.0),
            Point::new(-100.0, 1700.0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let p = Point::new(rng.random_range(-500.0..2500.0), rng.random_range(-500.0..2500.0));
            let all_pos = containment_margins(&Layout::new(vec![p]).unwrap(), &b)
                .iter()
                .all(|&d| d >= 0.0);
            assert_eq!(all_pos, inside_by_ray(p, b.corners()), "{p:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn margins_invariant_under_rigid_motion(
            xy in proptest::collection::vec(-3000.0f64..3000.0, 2..20),
            dx in -1e4f64..1e4, dy in -1e4f64..1e4, alpha in 0.0f64..360.0,
        ) {
            let n = xy.len() / 2 * 2;
            let l = Layout::from_flat(&xy[..n]).unwrap();
            let b = FarmBoundary::rectangle(-500.0, -200.0, 2400.0, 1600.0).unwrap();
            let region = FeasibleRegion::new(b, 504.0);
            let base = region.margins(&l);
            let moved = FeasibleRegion::new(b.translated(dx, dy), 504.0).margins(&l.translated(dx, dy));
            let turned = FeasibleRegion::new(b.rotated_clockwise(alpha), 504.0)
                .margins(&l.rotated_clockwise(alpha));
            for k in 0..base.len() {
                let tol = 1e-9 * (1.0 + base[k].abs());
                proptest::prop_assert!((base[k] - moved[k]).abs() < tol * 10.0);
                proptest::prop_assert!((base[k] - turned[k]).abs() < tol * 10.0);
            }
        }
    }
}
