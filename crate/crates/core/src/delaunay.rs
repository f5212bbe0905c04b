//! Incremental Bowyer–Watson Delaunay triangulation.
//!
//! Intended for the small point sets of a wind farm (tens of points).
//! Coordinates are normalized to the unit box before the predicates run.

use crate::error::{Error, Result};
use crate::layout::Point;

/// Triangles index into `points` and are stored counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub points: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Positive when `d` lies inside the circumcircle of the counter-clockwise triangle `(a, b, c)`.
pub fn in_circle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

impl Triangulation {
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * orient(self.points[a], self.points[b], self.points[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }
}

const PREDICATE_EPS: f64 = 1e-12;

/// Delaunay triangulation of at least three distinct, not all collinear, points.
pub fn delaunay(points: &[Point]) -> Result<Triangulation> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid("triangulation needs at least 3 points"));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::invalid("triangulation points must be finite"));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in points {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0);
    if span == 0.0 {
        return Err(Error::Collinear);
    }
    let norm: Vec<Point> = points
        .iter()
        .map(|p| Point::new((p.x - x0) / span, (p.y - y0) / span))
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            if norm[i].distance(norm[j]) < 1e-12 {
                return Err(Error::invalid(format!(
                    "points {} and {} coincide",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let (a0, b0) = (norm[0], norm[1]);
    if norm[2..].iter().all(|&c| orient(a0, b0, c).abs() <= PREDICATE_EPS) {
        return Err(Error::Collinear);
    }

    let big = 1e4;
    let mut verts = norm.clone();
    verts.push(Point::new(0.5 - big, -big));
    verts.push(Point::new(0.5 + big, -big));
    verts.push(Point::new(0.5, big));
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    for (i, &p) in norm.iter().enumerate() {
        let bad: Vec<bool> = tris
            .iter()
            .map(|&[a, b, c]| in_circle(verts[a], verts[b], verts[c], p) > PREDICATE_EPS)
            .collect();
        // polygonal hole boundary: edges of bad triangles not shared with another bad triangle
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (t, &[a, b, c]) in tris.iter().enumerate() {
            if !bad[t] {
                continue;
            }
            for (u, v) in [(a, b), (b, c), (c, a)] {
                if let Some(k) = edges.iter().position(|&(s, e)| s == v && e == u) {
                    edges.swap_remove(k);
                } else {
                    edges.push((u, v));
                }
            }
        }
        let mut keep = Vec::with_capacity(tris.len() + edges.len());
        keep.extend(tris.iter().zip(&bad).filter(|(_, &b)| !b).map(|(t, _)| *t));
        for (u, v) in edges {
            keep.push([u, v, i]);
        }
        tris = keep;
    }
    tris.retain(|t| t.iter().all(|&v| v < n));
    tris.retain(|&[a, b, c]| orient(norm[a], norm[b], norm[c]) > PREDICATE_EPS);
    tris.sort_unstable();
    Ok(Triangulation {
        points: points.to_vec(),
        triangles: tris,
    })
}
