//! Turbine coordinates, the decision variables of the layout problem.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar point in meters (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Counter-clockwise rotation by `angle_rad` about the origin.
    pub fn rotated(self, angle_rad: f64) -> Point {
        let (s, c) = angle_rad.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Positions of all turbines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    points: Vec<Point>,
}

impl Layout {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("layout needs at least one turbine"));
        }
        if let Some(i) = points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid(format!("turbine {} has non-finite coordinates", i + 1)));
        }
        Ok(Layout { points })
    }

    /// Builds from `[x1, y1, x2, y2, ...]`.
    pub fn from_flat(xy: &[f64]) -> Result<Self> {
        if xy.len() % 2 != 0 {
            return Err(Error::invalid("flat coordinate vector has odd length"));
        }
        Layout::new(xy.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Layout {
        Layout {
            points: self.points.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect(),
        }
    }

    /// Rotates clockwise (compass sense) by `angle_deg` about the origin.
    pub fn rotated_clockwise(&self, angle_deg: f64) -> Layout {
        let a = -angle_deg.to_radians();
        Layout {
            points: self.points.iter().map(|p| p.rotated(a)).collect(),
        }
    }

    /// Root mean square of all pairwise distances, m.
    pub fn rms_pair_distance(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let p = self.points[i];
                let q = self.points[j];
                sum += (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
            }
        }
        (sum / (n * (n - 1) / 2) as f64).sqrt()
    }

    /// Reads `turbine_id,x_m,y_m`; rows are taken in file order.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Layout> {
        let path = path.as_ref();
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["turbine_id", "x_m", "y_m"] {
            return Err(err(1, "expected header `turbine_id,x_m,y_m`".into()));
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 3 || rec.iter().any(str::is_empty) {
                return Err(err(line, "missing field".into()));
            }
            let x: f64 = rec[1].parse().map_err(|_| err(line, format!("bad x `{}`", &rec[1])))?;
            let y: f64 = rec[2].parse().map_err(|_| err(line, format!("bad y `{}`", &rec[2])))?;
            points.push(Point::new(x, y));
        }
        Layout::new(points).map_err(|e| err(1, e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["turbine_id", "x_m", "y_m"])?;
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([(i + 1).to_string(), p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
