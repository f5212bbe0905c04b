//! Turbine geometry and performance curves.
//!
//! Power and thrust curves are user-supplied piecewise-linear tables. The
//! power curve is zero outside `[cut_in, cut_out)` and flat at rated power on
//! `[rated, cut_out)`; the thrust coefficient is zero whenever the rotor is not
//! operating, so a parked turbine casts no wake.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest thrust coefficient handed to the wake model; keeps `sqrt(1 - Ct)` real.
pub const MAX_THRUST_COEFFICIENT: f64 = 1.0 - 1e-9;

/// A single turbine type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TurbineFile", into = "TurbineFile")]
pub struct TurbineSpec {
    name: String,
    hub_height: f64,
    rotor_diameter: f64,
    cut_in: f64,
    rated_speed: f64,
    cut_out: f64,
    rated_power: f64,
    power_table: Vec<(f64, f64)>,
    thrust_table: Vec<(f64, f64)>,
}

/// On-disk JSON layout of a turbine spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurbineFile {
    #[serde(default)]
    name: String,
    hub_height_m: f64,
    rotor_diameter_m: f64,
    cut_in_ms: f64,
    rated_ms: f64,
    cut_out_ms: f64,
    rated_power_w: f64,
    power_curve: Vec<[f64; 2]>,
    thrust_curve: Vec<[f64; 2]>,
}

impl TryFrom<TurbineFile> for TurbineSpec {
    type Error = Error;

    fn try_from(f: TurbineFile) -> Result<Self> {
        TurbineSpec::new(
            f.name,
            f.hub_height_m,
            f.rotor_diameter_m,
            (f.cut_in_ms, f.rated_ms, f.cut_out_ms),
            f.rated_power_w,
            f.power_curve.into_iter().map(|[a, b]| (a, b)).collect(),
            f.thrust_curve.into_iter().map(|[a, b]| (a, b)).collect(),
        )
    }
}

impl From<TurbineSpec> for TurbineFile {
    fn from(t: TurbineSpec) -> Self {
        TurbineFile {
            name: t.name,
            hub_height_m: t.hub_height,
            rotor_diameter_m: t.rotor_diameter,
            cut_in_ms: t.cut_in,
            rated_ms: t.rated_speed,
            cut_out_ms: t.cut_out,
            rated_power_w: t.rated_power,
            power_curve: t.power_table.iter().map(|&(a, b)| [a, b]).collect(),
            thrust_curve: t.thrust_table.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

fn check_table(label: &str, table: &[(f64, f64)]) -> Result<()> {
    if table.len() < 2 {
        return Err(Error::invalid(format!("{label}: needs at least two entries")));
    }
    for (i, &(v, y)) in table.iter().enumerate() {
        if !v.is_finite() || !y.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "{label}[{i}] = [{v}, {y}]: entries must be finite with speed >= 0"
            )));
        }
        if i > 0 && v <= table[i - 1].0 {
            return Err(Error::invalid(format!(
                "{label}[{i}] = [{v}, {y}]: speeds must be strictly increasing"
            )));
        }
    }
    Ok(())
}

/// Piecewise-linear interpolation, clamped to the end values outside the table.
fn interpolate(table: &[(f64, f64)], v: f64) -> f64 {
    let last = table.len() - 1;
    if v <= table[0].0 {
        return table[0].1;
    }
    if v >= table[last].0 {
        return table[last].1;
    }
    // first knot strictly greater than v
    let hi = table.partition_point(|&(s, _)| s <= v);
    let (v0, y0) = table[hi - 1];
    let (v1, y1) = table[hi];
    if v == v0 {
        return y0;
    }
    y0 + (y1 - y0) * (v - v0) / (v1 - v0)
}

impl TurbineSpec {
    /// Validates and builds a turbine. `speeds` is `(cut_in, rated, cut_out)` in m/s.
    pub fn new(
        name: impl Into<String>,
        hub_height: f64,
        rotor_diameter: f64,
        speeds: (f64, f64, f64),
        rated_power: f64,
        power_table: Vec<(f64, f64)>,
        thrust_table: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let (cut_in, rated_speed, cut_out) = speeds;
        if !(hub_height > 0.0 && hub_height.is_finite()) {
            return Err(Error::invalid(format!("hub_height_m = {hub_height}: must be > 0")));
        }
        if !(rotor_diameter > 0.0 && rotor_diameter.is_finite()) {
            return Err(Error::invalid(format!(
                "rotor_diameter_m = {rotor_diameter}: must be > 0"
            )));
        }
        if !(0.0 < cut_in && cut_in < rated_speed && rated_speed < cut_out && cut_out.is_finite()) {
            return Err(Error::invalid(format!(
                "speeds (cut_in, rated, cut_out) = ({cut_in}, {rated_speed}, {cut_out}): \
                 need 0 < cut_in < rated < cut_out"
            )));
        }
        if !(rated_power > 0.0 && rated_power.is_finite()) {
            return Err(Error::invalid(format!("rated_power_w = {rated_power}: must be > 0")));
        }
        check_table("power_curve", &power_table)?;
        check_table("thrust_curve", &thrust_table)?;
        for (i, &(v, p)) in power_table.iter().enumerate() {
            if p < 0.0 || p > rated_power * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "power_curve[{i}] = [{v}, {p}]: power must lie in [0, rated_power_w]"
                )));
            }
        }
        for (i, &(v, ct)) in thrust_table.iter().enumerate() {
            if !(0.0..=1.0).contains(&ct) {
                return Err(Error::invalid(format!(
                    "thrust_curve[{i}] = [{v}, {ct}]: thrust coefficient must lie in [0, 1]"
                )));
            }
        }
        Ok(TurbineSpec {
            name: name.into(),
            hub_height,
            rotor_diameter,
            cut_in,
            rated_speed,
            cut_out,
            rated_power,
            power_table,
            thrust_table,
        })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.as_ref().to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn hub_height(&self) -> f64 {
        self.hub_height
    }

    pub fn rotor_diameter(&self) -> f64 {
        self.rotor_diameter
    }

    pub fn rotor_radius(&self) -> f64 {
        0.5 * self.rotor_diameter
    }

    pub fn rotor_area(&self) -> f64 {
        std::f64::consts::PI * self.rotor_radius().powi(2)
    }

    pub fn cut_in(&self) -> f64 {
        self.cut_in
    }

    pub fn rated_speed(&self) -> f64 {
        self.rated_speed
    }

    pub fn cut_out(&self) -> f64 {
        self.cut_out
    }

    /// Nameplate power in W.
    pub fn rated_power(&self) -> f64 {
        self.rated_power
    }

    pub fn power_table(&self) -> &[(f64, f64)] {
        &self.power_table
    }

    pub fn thrust_table(&self) -> &[(f64, f64)] {
        &self.thrust_table
    }

    /// Electrical power in W at hub-height speed `v`.
    pub fn power(&self, v: f64) -> f64 {
        if !(v >= self.cut_in) || v >= self.cut_out {
            0.0
        } else {
            self.operating_power(v)
        }
    }

    /// Like [`power`](Self::power) but with the operating range closed at
    /// cut-out: at exactly `cut_out` it returns the left limit (rated power).
    /// Quadrature over `[cut_in, cut_out]` samples the integrand at the upper
    /// limit and needs the value from inside the interval there.
    pub fn power_closed(&self, v: f64) -> f64 {
        if !(v >= self.cut_in) || v > self.cut_out {
            0.0
        } else {
            self.operating_power(v)
        }
    }

    fn operating_power(&self, v: f64) -> f64 {
        if v >= self.rated_speed {
            self.rated_power
        } else {
            interpolate(&self.power_table, v).clamp(0.0, self.rated_power)
        }
    }

    /// Thrust coefficient at hub-height speed `v`, in `[0, 1)`.
    pub fn thrust_coefficient(&self, v: f64) -> f64 {
        if !(v >= self.cut_in) || v >= self.cut_out {
            0.0
        } else {
            interpolate(&self.thrust_table, v).clamp(0.0, MAX_THRUST_COEFFICIENT)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TurbineSpec {
        TurbineSpec::new(
            "t",
            90.0,
            126.0,
            (3.0, 11.3, 25.0),
            5.0e6,
            vec![(3.0, 40e3), (5.0, 400e3), (8.0, 1.8e6), (11.3, 5.0e6), (25.0, 5.0e6)],
            vec![(3.0, 0.8), (10.0, 0.7), (12.0, 0.5), (25.0, 0.1)],
        )
        .unwrap()
    }

    #[test]
    fn power_regions() {
        let t = sample();
        assert_eq!(t.power(2.9), 0.0);
        assert_eq!(t.power(11.3), 5.0e6);
        assert_eq!(t.power(20.0), 5.0e6);
        assert_eq!(t.power(25.0), 0.0);
        assert_eq!(t.power(26.0), 0.0);
        assert_eq!(t.power(3.0), 40e3);
        assert!((t.power(4.0) - 220e3).abs() < 1e-6);
    }

    #[test]
    fn closed_power_differs_only_at_cut_out() {
        let t = sample();
        assert_eq!(t.power_closed(25.0), 5.0e6);
        assert_eq!(t.power_closed(25.0 + 1e-9), 0.0);
        for v in [0.0, 2.9, 3.0, 7.7, 11.3, 24.99] {
            assert_eq!(t.power_closed(v), t.power(v));
        }
    }

    #[test]
    fn thrust_knots_and_midpoints() {
        let t = sample();
        assert_eq!(t.thrust_coefficient(2.0), 0.0);
        assert_eq!(t.thrust_coefficient(10.0), 0.7);
        assert_eq!(t.thrust_coefficient(12.0), 0.5);
        assert!((t.thrust_coefficient(11.0) - 0.6).abs() < 1e-15);
        assert_eq!(t.thrust_coefficient(25.0), 0.0);
    }

    #[test]
    fn thrust_clamped_below_one() {
        let t = TurbineSpec::new(
            "",
            90.0,
            126.0,
            (3.0, 11.0, 25.0),
            1.0,
            vec![(3.0, 0.0), (25.0, 1.0)],
            vec![(3.0, 1.0), (25.0, 1.0)],
        )
        .unwrap();
        let ct = t.thrust_coefficient(5.0);
        assert!(ct < 1.0 && (1.0 - ct).sqrt() > 0.0);
    }

    #[test]
    fn rejects_bad_tables() {
        let err = TurbineSpec::new(
            "",
            90.0,
            126.0,
            (3.0, 11.0, 25.0),
            5e6,
            vec![(3.0, 0.0), (3.0, 1.0)],
            vec![(3.0, 0.5), (25.0, 0.1)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("power_curve[1]"), "{err}");

        let err = TurbineSpec::new(
            "",
            90.0,
            126.0,
            (3.0, 11.0, 25.0),
            5e6,
            vec![(3.0, 0.0), (25.0, 6e6)],
            vec![(3.0, 0.5), (25.0, 0.1)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("power_curve[1]"), "{err}");

        assert!(TurbineSpec::new(
            "",
            90.0,
            126.0,
            (12.0, 11.0, 25.0),
            5e6,
            vec![(3.0, 0.0), (25.0, 1.0)],
            vec![(3.0, 0.5), (25.0, 0.1)],
        )
        .is_err());
    }

    #[test]
    fn json_roundtrip_and_named_errors() {
        let t = sample();
        let text = serde_json::to_string(&t).unwrap();
        let back: TurbineSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(t, back);

        let bad = text.replace("[12.0,0.5]", "[12.0,1.5]");
        let err = serde_json::from_str::<TurbineSpec>(&bad).unwrap_err();
        assert!(err.to_string().contains("thrust_curve[2]"), "{err}");
    }

    proptest::proptest! {
        #[test]
        fn power_bounded_and_thrust_below_one(v in 0.0f64..40.0) {
            let t = sample();
            let p = t.power(v);
            proptest::prop_assert!((0.0..=t.rated_power()).contains(&p));
            let ct = t.thrust_coefficient(v);
            proptest::prop_assert!((0.0..1.0).contains(&ct));
        }

        #[test]
        fn power_monotone_below_rated(a in 3.0f64..11.3, b in 3.0f64..11.3) {
            let t = sample();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            proptest::prop_assert!(t.power(lo) <= t.power(hi));
        }
    }
}
