//! Directional wind climate: hourly samples in, per-sector Weibull rose out.
//!
//! Samples at 10 m are lifted to hub height with the logarithmic profile,
//! split into equal-width direction sectors, and each sector's hub-height
//! speeds are fitted by maximum likelihood. Calm hours (`v10 == 0`) are dropped
//! before both the fit and the sector probabilities.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum positive samples for a sector to get a Weibull fit.
pub const MIN_FIT_SAMPLES: usize = 30;
/// Reference height of the input series.
pub const REFERENCE_HEIGHT: f64 = 10.0;

const MLE_MAX_ITER: usize = 100;
const MLE_TOL: f64 = 1e-12;
const MAX_SHAPE: f64 = 1e3;

/// One hourly observation at 10 m.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSample {
    pub timestamp: NaiveDateTime,
    /// Speed at 10 m, m/s.
    pub v10: f64,
    /// Meteorological (coming-from) direction, degrees clockwise from north, in `[0, 360)`.
    pub direction: f64,
}

impl WindSample {
    pub fn new(timestamp: NaiveDateTime, v10: f64, direction: f64) -> Result<Self> {
        if !(v10 >= 0.0 && v10.is_finite()) {
            return Err(Error::invalid(format!("wind speed {v10} must be finite and >= 0")));
        }
        if !(0.0..=360.0).contains(&direction) {
            return Err(Error::invalid(format!("direction {direction} outside [0, 360]")));
        }
        // 360 is a common spelling of north
        let direction = if direction == 360.0 { 0.0 } else { direction };
        Ok(WindSample {
            timestamp,
            v10,
            direction,
        })
    }
}

/// Logarithmic profile from 10 m to height `z`: `v10 * ln(z/z0) / ln(10/z0)`.
pub fn extrapolate_to_hub(v10: f64, z: f64, z0: f64) -> Result<f64> {
    if !(z0 > 0.0) || !(z > z0) || !z.is_finite() {
        return Err(Error::invalid(format!(
            "log profile undefined for z = {z}, z0 = {z0}; need z > z0 > 0"
        )));
    }
    if REFERENCE_HEIGHT <= z0 {
        return Err(Error::invalid(format!("roughness z0 = {z0} must be below 10 m")));
    }
    if !(v10 >= 0.0) {
        return Err(Error::invalid(format!("wind speed {v10} must be >= 0")));
    }
    Ok(v10 * (z / z0).ln() / (REFERENCE_HEIGHT / z0).ln())
}

/// Where sector 1 sits relative to north.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorAlignment {
    /// Sector 1 spans `[0, w)`, centered at `w/2` (12 sectors: sector 2 at 45°, sector 3 at 75°).
    #[default]
    StartAtNorth,
    /// Sector 1 spans `[-w/2, w/2)`, centered on north.
    CenteredOnNorth,
}

impl SectorAlignment {
    fn offset(self, width: f64) -> f64 {
        match self {
            SectorAlignment::StartAtNorth => 0.0,
            SectorAlignment::CenteredOnNorth => -0.5 * width,
        }
    }

    /// Center angle of zero-based sector `s`, degrees in `[0, 360)`.
    pub fn center(self, s: usize, n_sectors: usize) -> f64 {
        let width = 360.0 / n_sectors as f64;
        (self.offset(width) + (s as f64 + 0.5) * width).rem_euclid(360.0)
    }

    /// Zero-based sector containing `direction`.
    pub fn sector_of(self, direction: f64, n_sectors: usize) -> usize {
        let width = 360.0 / n_sectors as f64;
        let shifted = (direction - self.offset(width)).rem_euclid(360.0);
        ((shifted / width).floor() as usize).min(n_sectors - 1)
    }
}

/// Splits samples into `n_sectors` direction buckets of hub-height speeds.
///
/// Every sample lands in exactly one bucket; calm samples are kept here and
/// dropped later by [`build_rose`].
pub fn bin_by_sector(
    samples: &[WindSample],
    n_sectors: usize,
    alignment: SectorAlignment,
    hub_height: f64,
    z0: f64,
) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::invalid("no wind samples"));
    }
    if n_sectors == 0 {
        return Err(Error::invalid("number of sectors must be >= 1"));
    }
    let factor = extrapolate_to_hub(1.0, hub_height, z0)?;
    let mut buckets = vec![Vec::new(); n_sectors];
    for s in samples {
        buckets[alignment.sector_of(s.direction, n_sectors)].push(s.v10 * factor);
    }
    Ok(buckets)
}

/// Outcome of fitting one sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeibullFit {
    Fitted { scale: f64, shape: f64 },
    /// Too few samples or a (near) point mass; carries the mean positive speed.
    Degenerate { mean_speed: f64, sample_count: usize },
}

/// Maximum-likelihood Weibull fit of strictly positive speeds.
///
/// Solves the profile-likelihood shape equation
/// `Σ x^k ln x / Σ x^k − 1/k − mean(ln x) = 0` by Newton's method safeguarded
/// with bisection, then recovers the scale in closed form. Non-positive values
/// are discarded first.
pub fn fit_weibull_mle(speeds: &[f64]) -> Result<WeibullFit> {
    let xs: Vec<f64> = speeds.iter().copied().filter(|&v| v > 0.0).collect();
    let n = xs.len();
    let mean_speed = if n == 0 {
        0.0
    } else {
        xs.iter().sum::<f64>() / n as f64
    };
    let degenerate = WeibullFit::Degenerate {
        mean_speed,
        sample_count: n,
    };
    if n < MIN_FIT_SAMPLES {
        return Ok(degenerate);
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::WeibullFit("non-finite speed".into()));
    }

    let x_max = xs.iter().copied().fold(f64::MIN, f64::max);
    let logs: Vec<f64> = xs.iter().map(|&x| (x / x_max).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n as f64;
    let var_log = logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / n as f64;
    if var_log.sqrt() < 1e-9 {
        return Ok(degenerate);
    }

    let eval = |k: f64| -> (f64, f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &l in &logs {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let g = s1 / s0 - 1.0 / k - mean_log;
        let dg = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k);
        (g, dg, s0)
    };

    // moment-style start from the spread of ln x
    let mut k = (1.2825 / var_log.sqrt()).clamp(1e-3, MAX_SHAPE);
    let (mut lo, mut hi) = (k, k);
    while eval(lo).0 > 0.0 {
        lo *= 0.5;
        if lo < 1e-8 {
            return Err(Error::WeibullFit("shape bracket collapsed towards zero".into()));
        }
    }
    while eval(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > MAX_SHAPE {
            return Ok(degenerate);
        }
    }

    let mut converged = false;
    for _ in 0..MLE_MAX_ITER {
        let (g, dg, _) = eval(k);
        if g.abs() <= MLE_TOL {
            converged = true;
            break;
        }
        if g < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let newton = k - g / dg;
        k = if newton > lo && newton < hi && dg > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi {
            converged = eval(k).0.abs() <= 1e-10;
            break;
        }
    }
    let (g, _, s0) = eval(k);
    if !converged && g.abs() > 1e-10 {
        return Err(Error::WeibullFit(format!(
            "shape equation did not converge within {MLE_MAX_ITER} iterations (residual {g:e})"
        )));
    }
    let scale = x_max * (s0 / n as f64).powf(1.0 / k);
    Ok(WeibullFit::Fitted { scale, shape: k })
}

/// Residual of the profile-likelihood shape equation at `shape`.
pub fn weibull_shape_residual(speeds: &[f64], shape: f64) -> f64 {
    let xs: Vec<f64> = speeds.iter().copied().filter(|&v| v > 0.0).collect();
    let x_max = xs.iter().copied().fold(f64::MIN, f64::max);
    let logs: Vec<f64> = xs.iter().map(|&x| (x / x_max).ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
    let (mut s0, mut s1) = (0.0, 0.0);
    for &l in &logs {
        let w = (shape * l).exp();
        s0 += w;
        s1 += w * l;
    }
    s1 / s0 - 1.0 / shape - mean_log
}

/// Conditional speed distribution of one sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedModel {
    Weibull { scale_ms: f64, shape: f64 },
    /// Fallback for degenerate sectors: all probability at one speed.
    PointMass { speed_ms: f64 },
}

impl SpeedModel {
    /// Density at `v`; zero for the point-mass fallback.
    pub fn weibull_pdf(&self, v: f64) -> f64 {
        match *self {
            SpeedModel::Weibull { scale_ms, shape } => {
                if v < 0.0 {
                    return 0.0;
                }
                let r = v / scale_ms;
                shape / scale_ms * r.powf(shape - 1.0) * (-r.powf(shape)).exp()
            }
            SpeedModel::PointMass { .. } => 0.0,
        }
    }
}

/// One direction sector of the rose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorModel {
    /// 1-based.
    pub index: usize,
    /// Representative (center) direction, degrees clockwise from north.
    pub theta_deg: f64,
    /// Probability of the wind blowing from this sector.
    pub probability: f64,
    pub model: SpeedModel,
    pub sample_count: usize,
}

impl SectorModel {
    pub fn is_degenerate(&self) -> bool {
        matches!(self.model, SpeedModel::PointMass { .. })
    }
}

/// Per-sector speed distributions and probabilities at hub height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRose {
    pub hub_height_m: f64,
    pub z0_m: f64,
    pub sectors: Vec<SectorModel>,
}

impl WindRose {
    /// Validates sector probabilities, parameters and spacing.
    pub fn new(hub_height_m: f64, z0_m: f64, sectors: Vec<SectorModel>) -> Result<Self> {
        let rose = WindRose {
            hub_height_m,
            z0_m,
            sectors,
        };
        rose.validate()?;
        Ok(rose)
    }

    fn validate(&self) -> Result<()> {
        let n = self.sectors.len();
        if n == 0 {
            return Err(Error::invalid("wind rose has no sectors"));
        }
        let total: f64 = self.sectors.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "sector probabilities sum to {total}, expected 1"
            )));
        }
        let width = 360.0 / n as f64;
        for (i, s) in self.sectors.iter().enumerate() {
            if s.index != i + 1 {
                return Err(Error::invalid(format!("sector {i}: index {} out of order", s.index)));
            }
            if !(0.0..=1.0).contains(&s.probability) {
                return Err(Error::invalid(format!(
                    "sector {}: probability {} outside [0, 1]",
                    s.index, s.probability
                )));
            }
            match s.model {
                SpeedModel::Weibull { scale_ms, shape } => {
                    if !(scale_ms > 0.0 && shape > 0.0 && scale_ms.is_finite() && shape.is_finite()) {
                        return Err(Error::invalid(format!(
                            "sector {}: Weibull parameters must be positive",
                            s.index
                        )));
                    }
                }
                SpeedModel::PointMass { speed_ms } => {
                    if !(speed_ms >= 0.0 && speed_ms.is_finite()) {
                        return Err(Error::invalid(format!(
                            "sector {}: point-mass speed must be >= 0",
                            s.index
                        )));
                    }
                }
            }
            let expected = (self.sectors[0].theta_deg + i as f64 * width).rem_euclid(360.0);
            let diff = (s.theta_deg - expected).rem_euclid(360.0);
            if diff.min(360.0 - diff) > 1e-6 {
                return Err(Error::invalid(format!(
                    "sector {}: center {} not equally spaced (expected {expected})",
                    s.index, s.theta_deg
                )));
            }
        }
        Ok(())
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.len()
    }

    /// Turns every sector direction clockwise by `angle_deg`.
    pub fn rotated(&self, angle_deg: f64) -> WindRose {
        let mut out = self.clone();
        for s in &mut out.sectors {
            s.theta_deg = (s.theta_deg + angle_deg).rem_euclid(360.0);
        }
        out
    }

    /// Replaces probabilities with `weights / Σ weights`.
    pub fn with_weights(&self, weights: &[f64]) -> Result<WindRose> {
        if weights.len() != self.sectors.len() {
            return Err(Error::invalid("weight count differs from sector count"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights must have a positive sum"));
        }
        let mut out = self.clone();
        for (s, w) in out.sectors.iter_mut().zip(weights) {
            s.probability = w / total;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let rose: WindRose = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.as_ref().to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        rose.validate()?;
        Ok(rose)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Fits a rose from hourly samples.
pub fn build_rose(
    samples: &[WindSample],
    n_sectors: usize,
    alignment: SectorAlignment,
    hub_height: f64,
    z0: f64,
) -> Result<WindRose> {
    let buckets = bin_by_sector(samples, n_sectors, alignment, hub_height, z0)?;
    let buckets: Vec<Vec<f64>> = buckets
        .into_iter()
        .map(|b| b.into_iter().filter(|&v| v > 0.0).collect())
        .collect();
    let retained: usize = buckets.iter().map(Vec::len).sum();
    if retained == 0 {
        return Err(Error::invalid("every sample is calm (zero speed)"));
    }

    let fits: Vec<Result<WeibullFit>> = buckets.par_iter().map(|b| fit_weibull_mle(b)).collect();
    let mut sectors = Vec::with_capacity(n_sectors);
    let mut any_fitted = false;
    for (s, (bucket, fit)) in buckets.iter().zip(fits).enumerate() {
        let model = match fit? {
            WeibullFit::Fitted { scale, shape } => {
                any_fitted = true;
                SpeedModel::Weibull {
                    scale_ms: scale,
                    shape,
                }
            }
            WeibullFit::Degenerate {
                mean_speed,
                sample_count,
            } => {
                if sample_count > 0 {
                    warn!(
                        "sector {}: {sample_count} samples cannot support a Weibull fit; \
                         using a point mass at {mean_speed:.3} m/s",
                        s + 1
                    );
                }
                SpeedModel::PointMass {
                    speed_ms: mean_speed,
                }
            }
        };
        sectors.push(SectorModel {
            index: s + 1,
            theta_deg: alignment.center(s, n_sectors),
            probability: bucket.len() as f64 / retained as f64,
            model,
            sample_count: bucket.len(),
        });
    }
    if !any_fitted {
        return Err(Error::DegenerateRose);
    }
    // absorb rounding so the probabilities sum to one
    let total: f64 = sectors.iter().map(|s| s.probability).sum();
    for s in &mut sectors {
        s.probability /= total;
    }
    WindRose::new(hub_height, z0, sectors)
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

/// Reads `timestamp,v10_ms,direction_deg` rows.
pub fn read_wind_csv(path: impl AsRef<Path>) -> Result<Vec<WindSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_wind_csv_from(file, path)
}

pub(crate) fn read_wind_csv_from<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<WindSample>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["timestamp", "v10_ms", "direction_deg"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(1, format!("expected header `{}`", expected.join(","))));
    }
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 || record.iter().any(str::is_empty) {
            return Err(parse_err(line, "missing field".into()));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_err(line, format!("bad ISO-8601 timestamp `{}`", &record[0])))?;
        let v10: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad speed `{}`", &record[1])))?;
        let dir: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad direction `{}`", &record[2])))?;
        samples.push(WindSample::new(ts, v10, dir).map_err(|e| parse_err(line, e.to_string()))?);
    }
    if samples.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    Ok(samples)
}

/// Writes samples in the same CSV schema [`read_wind_csv`] accepts.
pub fn write_wind_csv(path: impl AsRef<Path>, samples: &[WindSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "v10_ms", "direction_deg"])?;
    for s in samples {
        w.write_record([
            s.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            s.v10.to_string(),
            s.direction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Weibull};

    fn ts(h: i64) -> NaiveDateTime {
        DateTime::from_timestamp(h * 3600, 0).unwrap().naive_utc()
    }

    fn sample(v10: f64, dir: f64) -> WindSample {
        WindSample::new(ts(0), v10, dir).unwrap()
    }

    #[test]
    fn log_profile_values() {
        assert_eq!(extrapolate_to_hub(0.0, 90.0, 0.0002).unwrap(), 0.0);
        let v = extrapolate_to_hub(8.0, 90.0, 0.0002).unwrap();
        assert!((v - 9.6246).abs() < 1e-4, "{v}");
        for z0 in [1e-4, 0.03, 0.5] {
            assert!((extrapolate_to_hub(7.3, 10.0, z0).unwrap() - 7.3).abs() < 1e-12);
        }
        assert!(extrapolate_to_hub(8.0, 90.0, 0.0).is_err());
        assert!(extrapolate_to_hub(8.0, 0.0001, 0.0002).is_err());
    }

    #[test]
    fn sector_assignment_start_at_north() {
        let a = SectorAlignment::StartAtNorth;
        assert_eq!(a.sector_of(0.0, 12) + 1, 1);
        assert_eq!(a.sector_of(45.0, 12) + 1, 2);
        assert_eq!(a.sector_of(75.0, 12) + 1, 3);
        assert_eq!(a.sector_of(359.0, 12) + 1, 12);
        assert_eq!(a.center(1, 12), 45.0);
        assert_eq!(a.center(2, 12), 75.0);
    }

    #[test]
    fn sector_assignment_north_centered() {
        let a = SectorAlignment::CenteredOnNorth;
        assert_eq!(a.sector_of(0.0, 12) + 1, 1);
        assert_eq!(a.sector_of(359.0, 12) + 1, 1);
        assert_eq!(a.sector_of(345.0, 12) + 1, 1);
        assert_eq!(a.sector_of(344.999, 12) + 1, 12);
        assert_eq!(a.sector_of(15.0, 12) + 1, 2);
        assert_eq!(a.center(0, 12), 0.0);
        assert_eq!(a.center(2, 12), 60.0);
    }

    #[test]
    fn binning_rejects_empty() {
        assert!(bin_by_sector(&[], 12, SectorAlignment::default(), 90.0, 0.0002).is_err());
    }

    #[test]
    fn weibull_recovery_shape_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dist = Weibull::new(10.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let WeibullFit::Fitted { scale, shape } = fit_weibull_mle(&xs).unwrap() else {
            panic!("degenerate")
        };
        assert!((scale / 10.0 - 1.0).abs() < 0.01, "{scale}");
        assert!((shape / 2.0 - 1.0).abs() < 0.01, "{shape}");
        assert!(weibull_shape_residual(&xs, shape).abs() <= 1e-10);
    }

    #[test]
    fn weibull_exponential_case_matches_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dist = Weibull::new(10.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let WeibullFit::Fitted { scale, shape } = fit_weibull_mle(&xs).unwrap() else {
            panic!("degenerate")
        };
        assert!((scale / mean - 1.0).abs() < 0.01);
        assert!((shape - 1.0).abs() < 0.01);
    }

    #[test]
    fn point_mass_and_small_samples_are_degenerate() {
        let fit = fit_weibull_mle(&[6.5; 500]).unwrap();
        assert_eq!(
            fit,
            WeibullFit::Degenerate {
                mean_speed: 6.5,
                sample_count: 500
            }
        );
        let fit = fit_weibull_mle(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(fit, WeibullFit::Degenerate { sample_count: 3, .. }));
    }

    #[test]
    fn rose_single_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<WindSample> = (0..2000)
            .map(|_| sample(rng.random_range(1.0..15.0), 80.0))
            .collect();
        let rose = build_rose(&samples, 12, SectorAlignment::default(), 90.0, 0.0002).unwrap();
        for s in &rose.sectors {
            let expected = if s.index == 3 { 1.0 } else { 0.0 };
            assert_eq!(s.probability, expected);
        }
        assert!(!rose.sectors[2].is_degenerate());
    }

    #[test]
    fn rose_drops_calms_and_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut samples: Vec<WindSample> = (0..12_000)
            .map(|_| sample(rng.random_range(0.5..20.0), rng.random_range(0.0..360.0)))
            .collect();
        samples.extend((0..5000).map(|_| sample(0.0, 10.0)));
        let rose = build_rose(&samples, 12, SectorAlignment::default(), 90.0, 0.0002).unwrap();
        let total: f64 = rose.sectors.iter().map(|s| s.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let counted: usize = rose.sectors.iter().map(|s| s.sample_count).sum();
        assert_eq!(counted, 12_000);
        for s in &rose.sectors {
            assert!((s.probability - 1.0 / 12.0).abs() < 0.01);
        }
    }

    #[test]
    fn rose_keeps_mass_of_degenerate_sector() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut samples: Vec<WindSample> = (0..1000)
            .map(|_| sample(rng.random_range(1.0..15.0), 100.0))
            .collect();
        samples.extend((0..10).map(|_| sample(5.0, 200.0)));
        let rose = build_rose(&samples, 12, SectorAlignment::default(), 90.0, 0.0002).unwrap();
        let s = &rose.sectors[SectorAlignment::default().sector_of(200.0, 12)];
        assert!(s.is_degenerate());
        assert!((s.probability - 10.0 / 1010.0).abs() < 1e-12);
    }

    #[test]
    fn all_degenerate_rose_rejected() {
        let samples: Vec<WindSample> = (0..100).map(|_| sample(5.0, 100.0)).collect();
        assert!(matches!(
            build_rose(&samples, 12, SectorAlignment::default(), 90.0, 0.0002),
            Err(Error::DegenerateRose)
        ));
    }

    #[test]
    fn csv_missing_field_reports_line() {
        let text = "timestamp,v10_ms,direction_deg\n2009-01-01T00:00:00,5.0,30\n2009-01-01T01:00:00,,40\n";
        let err = read_wind_csv_from(text.as_bytes(), Path::new("w.csv")).unwrap_err();
        assert_eq!(err.to_string(), "w.csv:3: missing field");
        let text = "timestamp,v10_ms,direction_deg\n2009-01-01T00:00:00,5.0\n";
        let err = read_wind_csv_from(text.as_bytes(), Path::new("w.csv")).unwrap_err();
        assert!(err.to_string().starts_with("w.csv:2:"));
        let text = "time,v,d\n";
        assert!(read_wind_csv_from(text.as_bytes(), Path::new("w.csv")).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let samples = vec![
            WindSample::new(ts(1), 5.5, 12.0).unwrap(),
            WindSample::new(ts(2), 0.0, 359.5).unwrap(),
        ];
        write_wind_csv(&path, &samples).unwrap();
        assert_eq!(read_wind_csv(&path).unwrap(), samples);
    }

    proptest::proptest! {
        #[test]
        fn binning_is_a_partition(dirs in proptest::collection::vec(0.0f64..360.0, 1..200), n in 1usize..40) {
            let samples: Vec<WindSample> = dirs.iter().map(|&d| sample(1.0, d)).collect();
            for a in [SectorAlignment::StartAtNorth, SectorAlignment::CenteredOnNorth] {
                let b = bin_by_sector(&samples, n, a, 90.0, 0.0002).unwrap();
                proptest::prop_assert_eq!(b.iter().map(Vec::len).sum::<usize>(), samples.len());
                for &d in &dirs {
                    let s = a.sector_of(d, n);
                    let w = 360.0 / n as f64;
                    let c = a.center(s, n);
                    let off = (d - c + 180.0).rem_euclid(360.0) - 180.0;
                    proptest::prop_assert!(off >= -0.5 * w - 1e-9 && off < 0.5 * w + 1e-9);
                }
            }
        }

        #[test]
        fn profile_linear_and_monotone(v in 0.0f64..40.0, z in 11.0f64..200.0) {
            let a = extrapolate_to_hub(v, z, 0.0002).unwrap();
            let b = extrapolate_to_hub(2.0 * v, z, 0.0002).unwrap();
            proptest::prop_assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b.abs()));
            let c = extrapolate_to_hub(v, z + 5.0, 0.0002).unwrap();
            proptest::prop_assert!(c >= a);
        }
    }
}
