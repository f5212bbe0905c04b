//! Synthetic test case resembling a small offshore farm: twelve 5 MW class
//! turbines in a square of roughly 2 km by 2 km with a north-easterly wind.
//!
//! The power and thrust tables approximate a generic 5 MW reference turbine
//! (126 m rotor, 90 m hub). They are sample data, not a certified curve.

use chrono::{Duration, NaiveDate};
use rand::Rng;

use crate::constraints::FarmBoundary;
use crate::error::Result;
use crate::turbine::TurbineSpec;
use crate::wind_resource::{SectorAlignment, SectorModel, SpeedModel, WindRose, WindSample};

/// Side of the square farm area, m.
pub const SIDE_M: f64 = 1940.0;
pub const N_TURBINES: usize = 12;
/// Sea surface roughness length, m.
pub const Z0_M: f64 = 0.0002;
/// Direction of the dominant wind, degrees clockwise from north.
pub const DOMINANT_DIRECTION_DEG: f64 = 45.0;

pub fn boundary() -> FarmBoundary {
    FarmBoundary::rectangle(0.0, 0.0, SIDE_M, SIDE_M).expect("square is a valid boundary")
}

const POWER_KW: [(f64, f64); 22] = [
    (3.0, 40.5),
    (4.0, 177.7),
    (5.0, 403.9),
    (6.0, 737.6),
    (7.0, 1187.2),
    (8.0, 1771.1),
    (9.0, 2518.6),
    (10.0, 3448.4),
    (11.0, 4562.5),
    (11.3, 5000.0),
    (12.0, 5000.0),
    (13.0, 5000.0),
    (14.0, 5000.0),
    (15.0, 5000.0),
    (16.0, 5000.0),
    (17.0, 5000.0),
    (18.0, 5000.0),
    (19.0, 5000.0),
    (20.0, 5000.0),
    (22.0, 5000.0),
    (24.0, 5000.0),
    (25.0, 5000.0),
];

const THRUST: [(f64, f64); 24] = [
    (3.0, 0.77),
    (4.0, 0.77),
    (5.0, 0.77),
    (6.0, 0.77),
    (7.0, 0.77),
    (8.0, 0.77),
    (9.0, 0.77),
    (10.0, 0.77),
    (11.0, 0.75),
    (11.3, 0.70),
    (12.0, 0.53),
    (13.0, 0.41),
    (14.0, 0.33),
    (15.0, 0.27),
    (16.0, 0.22),
    (17.0, 0.18),
    (18.0, 0.16),
    (19.0, 0.13),
    (20.0, 0.11),
    (21.0, 0.10),
    (22.0, 0.09),
    (23.0, 0.08),
    (24.0, 0.07),
    (25.0, 0.06),
];

/// Approximate 5 MW reference turbine.
pub fn turbine() -> TurbineSpec {
    TurbineSpec::new(
        "generic-5MW (approximate)",
        90.0,
        126.0,
        (3.0, 11.3, 25.0),
        5.0e6,
        POWER_KW.iter().map(|&(v, p)| (v, p * 1e3)).collect(),
        THRUST.to_vec(),
    )
    .expect("built-in turbine tables are valid")
}

/// Directional density: 60 % von Mises around the dominant direction (κ = 2), 40 % uniform.
pub fn direction_density(theta_deg: f64) -> f64 {
    let kappa = 2.0;
    let c = (theta_deg - DOMINANT_DIRECTION_DEG).to_radians().cos();
    let tau = std::f64::consts::TAU;
    0.6 * (kappa * c).exp() / (tau * bessel_i0(kappa)) + 0.4 / tau
}

fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

/// Weibull scale and shape as smooth functions of direction.
pub fn weibull_at(theta_deg: f64) -> (f64, f64) {
    let c = (theta_deg - DOMINANT_DIRECTION_DEG).to_radians().cos();
    (9.0 + 2.0 * c, 2.1 + 0.2 * c)
}

/// Rose with `n_sectors` sectors starting at north; probabilities integrate the density over each sector.
pub fn rose(n_sectors: usize) -> Result<WindRose> {
    let width = 360.0 / n_sectors as f64;
    let steps = 400;
    let mut sectors = Vec::with_capacity(n_sectors);
    for s in 1..=n_sectors {
        let lo = (s - 1) as f64 * width;
        let h = width / steps as f64;
        // composite Simpson rule over the sector, density per radian
        let mut acc = direction_density(lo) + direction_density(lo + width);
        for k in 1..steps {
            acc += direction_density(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let probability = acc * h / 3.0 * std::f64::consts::PI / 180.0;
        let theta = SectorAlignment::StartAtNorth.center(s - 1, n_sectors);
        let (scale_ms, shape) = weibull_at(theta);
        sectors.push(SectorModel {
            index: s,
            theta_deg: theta,
            probability,
            model: SpeedModel::Weibull { scale_ms, shape },
            sample_count: 0,
        });
    }
    let total: f64 = sectors.iter().map(|s| s.probability).sum();
    for s in &mut sectors {
        s.probability /= total;
    }
    WindRose::new(90.0, Z0_M, sectors)
}

/// Hourly samples at 10 m drawn from the synthetic climate, starting 2020-01-01.
///
/// Directions come from the tabulated inverse CDF of [`direction_density`] and
/// hub-height speeds from the local Weibull, scaled down with the log law.
pub fn synthetic_samples<R: Rng>(hours: usize, rng: &mut R) -> Vec<WindSample> {
    let bins = 3600;
    let width = 360.0 / bins as f64;
    let mut cdf = Vec::with_capacity(bins);
    let mut acc = 0.0;
    for b in 0..bins {
        acc += direction_density((b as f64 + 0.5) * width);
        cdf.push(acc);
    }
    let to_10m = (10.0 / Z0_M).ln() / (90.0 / Z0_M).ln();
    let start = NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    (0..hours)
        .map(|h| {
            let target = rng.random::<f64>() * acc;
            let b = cdf.partition_point(|&c| c < target).min(bins - 1);
            let theta = (b as f64 + rng.random::<f64>()) * width;
            let (scale, shape) = weibull_at(theta);
            let u: f64 = rng.random();
            let v_hub = scale * (-(1.0 - u).ln()).powf(1.0 / shape);
            WindSample::new(start + Duration::hours(h as i64), v_hub * to_10m, theta % 360.0)
                .expect("synthetic sample is valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_integrates_to_one() {
        let n = 36_000;
        let h = 360.0 / n as f64;
        let total: f64 = (0..n).map(|k| direction_density((k as f64 + 0.5) * h)).sum::<f64>()
            * h.to_radians();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!((bessel_i0(2.0) - 2.2795853023360673).abs() < 1e-14);
    }

    #[test]
    fn rose_is_valid_and_northeast_dominant() {
        let r = rose(12).unwrap();
        assert_eq!(r.n_sectors(), 12);
        let best = r
            .sectors
            .iter()
            .max_by(|a, b| a.probability.total_cmp(&b.probability))
            .unwrap();
        assert!(best.theta_deg > 0.0 && best.theta_deg < 90.0);
        assert!(rose(72).is_ok());
        assert_eq!(turbine().power(20.0), 5.0e6);
    }

    #[test]
    fn synthetic_samples_refit_close_to_rose() {
        use crate::wind_resource::{build_rose, SectorAlignment};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let samples = synthetic_samples(20_000, &mut rng);
        let fitted = build_rose(&samples, 12, SectorAlignment::StartAtNorth, 90.0, Z0_M).unwrap();
        let exact = rose(12).unwrap();
        for (f, e) in fitted.sectors.iter().zip(&exact.sectors) {
            assert!((f.probability - e.probability).abs() < 0.015, "sector {}", e.index);
        }
    }
}
