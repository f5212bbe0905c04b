//! Jensen (top-hat) wake field with partial rotor overlap.
//!
//! For one wind direction the farm is rotated so the flow runs along −y′,
//! turbines are swept from upstream to downstream, and every upstream turbine
//! `j` contributes a deficit
//!
//! ```text
//! D_ij = (1 − sqrt(1 − Ct(v_j))) / (1 + k·d_ij / R)² · A_ij / A_rotor
//! ```
//!
//! where `d_ij` is the along-wind separation and `A_ij` the area of the rotor
//! disc covered by the wake disc of radius `R + k·d_ij`. Deficits combine as a
//! root sum of squares and the turbine sees `v·(1 − D_i)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::layout::{Layout, Point};
use crate::turbine::TurbineSpec;

/// Wake decay constant `1 / (2 ln(z / z0))`.
pub fn decay_factor(hub_height: f64, z0: f64) -> Result<f64> {
    if !(z0 > 0.0) || !(hub_height > z0) {
        return Err(Error::invalid(format!(
            "decay factor undefined for z = {hub_height}, z0 = {z0}; need z > z0 > 0"
        )));
    }
    Ok(1.0 / (2.0 * (hub_height / z0).ln()))
}

/// Farm coordinates in the wind-aligned frame of one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedOrder {
    pub theta_deg: f64,
    /// Coordinates after rotation; the wind blows towards −y′.
    pub rotated: Vec<Point>,
    /// Turbine indices sorted by descending y′ (upstream first), stable in the input index.
    pub order: Vec<usize>,
}

/// Rotates the layout by the sector angle and ranks turbines upstream first.
///
/// The counter-clockwise rotation by `theta` maps the compass direction the
/// wind comes from onto +y′, so for wind from `theta` the flow runs along −y′.
pub fn rotate_and_rank(layout: &Layout, theta_deg: f64) -> RotatedOrder {
    let angle = theta_deg.to_radians();
    let rotated: Vec<Point> = layout.points().iter().map(|p| p.rotated(angle)).collect();
    let mut order: Vec<usize> = (0..rotated.len()).collect();
    order.sort_by(|&a, &b| rotated[b].y.total_cmp(&rotated[a].y));
    RotatedOrder {
        theta_deg,
        rotated,
        order,
    }
}

/// Area of the intersection of two discs (wake radius `wake_radius`, rotor
/// radius `rotor_radius`) whose centers are `offset` apart.
pub fn overlap_area(offset: f64, wake_radius: f64, rotor_radius: f64) -> f64 {
    let d = offset.abs();
    let (r1, r2) = (wake_radius, rotor_radius);
    if d >= r1 + r2 {
        return 0.0;
    }
    let small = r1.min(r2);
    if d <= (r1 - r2).abs() {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    (r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()).clamp(0.0, PI * small * small)
}

/// Velocity deficit at a turbine caused by one upstream wake.
pub fn pair_deficit(
    thrust_coefficient: f64,
    distance: f64,
    overlap: f64,
    rotor_area: f64,
    decay: f64,
    rotor_radius: f64,
) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid(format!(
            "downstream distance {distance} must be > 0"
        )));
    }
    Ok(initial_deficit(thrust_coefficient) * wake_weight(distance, overlap, rotor_area, decay, rotor_radius))
}

fn initial_deficit(ct: f64) -> f64 {
    1.0 - (1.0 - ct).sqrt()
}

/// Geometric part of the pair deficit: decay with distance times overlap fraction.
fn wake_weight(distance: f64, overlap: f64, rotor_area: f64, decay: f64, rotor_radius: f64) -> f64 {
    let expansion = 1.0 + decay * distance / rotor_radius;
    overlap / rotor_area / (expansion * expansion)
}

/// Root-sum-square combination, clamped to `[0, 1]`.
pub fn combine_deficits(deficits: &[f64]) -> f64 {
    deficits.iter().map(|d| d * d).sum::<f64>().sqrt().min(1.0)
}

#[derive(Debug, Clone, Copy)]
struct WakeLink {
    upstream: usize,
    weight: f64,
}

/// Speed-independent wake geometry of a layout for one wind direction.
///
/// Overlaps and distance decay depend only on positions, so they are computed
/// once and reused across the whole speed grid of a sector.
#[derive(Debug, Clone)]
pub struct SectorWake {
    order: Vec<usize>,
    /// Incoming links of `order[p]` are `links[starts[p]..starts[p + 1]]`.
    starts: Vec<usize>,
    links: Vec<WakeLink>,
}

impl SectorWake {
    pub fn new(layout: &Layout, spec: &TurbineSpec, decay: f64, theta_deg: f64) -> Self {
        let ranked = rotate_and_rank(layout, theta_deg);
        let radius = spec.rotor_radius();
        let area = spec.rotor_area();
        let mut starts = Vec::with_capacity(ranked.order.len() + 1);
        let mut links = Vec::new();
        for (p, &i) in ranked.order.iter().enumerate() {
            starts.push(links.len());
            let pi = ranked.rotated[i];
            for &j in &ranked.order[..p] {
                let pj = ranked.rotated[j];
                let distance = pj.y - pi.y;
                if distance <= 0.0 {
                    continue;
                }
                let wake_radius = radius + decay * distance;
                let overlap = overlap_area(pi.x - pj.x, wake_radius, radius);
                if overlap > 0.0 {
                    links.push(WakeLink {
                        upstream: j,
                        weight: wake_weight(distance, overlap, area, decay, radius),
                    });
                }
            }
        }
        starts.push(links.len());
        SectorWake {
            order: ranked.order,
            starts,
            links,
        }
    }

    pub fn n_turbines(&self) -> usize {
        self.order.len()
    }

    /// True when no turbine sits in another's wake.
    pub fn is_unwaked(&self) -> bool {
        self.links.is_empty()
    }

    /// Turbines (input indices) with at least one upstream wake.
    pub fn waked_turbines(&self) -> impl Iterator<Item = usize> + '_ {
        self.order
            .iter()
            .enumerate()
            .filter(|&(p, _)| self.starts[p + 1] > self.starts[p])
            .map(|(_, &i)| i)
    }

    /// Perturbed velocity of every turbine (input order) for free-stream `v`.
    pub fn velocities_into(&self, spec: &TurbineSpec, v: f64, out: &mut [f64]) {
        out.fill(v);
        for (p, &i) in self.order.iter().enumerate() {
            let incoming = &self.links[self.starts[p]..self.starts[p + 1]];
            if incoming.is_empty() {
                continue;
            }
            let mut sum_sq = 0.0;
            for link in incoming {
                let d = initial_deficit(spec.thrust_coefficient(out[link.upstream])) * link.weight;
                sum_sq += d * d;
            }
            out[i] = v * (1.0 - sum_sq.sqrt().min(1.0));
        }
    }
}

/// Perturbed hub velocities of all turbines (input order) for free-stream
/// speed `v` from compass direction `theta_deg`.
pub fn farm_velocities(
    layout: &Layout,
    spec: &TurbineSpec,
    decay: f64,
    theta_deg: f64,
    v: f64,
) -> Vec<f64> {
    let wake = SectorWake::new(layout, spec, decay, theta_deg);
    let mut out = vec![0.0; layout.len()];
    wake.velocities_into(spec, v, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> TurbineSpec {
        TurbineSpec::new(
            "t",
            90.0,
            126.0,
            (3.0, 11.3, 25.0),
            5.0e6,
            vec![(3.0, 40e3), (11.3, 5.0e6), (25.0, 5.0e6)],
            vec![(3.0, 0.8), (11.0, 0.75), (15.0, 0.3), (25.0, 0.06)],
        )
        .unwrap()
    }

    const K: f64 = 0.038412;

    #[test]
    fn decay_factor_values() {
        let k = decay_factor(90.0, 0.0002).unwrap();
        assert!((k - 0.038412).abs() < 1e-6, "{k}");
        let k = decay_factor(std::f64::consts::E, 1.0).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        assert!(decay_factor(90.0, 0.1).unwrap() > decay_factor(90.0, 0.01).unwrap());
        assert!(decay_factor(90.0, 0.0).is_err());
        assert!(decay_factor(0.1, 0.2).is_err());
    }

    #[test]
    fn rotation_and_ranking() {
        let l = Layout::from_flat(&[0.0, 0.0, 3.0, 5.0, -1.0, 2.0]).unwrap();
        let r = rotate_and_rank(&l, 0.0);
        assert_eq!(r.rotated, l.points());
        assert_eq!(r.order, vec![1, 2, 0]);

        let r = rotate_and_rank(&Layout::from_flat(&[1.0, 0.0]).unwrap(), 90.0);
        assert!(r.rotated[0].x.abs() < 1e-15 && (r.rotated[0].y - 1.0).abs() < 1e-15);

        // A 500 m north of B, wind from north
        let r = rotate_and_rank(&Layout::from_flat(&[0.0, 0.0, 0.0, 500.0]).unwrap(), 0.0);
        assert_eq!(r.order, vec![1, 0]);
    }

    #[test]
    fn east_wind_ranks_eastern_turbine_first() {
        let l = Layout::from_flat(&[0.0, 0.0, 800.0, 0.0]).unwrap();
        let r = rotate_and_rank(&l, 90.0);
        assert_eq!(r.order, vec![1, 0]);
    }

    #[test]
    fn overlap_cases() {
        assert_eq!(overlap_area(200.0, 80.0, 63.0), 0.0);
        assert!((overlap_area(0.0, 80.0, 63.0) - 12468.98).abs() < 0.01);
        assert!((overlap_area(0.0, 40.0, 63.0) - PI * 1600.0).abs() < 1e-9);
        assert!((overlap_area(10.0, 80.0, 63.0) - PI * 63.0 * 63.0).abs() < 1e-9);
        let lens = overlap_area(80.0, 80.0, 63.0);
        assert!(lens > 0.0 && lens < PI * 63.0 * 63.0);
    }

    #[test]
    fn overlap_continuous_across_case_boundaries() {
        let (rw, r) = (80.0, 63.0);
        for edge in [rw - r, rw + r] {
            let mut prev = overlap_area(edge - 1e-3, rw, r);
            let mut x = edge - 1e-3;
            while x < edge + 1e-3 {
                x += 1e-6;
                let a = overlap_area(x, rw, r);
                // |dA/dd| is a chord length, at most 2r
                assert!((a - prev).abs() <= 2.0 * r * 1.01e-6 + 1e-9, "jump at {x}: {prev} -> {a}");
                prev = a;
            }
        }
    }

    #[test]
    fn pair_deficit_values() {
        let a = PI * 63.0 * 63.0;
        let d = pair_deficit(0.8, 504.0, a, a, K, 63.0).unwrap();
        assert!((d - 0.32345).abs() < 1e-5, "{d}");
        assert_eq!(pair_deficit(0.0, 300.0, a, a, K, 63.0).unwrap(), 0.0);
        assert_eq!(pair_deficit(0.8, 300.0, 0.0, a, K, 63.0).unwrap(), 0.0);
        assert!(pair_deficit(0.8, 0.0, a, a, K, 63.0).is_err());
        assert!(pair_deficit(0.8, -5.0, a, a, K, 63.0).is_err());
    }

    #[test]
    fn combine_values() {
        assert_eq!(combine_deficits(&[0.3, 0.4]), 0.5);
        assert_eq!(combine_deficits(&[]), 0.0);
        assert_eq!(combine_deficits(&[0.27]), 0.27);
        assert_eq!(combine_deficits(&[0.9, 0.9]), 1.0);
    }

    #[test]
    fn single_and_crosswind() {
        let s = spec();
        let one = Layout::from_flat(&[5.0, 7.0]).unwrap();
        assert_eq!(farm_velocities(&one, &s, K, 30.0, 12.0), vec![12.0]);
        let pair = Layout::from_flat(&[0.0, 0.0, 800.0, 0.0]).unwrap();
        assert_eq!(farm_velocities(&pair, &s, K, 0.0, 9.0), vec![9.0, 9.0]);
    }

    #[test]
    fn aligned_pair_against_scalar_recomputation() {
        let s = spec();
        let l = Layout::from_flat(&[0.0, 504.0, 0.0, 0.0]).unwrap();
        let v = farm_velocities(&l, &s, K, 0.0, 15.0);
        assert_eq!(v[0], 15.0);
        // from scratch: full overlap since the wake is wider than the rotor
        let ct: f64 = 0.3; // tabulated at 15 m/s
        let deficit = (1.0 - (1.0 - ct).sqrt()) / (1.0 + K * 504.0 / 63.0).powi(2);
        assert!((v[1] - 15.0 * (1.0 - deficit)).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn thrust_taken_at_perturbed_upstream_speed() {
        let s = spec();
        // three in a row along the wind
        let l = Layout::from_flat(&[0.0, 1000.0, 0.0, 500.0, 0.0, 0.0]).unwrap();
        let v = farm_velocities(&l, &s, K, 0.0, 10.0);
        let w = |d: f64| 1.0 / (1.0 + K * d / 63.0).powi(2);
        let c = |ct: f64| 1.0 - (1.0 - ct).sqrt();
        let v1 = 10.0 * (1.0 - c(s.thrust_coefficient(10.0)) * w(500.0));
        assert!((v[1] - v1).abs() < 1e-12);
        let d20 = c(s.thrust_coefficient(10.0)) * w(1000.0);
        let d21 = c(s.thrust_coefficient(v1)) * w(500.0);
        let v2 = 10.0 * (1.0 - (d20 * d20 + d21 * d21).sqrt());
        assert!((v[2] - v2).abs() < 1e-12);
    }

    fn random_layout(rng: &mut ChaCha8Rng, n: usize) -> Layout {
        Layout::new(
            (0..n)
                .map(|_| Point::new(rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0)))
                .collect(),
        )
        .unwrap()
    }

    proptest::proptest! {
        #[test]
        fn velocities_bounded_and_upstream_free(seed in 0u64..500, theta in 0.0f64..360.0, v in 0.0f64..30.0) {
            let s = spec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_layout(&mut rng, 10);
            let vel = farm_velocities(&l, &s, K, theta, v);
            for &vi in &vel {
                proptest::prop_assert!((0.0..=v).contains(&vi));
            }
            let first = rotate_and_rank(&l, theta).order[0];
            proptest::prop_assert_eq!(vel[first], v);
        }

        #[test]
        fn relabeling_permutes_output(seed in 0u64..500, theta in 0.0f64..360.0) {
            let s = spec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_layout(&mut rng, 8);
            let mut perm: Vec<usize> = (0..8).collect();
            perm.reverse();
            perm.swap(1, 5);
            let permuted = Layout::new(perm.iter().map(|&i| l.points()[i]).collect()).unwrap();
            let a = farm_velocities(&l, &s, K, theta, 11.0);
            let b = farm_velocities(&permuted, &s, K, theta, 11.0);
            for (k, &i) in perm.iter().enumerate() {
                proptest::prop_assert!((b[k] - a[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn translation_and_joint_rotation_invariance(seed in 0u64..500, theta in 0.0f64..360.0, alpha in 0.0f64..360.0) {
            let s = spec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_layout(&mut rng, 8);
            let a = farm_velocities(&l, &s, K, theta, 13.0);
            let b = farm_velocities(&l.translated(1234.5, -987.0), &s, K, theta, 13.0);
            let c = farm_velocities(&l.rotated_clockwise(alpha), &s, K, theta + alpha, 13.0);
            for i in 0..8 {
                proptest::prop_assert!((a[i] - b[i]).abs() < 1e-9);
                proptest::prop_assert!((a[i] - c[i]).abs() < 1e-9);
            }
        }
    }
}
