//! AEP checked against an independent re-derivation: own table interpolation,
//! own Weibull density and a fine Simpson rule instead of the library's trapezoid.

use std::f64::consts::PI;

use windlayout::wake::decay_factor;
use windlayout::wind_resource::{SectorModel, SpeedModel};
use windlayout::{replica, AepEvaluator, Layout, TurbineSpec, WindRose};

fn interp(table: &[(f64, f64)], v: f64) -> f64 {
    if v <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        let ((v0, y0), (v1, y1)) = (w[0], w[1]);
        if v <= v1 {
            return y0 + (y1 - y0) * (v - v0) / (v1 - v0);
        }
    }
    table[table.len() - 1].1
}

fn power(spec: &TurbineSpec, v: f64) -> f64 {
    if v < spec.cut_in() || v > spec.cut_out() {
        0.0
    } else {
        interp(spec.power_table(), v)
    }
}

fn weibull(v: f64, scale: f64, shape: f64) -> f64 {
    (shape / scale) * (v / scale).powf(shape - 1.0) * (-(v / scale).powf(shape)).exp()
}

/// `8760 · ∫ f(v) Σ_i P(v_i(v)) dv` in GWh with Simpson's rule on 20000 panels.
fn simpson_gwh(spec: &TurbineSpec, scale: f64, shape: f64, farm_power: impl Fn(f64) -> f64) -> f64 {
    let (a, b) = (spec.cut_in(), spec.cut_out());
    let n = 20_000;
    let h = (b - a) / n as f64;
    let g = |v: f64| weibull(v, scale, shape) * farm_power(v);
    // the integrand jumps to zero just past cut-out, so stop at b exactly
    let mut acc = g(a) + g(b);
    for k in 1..n {
        acc += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    8760.0 * acc * h / 3.0 / 1e9
}

fn one_sector_rose(theta: f64, scale: f64, shape: f64) -> WindRose {
    WindRose::new(
        90.0,
        replica::Z0_M,
        vec![SectorModel {
            index: 1,
            theta_deg: theta,
            probability: 1.0,
            model: SpeedModel::Weibull { scale_ms: scale, shape },
            sample_count: 0,
        }],
    )
    .unwrap()
}

#[test]
fn aligned_pair_matches_independent_integral() {
    let spec = replica::turbine();
    let (scale, shape) = (9.0, 2.1);
    let k = decay_factor(90.0, replica::Z0_M).unwrap();
    let r = 63.0;
    let distance = 630.0;
    // wind from the south: the northern turbine sits fully in the wake
    let layout = Layout::from_flat(&[0.0, 0.0, 0.0, distance]).unwrap();
    let rose = one_sector_rose(180.0, scale, shape);
    let eval = AepEvaluator::new(&spec, &rose, k, 0.1);
    let got = eval.breakdown(&layout);

    let expansion = (1.0 + k * distance / r).powi(2);
    let expected = simpson_gwh(&spec, scale, shape, |v| {
        let ct = interp(spec.thrust_table(), v).min(1.0);
        let deficit = (1.0 - (1.0 - ct).sqrt()) / expansion;
        power(&spec, v) + power(&spec, v * (1.0 - deficit))
    });
    let free = simpson_gwh(&spec, scale, shape, |v| 2.0 * power(&spec, v));
    assert!((got.total - expected).abs() / expected < 1e-4, "{} vs {expected}", got.total);
    assert!((got.no_wake_total - free).abs() / free < 1e-4);
    assert!(got.wake_loss_total > 1.0, "a full wake at 5 D must cost energy");
}

#[test]
fn partial_overlap_uses_lens_area() {
    let spec = replica::turbine();
    let (scale, shape) = (8.0, 2.0);
    let k = decay_factor(90.0, replica::Z0_M).unwrap();
    let (r, distance, lateral) = (63.0, 800.0, 70.0);
    let layout = Layout::from_flat(&[0.0, 0.0, lateral, distance]).unwrap();
    let rose = one_sector_rose(180.0, scale, shape);
    let got = AepEvaluator::new(&spec, &rose, k, 0.1).total(&layout);

    let rw = r + k * distance;
    // lens area of two circles, written out independently
    let d = lateral;
    let lens = r * r * ((d * d + r * r - rw * rw) / (2.0 * d * r)).acos()
        + rw * rw * ((d * d + rw * rw - r * r) / (2.0 * d * rw)).acos()
        - 0.5 * ((-d + r + rw) * (d + r - rw) * (d - r + rw) * (d + r + rw)).sqrt();
    let weight = lens / (PI * r * r) / (1.0 + k * distance / r).powi(2);
    let expected = simpson_gwh(&spec, scale, shape, |v| {
        let ct = interp(spec.thrust_table(), v).min(1.0);
        power(&spec, v) + power(&spec, v * (1.0 - (1.0 - (1.0 - ct).sqrt()) * weight))
    });
    assert!((got - expected).abs() / expected < 1e-4, "{got} vs {expected}");
}

#[test]
fn crosswind_row_has_no_loss() {
    let spec = replica::turbine();
    let k = decay_factor(90.0, replica::Z0_M).unwrap();
    let layout = Layout::from_flat(&[0.0, 0.0, 600.0, 0.0, 1200.0, 0.0]).unwrap();
    let rose = one_sector_rose(0.0, 9.0, 2.0);
    let b = AepEvaluator::new(&spec, &rose, k, 0.1).breakdown(&layout);
    assert_eq!(b.total, b.no_wake_total);
    assert_eq!(b.wake_loss_total, 0.0);
}

#[test]
fn sector_rows_add_up() {
    let spec = replica::turbine();
    let rose = replica::rose(12).unwrap();
    let k = decay_factor(90.0, replica::Z0_M).unwrap();
    let layout = Layout::from_flat(&[0.0, 0.0, 500.0, 300.0, 900.0, 1100.0, 100.0, 1500.0]).unwrap();
    let b = AepEvaluator::new(&spec, &rose, k, 0.1).breakdown(&layout);
    let sum: f64 = b.per_sector.iter().sum();
    let loss: f64 = b.wake_loss_per_sector.iter().sum();
    assert!((sum - b.total).abs() <= 1e-9 * b.total);
    assert!((loss - b.wake_loss_total).abs() <= 1e-9 * b.wake_loss_total.max(1.0));
}
