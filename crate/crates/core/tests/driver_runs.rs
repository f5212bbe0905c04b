//! Small end-to-end runs of the multistart driver and its experiment harnesses.

use windlayout::constraints::{is_feasible, DEFAULT_FEASIBILITY_TOL};
use windlayout::driver::{
    grid_layout, optimize_layout, rose_rotation_sensitivity, saturation_sweep, RunConfig,
    SweepStatus,
};
use windlayout::{replica, FarmBoundary};

fn quick(restarts: usize) -> RunConfig {
    RunConfig {
        restarts,
        dv: 0.5,
        seed: 5,
        ..RunConfig::default()
    }
}

fn small_farm() -> FarmBoundary {
    FarmBoundary::rectangle(0.0, 0.0, 1200.0, 1200.0).unwrap()
}

#[test]
fn more_restarts_never_hurt_and_trail_is_feasible() {
    let (b, t, r) = (small_farm(), replica::turbine(), replica::rose(12).unwrap());
    let one = optimize_layout(&b, &t, &r, 3, &quick(1)).unwrap();
    let three = optimize_layout(&b, &t, &r, 3, &quick(3)).unwrap();
    assert!(three.best_aep.total >= one.best_aep.total);
    assert_eq!(three.restarts_run, 3);
    assert_eq!(three.per_restart[0].end_aep, one.per_restart[0].end_aep);

    let best_end = three
        .per_restart
        .iter()
        .filter_map(|r| r.end_aep)
        .fold(f64::NEG_INFINITY, f64::max);
    // polish starts at the best coarse result and never goes below it
    assert!(three.best_aep.total >= best_end * (1.0 - 1e-12));
    assert!(three.polish.objective_value >= three.coarse.objective_value * (1.0 - 1e-12));
    for rec in &three.per_restart {
        for l in rec.start_layout.iter().chain(&rec.end_layout) {
            assert!(is_feasible(l, &b, 504.0, DEFAULT_FEASIBILITY_TOL).feasible);
        }
    }
    assert!(is_feasible(&three.best_layout, &b, 504.0, DEFAULT_FEASIBILITY_TOL).feasible);
}

#[test]
fn stall_limit_stops_early() {
    let (b, t, r) = (small_farm(), replica::turbine(), replica::rose(12).unwrap());
    let config = RunConfig { stall_limit: 1, ..quick(6) };
    let out = optimize_layout(&b, &t, &r, 2, &config).unwrap();
    assert!(out.restarts_run >= 2 && out.restarts_run <= 6);
    let all = optimize_layout(&b, &t, &r, 2, &quick(6)).unwrap();
    assert_eq!(all.restarts_run, 6);
}

#[test]
fn sweep_reports_infeasible_counts() {
    let (t, r) = (replica::turbine(), replica::rose(12).unwrap());
    // 504 m spacing fits at most 4 turbines in a 600 m square
    let b = FarmBoundary::rectangle(0.0, 0.0, 600.0, 600.0).unwrap();
    let config = RunConfig { seed_retries: 20, ..quick(1) };
    let rows = saturation_sweep(&b, &t, &r, &[1, 4, 5], &config).unwrap();
    assert_eq!(rows[0].efficiency, Some(100.0));
    assert!(rows[1].feasible());
    assert_eq!(rows[2].status, SweepStatus::Infeasible);
    assert!(rows[2].best_aep.is_none());
    assert!(saturation_sweep(&b, &t, &r, &[3, 2], &config).is_err());
}

#[test]
fn full_turn_rotation_is_identity_and_beats_grid() {
    let (b, t, r) = (small_farm(), replica::turbine(), replica::rose(12).unwrap());
    let reference = grid_layout(&b, 6, 504.0).unwrap();
    let rows = rose_rotation_sensitivity(&b, &t, &r, &reference, &[0.0, 360.0, 90.0], &quick(6)).unwrap();
    assert_eq!(rows[0].optimized.total, rows[1].optimized.total);
    assert_eq!(rows[0].grid.total, rows[1].grid.total);
    for row in &rows {
        assert!(
            row.optimized.total >= row.grid.total,
            "angle {}: optimized {} ({} %) vs grid {} ({} %)",
            row.angle_deg,
            row.optimized.total,
            row.optimized.wake_loss_total,
            row.grid.total,
            row.grid.wake_loss_total
        );
    }
    assert!(rose_rotation_sensitivity(&b, &t, &r, &reference, &[f64::NAN], &quick(1)).is_err());
}
