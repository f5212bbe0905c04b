//! Multistart layout optimization and the experiment harnesses built on it.
//!
//! Each restart seeds a random feasible layout and runs a coarse local solve
//! of the AEP. The best end point is polished with tighter tolerances.
//!
//! Restart `r` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `r`,
//! so its random numbers do not depend on scheduling. Restarts run in batches
//! on a dedicated thread pool and are reduced in index order, which makes the
//! outcome identical for any worker count.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aep::{AepBreakdown, AepEvaluator, DEFAULT_SPEED_STEP};
use crate::constraints::{is_feasible, FarmBoundary, FeasibleRegion, MIN_SPACING_DIAMETERS};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::nlp::{maximize, maximize_warm, NlpProblem, NlpResult, SolveStatus, SolverOptions};
use crate::seeding::{bilinear_map, seed_layout, DEFAULT_MAX_RETRIES};
use crate::turbine::TurbineSpec;
use crate::wake::decay_factor;
use crate::wind_resource::WindRose;

/// Restarts evaluated between two stall checks. Fixed so that results do not
/// depend on the worker count.
const BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Number of restarts `M`.
    pub restarts: usize,
    /// Stop after this many consecutive restarts without improvement; 0 runs all.
    pub stall_limit: usize,
    pub seed: u64,
    pub workers: usize,
    pub coarse: SolverOptions,
    pub polish: SolverOptions,
    /// Speed step of the AEP quadrature, m/s.
    pub dv: f64,
    /// Resampling attempts per seed layout.
    pub seed_retries: usize,
    /// Minimum spacing in rotor diameters.
    pub min_spacing_diameters: f64,
    /// Finite-difference steps, m, of coarse pre-solves run before the final
    /// coarse solve. Large steps average out the flat top-hat wake edges.
    pub smoothing_steps: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            restarts: 20,
            stall_limit: 0,
            seed: 0,
            workers: 1,
            coarse: SolverOptions::coarse(),
            polish: SolverOptions::polish(),
            dv: DEFAULT_SPEED_STEP,
            seed_retries: DEFAULT_MAX_RETRIES,
            min_spacing_diameters: MIN_SPACING_DIAMETERS,
            smoothing_steps: DEFAULT_SMOOTHING_STEPS.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if !(self.dv > 0.0 && self.dv.is_finite()) {
            return Err(Error::invalid("dv must be positive"));
        }
        if !(self.min_spacing_diameters >= 0.0 && self.min_spacing_diameters.is_finite()) {
            return Err(Error::invalid("min_spacing_diameters must be non-negative"));
        }
        if self.smoothing_steps.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::invalid("smoothing steps must be positive"));
        }
        Ok(())
    }
}

pub const DEFAULT_SMOOTHING_STEPS: [f64; 3] = [200.0, 60.0, 15.0];

/// Local AEP maximization problem over flat coordinates `[x1, y1, ...]` in
/// meters. The objective is in GWh/yr, so gradients and KKT residuals are in GWh/(yr·m).
#[derive(Clone, Copy)]
pub struct AepProblem<'a> {
    evaluator: &'a AepEvaluator,
    region: FeasibleRegion,
    n: usize,
    fd_step: f64,
}

impl<'a> AepProblem<'a> {
    pub fn new(evaluator: &'a AepEvaluator, region: FeasibleRegion, n: usize) -> Self {
        AepProblem { evaluator, region, n, fd_step: 1.0 }
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }
}

impl NlpProblem for AepProblem<'_> {
    fn dimension(&self) -> usize {
        2 * self.n
    }

    fn constraint_count(&self) -> usize {
        self.region.constraint_count(self.n)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        Layout::from_flat(x).map_or(f64::NAN, |l| self.evaluator.total(&l))
    }

    /// Central differences, re-evaluating only affected sectors.
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match Layout::from_flat(x) {
            Ok(l) => self.evaluator.fd_gradient(&l, self.fd_step(), grad),
            Err(_) => grad.fill(f64::NAN),
        }
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        self.region.margins_into(x, out);
    }

    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        self.region.jacobian_into(x, jac);
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn variable_scale(&self, _i: usize) -> f64 {
        self.region.min_distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "status")]
pub enum RestartStatus {
    /// No feasible seed within the retry budget.
    SeedInfeasible,
    Solved(SolveStatus),
}

/// Audit record of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub seed_attempts: usize,
    pub status: RestartStatus,
    /// GWh/yr at the seed layout.
    pub start_aep: Option<f64>,
    /// GWh/yr after the coarse solve.
    pub end_aep: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub start_layout: Option<Layout>,
    pub end_layout: Option<Layout>,
}

impl RestartRecord {
    fn usable(&self) -> bool {
        matches!(self.status, RestartStatus::Solved(s) if s != SolveStatus::Infeasible)
            && self.end_aep.is_some_and(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationOutcome {
    pub best_layout: Layout,
    pub best_aep: AepBreakdown,
    /// Seed layout of the winning restart.
    pub initial_layout: Layout,
    pub initial_aep: AepBreakdown,
    pub best_restart: usize,
    /// Coarse solve of the winning restart.
    pub coarse: NlpResult,
    /// Final polish solve.
    pub polish: NlpResult,
    pub restarts_run: usize,
    pub per_restart: Vec<RestartRecord>,
    pub cancelled: bool,
    pub wall_time_s: f64,
}

/// Everything a run needs besides the turbine count.
pub struct Context<'a> {
    pub boundary: &'a FarmBoundary,
    pub spec: &'a TurbineSpec,
    pub rose: &'a WindRose,
}

impl Context<'_> {
    pub fn evaluator(&self, dv: f64) -> Result<AepEvaluator> {
        if (self.rose.hub_height_m - self.spec.hub_height()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "wind rose is given at {} m but the turbine hub height is {} m",
                self.rose.hub_height_m,
                self.spec.hub_height()
            )));
        }
        let decay = decay_factor(self.spec.hub_height(), self.rose.z0_m)?;
        Ok(AepEvaluator::new(self.spec, self.rose, decay, dv))
    }

    pub fn min_distance(&self, config: &RunConfig) -> f64 {
        config.min_spacing_diameters * self.spec.rotor_diameter()
    }
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_restart(
    index: usize,
    n: usize,
    boundary: &FarmBoundary,
    problem: &AepProblem<'_>,
    config: &RunConfig,
) -> (RestartRecord, Option<NlpResult>) {
    let d_min = problem.region.min_distance;
    let mut rng = restart_rng(config.seed, index);
    match seed_layout(n, boundary, d_min, &mut rng, config.seed_retries) {
        Err(_) => (
            RestartRecord {
                index,
                seed_attempts: config.seed_retries.max(1),
                status: RestartStatus::SeedInfeasible,
                start_aep: None,
                end_aep: None,
                kkt_residual: None,
                start_layout: None,
                end_layout: None,
            },
            None,
        ),
        Ok(seed) => {
            let x0 = seed.layout.to_flat();
            let start_aep = problem.objective(&x0);
            let mut xs = x0.clone();
            for &h in &config.smoothing_steps {
                xs = maximize(&problem.with_fd_step(h), &xs, &config.coarse).x;
            }
            let mut r = maximize(problem, &xs, &config.coarse);
            if !config.smoothing_steps.is_empty() && r.objective_value < start_aep {
                // smoothed passes drifted downhill; fall back to a plain solve
                let direct = maximize(problem, &x0, &config.coarse);
                if direct.objective_value > r.objective_value {
                    r = direct;
                }
            }
            let end_layout = Layout::from_flat(&r.x).ok();
            (
                RestartRecord {
                    index,
                    seed_attempts: seed.attempts,
                    status: RestartStatus::Solved(r.status),
                    start_aep: Some(start_aep),
                    end_aep: Some(r.objective_value),
                    kkt_residual: Some(r.kkt_residual),
                    start_layout: Some(seed.layout),
                    end_layout,
                },
                Some(r),
            )
        }
    }
}

/// Multistart optimization: seed, coarse solve, best of `M`, polish.
pub fn optimize_layout(
    boundary: &FarmBoundary,
    spec: &TurbineSpec,
    rose: &WindRose,
    n_turbines: usize,
    config: &RunConfig,
) -> Result<OptimizationOutcome> {
    optimize_layout_cancellable(boundary, spec, rose, n_turbines, config, &AtomicBool::new(false))
}

/// As [`optimize_layout`]; once `cancel` is set, no new restarts start and the
/// best completed restart is polished and returned.
pub fn optimize_layout_cancellable(
    boundary: &FarmBoundary,
    spec: &TurbineSpec,
    rose: &WindRose,
    n_turbines: usize,
    config: &RunConfig,
    cancel: &AtomicBool,
) -> Result<OptimizationOutcome> {
    config.validate()?;
    if n_turbines == 0 {
        return Err(Error::invalid("number of turbines must be at least 1"));
    }
    let started = Instant::now();
    let ctx = Context { boundary, spec, rose };
    let evaluator = ctx.evaluator(config.dv)?;
    let region = FeasibleRegion::new(*boundary, ctx.min_distance(config).max(f64::MIN_POSITIVE));
    let problem = AepProblem::new(&evaluator, region, n_turbines);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Solver(format!("cannot start worker pool: {e}")))?;

    let mut records: Vec<RestartRecord> = Vec::new();
    let mut results: Vec<Option<NlpResult>> = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut unimproved = 0;
    let mut cancelled = false;
    let mut stalled = false;
    let mut next = 0;
    while next < config.restarts && !stalled {
        let end = (next + BATCH).min(config.restarts);
        let batch: Vec<Option<(RestartRecord, Option<NlpResult>)>> = pool.install(|| {
            (next..end)
                .into_par_iter()
                .map(|r| {
                    if cancel.load(Ordering::Relaxed) {
                        None
                    } else {
                        Some(run_restart(r, n_turbines, boundary, &problem, config))
                    }
                })
                .collect()
        });
        next = end;
        for item in batch {
            let Some((rec, res)) = item else {
                cancelled = true;
                continue;
            };
            if rec.usable() {
                let aep = rec.end_aep.unwrap_or(f64::NEG_INFINITY);
                if best.is_none_or(|(_, b)| aep > b) {
                    best = Some((records.len(), aep));
                    unimproved = 0;
                } else {
                    unimproved += 1;
                }
            } else {
                unimproved += 1;
            }
            records.push(rec);
            results.push(res);
            if config.stall_limit > 0 && unimproved >= config.stall_limit {
                stalled = true;
                break;
            }
        }
        if cancelled {
            break;
        }
    }

    let Some((best_pos, _)) = best else {
        if records.is_empty() {
            return Err(Error::Solver("run cancelled before any restart completed".into()));
        }
        if records.iter().all(|r| r.status == RestartStatus::SeedInfeasible) {
            return Err(Error::Infeasible {
                n_turbines,
                attempts: records.len() * config.seed_retries.max(1),
            });
        }
        return Err(Error::Solver(format!(
            "all {} restarts ended without a feasible local solution",
            records.len()
        )));
    };

    let coarse = results[best_pos].clone().expect("usable restart has a solve result");
    let polish_opts = SolverOptions {
        mode: crate::nlp::SolveMode::Polish,
        ..config.polish
    };
    let polished = maximize_warm(&problem, &coarse.x, &polish_opts, None);
    let polish_feas = polish_opts.effective_tolerances().0;
    let final_x = if polished.max_violation <= polish_feas
        && polished.objective_value >= coarse.objective_value
    {
        polished.x.clone()
    } else {
        coarse.x.clone()
    };
    let best_layout = Layout::from_flat(&final_x)?;
    let rec = &records[best_pos];
    let initial_layout = rec.start_layout.clone().expect("usable restart has a seed");
    Ok(OptimizationOutcome {
        best_aep: evaluator.breakdown(&best_layout),
        initial_aep: evaluator.breakdown(&initial_layout),
        best_layout,
        initial_layout,
        best_restart: rec.index,
        coarse,
        polish: polished,
        restarts_run: records.len(),
        per_restart: records,
        cancelled,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Regular grid of `rows × cols` turbines whose rows and columns follow the
/// boundary edges, equally spaced, outer rows and columns on the boundary.
/// With `stagger`, odd rows hold `cols − 1` turbines shifted by half a spacing.
pub fn regular_grid(boundary: &FarmBoundary, rows: usize, cols: usize, stagger: bool) -> Vec<crate::layout::Point> {
    let coord = |k: usize, count: usize| {
        if count == 1 {
            0.0
        } else {
            -1.0 + 2.0 * k as f64 / (count - 1) as f64
        }
    };
    let mut pts = Vec::new();
    for j in 0..rows {
        let eta = coord(j, rows);
        if stagger && j % 2 == 1 {
            for i in 0..cols - 1 {
                let xi = 0.5 * (coord(i, cols) + coord(i + 1, cols));
                pts.push(bilinear_map(xi, eta, boundary));
            }
        } else {
            for i in 0..cols {
                pts.push(bilinear_map(coord(i, cols), eta, boundary));
            }
        }
    }
    pts
}

/// Grid baseline with `n` turbines: the feasible boundary-aligned grid (plain
/// before staggered, least unused slots, most square, widest spacing), filled
/// row by row. `None` if no such grid is feasible.
pub fn grid_layout(boundary: &FarmBoundary, n: usize, min_distance: f64) -> Option<Layout> {
    if n == 0 {
        return None;
    }
    let mut best: Option<((bool, usize, usize, bool), f64, Layout)> = None;
    for stagger in [false, true] {
        for rows in 1..=n {
            for cols in 1..=n {
                if stagger && (cols < 2 || rows < 2) {
                    continue;
                }
                let capacity = if stagger {
                    rows.div_ceil(2) * cols + rows / 2 * (cols - 1)
                } else {
                    rows * cols
                };
                if capacity < n {
                    continue;
                }
                let mut pts = regular_grid(boundary, rows, cols, stagger);
                pts.truncate(n);
                let layout = Layout::new(pts).ok()?;
                if !is_feasible(&layout, boundary, min_distance, 1e-9).feasible {
                    continue;
                }
                let spacing = if n < 2 {
                    f64::INFINITY
                } else {
                    let p = layout.points();
                    let mut m = f64::INFINITY;
                    for i in 0..n {
                        for j in i + 1..n {
                            m = m.min(p[i].distance(p[j]));
                        }
                    }
                    m
                };
                let key = (stagger, capacity - n, rows.abs_diff(cols), rows > cols);
                let better = match &best {
                    None => true,
                    Some((k, s, _)) => key < *k || (key == *k && spacing > *s),
                };
                if better {
                    best = Some((key, spacing, layout));
                }
            }
        }
    }
    best.map(|(_, _, l)| l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Optimized,
    Infeasible,
    SolverFailure,
}

impl SweepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStatus::Optimized => "optimized",
            SweepStatus::Infeasible => "infeasible",
            SweepStatus::SolverFailure => "solver_failure",
        }
    }
}

/// One turbine count of a saturation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_turbines: usize,
    pub status: SweepStatus,
    /// Wake-free AEP of `n` turbines, GWh/yr.
    pub no_wake_aep: f64,
    pub best_aep: Option<f64>,
    /// `100 · AEP / no-wake AEP`.
    pub efficiency: Option<f64>,
    pub rms_distance: Option<f64>,
    /// AEP and efficiency of the grid baseline, when one is feasible.
    pub grid_aep: Option<f64>,
    pub grid_efficiency: Option<f64>,
    /// End AEP and RMS distance of every usable restart, in restart order.
    pub restart_aep: Vec<f64>,
    pub restart_rms: Vec<f64>,
    pub best_layout: Option<Layout>,
}

impl SweepRow {
    pub fn feasible(&self) -> bool {
        self.status == SweepStatus::Optimized
    }
}

/// Optimizes every turbine count in `n_range` on the same area.
pub fn saturation_sweep(
    boundary: &FarmBoundary,
    spec: &TurbineSpec,
    rose: &WindRose,
    n_range: &[usize],
    config: &RunConfig,
) -> Result<Vec<SweepRow>> {
    if n_range.is_empty() || n_range.windows(2).any(|w| w[0] >= w[1]) || n_range[0] == 0 {
        return Err(Error::invalid("turbine counts must be a non-empty ascending list of positive values"));
    }
    let ctx = Context { boundary, spec, rose };
    let evaluator = ctx.evaluator(config.dv)?;
    let d_min = ctx.min_distance(config);
    let mut rows = Vec::with_capacity(n_range.len());
    for &n in n_range {
        let no_wake = evaluator.no_wake_total(n);
        let grid_aep = grid_layout(boundary, n, d_min).map(|l| evaluator.total(&l));
        let grid_efficiency = grid_aep.map(|a| 100.0 * (a / no_wake));
        let mut row = SweepRow {
            n_turbines: n,
            status: SweepStatus::Optimized,
            no_wake_aep: no_wake,
            best_aep: None,
            efficiency: None,
            rms_distance: None,
            grid_aep,
            grid_efficiency,
            restart_aep: Vec::new(),
            restart_rms: Vec::new(),
            best_layout: None,
        };
        match optimize_layout(boundary, spec, rose, n, config) {
            Ok(out) => {
                for r in out.per_restart.iter().filter(|r| r.usable()) {
                    row.restart_aep.push(r.end_aep.unwrap_or(f64::NAN));
                    row.restart_rms.push(
                        r.end_layout.as_ref().map_or(f64::NAN, Layout::rms_pair_distance),
                    );
                }
                row.best_aep = Some(out.best_aep.total);
                row.efficiency = Some(out.best_aep.efficiency());
                row.rms_distance = Some(out.best_layout.rms_pair_distance());
                row.best_layout = Some(out.best_layout);
            }
            Err(Error::Infeasible { .. }) => row.status = SweepStatus::Infeasible,
            Err(Error::Solver(msg)) => {
                log::warn!("sweep at {n} turbines: {msg}");
                row.status = SweepStatus::SolverFailure;
            }
            Err(e) => return Err(e),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// One rose rotation of the sensitivity study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRow {
    pub angle_deg: f64,
    pub grid: AepBreakdown,
    pub optimized: AepBreakdown,
    pub best_layout: Layout,
}

/// Rotates the rose by each angle, re-optimizes, and compares with the fixed reference layout.
pub fn rose_rotation_sensitivity(
    boundary: &FarmBoundary,
    spec: &TurbineSpec,
    rose: &WindRose,
    reference: &Layout,
    angles: &[f64],
    config: &RunConfig,
) -> Result<Vec<RotationRow>> {
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::invalid(format!("rotation angle {a} is not finite")));
    }
    let mut rows = Vec::with_capacity(angles.len());
    for &angle in angles {
        let turned = rose.rotated(angle);
        let evaluator = Context { boundary, spec, rose: &turned }.evaluator(config.dv)?;
        let out = optimize_layout(boundary, spec, &turned, reference.len(), config)?;
        rows.push(RotationRow {
            angle_deg: angle,
            grid: evaluator.breakdown(reference),
            optimized: out.best_aep,
            best_layout: out.best_layout,
        });
    }
    Ok(rows)
}
