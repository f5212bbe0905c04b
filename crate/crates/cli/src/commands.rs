use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chrono::Utc;
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windlayout::constraints::{is_feasible, DEFAULT_FEASIBILITY_TOL};
use windlayout::driver::{
    grid_layout, optimize_layout_cancellable, rose_rotation_sensitivity, saturation_sweep, Context,
    OptimizationOutcome, RestartStatus, RunConfig,
};
use windlayout::wake::decay_factor;
use windlayout::wind_resource::{build_rose, read_wind_csv, write_wind_csv};
use windlayout::{replica, report, Error, Layout, Result, TurbineSpec, WindRose};

use crate::config::FarmConfig;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{
    Command, EvaluateArgs, Failure, FitWindArgs, Inputs, OptimizeArgs, PlotArgs, ReplicaArgs,
    RerunArgs, RunFlags, SensitivityArgs, SweepArgs,
};

type CmdResult = std::result::Result<(), Failure>;

pub fn run(cmd: Command) -> CmdResult {
    if let Command::Rerun(args) = cmd {
        return rerun(args);
    }
    let cmd = absolutize(cmd)?;
    let started_at = Utc::now();
    let mut record = Record::default();
    let result = match &cmd {
        Command::Evaluate(a) => evaluate(a, &mut record),
        Command::Optimize(a) => optimize(a, &mut record),
        Command::Plot(a) => plot(a, &mut record),
        Command::Sweep(a) => sweep(a, &mut record),
        Command::Sensitivity(a) => sensitivity(a, &mut record),
        Command::FitWind(a) => fit_wind(a, &mut record),
        Command::Replica(a) => write_replica(a, &mut record),
        Command::Rerun(_) => unreachable!("handled above"),
    };
    // a manifest is written whenever the outputs exist, including infeasible verdicts
    if let Some(path) = record.manifest_path.take() {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: record.inputs,
            command: cmd,
            config: record.config,
            seed: record.config_seed,
            started_at,
            finished_at: Utc::now(),
        };
        manifest.write(&path)?;
    }
    result
}

/// What a command reports back for its manifest.
#[derive(Default)]
struct Record {
    manifest_path: Option<PathBuf>,
    inputs: BTreeMap<String, PathBuf>,
    config: Option<RunConfig>,
    config_seed: Option<u64>,
}

impl Record {
    fn inputs(&mut self, inputs: &Inputs) {
        self.inputs.insert("farm".into(), inputs.farm.clone());
        self.inputs.insert("turbine".into(), inputs.turbine.clone());
        if let Some(w) = &inputs.wind {
            self.inputs.insert("wind".into(), w.clone());
        }
        if let Some(r) = &inputs.rose {
            self.inputs.insert("rose".into(), r.clone());
        }
    }

    fn config(&mut self, config: &RunConfig) {
        self.config = Some(config.clone());
        self.config_seed = Some(config.seed);
    }
}

fn existing(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
}

fn output(p: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(p)?)
}

fn absolutize_inputs(i: &Inputs) -> Result<Inputs> {
    Ok(Inputs {
        farm: existing(&i.farm)?,
        turbine: existing(&i.turbine)?,
        wind: i.wind.as_deref().map(existing).transpose()?,
        rose: i.rose.as_deref().map(existing).transpose()?,
    })
}

/// Makes every path absolute so a manifest replays from any directory.
fn absolutize(cmd: Command) -> Result<Command> {
    Ok(match cmd {
        Command::Evaluate(a) => Command::Evaluate(EvaluateArgs {
            inputs: absolutize_inputs(&a.inputs)?,
            layout: existing(&a.layout)?,
            out: output(&a.out)?,
            ..a
        }),
        Command::Optimize(a) => Command::Optimize(OptimizeArgs {
            inputs: absolutize_inputs(&a.inputs)?,
            out: output(&a.out)?,
            ..a
        }),
        Command::Plot(a) => Command::Plot(PlotArgs {
            layout: existing(&a.layout)?,
            farm: existing(&a.farm)?,
            turbine: existing(&a.turbine)?,
            out: output(&a.out)?,
            ..a
        }),
        Command::Sweep(a) => Command::Sweep(SweepArgs {
            inputs: absolutize_inputs(&a.inputs)?,
            out: output(&a.out)?,
            ..a
        }),
        Command::Sensitivity(a) => Command::Sensitivity(SensitivityArgs {
            inputs: absolutize_inputs(&a.inputs)?,
            layout: existing(&a.layout)?,
            out: output(&a.out)?,
            ..a
        }),
        Command::FitWind(a) => Command::FitWind(FitWindArgs {
            wind: existing(&a.wind)?,
            farm: existing(&a.farm)?,
            turbine: existing(&a.turbine)?,
            out: output(&a.out)?,
        }),
        Command::Replica(a) => Command::Replica(ReplicaArgs {
            out: output(&a.out)?,
            ..a
        }),
        rerun @ Command::Rerun(_) => rerun,
    })
}

fn rerun(args: RerunArgs) -> CmdResult {
    let manifest = RunManifest::read(&args.manifest)?;
    let mut cmd = manifest.command;
    if let Some(out) = args.out {
        match &mut cmd {
            Command::Evaluate(a) => a.out = out,
            Command::Optimize(a) => a.out = out,
            Command::Plot(a) => a.out = out,
            Command::Sweep(a) => a.out = out,
            Command::Sensitivity(a) => a.out = out,
            Command::FitWind(a) => a.out = out,
            Command::Replica(a) => a.out = out,
            Command::Rerun(_) => {}
        }
    }
    if matches!(cmd, Command::Rerun(_)) {
        return Err(Error::InvalidInput("a manifest cannot replay another rerun".into()).into());
    }
    run(cmd)
}

/// Manifest location for commands whose output is a single file.
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

struct Loaded {
    farm: FarmConfig,
    spec: TurbineSpec,
    rose: WindRose,
}

fn load(inputs: &Inputs) -> Result<Loaded> {
    let farm = FarmConfig::from_json_file(&inputs.farm)?;
    let spec = TurbineSpec::from_json_file(&inputs.turbine)?;
    let rose = match (&inputs.rose, &inputs.wind) {
        (Some(path), _) => {
            let rose = WindRose::from_json_file(path)?;
            if (rose.z0_m - farm.z0_m).abs() > 1e-12 {
                warn!(
                    "rose was fitted with z0 = {} m but the farm config says {} m; using the rose value",
                    rose.z0_m, farm.z0_m
                );
            }
            rose
        }
        (None, Some(path)) => {
            let samples = read_wind_csv(path)?;
            info!("fitting {} sectors from {} samples", farm.n_sectors, samples.len());
            build_rose(&samples, farm.n_sectors, farm.sector_alignment, spec.hub_height(), farm.z0_m)?
        }
        (None, None) => return Err(Error::InvalidInput("either --wind or --rose is required".into())),
    };
    Ok(Loaded { farm, spec, rose })
}

fn run_config(defaults: &RunConfig, flags: &RunFlags) -> Result<RunConfig> {
    let mut c = defaults.clone();
    if let Some(v) = flags.restarts {
        c.restarts = v;
    }
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    if let Some(v) = flags.workers {
        c.workers = v;
    }
    if let Some(v) = flags.dv {
        c.dv = v;
    }
    if let Some(v) = flags.stall_limit {
        c.stall_limit = v;
    }
    c.validate()?;
    Ok(c)
}

fn revenue_lines(farm: &FarmConfig, entries: &[(&str, f64)]) -> String {
    let mut out = String::new();
    if let Some((price, cost)) = farm.margin_eur_per_kwh() {
        for (label, gwh) in entries {
            let eur = report::revenue_eur(*gwh, price, cost);
            let _ = writeln!(out, "{label}: {:.4} M€/yr", eur / 1e6);
        }
        let _ = writeln!(
            out,
            "(revenue = AEP x ({price} - {cost}) €/kWh, regardless of the initial investment costs)"
        );
    }
    out
}

fn evaluate(a: &EvaluateArgs, record: &mut Record) -> CmdResult {
    record.inputs(&a.inputs);
    record.inputs.insert("layout".into(), a.layout.clone());
    let loaded = load(&a.inputs)?;
    let layout = Layout::read_csv(&a.layout)?;
    let dv = a.dv.unwrap_or(loaded.farm.defaults.dv);
    let ctx = Context {
        boundary: &loaded.farm.boundary,
        spec: &loaded.spec,
        rose: &loaded.rose,
    };
    let evaluator = ctx.evaluator(dv)?;
    let breakdown = evaluator.breakdown(&layout);
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    record.manifest_path = Some(a.out.join(MANIFEST_FILE));
    write(&a.out.join("sector_aep.csv"), &report::sector_table(&breakdown))?;

    println!("turbines: {}", layout.len());
    println!("AEP: {:.3} GWh/yr", breakdown.total);
    println!("wake-free AEP: {:.3} GWh/yr", breakdown.no_wake_total);
    println!("wake loss: {:.3} %", breakdown.wake_loss_total);
    print!("{}", revenue_lines(&loaded.farm, &[("revenue", breakdown.total)]));

    let d_min = ctx.min_distance(&loaded.farm.defaults);
    let check = is_feasible(&layout, &loaded.farm.boundary, d_min, DEFAULT_FEASIBILITY_TOL);
    if !check.feasible {
        return Err(Failure::Infeasible(format!(
            "layout violates {} (scaled margin {:.3e})",
            check.worst, check.worst_margin
        )));
    }
    Ok(())
}

fn cancel_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let handler_flag = Arc::clone(&flag);
    if let Err(e) = ctrlc::set_handler(move || {
        eprintln!("interrupt: finishing the current batch of restarts");
        handler_flag.store(true, Ordering::SeqCst);
    }) {
        warn!("cannot install interrupt handler: {e}");
    }
    flag
}

fn restarts_table(out: &OptimizationOutcome) -> String {
    let mut s = String::from("restart,status,seed_attempts,start_aep_gwh,end_aep_gwh,kkt_residual\n");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in &out.per_restart {
        let status = match r.status {
            RestartStatus::SeedInfeasible => "seed_infeasible".to_string(),
            RestartStatus::Solved(s) => format!("{s:?}").to_lowercase(),
        };
        let _ = writeln!(
            s,
            "{},{status},{},{},{},{}",
            r.index + 1,
            r.seed_attempts,
            opt(r.start_aep),
            opt(r.end_aep),
            opt(r.kkt_residual)
        );
    }
    s
}

fn optimize(a: &OptimizeArgs, record: &mut Record) -> CmdResult {
    record.inputs(&a.inputs);
    let loaded = load(&a.inputs)?;
    let config = run_config(&loaded.farm.defaults, &a.run)?;
    record.config(&config);
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    record.manifest_path = Some(a.out.join(MANIFEST_FILE));

    let boundary = &loaded.farm.boundary;
    let cancel = cancel_flag();
    let result = optimize_layout_cancellable(
        boundary,
        &loaded.spec,
        &loaded.rose,
        a.n_turbines,
        &config,
        &cancel,
    );
    let out = match result {
        Ok(out) => out,
        Err(e) => {
            let failure = Failure::from(e);
            if !matches!(failure, Failure::Invalid(_)) {
                write(&a.out.join("report.txt"), &format!("{failure}\n"))?;
            }
            return Err(failure);
        }
    };

    let ctx = Context {
        boundary,
        spec: &loaded.spec,
        rose: &loaded.rose,
    };
    let evaluator = ctx.evaluator(config.dv)?;
    let d_min = ctx.min_distance(&config);
    let grid = grid_layout(boundary, a.n_turbines, d_min).map(|g| evaluator.breakdown(&g));

    out.best_layout.write_csv(a.out.join("layout.csv"))?;
    out.initial_layout.write_csv(a.out.join("initial_layout.csv"))?;
    write(&a.out.join("report.csv"), &report::comparison_table(&out.initial_aep, &out.best_aep))?;
    write(&a.out.join("sector_aep.csv"), &report::sector_table(&out.best_aep))?;
    write(&a.out.join("restarts.csv"), &restarts_table(&out))?;
    let diagnostics = serde_json::json!({
        "best_restart": out.best_restart + 1,
        "restarts_run": out.restarts_run,
        "cancelled": out.cancelled,
        "coarse": out.coarse,
        "polish": out.polish,
        "wall_time_s": out.wall_time_s,
    });
    write(
        &a.out.join("diagnostics.json"),
        &(serde_json::to_string_pretty(&diagnostics).map_err(Error::from)? + "\n"),
    )?;

    let mut text = String::new();
    let _ = writeln!(text, "turbines: {}", a.n_turbines);
    let _ = writeln!(text, "restarts run: {} (best: {})", out.restarts_run, out.best_restart + 1);
    if out.cancelled {
        let _ = writeln!(text, "run was interrupted; result is the best completed restart");
    }
    let _ = writeln!(
        text,
        "initial simulation: AEP {:.3} GWh/yr, wake loss {:.3} %",
        out.initial_aep.total, out.initial_aep.wake_loss_total
    );
    let _ = writeln!(
        text,
        "optimal layout: AEP {:.3} GWh/yr, wake loss {:.3} %, efficiency {:.3} %",
        out.best_aep.total,
        out.best_aep.wake_loss_total,
        out.best_aep.efficiency()
    );
    if let Some(g) = &grid {
        let _ = writeln!(
            text,
            "grid baseline: AEP {:.3} GWh/yr, wake loss {:.3} %",
            g.total, g.wake_loss_total
        );
    }
    let _ = writeln!(
        text,
        "polish: {:?}, KKT residual {:.3e} GWh/(yr m), max violation {:.3e}, {} iterations",
        out.polish.status, out.polish.kkt_residual, out.polish.max_violation, out.polish.iterations
    );
    let mut money = vec![
        ("revenue, optimal layout", out.best_aep.total),
        ("gain over initial simulation", out.best_aep.total - out.initial_aep.total),
    ];
    if let Some(g) = &grid {
        money.push(("gain over grid baseline", out.best_aep.total - g.total));
    }
    text.push_str(&revenue_lines(&loaded.farm, &money));
    write(&a.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn sector_theta(farm: &FarmConfig, sector: usize) -> Result<f64> {
    if sector == 0 || sector > farm.n_sectors {
        return Err(Error::InvalidInput(format!(
            "sector {sector} is outside 1..={}",
            farm.n_sectors
        )));
    }
    Ok(farm.sector_alignment.center(sector - 1, farm.n_sectors))
}

fn plot(a: &PlotArgs, record: &mut Record) -> CmdResult {
    record.inputs.insert("layout".into(), a.layout.clone());
    record.inputs.insert("farm".into(), a.farm.clone());
    record.inputs.insert("turbine".into(), a.turbine.clone());
    let farm = FarmConfig::from_json_file(&a.farm)?;
    let spec = TurbineSpec::from_json_file(&a.turbine)?;
    let layout = Layout::read_csv(&a.layout)?;
    let theta = sector_theta(&farm, a.sector)?;
    if !(a.speed >= 0.0 && a.speed.is_finite()) {
        return Err(Error::InvalidInput(format!("speed {} must be >= 0", a.speed)).into());
    }
    let decay = decay_factor(spec.hub_height(), farm.z0_m)?;
    let svg = report::wake_svg(&layout, &farm.boundary, &spec, decay, theta, a.speed);
    if let Some(dir) = a.out.parent() {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    write(&a.out, &svg)?;
    record.manifest_path = Some(sidecar(&a.out));
    println!("sector {} ({theta} deg), {} m/s -> {}", a.sector, a.speed, a.out.display());
    Ok(())
}

fn sweep(a: &SweepArgs, record: &mut Record) -> CmdResult {
    record.inputs(&a.inputs);
    if a.n_min == 0 || a.n_min > a.n_max {
        return Err(Error::InvalidInput("need 1 <= n-min <= n-max".into()).into());
    }
    let loaded = load(&a.inputs)?;
    let mut config = run_config(&loaded.farm.defaults, &a.run)?;
    if let Some(m) = a.runs_per_n {
        config.restarts = m;
        config.validate()?;
    }
    record.config(&config);
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    record.manifest_path = Some(a.out.join(MANIFEST_FILE));

    let boundary = &loaded.farm.boundary;
    let n_range: Vec<usize> = (a.n_min..=a.n_max).collect();
    let rows = saturation_sweep(boundary, &loaded.spec, &loaded.rose, &n_range, &config)?;
    let (power, area) = (loaded.spec.rated_power(), boundary.area());
    write(&a.out.join("sweep.csv"), &report::sweep_table(&rows, power, area))?;
    write(&a.out.join("sweep_runs.csv"), &report::sweep_runs_table(&rows))?;
    write(&a.out.join("efficiency.svg"), &report::efficiency_svg(&rows, power, area))?;
    for r in &rows {
        if let Some(l) = &r.best_layout {
            l.write_csv(a.out.join(format!("layout_{}.csv", r.n_turbines)))?;
        }
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        println!(
            "N = {:>3}: {:<14} efficiency {} % (grid {} %)",
            r.n_turbines,
            r.status.as_str(),
            fmt(r.efficiency),
            fmt(r.grid_efficiency)
        );
    }
    Ok(())
}

fn sensitivity(a: &SensitivityArgs, record: &mut Record) -> CmdResult {
    record.inputs(&a.inputs);
    record.inputs.insert("layout".into(), a.layout.clone());
    let loaded = load(&a.inputs)?;
    let config = run_config(&loaded.farm.defaults, &a.run)?;
    record.config(&config);
    let reference = Layout::read_csv(&a.layout)?;
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    record.manifest_path = Some(a.out.join(MANIFEST_FILE));
    let rows = rose_rotation_sensitivity(
        &loaded.farm.boundary,
        &loaded.spec,
        &loaded.rose,
        &reference,
        &a.angles,
        &config,
    )?;
    write(&a.out.join("sensitivity.csv"), &report::rotation_table(&rows))?;
    for r in &rows {
        println!(
            "{:>7.2} deg: reference {:.3} GWh/yr ({:.3} %), optimized {:.3} GWh/yr ({:.3} %)",
            r.angle_deg, r.grid.total, r.grid.wake_loss_total, r.optimized.total, r.optimized.wake_loss_total
        );
    }
    Ok(())
}

fn fit_wind(a: &FitWindArgs, record: &mut Record) -> CmdResult {
    record.inputs.insert("wind".into(), a.wind.clone());
    record.inputs.insert("farm".into(), a.farm.clone());
    record.inputs.insert("turbine".into(), a.turbine.clone());
    let farm = FarmConfig::from_json_file(&a.farm)?;
    let spec = TurbineSpec::from_json_file(&a.turbine)?;
    let samples = read_wind_csv(&a.wind)?;
    let rose = build_rose(&samples, farm.n_sectors, farm.sector_alignment, spec.hub_height(), farm.z0_m)?;
    if let Some(dir) = a.out.parent() {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    rose.to_json_file(&a.out)?;
    record.manifest_path = Some(sidecar(&a.out));
    for s in &rose.sectors {
        println!(
            "sector {:>2} ({:>6.2} deg): p = {:.4}, {} samples, {:?}",
            s.index, s.theta_deg, s.probability, s.sample_count, s.model
        );
    }
    Ok(())
}

fn write_replica(a: &ReplicaArgs, record: &mut Record) -> CmdResult {
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    let spec = replica::turbine();
    let rose = replica::rose(12)?;
    let farm = FarmConfig {
        name: "synthetic replica".into(),
        boundary: replica::boundary(),
        z0_m: replica::Z0_M,
        n_sectors: 12,
        sector_alignment: Default::default(),
        price_eur_per_kwh: Some(0.15),
        cost_eur_per_kwh: Some(0.064),
        defaults: RunConfig {
            restarts: 50,
            ..RunConfig::default()
        },
    };
    write(&a.out.join("farm.json"), &to_json(&farm)?)?;
    write(&a.out.join("turbine.json"), &to_json(&spec)?)?;
    rose.to_json_file(a.out.join("rose.json"))?;
    let d_min = farm.defaults.min_spacing_diameters * spec.rotor_diameter();
    if let Some(grid) = grid_layout(&farm.boundary, replica::N_TURBINES, d_min) {
        grid.write_csv(a.out.join("grid_layout.csv"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    write_wind_csv(a.out.join("wind.csv"), &replica::synthetic_samples(a.hours, &mut rng))?;
    record.manifest_path = Some(a.out.join(MANIFEST_FILE));
    println!("wrote replica inputs to {}", a.out.display());
    Ok(())
}
