//! `ompath` — most probable transition pathways, ensemble simulation, and
//! tube-probability estimation for degenerate jump diffusions.
//!
//! Subcommands: `mptp`, `simulate`, `tube`, `validate`. Exit codes are
//! fixed for scripting: 0 success, 1 validation failure, 2 usage or
//! configuration error, 3 numerical failure.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, SolverChoice};
use ompath_core::acceptance;
use ompath_core::levy::AlphaStableMeasure;
use ompath_core::model::{
    action, kinematic_residual, BuiltinPotential, LangevinModel,
};
use ompath_core::path::Path;
use ompath_core::pathways::{
    optimize_boundary_velocities, quadratic_analytic_mptp, quadratic_global_mptp, solve_el4_bvp,
    solve_hp_bvp, BoundaryProblem, SolveError, SolverConfig,
};
use ompath_core::simulate::{
    estimate_tube_probabilities, om_ratio_check, simulate_bridge_ensemble, SimGrid,
};

#[derive(Parser)]
#[command(
    name = "ompath",
    version,
    about = "Onsager-Machlup actions and most probable transition pathways for degenerate jump diffusions"
)]
struct Cli {
    /// Configuration file (`key = value` lines under [section] headers).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed (overrides `numerics.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,

    /// Echo the fully-resolved configuration before running.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the most probable transition pathway of the configured problem.
    Mptp,
    /// Emit raw or endpoint-conditioned ensembles plus the MPTP overlay.
    Simulate,
    /// Estimate tube probabilities, or the tube ratio when two paths are given.
    Tube,
    /// Run the built-in validation suite.
    Validate {
        /// Comma-separated criterion ids (1-11) to run; default all.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
    },
}

enum AppError {
    /// Usage or configuration problem (exit 2).
    Config(String),
    /// Numerical failure: nonconvergence, blow-up, exhausted budget (exit 3).
    Numerical(String),
    /// One or more validation criteria failed (exit 1).
    Validation,
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Validation => 1,
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                AppError::Config(msg) => eprintln!("ompath: configuration error: {msg}"),
                AppError::Numerical(msg) => eprintln!("ompath: numerical failure: {msg}"),
                AppError::Validation => eprintln!("ompath: validation failed"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    let cfg = load_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.render());
    }
    match &cli.command {
        Command::Mptp => cmd_mptp(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Tube => cmd_tube(&cfg),
        Command::Validate { criteria } => cmd_validate(&cfg, criteria),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                AppError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            RunConfig::parse(&text).map_err(AppError::Config)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn measure_of(cfg: &RunConfig) -> Result<Option<AlphaStableMeasure>, AppError> {
    cfg.levy
        .map(|(a, b)| AlphaStableMeasure::new(a, b))
        .transpose()
        .map_err(|e| AppError::Config(e.to_string()))
}

fn langevin_of(cfg: &RunConfig) -> Result<LangevinModel, AppError> {
    LangevinModel::with_potential(cfg.potential, cfg.gamma, cfg.mu, measure_of(cfg)?)
        .map_err(|e| AppError::Config(e.to_string()))
}

fn solver_config_of(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        rtol: cfg.rtol,
        bvp_tol: cfg.bvp_tol,
        max_newton: cfg.max_newton,
        nodes: cfg.nodes,
        vel_tol: cfg.vel_tol,
        max_outer: cfg.max_outer,
        restarts: cfg.restarts,
        seed: cfg.seed,
        ..SolverConfig::default()
    }
}

fn numerical(e: SolveError) -> AppError {
    match e {
        SolveError::MissingVelocity | SolveError::InvalidHorizon(_) | SolveError::NotQuadratic => {
            AppError::Config(e.to_string())
        }
        other => AppError::Numerical(other.to_string()),
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf, AppError> {
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_path_csv(path: &Path, file: &FsPath) -> Result<(), AppError> {
    let out = fs::File::create(file)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", file.display())))?;
    path.write_csv(out)
        .map_err(|e| AppError::Config(format!("writing {}: {e}", file.display())))
}

/// Result of the MPTP dispatch, uniform across solver routes.
struct MptpOutcome {
    solver: &'static str,
    path: Path,
    y0: f64,
    y_t: f64,
    extra: Vec<(String, String)>,
}

fn dispatch_mptp(cfg: &RunConfig, model: &LangevinModel) -> Result<MptpOutcome, AppError> {
    let lambda = model.lambda_mean();
    let scfg = solver_config_of(cfg);
    let quadratic = cfg.potential == BuiltinPotential::Quadratic;
    match (cfg.y0, cfg.y_t) {
        (Some(y0), Some(y_t)) => {
            let problem = BoundaryProblem::phase(cfg.x0, y0, cfg.x_t, y_t, cfg.horizon);
            let route = match cfg.solver {
                SolverChoice::Auto if quadratic => SolverChoice::Analytic,
                SolverChoice::Auto => SolverChoice::El4,
                other => other,
            };
            match route {
                SolverChoice::Analytic => {
                    if !quadratic {
                        return Err(AppError::Config(
                            "solver = analytic requires the quadratic potential".into(),
                        ));
                    }
                    let sol = quadratic_analytic_mptp(cfg.gamma, lambda, &problem)
                        .map_err(numerical)?;
                    Ok(MptpOutcome {
                        solver: "analytic",
                        path: sol.to_path(cfg.nodes),
                        y0,
                        y_t,
                        extra: vec![],
                    })
                }
                SolverChoice::El4 => {
                    let sol = solve_el4_bvp(model, &problem, &scfg).map_err(numerical)?;
                    let d = sol.diagnostics;
                    Ok(MptpOutcome {
                        solver: "el4",
                        path: sol.path,
                        y0,
                        y_t,
                        extra: shooting_report(&d),
                    })
                }
                SolverChoice::Hp => {
                    let sol = solve_hp_bvp(&model.to_degenerate(), &problem, &scfg)
                        .map_err(numerical)?;
                    let d = sol.diagnostics;
                    Ok(MptpOutcome {
                        solver: "hp",
                        path: sol.path,
                        y0,
                        y_t,
                        extra: shooting_report(&d),
                    })
                }
                SolverChoice::Auto => unreachable!(),
            }
        }
        (None, None) => {
            if quadratic && matches!(cfg.solver, SolverChoice::Auto | SolverChoice::Analytic) {
                let sol = quadratic_global_mptp(cfg.gamma, lambda, cfg.x0, cfg.x_t, cfg.horizon)
                    .map_err(numerical)?;
                let (y0, y_t) = sol.boundary_velocities();
                Ok(MptpOutcome {
                    solver: "analytic-global",
                    path: sol.to_path(cfg.nodes),
                    y0,
                    y_t,
                    extra: vec![],
                })
            } else if matches!(cfg.solver, SolverChoice::Hp) {
                Err(AppError::Config(
                    "solver = hp needs full phase boundary data (y0 and yT)".into(),
                ))
            } else {
                let opt =
                    optimize_boundary_velocities(model, cfg.x0, cfg.x_t, cfg.horizon, &scfg)
                        .map_err(numerical)?;
                let mut extra = shooting_report(&opt.solution.diagnostics);
                extra.push(("evaluations".into(), opt.evaluations.to_string()));
                Ok(MptpOutcome {
                    solver: "velocity-optimization",
                    path: opt.path,
                    y0: opt.y0,
                    y_t: opt.y_t,
                    extra,
                })
            }
        }
        _ => Err(AppError::Config(
            "problem.y0 and problem.yT must be given together".into(),
        )),
    }
}

fn shooting_report(d: &ompath_core::pathways::ShootingDiagnostics) -> Vec<(String, String)> {
    vec![
        ("newton_iterations".into(), d.newton_iterations.to_string()),
        (
            "bvp_residual".into(),
            format!("{:e}", d.mismatch[0].abs().max(d.mismatch[1].abs())),
        ),
    ]
}

fn cmd_mptp(cfg: &RunConfig) -> Result<(), AppError> {
    let model = langevin_of(cfg)?;
    let degenerate = model.to_degenerate();
    let outcome = dispatch_mptp(cfg, &model)?;
    let act = action(&degenerate, &outcome.path)
        .map_err(|e| AppError::Numerical(e.to_string()))?;
    let dir = ensure_out_dir(cfg)?;
    let file = dir.join(format!("{}_mptp.csv", cfg.prefix));
    write_path_csv(&outcome.path, &file)?;

    println!("command=mptp");
    println!("solver={}", outcome.solver);
    println!("potential={}", cfg.potential.name());
    println!("gamma={}", cfg.gamma);
    println!("mu={}", cfg.mu);
    println!("lambda={}", model.lambda_mean());
    println!("y0={}", outcome.y0);
    println!("yT={}", outcome.y_t);
    println!("action={act}");
    for (k, v) in &outcome.extra {
        println!("{k}={v}");
    }
    println!("path_csv={}", file.display());
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), AppError> {
    let model = langevin_of(cfg)?;
    let degenerate = model.to_degenerate();
    let grid = SimGrid::with_delta(cfg.horizon, cfg.dt, cfg.delta);

    // The overlay MPTP; it also supplies the starting velocity when the
    // problem leaves it free.
    let overlay_cfg = RunConfig {
        nodes: grid.steps(),
        ..cfg.clone()
    };
    let overlay = dispatch_mptp(&overlay_cfg, &model)?;
    let y0 = cfg.y0.unwrap_or(overlay.y0);
    let z0 = (cfg.x0, y0);

    let end_tol = cfg.end_tol.unwrap_or(f64::INFINITY);
    let mode = if end_tol.is_finite() { "bridge" } else { "raw" };
    let ensemble = simulate_bridge_ensemble(
        &degenerate,
        z0,
        cfg.x_t,
        end_tol,
        cfg.n_keep,
        &grid,
        cfg.seed,
        cfg.max_attempts,
    )
    .map_err(|e| AppError::Numerical(e.to_string()))?;

    let dir = ensure_out_dir(cfg)?;
    let overlay_file = dir.join(format!("{}_mptp.csv", cfg.prefix));
    write_path_csv(&overlay.path, &overlay_file)?;
    let manifest_file = dir.join(format!("{}_manifest.csv", cfg.prefix));
    let mut manifest = fs::File::create(&manifest_file)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", manifest_file.display())))?;
    writeln!(manifest, "seed,accepted,endpoint_error")
        .map_err(|e| AppError::Config(e.to_string()))?;
    for (i, sample) in ensemble.paths.iter().enumerate() {
        let err = (sample.path.end().0 - cfg.x_t).abs();
        writeln!(manifest, "{},1,{:.16e}", sample.seed, err)
            .map_err(|e| AppError::Config(e.to_string()))?;
        let file = dir.join(format!("{}_path_{i:03}.csv", cfg.prefix));
        write_path_csv(&sample.path, &file)?;
    }

    println!("command=simulate");
    println!("mode={mode}");
    println!("kept={}", ensemble.paths.len());
    println!("attempts={}", ensemble.attempts);
    println!("acceptance_rate={}", ensemble.acceptance_rate);
    println!("y0={y0}");
    println!("mptp_csv={}", overlay_file.display());
    println!("manifest_csv={}", manifest_file.display());
    Ok(())
}

fn load_reference_path(name: &str) -> Result<Path, AppError> {
    let file = fs::File::open(name)
        .map_err(|e| AppError::Config(format!("cannot open {name}: {e}")))?;
    Path::read_csv(file).map_err(|e| AppError::Config(format!("{name}: {e}")))
}

fn cmd_tube(cfg: &RunConfig) -> Result<(), AppError> {
    let model = langevin_of(cfg)?.to_degenerate();
    let name_a = cfg.path_a.as_ref().ok_or_else(|| {
        AppError::Config("tube.path_a is required (a path CSV written by `mptp`)".into())
    })?;
    let phi_a = load_reference_path(name_a)?;
    let grid = SimGrid::with_delta(phi_a.t_end() - phi_a.t0(), phi_a.dt(), cfg.delta);
    if cfg.dt_explicit && (cfg.dt - phi_a.dt()).abs() > 1e-9 * cfg.dt {
        return Err(AppError::Config(format!(
            "numerics.dt = {} does not match the reference path grid (dt = {})",
            cfg.dt,
            phi_a.dt()
        )));
    }
    let warn_residual = |name: &str, phi: &Path| {
        let r = kinematic_residual(&model, phi);
        if r > 1e-3 {
            eprintln!(
                "ompath: warning: {name} violates the kinematic constraint (residual {r:.3e}); \
                 tube asymptotics assume constrained reference paths"
            );
        }
    };
    warn_residual(name_a, &phi_a);

    println!("command=tube");
    println!("n={}", cfg.samples);
    match &cfg.path_b {
        None => {
            let estimates = estimate_tube_probabilities(
                &model,
                &phi_a,
                &cfg.epsilons,
                cfg.samples,
                &grid,
                cfg.seed,
            )
            .map_err(|e| AppError::Numerical(e.to_string()))?;
            for e in estimates {
                println!(
                    "epsilon={} p_hat={} ci_low={} ci_high={} hits={} n={}",
                    e.epsilon, e.p_hat, e.ci_low, e.ci_high, e.hits, e.n
                );
            }
            Ok(())
        }
        Some(name_b) => {
            let phi_b = load_reference_path(name_b)?;
            warn_residual(name_b, &phi_b);
            let mut degenerate_ratio = false;
            for &eps in &cfg.epsilons {
                let r = om_ratio_check(
                    &model,
                    &phi_a,
                    &phi_b,
                    eps,
                    cfg.samples,
                    &grid,
                    cfg.seed,
                )
                .map_err(|e| AppError::Numerical(e.to_string()))?;
                match (r.delta_hat, r.difference, r.std_error) {
                    (Some(dh), Some(diff), Some(se)) => println!(
                        "epsilon={eps} p_hat_a={} p_hat_b={} delta_hat={dh} delta_theory={} diff={diff} se={se} hits_a={} hits_b={}",
                        r.tube_a.p_hat, r.tube_b.p_hat, r.delta_theory, r.tube_a.hits, r.tube_b.hits
                    ),
                    _ => {
                        println!(
                            "epsilon={eps} p_hat_a={} p_hat_b={} delta_hat=undefined delta_theory={} hits_a={} hits_b={}",
                            r.tube_a.p_hat, r.tube_b.p_hat, r.delta_theory, r.tube_a.hits, r.tube_b.hits
                        );
                        degenerate_ratio = true;
                    }
                }
            }
            if degenerate_ratio {
                Err(AppError::Numerical(
                    "zero hits in at least one tube; the probability ratio is undefined \
                     (increase epsilon or the sample count)"
                        .into(),
                ))
            } else {
                Ok(())
            }
        }
    }
}

fn cmd_validate(cfg: &RunConfig, criteria: &[usize]) -> Result<(), AppError> {
    let seed = if cfg.seed != 0 {
        cfg.seed
    } else {
        acceptance::DEFAULT_MASTER_SEED
    };
    let ids: Vec<usize> = if criteria.is_empty() {
        (1..=11).collect()
    } else {
        criteria.to_vec()
    };
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let outcome = acceptance::run_criterion(id, seed)
            .ok_or_else(|| AppError::Config(format!("unknown criterion id {id} (valid: 1-11)")))?;
        outcomes.push(outcome);
    }
    print!("{}", acceptance::format_report(seed, &outcomes));
    if acceptance::all_passed(&outcomes) {
        Ok(())
    } else {
        Err(AppError::Validation)
    }
}
