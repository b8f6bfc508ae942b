//! Command-line driver for the layerstack solver.
//!
//! Subcommands: `run` solves one configuration and writes displacement
//! fields (VTK), the iteration history (CSV), and a summary (JSON);
//! `sweep-theta` repeats a run over several relaxation factors;
//! `mesh-convergence` refines the mesh toward a reference and reports
//! energy-norm errors; `oracle-compare` solves the same problem by layer
//! decomposition and monolithically and compares the results.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! solve does not converge (or the two routes disagree in `oracle-compare`).
//!
//! `LAYERSTACK_THREADS` caps the worker pool; `--serial` disables layer
//! parallelism entirely. Parallel and serial runs produce byte-identical
//! output: layers are solved independently and merged in a fixed order.

use clap::{Args, Parser, Subcommand};
use layerstack_core::config::StackConfig;
use layerstack_core::ld::{
    energy_norm, interpolate_stack_fields, layer_energy_seminorm, ld_run, solve_stack_monolithic,
    stack_objective, LdConfig, LdError, LdSolution, StackSystem,
};
use layerstack_core::report::{history_csv, run_summary};
use layerstack_core::vtk::{layer_vtk, stack_vtk};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "layerstack",
    version,
    about = "Finite-element solver for multi-layer elastic contact with Tresca friction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration; write VTK fields, CSV history, JSON summary.
    Run(RunArgs),
    /// Solve at several relaxation factors and tabulate the outcomes.
    SweepTheta(SweepThetaArgs),
    /// Solve at several mesh steps and report energy-norm errors against a
    /// reference solution on a finer mesh.
    MeshConvergence(MeshConvergenceArgs),
    /// Solve by layer decomposition and monolithically; compare energies.
    OracleCompare(OracleCompareArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Solve layers one at a time instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the configured relaxation factor.
    #[arg(long)]
    theta: Option<f64>,
    /// Override the configured stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the configured iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Certify every converged subproblem against the variational
    /// inequality and report the worst certificate.
    #[arg(long)]
    certify: bool,
}

#[derive(Args)]
struct SweepThetaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Relaxation factors to try, e.g. --thetas 0.005,0.01,0.02,0.04
    #[arg(long, value_delimiter = ',', required = true)]
    thetas: Vec<f64>,
    /// Write the sweep table to this CSV file (defaults to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeshConvergenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mesh steps to evaluate, coarsest first, e.g. --h-values 1.0,0.5,0.375
    #[arg(long, value_delimiter = ',', required = true)]
    h_values: Vec<f64>,
    /// Reference mesh step (must be finer than every evaluated step).
    #[arg(long)]
    h_ref: f64,
    /// Write the error table to this CSV file (defaults to stdout only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Largest acceptable relative energy difference between the routes.
    #[arg(long, default_value_t = 1e-5)]
    rel_tol: f64,
}

/// Failure with the exit code it maps to: 1 for setup problems, 2 for
/// solver non-convergence or route disagreement.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn setup(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn solve(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version are not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    configure_thread_pool();
    let outcome = match cli.command {
        Command::Run(args) => run(&args),
        Command::SweepTheta(args) => sweep_theta(&args),
        Command::MeshConvergence(args) => mesh_convergence(&args),
        Command::OracleCompare(args) => oracle_compare(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// Apply `LAYERSTACK_THREADS` to the global worker pool. Layer solves are
/// independent, so the thread count never changes results.
fn configure_thread_pool() {
    if let Ok(value) = std::env::var("LAYERSTACK_THREADS") {
        if let Ok(threads) = value.trim().parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn load_config(path: &Path) -> Result<StackConfig, Failure> {
    StackConfig::from_json_file(path).map_err(|err| Failure::setup(err.to_string()))
}

fn build_system(config: &StackConfig) -> Result<StackSystem, Failure> {
    let problem = config.to_problem().map_err(|e| Failure::setup(e.to_string()))?;
    StackSystem::build(&problem).map_err(|e| Failure::setup(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::setup(format!("cannot write {}: {e}", path.display())))
}

fn float_csv(value: f64) -> String {
    format!("{value:.16e}")
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let config = load_config(&args.common.config)?;
    let system = build_system(&config)?;
    let mut ld = config.ld_config();
    if let Some(theta) = args.theta {
        ld.theta = theta;
    }
    if let Some(tol) = args.tol {
        ld.tol = tol;
    }
    if let Some(max_iters) = args.max_iters {
        ld.max_iters = max_iters;
    }
    ld.parallel = !args.common.serial;
    ld.certify = args.certify;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::setup(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let n_layers = system.n_layers();
    let n_interfaces = system.mesh.interfaces.len();

    match ld_run(&system, &ld) {
        Ok(solution) => {
            write_outputs(&args.out_dir, &system, &solution, &ld)?;
            println!(
                "converged in {} iterations (rel change {:.3e}); outputs in {}",
                solution.iterations,
                solution.history.last().map(|r| r.rel_change).unwrap_or(0.0),
                args.out_dir.display()
            );
            Ok(())
        }
        Err(LdError::Diverged {
            iteration, history, ..
        }) => {
            let csv = history_csv(&history, n_layers, n_interfaces, true);
            write_file(&args.out_dir.join("history.csv"), &csv)?;
            Err(Failure::solve(format!(
                "diverged at iteration {iteration} (history written to {})",
                args.out_dir.join("history.csv").display()
            )))
        }
        Err(LdError::IterationLimit {
            max_iters,
            last,
            history,
            ..
        }) => {
            let csv = history_csv(&history, n_layers, n_interfaces, false);
            write_file(&args.out_dir.join("history.csv"), &csv)?;
            Err(Failure::solve(format!(
                "no convergence in {max_iters} iterations (last rel change {last:.3e})"
            )))
        }
        Err(err) => Err(Failure::solve(err.to_string())),
    }
}

fn write_outputs(
    out_dir: &Path,
    system: &StackSystem,
    solution: &LdSolution,
    ld: &LdConfig,
) -> Result<(), Failure> {
    let csv = history_csv(
        &solution.history,
        system.n_layers(),
        system.mesh.interfaces.len(),
        false,
    );
    write_file(&out_dir.join("history.csv"), &csv)?;
    let summary = run_summary(system, solution, ld.theta, ld.tol, ld.sweep.tol_sub);
    write_file(&out_dir.join("summary.json"), &summary.to_json_string())?;
    for (k, layer) in system.mesh.layers.iter().enumerate() {
        let title = format!("layer {} of {}", k + 1, system.n_layers());
        let text = layer_vtk(layer, &solution.fields[k], &title);
        write_file(&out_dir.join(format!("layer_{}.vtk", k + 1)), &text)?;
    }
    let merged = stack_vtk(&system.mesh, &solution.fields, "layered stack");
    write_file(&out_dir.join("stack.vtk"), &merged)?;
    Ok(())
}

fn sweep_theta(args: &SweepThetaArgs) -> Result<(), Failure> {
    let config = load_config(&args.common.config)?;
    let system = build_system(&config)?;
    let mut table = String::from("theta,outcome,iterations,final_rel_change\n");
    let mut indefinite = false;
    for &theta in &args.thetas {
        let mut ld = config.ld_config();
        ld.theta = theta;
        ld.parallel = !args.common.serial;
        let (outcome, iterations, last) = match ld_run(&system, &ld) {
            Ok(solution) => (
                "converged",
                solution.iterations,
                solution.history.last().map(|r| r.rel_change).unwrap_or(0.0),
            ),
            Err(LdError::Diverged {
                iteration, last, ..
            }) => ("diverged", iteration, last),
            Err(LdError::IterationLimit {
                max_iters, last, ..
            }) => {
                indefinite = true;
                ("iteration_limit", max_iters, last)
            }
            Err(err) => return Err(Failure::solve(err.to_string())),
        };
        writeln!(
            table,
            "{},{outcome},{iterations},{}",
            float_csv(theta),
            float_csv(last)
        )
        .unwrap();
        println!("theta {theta}: {outcome} after {iterations} iterations");
    }
    if let Some(path) = &args.out {
        write_file(path, &table)?;
    } else {
        print!("{table}");
    }
    if indefinite {
        Err(Failure::solve(
            "at least one relaxation factor hit the iteration limit",
        ))
    } else {
        Ok(())
    }
}

fn mesh_convergence(args: &MeshConvergenceArgs) -> Result<(), Failure> {
    let config = load_config(&args.common.config)?;
    if !(args.h_ref > 0.0) {
        return Err(Failure::setup(format!(
            "--h-ref must be positive, got {}",
            args.h_ref
        )));
    }
    for &h in &args.h_values {
        if !(h > args.h_ref) {
            return Err(Failure::setup(format!(
                "--h-values must all be coarser than --h-ref {}; got {h}",
                args.h_ref
            )));
        }
    }
    let mut ld = config.ld_config();
    ld.parallel = !args.common.serial;

    let mut ref_config = config.clone();
    ref_config.h = args.h_ref;
    let ref_system = build_system(&ref_config)?;
    let ref_solution =
        ld_run(&ref_system, &ld).map_err(|e| Failure::solve(format!("reference solve: {e}")))?;
    let ref_scale = energy_norm(&ref_system, &ref_solution.fields).max(f64::MIN_POSITIVE);

    let n_layers = ref_system.n_layers();
    let mut table = String::from("h,iterations,total_error");
    for k in 1..=n_layers {
        write!(table, ",layer_{k}_error").unwrap();
    }
    table.push('\n');

    for &h in &args.h_values {
        let mut coarse_config = config.clone();
        coarse_config.h = h;
        let system = build_system(&coarse_config)?;
        let solution =
            ld_run(&system, &ld).map_err(|e| Failure::solve(format!("solve at h={h}: {e}")))?;
        let lifted = interpolate_stack_fields(&system, &solution.fields, &ref_system);
        let diff: Vec<Vec<f64>> = lifted
            .iter()
            .zip(ref_solution.fields.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x - y).collect())
            .collect();
        let total = energy_norm(&ref_system, &diff);
        write!(table, "{},{},{}", float_csv(h), solution.iterations, float_csv(total)).unwrap();
        for (k, field) in diff.iter().enumerate() {
            write!(table, ",{}", float_csv(layer_energy_seminorm(&ref_system, k, field))).unwrap();
        }
        table.push('\n');
        println!(
            "h {h}: total energy error {:.6e} ({:.3}% of reference)",
            total,
            100.0 * total / ref_scale
        );
    }
    if let Some(path) = &args.out {
        write_file(path, &table)?;
    } else {
        print!("{table}");
    }
    Ok(())
}

fn oracle_compare(args: &OracleCompareArgs) -> Result<(), Failure> {
    let config = load_config(&args.common.config)?;
    let system = build_system(&config)?;
    let mut ld = config.ld_config();
    ld.parallel = !args.common.serial;

    let decomposition = ld_run(&system, &ld)
        .map_err(|e| Failure::solve(format!("layer decomposition: {e}")))?;
    let (mono_fields, _) = solve_stack_monolithic(&system, &ld.sweep, None)
        .map_err(|e| Failure::solve(format!("monolithic solve: {e}")))?;

    let e_ld = stack_objective(&system, &decomposition.fields);
    let e_mono = stack_objective(&system, &mono_fields);
    let scale = e_mono.abs().max(e_ld.abs()).max(1e-30);
    let energy_gap = (e_ld - e_mono).abs() / scale;

    let diff: Vec<Vec<f64>> = decomposition
        .fields
        .iter()
        .zip(mono_fields.iter())
        .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x - y).collect())
        .collect();
    let field_gap = energy_norm(&system, &diff);
    let field_scale = energy_norm(&system, &mono_fields).max(f64::MIN_POSITIVE);

    println!(
        "decomposition energy {e_ld:.12e} ({} iterations), monolithic energy {e_mono:.12e}",
        decomposition.iterations
    );
    println!(
        "relative energy gap {energy_gap:.3e}, field gap {:.3e} (energy norm, relative)",
        field_gap / field_scale
    );
    if energy_gap <= args.rel_tol {
        println!("routes agree within {:.3e}", args.rel_tol);
        Ok(())
    } else {
        Err(Failure::solve(format!(
            "routes disagree: relative energy gap {energy_gap:.3e} exceeds {:.3e}",
            args.rel_tol
        )))
    }
}
