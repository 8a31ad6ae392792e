//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 computation error. Computation
//! errors print a single machine-parsable line `error[Code]: message` on
//! stderr; `--format json` switches stdout to machine-readable output.
//! `EQUISTAB_THREADS` caps the multi-start workers.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::action::{action_reduced, grad_action_reduced};
use crate::dynamics::ProblemSpec;
use crate::error::{Error, Result};
use crate::export::{export_csv, export_svg, ProjectionPlane};
use crate::floquet::{monodromy, stability_verdict, IntegrationMode, MonodromyOptions};
use crate::io::{parse_problem, Indicators, OrbitFile, Provenance};
use crate::morse::{morse_fundamental, morse_period, EpsZero, MorseResult};
use crate::optimizer::{multi_start, newton_refine, Candidate, SolveOptions};
use crate::report::{compute_report, ReportOptions};
use crate::symmetry::{equivariance_projector, ReducedSpace};

#[derive(Parser)]
#[command(
    name = "equistab",
    version,
    about = "Symmetric periodic orbits of the n-body problem: search and stability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Csv,
    Svg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Analytic,
    Shooting,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Fundamental,
    Period,
    Both,
}

#[derive(Args)]
struct FormatArg {
    /// Output format for results on stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Find a critical point of the reduced action from random or seeded starts.
    Solve {
        problem: PathBuf,
        /// Base seed; start `i` uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random starts.
        #[arg(long, default_value_t = 8)]
        starts: usize,
        /// Final gradient tolerance of the Newton refinement.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Write the best orbit to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed the search from an existing orbit file instead of random starts.
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Floquet multipliers of a stored orbit.
    Floquet {
        orbit: PathBuf,
        #[arg(long, default_value_t = 8192)]
        steps: usize,
        #[arg(long, value_enum, default_value = "analytic")]
        mode: ModeArg,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Discrete Morse indices of a stored orbit.
    Morse {
        orbit: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        domain: DomainArg,
        /// Grid size for the full-period index (default: the problem's M).
        #[arg(long)]
        grid: Option<usize>,
        /// Near-zero threshold: `auto` or a number.
        #[arg(long, default_value = "auto")]
        eps_zero: String,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Full indicator table for a stored orbit.
    Report {
        orbit: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Sample an orbit to CSV or render it to SVG.
    Export {
        orbit: PathBuf,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
        /// Projection plane for 3-dimensional orbits.
        #[arg(long, default_value = "xy")]
        plane: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse arguments, dispatch and map errors to exit codes.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e);
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            problem,
            seed,
            starts,
            tol,
            out,
            init,
            format,
        } => cmd_solve(&problem, seed, starts, tol, out.as_deref(), init.as_deref(), format.format),
        Command::Floquet {
            orbit,
            steps,
            mode,
            format,
        } => cmd_floquet(&orbit, steps, mode, format.format),
        Command::Morse {
            orbit,
            domain,
            grid,
            eps_zero,
            format,
        } => cmd_morse(&orbit, domain, grid, &eps_zero, format.format),
        Command::Report { orbit, format } => cmd_report(&orbit, format.format),
        Command::Export {
            orbit,
            samples,
            format,
            plane,
            out,
        } => cmd_export(&orbit, samples, format, &plane, out.as_deref()),
    }
}

fn worker_threads(starts: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("EQUISTAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(available);
    cap.min(starts.max(1))
}

fn load_orbit(path: &Path) -> Result<(OrbitFile, ProblemSpec, crate::TrigLoop)> {
    let orbit = OrbitFile::load(path)?;
    let spec = orbit.spec()?;
    let lp = orbit.trig_loop(&spec)?;
    Ok((orbit, spec, lp))
}

fn cmd_solve(
    problem_path: &Path,
    seed: u64,
    starts: usize,
    tol: f64,
    out: Option<&Path>,
    init: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let spec = parse_problem(&std::fs::read_to_string(problem_path)?)?;
    let rs = equivariance_projector(&spec, true);

    let candidate = if let Some(init_path) = init {
        solve_from_init(&spec, &rs, init_path, seed, tol)?
    } else {
        let opts = SolveOptions {
            base_seed: seed,
            starts,
            tol,
            threads: worker_threads(starts),
            ..Default::default()
        };
        let result = multi_start(&spec, &rs, &opts);
        if format == OutputFormat::Text {
            for (s, outcome) in &result.outcomes {
                match outcome {
                    Some((action, grad)) => {
                        eprintln!("seed {s}: action {action:.6}, gradient {grad:.2e}")
                    }
                    None => eprintln!("seed {s}: no critical point"),
                }
            }
        }
        result.best.ok_or(Error::MaxIterations {
            iterations: 0,
            gradient_norm: f64::NAN,
            best: Box::new((
                vec![],
                crate::optimizer::OptimizationReport {
                    action_value: f64::NAN,
                    gradient_norm: f64::NAN,
                    iterations: 0,
                    method_trace: vec![],
                    min_separation_seen: f64::NAN,
                    collision_flag: false,
                    seed,
                },
            )),
        })?
    };

    let lp = rs.loop_from(&candidate.z);
    let indicators = Indicators {
        action: Some(candidate.report.action_value),
        gradient_norm: Some(candidate.report.gradient_norm),
        ..Default::default()
    };
    let orbit = OrbitFile::from_trig_loop(
        &spec,
        &lp,
        Provenance::here(Some(candidate.seed), Some(tol)),
        Some(indicators),
    );
    if let Some(out) = out {
        orbit.save(out)?;
    }

    match format {
        OutputFormat::Text => {
            println!("action value   {:.6}", candidate.report.action_value);
            println!("gradient norm  {:.3e}", candidate.report.gradient_norm);
            println!("iterations     {}", candidate.report.iterations);
            println!("seed           {}", candidate.seed);
            for stage in &candidate.report.method_trace {
                println!(
                    "  {}: {} iterations, final norm {:.3e}",
                    stage.method, stage.iterations, stage.final_norm
                );
            }
            if let Some(out) = out {
                println!("orbit written to {}", out.display());
            }
        }
        OutputFormat::Json => {
            let value = serde_json::json!({
                "action_value": candidate.report.action_value,
                "gradient_norm": candidate.report.gradient_norm,
                "iterations": candidate.report.iterations,
                "seed": candidate.seed,
                "min_separation_seen": candidate.report.min_separation_seen,
                "collision_flag": candidate.report.collision_flag,
                "out": out.map(|p| p.display().to_string()),
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(())
}

fn solve_from_init(
    spec: &ProblemSpec,
    rs: &ReducedSpace,
    init_path: &Path,
    seed: u64,
    tol: f64,
) -> Result<Candidate> {
    let init_orbit = OrbitFile::load(init_path)?;
    let init_spec = init_orbit.spec()?;
    let lp = init_orbit.trig_loop(&init_spec)?;
    if lp.n() != spec.n() || lp.d() != spec.d() || lp.k_max() != spec.trig_modes() {
        return Err(Error::DimensionMismatch {
            expected: (2 * spec.trig_modes() + 1) * spec.n() * spec.d(),
            got: lp.coeffs().len(),
        });
    }
    let z0: DVector<f64> = rs.reduce(lp.coeffs());
    let mut opts = crate::optimizer::MinimizeOptions {
        seed,
        ..Default::default()
    };
    opts.first_order = false;
    let (z, report) = match crate::optimizer::minimize(&z0, rs, spec, &opts) {
        Ok(ok) => ok,
        Err(Error::MaxIterations { best, .. }) => {
            (DVector::from_vec(best.0.clone()), best.1.clone())
        }
        Err(e) => return Err(e),
    };
    match newton_refine(&z, rs, spec, tol) {
        Ok((zr, mut r)) => {
            r.seed = seed;
            Ok(Candidate {
                seed,
                z: zr,
                report: r,
            })
        }
        Err(Error::NotInBasin { .. }) | Err(Error::SingularHessian { .. }) => Ok(Candidate {
            seed,
            z,
            report,
        }),
        Err(Error::MaxIterations { best, .. }) => Ok(Candidate {
            seed,
            z: DVector::from_vec(best.0.clone()),
            report: best.1.clone(),
        }),
        Err(e) => Err(e),
    }
}

fn cmd_floquet(orbit_path: &Path, steps: usize, mode: ModeArg, format: OutputFormat) -> Result<()> {
    let (_, spec, lp) = load_orbit(orbit_path)?;
    let opts = MonodromyOptions {
        steps,
        mode: match mode {
            ModeArg::Analytic => IntegrationMode::AnalyticOrbit,
            ModeArg::Shooting => IntegrationMode::Shooting,
        },
        ..Default::default()
    };
    let result = monodromy(&lp, &spec, &opts)?;
    let verdict = stability_verdict(&result, 0.05);
    match format {
        OutputFormat::Text => {
            println!(
                "max |multiplier|     {:.6}  ({})",
                result.max_modulus,
                if verdict.stable { "stable" } else { "unstable" }
            );
            println!("det residual         {:.3e}", result.det_residual);
            println!("symplectic residual  {:.3e}", result.symplectic_residual);
            println!("pairing residual     {:.3e}", result.pairing_residual);
            println!("integrator           {} / {} steps", result.mode.name(), result.steps);
            println!("multipliers:");
            for m in &result.multipliers {
                println!("  {:+.9} {:+.9}i   |.| = {:.9}", m.re, m.im, m.norm());
            }
        }
        OutputFormat::Json => {
            let value = serde_json::json!({
                "max_modulus": result.max_modulus,
                "stable": verdict.stable,
                "det_residual": result.det_residual,
                "symplectic_residual": result.symplectic_residual,
                "pairing_residual": result.pairing_residual,
                "mode": result.mode.name(),
                "steps": result.steps,
                "rescaled": result.rescaled,
                "log_scale": result.log_scale,
                "multipliers": result
                    .multipliers
                    .iter()
                    .map(|m| serde_json::json!({"re": m.re, "im": m.im, "modulus": m.norm()}))
                    .collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(())
}

fn parse_eps(eps: &str) -> Result<EpsZero> {
    if eps == "auto" {
        Ok(EpsZero::Auto)
    } else {
        eps.parse::<f64>()
            .map(EpsZero::Fixed)
            .map_err(|_| Error::SchemaError {
                context: format!("--eps-zero must be 'auto' or a number, got {eps:?}"),
            })
    }
}

fn morse_json(m: &MorseResult) -> serde_json::Value {
    serde_json::json!({
        "domain": m.domain.name(),
        "index": m.index,
        "max_negative": m.max_negative,
        "near_zero_count": m.near_zero_count,
        "eps_zero": m.eps_zero,
        "deflated_translations": m.deflated_translations,
        "deflated_symmetries": m.deflated_symmetries,
    })
}

fn print_morse_text(m: &MorseResult) {
    println!(
        "Morse ({})  index {}  max negative {}  near-zero {}  eps {:.3e}",
        m.domain.name(),
        m.index,
        m.max_negative
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "---".into()),
        m.near_zero_count,
        m.eps_zero
    );
}

fn cmd_morse(
    orbit_path: &Path,
    domain: DomainArg,
    grid: Option<usize>,
    eps: &str,
    format: OutputFormat,
) -> Result<()> {
    let (_, spec, lp) = load_orbit(orbit_path)?;
    let eps = parse_eps(eps)?;
    let mut results = Vec::new();
    if matches!(domain, DomainArg::Fundamental | DomainArg::Both) {
        let rs = equivariance_projector(&spec, true);
        let z: DVector<f64> = rs.reduce(lp.coeffs());
        results.push(morse_fundamental(&z, &rs, &spec, eps)?);
    }
    if matches!(domain, DomainArg::Period | DomainArg::Both) {
        let grid = grid.unwrap_or_else(|| spec.grid_size());
        results.push(morse_period(&lp, &spec, grid, eps)?);
    }
    match format {
        OutputFormat::Text => {
            for m in &results {
                print_morse_text(m);
            }
        }
        OutputFormat::Json => {
            let value = serde_json::Value::Array(results.iter().map(morse_json).collect());
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(())
}

fn cmd_report(orbit_path: &Path, format: OutputFormat) -> Result<()> {
    let (_, spec, lp) = load_orbit(orbit_path)?;
    let rs = equivariance_projector(&spec, true);
    let table = compute_report(&spec, &rs, &lp, &ReportOptions::default())?;
    match format {
        OutputFormat::Text => print!("{table}"),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&table.to_json())?),
    }
    Ok(())
}

fn cmd_export(
    orbit_path: &Path,
    samples: usize,
    format: ExportFormat,
    plane: &str,
    out: Option<&Path>,
) -> Result<()> {
    let (_, _, lp) = load_orbit(orbit_path)?;
    let plane = ProjectionPlane::parse(plane)?;
    let payload = match format {
        ExportFormat::Csv => export_csv(&lp, samples)?,
        ExportFormat::Svg => export_svg(&lp, samples, plane)?,
    };
    match out {
        Some(path) => std::fs::write(path, payload)?,
        None => print!("{payload}"),
    }
    Ok(())
}

/// Light sanity check that reduced-action plumbing is consistent; used by
/// integration tests that drive the CLI paths directly.
#[doc(hidden)]
pub fn reduced_state(spec: &ProblemSpec, lp: &crate::TrigLoop) -> Result<(f64, f64)> {
    let rs = equivariance_projector(spec, true);
    let z: DVector<f64> = rs.reduce(lp.coeffs());
    Ok((
        action_reduced(&z, &rs, spec)?,
        grad_action_reduced(&z, &rs, spec)?.norm(),
    ))
}
