//! Command-line front end: `run`, `spectrum`, `advise` and `validate`.
//!
//! Exit codes: 0 on success, 1 for unreadable or invalid input, 2 for runtime failures
//! such as an unstable integration.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{load_config, MethodKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::integrators::{integrate, RunOptions};
use crate::linear_analysis::{transport_collision_spectrum, Recommendation};
use crate::output::{
    distribution_csv, distribution_name, snapshot_csv, snapshot_name, spectrum_csv, write_file,
};
use crate::phase_space::{compute_moments, truncated_cells, DistributionField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bgk", version, about = "Discrete-velocity BGK solver with projective integration")]
pub struct Cli {
    /// Suppress progress and informational output.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write moment snapshots.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated output times; overrides the configuration.
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<f64>>,
        /// Also write the full distribution at every snapshot.
        #[arg(long)]
        dump_distribution: bool,
    },
    /// Eigenvalues of the linearized transport-collision operator per Fourier mode.
    Spectrum {
        config: PathBuf,
        /// Comma-separated wavenumbers; all of `0..I` by default.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<usize>>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Suggest projective integration parameters for the configured ε and grid.
    Advise { config: PathBuf },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Parse { .. } | Error::Validation { .. } => EXIT_INPUT,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(path: &PathBuf) -> Result<ScenarioConfig> {
    load_config(path).map_err(|e| match e {
        // an unreadable config is an input problem, not a runtime one
        Error::Io { path, source } => Error::Parse {
            path: path.display().to_string(),
            message: source.to_string(),
        },
        e => e,
    })
}

pub fn execute(cli: &Cli) -> Result<()> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Validate { config } => {
            let cfg = load(config)?;
            if !quiet {
                println!(
                    "{}: ok ({}, Dx={}, Dv={})",
                    config.display(),
                    cfg.scenario,
                    cfg.space.cells.len(),
                    cfg.velocity.dim
                );
            }
            Ok(())
        }
        Command::Advise { config } => {
            let cfg = load(config)?;
            let phase = cfg.phase()?;
            let advice = cfg.advice(&phase)?;
            let p = advice.params;
            println!("inner_dt = {:e}", p.inner_dt);
            println!("inner_steps = {}", p.inner_steps);
            println!("outer_dt = {:e}", p.outer_dt);
            println!("max_amplification = {:.12}", advice.max_amplification);
            println!("margin = {:e}", advice.margin);
            println!(
                "worst = mode {} eigenvalue {:e}{:+e}i",
                advice.worst_mode, advice.worst_eigenvalue.re, advice.worst_eigenvalue.im
            );
            match advice.recommendation {
                Recommendation::Projective => println!("recommendation = projective"),
                Recommendation::DirectRk4 => println!(
                    "recommendation = direct rk4 (outer step cannot usefully exceed the inner chain)"
                ),
            }
            Ok(())
        }
        Command::Spectrum {
            config,
            modes,
            output_dir,
        } => {
            let cfg = load(config)?;
            let phase = cfg.phase()?;
            let basis = cfg.basis(&phase)?;
            let setup = cfg.spectrum_setup(&phase, &basis);
            let modes = modes
                .clone()
                .or_else(|| cfg.spectrum.modes.clone())
                .unwrap_or_else(|| (0..setup.cells).collect());
            if let Some(&m) = modes.iter().find(|&&m| m >= setup.cells) {
                return Err(Error::Validation {
                    path: config.display().to_string(),
                    errors: vec![format!("--modes: wavenumber {m} must be < {}", setup.cells)],
                });
            }
            let spectra = transport_collision_spectrum(cfg.epsilon, &setup, &modes)?;
            let dir = output_dir.clone().unwrap_or(cfg.output_dir.clone());
            let path = dir.join("spectrum.csv");
            write_file(&path, &spectrum_csv(&spectra))?;
            if !quiet {
                println!("wrote {} ({} modes)", path.display(), spectra.len());
            }
            Ok(())
        }
        Command::Run {
            config,
            output_dir,
            snapshot_times,
            dump_distribution,
        } => {
            let mut cfg = load(config)?;
            if let Some(times) = snapshot_times {
                cfg.snapshot_times = Some(times.clone());
                let bad: Vec<String> = cfg
                    .violations()
                    .into_iter()
                    .filter(|(k, _)| k == "snapshot_times")
                    .map(|(k, m)| format!("--{}: {m}", k.replace('_', "-")))
                    .collect();
                if !bad.is_empty() {
                    return Err(Error::Validation {
                        path: config.display().to_string(),
                        errors: bad,
                    });
                }
            }
            let dir = output_dir.clone().unwrap_or(cfg.output_dir.clone());
            run_scenario(&cfg, &dir, *dump_distribution, quiet)
        }
    }
}

fn run_scenario(cfg: &ScenarioConfig, dir: &std::path::Path, dump: bool, quiet: bool) -> Result<()> {
    let phase = cfg.phase()?;
    let f0 = cfg.initial_field(phase.clone())?;
    let op = cfg.operator(phase.clone())?;
    let (method, advice) = cfg.resolve_method(&phase)?;

    let truncated = truncated_cells(&compute_moments(&f0)?, &phase.velocity);
    if !truncated.is_empty() {
        eprintln!(
            "warning: {} cells have Maxwellian tails beyond v_max = {} (first: cell {})",
            truncated.len(),
            phase.velocity.v_max(),
            truncated[0]
        );
    }
    if let (Some(a), false) = (&advice, quiet) {
        eprintln!(
            "advised inner_dt = {:e}, inner_steps = {}, outer_dt = {:e}",
            a.params.inner_dt, a.params.inner_steps, a.params.outer_dt
        );
        if a.recommendation == Recommendation::DirectRk4 {
            eprintln!("note: projective step gives no gain at this epsilon; consider kind = \"rk4\"");
        }
    }
    if cfg.method.kind == MethodKind::Fe && !quiet {
        eprintln!("note: forward Euler is only stable for dt below epsilon");
    }

    let mut opts = RunOptions::new(cfg.t_end);
    opts.snapshot_times = cfg.snapshot_times();
    opts.progress_every = if quiet { None } else { cfg.progress_every };

    let mut index = 0;
    let state = integrate(&op, f0.into_values(), &method, &opts, |t, y| {
        let field = DistributionField::new(phase.clone(), y.to_vec())?;
        write_file(&dir.join(snapshot_name(index)), &snapshot_csv(t, &field)?)?;
        if dump {
            write_file(&dir.join(distribution_name(index)), &distribution_csv(t, &field))?;
        }
        index += 1;
        Ok(())
    })?;
    if !quiet {
        println!(
            "t = {} reached in {} outer steps ({} fallback), {} rhs evaluations, {:.3} s; {} snapshots in {}",
            state.time,
            state.outer_steps,
            state.fallback_steps,
            state.rhs_evaluations,
            state.elapsed,
            index,
            dir.display()
        );
    }
    Ok(())
}
