//! Command-line entry point.

use brusslab::shell::{self, runner::Command, RunConfig};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "brusslab",
    version,
    about = "Spectral-Galerkin laboratory for a two-compartment cubic autocatalytic reaction-diffusion system: simulation, absorbing-set verification, Lyapunov analysis, and attractor dimension bounds.",
    after_help = "The BRUSSELATOR_THREADS environment variable caps the worker pool for ensembles and sweeps."
)]
struct Cli {
    /// Configuration file (sectioned key-value format); defaults apply when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Modes per axis override.
    #[arg(long, global = true)]
    modes: Option<usize>,
    /// Final time override.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Ensemble size override.
    #[arg(long, global = true)]
    ensemble: Option<usize>,
    /// Sobolev-Lieb-Thirring constant Q* override (no certified value
    /// exists; dimension outputs echo the value used).
    #[arg(long, global = true)]
    qstar: Option<f64>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate trajectories and write observable CSVs plus a final
    /// checkpoint per run.
    Simulate,
    /// Simulate an ensemble and compare tail maxima against the absorbing
    /// constants; exits nonzero when any verdict fails.
    VerifyBounds {
        /// Falsification injection NAME:FACTOR (repeatable), e.g. R0:0.01.
        #[arg(long)]
        shrink: Vec<String>,
        /// Scale every bound by the given factor.
        #[arg(long)]
        shrink_all: Option<f64>,
    },
    /// Check the discrete differential-inequality residuals on stored-state
    /// runs; exits nonzero when any residual exceeds its tolerance.
    Residuals,
    /// Lyapunov exponents and trace averages q_m along the flow.
    Lyapunov,
    /// Analytic attractor dimension bound with constant provenance.
    DimBound,
    /// Repeat verify-bounds over a grid of one physical parameter.
    Sweep,
    /// Evaluate every absorbing-set constant and write it with formulas.
    Constants,
}

fn load_config(cli: &Cli) -> Result<RunConfig, brusslab::Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| brusslab::Error::io(path.display().to_string(), e))?;
            shell::parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(modes) = cli.modes {
        cfg.modes = modes;
    }
    if let Some(t_end) = cli.t_end {
        cfg.integ.t_end = t_end;
    }
    if let Some(ensemble) = cli.ensemble {
        cfg.ensemble = ensemble;
    }
    if let Some(qstar) = cli.qstar {
        cfg.qstar = qstar;
    }

    if let Cmd::VerifyBounds { shrink, shrink_all } = &cli.command {
        for entry in shrink {
            let Some((name, factor)) = entry.split_once(':') else {
                return Err(brusslab::Error::InvalidArgument {
                    what: "--shrink",
                    message: format!("expected NAME:FACTOR, got {entry:?}"),
                });
            };
            let factor: f64 = factor
                .parse()
                .map_err(|_| brusslab::Error::InvalidArgument {
                    what: "--shrink",
                    message: format!("factor in {entry:?} is not a number"),
                })?;
            cfg.shrink.push((name.to_string(), factor));
        }
        if let Some(factor) = shrink_all {
            for name in [
                "R0", "R1", "R2", "K1", "K2", "K3", "C14", "C15", "C16", "C17", "C18", "Q1", "Q2",
            ] {
                cfg.shrink.push((name.to_string(), *factor));
            }
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::VerifyBounds { .. } => Command::VerifyBounds,
        Cmd::Residuals => Command::Residuals,
        Cmd::Lyapunov => Command::Lyapunov,
        Cmd::DimBound => Command::DimBound,
        Cmd::Sweep => Command::Sweep,
        Cmd::Constants => Command::Constants,
    };

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    match shell::run(command, &cfg) {
        Ok(outcome) => {
            print_summary(&outcome);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_summary(outcome: &shell::RunOutcome) {
    let report = &outcome.report;
    if let Some(verdicts) = &report.verdicts {
        println!("verdicts over {} run(s):", verdicts.runs);
        for v in &verdicts.aggregated {
            println!(
                "  [{}] {:<14} observed {:>13.6e}  bound {:>13.6e}  margin {:.3e}",
                if v.pass { "pass" } else { "FAIL" },
                v.name,
                v.observed,
                v.bound,
                v.margin_ratio
            );
        }
    }
    if let Some(env) = &report.envelope {
        println!(
            "envelope: max observed/envelope ratio {:.4} over {} run(s) [{}]",
            env.max_ratio,
            env.runs,
            if env.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(res) = &report.residuals {
        for (i, run) in res.per_run.iter().enumerate() {
            for e in &run.entries {
                println!(
                    "  run {i} [{}] {:<18} max residual {:>12.6e}  bound {:>12.6e}  excess {:>12.6e}",
                    if e.pass { "pass" } else { "FAIL" },
                    e.name,
                    e.max_residual,
                    e.bound_at_max,
                    e.max_excess
                );
            }
        }
    }
    if let Some(qm) = &report.qm {
        match qm.m_star {
            Some(m) => println!("empirical dimension bound m* = {m} (q_m < 0)"),
            None => println!("no m with q_m < 0 within m_max"),
        }
    }
    if let Some(dim) = &report.dimension {
        println!(
            "analytic bound: m = {}, d_H <= {}, d_F <= {} (Q* = {})",
            dim.analytic.m, dim.analytic.d_hausdorff, dim.analytic.d_fractal, dim.analytic.qstar
        );
        if let Some(w) = &dim.witness {
            println!(
                "witness bound (observed H1 tail): m = {}, d_H <= {}, d_F <= {}",
                w.m, w.d_hausdorff, w.d_fractal
            );
        }
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}
