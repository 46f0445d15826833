use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsky_cli::{parse_config, run_experiment, CacheChoice, ExperimentConfig, ExperimentKind, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "qsky", version, about = "Quantum skyrmion spectra, quenches and Otto cycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues on the model grid.
    Spectrum(RunArgs),
    /// Topological index and winding parameter of the ground state.
    TopologySweep(RunArgs),
    /// Irreversible work of finite-rate DMI quenches.
    IrrworkSweep(RunArgs),
    /// Transition probabilities between start and end eigenbases.
    TransitionMatrix(RunArgs),
    /// Dynamical and geometric phase of an adiabatically followed level.
    Phases(RunArgs),
    /// Otto efficiency against the hot-bath temperature.
    EfficiencyCurve(RunArgs),
    /// Full Otto cycle report.
    OttoCycle(RunArgs),
    /// Print the fully defaulted configuration for an experiment.
    Defaults {
        #[arg(value_parser = parse_kind)]
        kind: ExperimentKind,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Treat any failed grid point as fatal.
    #[arg(long)]
    strict: bool,
    /// Neither read nor write the spectrum cache.
    #[arg(long)]
    no_cache: bool,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown experiment {s:?}"))
}

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let Some(path) = &args.config else {
        return Ok(ExperimentConfig::defaults(kind));
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if config.kind != kind {
        return Err(format!(
            "{} describes a {} experiment, not {kind}",
            path.display(),
            config.kind
        ));
    }
    Ok(config)
}

fn run(kind: ExperimentKind, args: RunArgs) -> ExitCode {
    let config = match load(kind, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        out_dir: args.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir)),
        threads: args.threads,
        strict: args.strict,
        cache: if args.no_cache {
            CacheChoice::Disabled
        } else {
            CacheChoice::Default
        },
    };
    match run_experiment(&config, &opts) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            for p in m.points.iter().filter(|p| p.message.is_some()) {
                eprintln!("warning: {}: {}", p.label, p.message.as_deref().unwrap_or_default());
            }
            eprintln!(
                "{} points, {} failed; {} spectra computed, {} cache hits; output in {}",
                m.points.len(),
                m.failures,
                m.spectra_computed,
                m.cache_hits,
                opts.out_dir.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(RunError::Strict { failures, manifest }) => {
            for p in manifest.points.iter().filter(|p| p.message.is_some()) {
                eprintln!("error: {}: {}", p.label, p.message.as_deref().unwrap_or_default());
            }
            eprintln!("error: {failures} grid point(s) failed (strict mode)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::TopologySweep(a) => (ExperimentKind::TopologySweep, a),
        Command::IrrworkSweep(a) => (ExperimentKind::IrrworkSweep, a),
        Command::TransitionMatrix(a) => (ExperimentKind::TransitionMatrix, a),
        Command::Phases(a) => (ExperimentKind::Phases, a),
        Command::EfficiencyCurve(a) => (ExperimentKind::EfficiencyCurve, a),
        Command::OttoCycle(a) => (ExperimentKind::OttoCycle, a),
        Command::Defaults { kind } => {
            print!("{}", ExperimentConfig::defaults(kind).to_toml());
            return ExitCode::SUCCESS;
        }
    };
    run(kind, args)
}
