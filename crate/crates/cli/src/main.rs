use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlsx_cli::{run_pipeline, run_sweep, CliError, RunConfig, Verb};

#[derive(Parser)]
#[command(name = "nlsx", version, about = "Standing waves of the radial 3D NLS: spectra, FGR and instability runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Multiplies the number of grid points.
    #[arg(long, global = true, default_value_t = 1.0)]
    grid_scale: f64,

    /// Seed for the randomized checks, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the standing-wave profile.
    Profile,
    /// Profile plus the discrete spectrum of the linearization.
    Spectrum,
    /// Spectrum plus kernel analysis and the stability verdict.
    Verdict,
    /// Verdict plus Fermi Golden Rule coefficients.
    Fgr,
    /// FGR plus the reduced mode dynamics from the configured seed.
    Reduce,
    /// Evolve the (optionally perturbed) standing wave.
    Evolve,
    /// Full instability experiment against the reduced model.
    Experiment,
    /// Verdict stage over a frequency range.
    Sweep,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = load(cli)?;
    let verb = match cli.command {
        Command::Profile => Verb::Profile,
        Command::Spectrum => Verb::Spectrum,
        Command::Verdict => Verb::Verdict,
        Command::Fgr => Verb::Fgr,
        Command::Reduce => Verb::Reduce,
        Command::Evolve => Verb::Evolve,
        Command::Experiment => Verb::Experiment,
        Command::Sweep => {
            let s = run_sweep(&cfg, cli.grid_scale)?;
            return Ok(format!(
                "sweep: {} rows, {} failed, output in {}",
                s.rows,
                s.failures,
                cfg.output_dir.display()
            ));
        }
    };
    let s = run_pipeline(&cfg, verb, cli.grid_scale)?;
    let verdict = s
        .verdict
        .and_then(|v| serde_json::to_value(v).ok())
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_else(|| "-".into());
    Ok(format!(
        "omega {} nodes {}: verdict {verdict}, {} files in {}",
        s.omega,
        s.node_count,
        s.artifacts.len(),
        cfg.output_dir.display()
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
