use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_core::harness::config::{load_config, ConfigFile};
use irs_core::harness::experiment::{mean_by_point, preset, run_experiment, save_output, timing_path, ExperimentOutput, PRESETS};
use irs_core::harness::validate::run_validation;
use irs_core::reflection::partition_capacitance;
use irs_core::scenario::SystemConfig;
use irs_core::{Error, Result};

#[derive(Parser)]
#[command(name = "irs-sim", version, about = "Multi-band IRS beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scale {
    /// Configuration file (.json, or TOML otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the full-size deployment instead of the desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        #[command(flatten)]
        scale: Scale,
        /// Experiment defined in the config file, or a built-in preset.
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        out: PathBuf,
        /// Number of Monte-Carlo trials (overrides file and preset).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print the capacitance window of every band.
    Partition {
        #[command(flatten)]
        scale: Scale,
    },
    /// Run the invariant checks.
    Validate {
        #[command(flatten)]
        scale: Scale,
    },
    /// List the built-in experiments.
    List,
}

fn load(scale: &Scale) -> Result<(ConfigFile, SystemConfig)> {
    let file = match &scale.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let base = if scale.paper_scale { SystemConfig::paper_scale() } else { SystemConfig::default() };
    let mut cfg = file.system.apply(&base)?;
    if let Some(seed) = scale.seed {
        cfg.seed = seed;
    }
    Ok((file, cfg))
}

fn run(scale: &Scale, experiment: &str, out: &Path, trials: Option<usize>) -> Result<()> {
    let (file, cfg) = load(scale)?;
    let mut spec = match file.experiments.get(experiment) {
        Some(section) => section.to_spec(experiment),
        None => preset(experiment)?,
    };
    if let Some(t) = trials {
        spec.trials = t;
    }
    log::info!("running `{}` with {} trials, seed {}", spec.name, spec.trials, cfg.seed);
    let output = run_experiment(&spec, &cfg)?;
    save_output(&output, cfg.seed, out)?;
    if let ExperimentOutput::Results(rows) = &output {
        println!("{:>12}  {:<18} {:>14}", spec.sweep.name(), "scheme", "mean");
        for (v, scheme, mean) in mean_by_point(rows) {
            let unit = rows.iter().find(|r| r.scheme == scheme).map_or("", |r| r.unit);
            println!("{v:>12}  {scheme:<18} {mean:>14.6e} {unit}");
        }
        println!("timing written to {}", timing_path(out).display());
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scale, experiment, out, trials } => run(scale, experiment, out, *trials),
        Command::Partition { scale } => load(scale).and_then(|(_, cfg)| {
            let part = partition_capacitance(&cfg.circuit, &cfg.band_plan(), &cfg.sweep)?;
            print!("{}", part.table());
            Ok(())
        }),
        Command::Validate { scale } => load(scale).and_then(|(_, cfg)| {
            let checks = run_validation(&cfg);
            for c in &checks {
                println!("{} {:<34} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(Error::Numerical(format!("{failed} invariant check(s) failed")))
            }
        }),
        Command::List => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
