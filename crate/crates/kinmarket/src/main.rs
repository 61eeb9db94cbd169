use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kinmarket::experiment::{parse_list, preset, run, ExperimentConfig, Mode};
use kinmarket::Error;

/// Kinetic stock/bond market simulator.
///
/// The positional target is either an execution mode (simulate, price-ode,
/// fokker-planck, compare) applied to a --config file, or a built-in preset
/// (test1, test2, test3). Outputs are CSV files plus a params.echo that
/// reproduces the run when passed back through --config.
#[derive(Debug, Parser)]
#[command(name = "kinmarket", version, disable_help_subcommand = true)]
struct Cli {
    /// simulate | price-ode | fokker-planck | compare | test1 | test2 | test3
    target: String,
    /// Experiment configuration file (required with a mode target).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV results.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated seed list overriding the configuration.
    #[arg(long)]
    seeds: Option<String>,
    /// Override the number of market iterations.
    #[arg(long)]
    steps: Option<usize>,
    /// Integration step for the ODE modes, in market iterations.
    #[arg(long)]
    dt: Option<f64>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = match cli.target.as_str() {
        name @ ("test1" | "test2" | "test3") => {
            if cli.config.is_some() {
                return Err(Error::Config(
                    "pass either a preset name or a mode with --config, not both".into(),
                ));
            }
            preset(name)?
        }
        mode => {
            let mode = Mode::parse(mode)?;
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::Config(format!("mode `{}` needs --config", cli.target)))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut config = ExperimentConfig::parse(&text)?;
            config.mode = mode;
            config
        }
    };

    if let Some(seeds) = &cli.seeds {
        config.seeds = parse_list::<u64>("--seeds", seeds)?;
    }
    if let Some(steps) = cli.steps {
        config.steps = steps;
        // Keep the snapshot set valid under the new horizon.
        config.snapshot_times.retain(|&t| t <= steps);
        if config.snapshot_times.is_empty() {
            config.snapshot_times.push(steps);
        }
    }
    if let Some(dt) = cli.dt {
        config.dt = dt;
    }
    config.out = Some(cli.out.display().to_string());
    Ok(config)
}

fn main() -> ExitCode {
    // clap's own usage errors exit with 2 by default, which is reserved for
    // numerical failures here; remap them to the configuration exit code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };

    let config = match build_config(&cli) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("kinmarket: {e}");
            return ExitCode::from(1);
        }
    };

    match run(&config) {
        Ok(()) => {
            println!("outputs written to {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kinmarket: {e}");
            let code = match e {
                Error::Config(_)
                | Error::UnknownPreset(_)
                | Error::InvalidParameter(_)
                | Error::Io(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
