use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvqkd_cli::{
    cmd_rates, cmd_simulate, cmd_sweep, cmd_threshold, load_spec, CommandError, Overrides,
};

#[derive(Parser, Debug)]
#[command(
    name = "cvqkd",
    version,
    about = "CV-QKD over time-dependent lossy lines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment spec (TOML with dotted keys)
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override session.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override run.repetitions
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Override run.threads (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalized decay rate, damping and transmissivity curves
    Rates,
    /// Monte Carlo protocol sessions with detection reports
    Simulate,
    /// Security threshold versus precision or hidden-tap position
    Threshold,
    /// Cartesian parameter sweep over the spec's [sweep] axes
    Sweep,
}

fn run(cli: &Cli) -> Result<bool, CommandError> {
    let Some(path) = &cli.spec else {
        return Err(CommandError::Config(cvqkd_cli::ConfigError::Invalid {
            key: "--spec".into(),
            message: "a spec file is required".into(),
        }));
    };
    let overrides = Overrides {
        seed: cli.seed,
        repetitions: cli.reps,
        threads: cli.threads,
    };
    let spec = load_spec(path, overrides)?;
    if let (false, Some(w)) = (cli.quiet, spec.session.delay_warning()) {
        eprintln!("warning: {w}");
    }
    match cli.command {
        Command::Rates => {
            let curve = cmd_rates(&spec, &cli.out)?;
            if !cli.quiet {
                eprintln!(
                    "wrote {} rows to {}",
                    curve.t.len(),
                    cli.out.join("rates.csv").display()
                );
            }
            Ok(true)
        }
        Command::Simulate => {
            let agg = cmd_simulate(&spec, &cli.out)?;
            if !cli.quiet {
                eprintln!(
                    "{} sessions, {} errors: clean {}, eve_present {}, inconclusive {} (detection rate {})",
                    agg.repetitions, agg.errors, agg.clean, agg.eve_present, agg.inconclusive, agg.detection_rate
                );
                for msg in &agg.error_messages {
                    eprintln!("error: {msg}");
                }
            }
            Ok(agg.errors == 0)
        }
        Command::Threshold => {
            let rows = cmd_threshold(&spec, &cli.out)?;
            if !cli.quiet {
                eprintln!(
                    "wrote {} rows to {}",
                    rows.len(),
                    cli.out.join("threshold.csv").display()
                );
            }
            Ok(true)
        }
        Command::Sweep => {
            let points = cmd_sweep(&spec, &cli.out)?;
            let failed = points.iter().any(|p| p.aggregate.errors > 0);
            if !cli.quiet {
                eprintln!(
                    "wrote {} sweep points to {}",
                    points.len(),
                    cli.out.join("sweep.csv").display()
                );
            }
            Ok(!failed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
