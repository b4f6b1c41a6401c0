use clap::{Parser, Subcommand};
use oamp::cli_io::{parse_config, run_experiment, EXAMPLE_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

/// Sweep runner for the relay and single-transform experiments.
#[derive(Parser, Debug)]
#[command(name = "oamp-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Experiment file (TOML).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the file's `output` key, then `results`.
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(short, long)]
    workers: Option<usize>,
    #[arg(long, default_value = "info")]
    log_level: log::LevelFilter,
    /// Keep complete point files from an earlier run.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print an annotated example experiment file.
    ExampleConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    if let Some(Command::ExampleConfig) = cli.command {
        print!("{EXAMPLE_CONFIG}");
        return ExitCode::SUCCESS;
    }
    let Some(path) = cli.config else {
        eprintln!("error: --config is required (see `oamp-sim example-config`)");
        return ExitCode::from(2);
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", path.display());
            return ExitCode::FAILURE;
        }
    };
    let mut spec = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let out = cli.out_dir.or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
    match run_experiment(&spec, &out, cli.resume) {
        Ok(s) => {
            log::info!(
                "{} rows in {} ({} point files, {} reused)",
                s.rows,
                s.combined.display(),
                s.point_files.len(),
                s.reused
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
