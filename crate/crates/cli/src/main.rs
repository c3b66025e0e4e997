use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use waves_cli::{parse_config, run, ExperimentKind};

/// Runs one experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "waves", version)]
struct Args {
    kind: ExperimentKind,

    #[arg(long)]
    config: PathBuf,

    /// Overrides `experiment.output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match parse_config(&args.config, Some(args.kind)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = args.output_dir {
        cfg = cfg.with_output_dir(dir);
    }
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    match run(&cfg) {
        Ok(m) => {
            for r in &m.reports {
                println!("{:<20} {}", r.name, if r.passed { "pass" } else { "FAIL" });
            }
            if let Some(e) = &m.error {
                eprintln!("error: {e}");
            }
            println!("manifest: {}", cfg.experiment.output_dir.join("run.json").display());
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
