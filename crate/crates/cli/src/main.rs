use std::path::PathBuf;
use std::process::ExitCode;

use ailab_cli::{
    cmd_export_plots, cmd_gen_demos, cmd_oracle, cmd_sweep, cmd_train, ExperimentConfig, Overrides,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ailab", about = "Adversarial imitation learning lab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a demonstration set from the configured noise protocol.
    GenDemos {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single training configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the configured method x alpha x ratio x seed cross-product.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the theorem-verification battery.
    Oracle {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also run the negative control (intentionally wrong formula).
        #[arg(long)]
        self_test: bool,
    },
    /// Merge run record files into a plot-ready CSV.
    ExportPlots {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run record files to merge.
        files: Vec<PathBuf>,
    },
}

fn run() -> ailab_cli::Result<bool> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::GenDemos { config, seed, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let base = config.parent().unwrap_or_else(|| std::path::Path::new("."));
            cmd_gen_demos(&cfg, base, &Overrides { seed, out, ..Default::default() })?;
            Ok(true)
        }
        Cmd::Train { config, seed, out, method, alpha } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let base = config.parent().unwrap_or_else(|| std::path::Path::new("."));
            cmd_train(&cfg, base, &Overrides { seed, out, method, alpha })?;
            Ok(true)
        }
        Cmd::Sweep { config, seed, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let base = config.parent().unwrap_or_else(|| std::path::Path::new("."));
            cmd_sweep(&cfg, base, &Overrides { seed, out, ..Default::default() })?;
            Ok(true)
        }
        Cmd::Oracle { out, self_test } => {
            let (_, passed) = cmd_oracle(&out, self_test)?;
            Ok(passed)
        }
        Cmd::ExportPlots { out, files } => {
            cmd_export_plots(&files, &out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
