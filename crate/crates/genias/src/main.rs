use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use genias::cli::{self, Overrides};

#[derive(Parser)]
#[command(
    name = "genias",
    about = "Latent-perturbation anomaly generation and evaluation for time series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Declarative run config (TOML). Flags override file values.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Force the fully serialized, bit-reproducible execution mode.
    #[arg(long)]
    deterministic: bool,
    /// Output directory (relative paths resolve under GENIAS_OUT_ROOT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sigma_prior: Option<f64>,
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    portion: Option<f64>,
    /// deviation | length | none
    #[arg(long)]
    patch_mode: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            deterministic: self.deterministic,
            out: self.out.clone(),
            sigma_prior: self.sigma_prior,
            delta_min: self.delta_min,
            delta_max: self.delta_max,
            tau: self.tau,
            portion: self.portion,
            patch_mode: self.patch_mode.clone(),
            epochs: self.epochs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the generator and write checkpoint plus epoch log.
    Train(CommonArgs),
    /// Generate and patch anomalies from a trained checkpoint.
    Inject {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Compute generation-quality and detection reports.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory holding injected.gts / injected.mask / manifest.
        #[arg(long)]
        injected: PathBuf,
    },
    /// Run the self-contained numerical verification grid.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Residual tolerance for the optimal-variance checks.
        #[arg(long, default_value_t = 1e-6)]
        lemma1_tolerance: f64,
    },
    /// Emit score histograms and patching overlays as SVG files.
    Plot {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        injected: PathBuf,
    },
    /// Run a config grid (sigma_prior x tau) and aggregate the reports.
    Sweep(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(common) => {
            cli::load_config(&common.config, &common.overrides()).and_then(|c| cli::cmd_train(&c).map(|_| ()))
        }
        Command::Inject { common, checkpoint } => {
            cli::load_config(&common.config, &common.overrides())
                .and_then(|c| cli::cmd_inject(&c, checkpoint))
        }
        Command::Evaluate {
            common,
            checkpoint,
            injected,
        } => cli::load_config(&common.config, &common.overrides())
            .and_then(|c| cli::cmd_evaluate(&c, checkpoint, injected)),
        Command::Verify {
            common,
            lemma1_tolerance,
        } => cli::load_config(&common.config, &common.overrides())
            .and_then(|c| cli::cmd_verify(&c, *lemma1_tolerance)),
        Command::Plot {
            common,
            checkpoint,
            injected,
        } => cli::load_config(&common.config, &common.overrides())
            .and_then(|c| cli::cmd_plot(&c, checkpoint, injected)),
        Command::Sweep(common) => cli::load_config(&common.config, &common.overrides())
            .and_then(|c| cli::cmd_sweep(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code as u8)
        }
    }
}
