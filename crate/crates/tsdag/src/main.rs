use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tsdag::cli::{
    self, DiscoverArgs, EvaluateArgs, ExportDotArgs, GenerateArgs, Overrides, SweepArgs,
};
use tsdag::datagen::Family;
use tsdag::metrics::GraphMode;
use tsdag::model::Variant;

#[derive(Parser)]
#[command(
    name = "tsdag",
    about = "Temporal causal graph discovery from multivariate time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset and its ground-truth graph
    Generate {
        /// Dataset family: synth1|synth2|synth1-lagged|synth2-lagged
        #[arg(long)]
        family: Family,
        /// Rows to emit after burn-in
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise scale multiplier
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
        /// Retarget the noise scale to this average SNR before generating
        #[arg(long)]
        snr: Option<f64>,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Output ground-truth graph path
        #[arg(long)]
        truth: PathBuf,
    },
    /// Learn a causal graph from a CSV time series
    Discover {
        #[arg(long)]
        input: PathBuf,
        /// Output graph JSON path (training log lands next to it)
        #[arg(long)]
        out: PathBuf,
        /// Maximum lag (window width minus one)
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Edge pruning threshold
        #[arg(long)]
        threshold: Option<f64>,
        /// Sparsity penalty weight
        #[arg(long)]
        lambda: Option<f64>,
        /// Model variant: conv2d|conv1d
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Score a predicted graph against a ground-truth graph
    Evaluate {
        /// Predicted graph JSON
        #[arg(long)]
        input: PathBuf,
        /// Ground-truth graph JSON
        #[arg(long)]
        truth: PathBuf,
        /// Comparison mode: full|summary
        #[arg(long, default_value = "summary")]
        mode: String,
        /// Optional JSON report path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run discovery across several seeds and report the best result
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Comma-separated seed list
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "summary")]
        mode: String,
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a graph file as DOT
    ExportDot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "summary")]
        mode: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<GraphMode, String> {
    match s {
        "full" => Ok(GraphMode::Full),
        "summary" => Ok(GraphMode::Summary),
        other => Err(format!("unknown mode {other:?} (full|summary)")),
    }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            family,
            length,
            seed,
            noise_scale,
            burn_in,
            snr,
            out,
            truth,
        } => cli::cmd_generate(&GenerateArgs {
            family,
            length,
            seed,
            noise_scale,
            burn_in,
            snr,
            out_data: out,
            out_truth: truth,
        })
        .map_err(|e| e.to_string()),
        Command::Discover {
            input,
            out,
            lag,
            config,
            seed,
            threshold,
            lambda,
            variant,
        } => {
            let ov = Overrides {
                seed,
                lag,
                threshold,
                lambda,
                variant,
            };
            let cfg = cli::resolve_config(config.as_deref(), &ov).map_err(|e| e.to_string())?;
            cli::cmd_discover(&DiscoverArgs {
                input,
                out,
                config: cfg,
            })
            .map(|_| ())
            .map_err(|e| e.to_string())
        }
        Command::Evaluate {
            input,
            truth,
            mode,
            out,
        } => {
            let mode = parse_mode(&mode)?;
            cli::cmd_evaluate(&EvaluateArgs {
                pred: input,
                truth,
                mode,
                out,
            })
            .map(|_| ())
            .map_err(|e| e.to_string())
        }
        Command::Sweep {
            input,
            truth,
            seeds,
            mode,
            lag,
            config,
            threshold,
            lambda,
            variant,
            out,
        } => {
            let mode = parse_mode(&mode)?;
            let ov = Overrides {
                seed: None,
                lag,
                threshold,
                lambda,
                variant,
            };
            let cfg = cli::resolve_config(config.as_deref(), &ov).map_err(|e| e.to_string())?;
            cli::cmd_sweep(&SweepArgs {
                input,
                truth,
                seeds,
                mode,
                config: cfg,
                out,
            })
            .map(|_| ())
            .map_err(|e| e.to_string())
        }
        Command::ExportDot { input, mode, out } => {
            let mode = parse_mode(&mode)?;
            cli::cmd_export_dot(&ExportDotArgs { input, mode, out }).map_err(|e| e.to_string())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
