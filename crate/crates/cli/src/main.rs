//! `ocnn`: generate data, train and score one-class detectors, evaluate
//! score files, and check the quantile example table.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocnn_core::Error;

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "ocnn", version, about = "One-class neural network anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the isotropic Gaussian benchmark as train.csv and test.csv.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long = "out")]
        out: PathBuf,
        #[arg(long)]
        n_normal: Option<usize>,
        #[arg(long)]
        n_anomalous: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        sigma_normal: Option<f64>,
        #[arg(long)]
        sigma_anomalous: Option<f64>,
    },
    /// Fit a detector and write the model document (and training history).
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        out: PathBuf,
        /// History table; defaults to `<out>.history.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Score a data file with a trained model.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        out: PathBuf,
    },
    /// Build a report from a labeled score file, or run the synthetic
    /// pipeline over several seeds.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        /// Score file from `score` (not used with --seeds).
        #[arg(long = "in", required_unless_present = "seeds")]
        input: Option<PathBuf>,
        #[arg(long = "out")]
        out: PathBuf,
        /// Seeds for the full pipeline, `a..b` or `a,b,c`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
        /// Also write the histogram as a table.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long)]
        n_normal: Option<usize>,
        #[arg(long)]
        n_anomalous: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Recompute the nine-row bias objective table and compare.
    PaperCheck {
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run manifest; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Label column name (default: a column named `label` if present).
    #[arg(long)]
    label_col: Option<String>,
}

#[derive(Args)]
struct ModelFlags {
    /// ocnn | frozen-ocsvm | kde | iforest | ae-recon
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Autoencoder epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    inner_epochs: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Mini-batch size; 0 for full batch.
    #[arg(long)]
    batch: Option<usize>,
    /// none | minmax | l1gcn
    #[arg(long)]
    scale: Option<String>,
    /// Autoencoder widths after the input, e.g. `32,16`.
    #[arg(long, value_delimiter = ',')]
    ae_codes: Option<Vec<usize>>,
}

impl ModelFlags {
    fn apply(self, cfg: &mut FileConfig) {
        let flags = FileConfig {
            method: self.method,
            nu: self.nu,
            hidden: self.hidden,
            epochs: self.epochs,
            inner_epochs: self.inner_epochs,
            max_iters: self.max_iters,
            tol: self.tol,
            lr: self.lr,
            batch: self.batch,
            scale: self.scale,
            ae_codes: self.ae_codes,
            ..FileConfig::default()
        };
        *cfg = std::mem::take(cfg).overlay(&flags);
    }
}

fn base_config(common: &Common) -> Result<FileConfig, Error> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    Ok(file.overlay(&FileConfig {
        seed: common.seed,
        label_col: common.label_col.clone(),
        ..FileConfig::default()
    }))
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Synth {
            common,
            out,
            n_normal,
            n_anomalous,
            dim,
            sigma_normal,
            sigma_anomalous,
        } => {
            let cfg = base_config(&common)?.overlay(&FileConfig {
                n_normal,
                n_anomalous,
                dim,
                sigma_normal,
                sigma_anomalous,
                ..FileConfig::default()
            });
            commands::synth(&cfg, &out)?;
        }
        Command::Train {
            common,
            model,
            input,
            out,
            history,
        } => {
            let mut cfg = base_config(&common)?;
            model.apply(&mut cfg);
            let history = history.unwrap_or_else(|| commands::default_history_path(&out));
            commands::train(&cfg, &input, &out, &history)?;
        }
        Command::Score {
            common,
            model,
            input,
            out,
        } => {
            let cfg = base_config(&common)?;
            commands::score_cmd(&cfg, &model, &input, &out)?;
        }
        Command::Eval {
            common,
            model,
            input,
            out,
            seeds,
            bins,
            histogram,
            n_normal,
            n_anomalous,
            dim,
        } => {
            let mut cfg = base_config(&common)?.overlay(&FileConfig {
                bins,
                n_normal,
                n_anomalous,
                dim,
                ..FileConfig::default()
            });
            model.apply(&mut cfg);
            match (seeds, input) {
                (Some(seeds), _) => commands::eval_seeds(&cfg, &commands::parse_seeds(&seeds)?, &out)?,
                (None, Some(input)) => commands::eval_scores(&cfg, &input, &out, histogram.as_deref())?,
                (None, None) => unreachable!("clap requires --in without --seeds"),
            }
        }
        Command::PaperCheck { tol } => return commands::table_check(tol),
    }
    Ok(true)
}

/// 2 for invalid input, 3 for I/O, 4 for divergence, 1 otherwise.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::Divergence { .. } => 4,
        Error::Seed { source, .. } => exit_code(source),
        Error::DimensionMismatch { .. }
        | Error::InvalidParameter { .. }
        | Error::Empty(_)
        | Error::Parse { .. }
        | Error::Format(_)
        | Error::Json(_) => 2,
        Error::NonFinite(_) => 1,
    }
}

fn report(err: &Error) {
    eprintln!("error: {err}");
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}
