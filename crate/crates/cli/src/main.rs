mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Detection experiments for cross-shaped dual sonar arrays.
///
/// Settings come from `--config` (TOML), then `--set key=value`, then the
/// dedicated flags. Every run writes the resolved config next to its CSVs.
#[derive(Parser, Debug)]
#[command(name = "crossdetect", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override any config key, e.g. `--set scene.beta=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 = all cores. CROSSDETECT_THREADS caps this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Sensors per array.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Secondary snapshots per trial.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Share one secondary batch across all trials.
    #[arg(long, global = true)]
    pub reuse_secondary: bool,
    #[arg(long, global = true)]
    pub n_h0: Option<usize>,
    #[arg(long, global = true)]
    pub n_mc: Option<usize>,
    #[arg(long, global = true)]
    pub pfa: Option<f64>,
    /// Comma-separated detector ids.
    #[arg(long, visible_alias = "detector", global = true, value_delimiter = ',')]
    pub detectors: Vec<String>,
    /// `gaussian` or `k,nu=<shape>`.
    #[arg(long, global = true)]
    pub clutter: Option<String>,
    /// Covariance preset: baseline, correlated or decoupled.
    #[arg(long, global = true)]
    pub scene: Option<String>,
    /// m = 64, K = 256 and 10^4 trials per point.
    #[arg(long, global = true)]
    pub full_scale: bool,
    /// SNR grid `start:stop:step` in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Angle grid `min:max:step` in degrees.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Target angles `theta1,theta2` in degrees.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub target: Option<String>,
    /// Per-sensor SNR of angle maps in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub map_snr_db: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Empirical PFA versus threshold under H0.
    Pfa,
    /// PD versus SNR at the configured PFA.
    PdSnr,
    /// PD over the (theta1, theta2) grid at a fixed SNR.
    PdTheta {
        /// Added to map_snr_db.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_db: f64,
    },
    /// Thresholds at the configured PFA.
    Calibrate,
    /// 2TYL relative deviation per iteration on one secondary batch.
    Converge,
    /// Rao maps from clean and corrupted training windows.
    CorruptExp {
        /// Corrupted training snapshot, default K/2.
        #[arg(long)]
        index: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        target_snr_db: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        corrupt_snr_db: Option<f64>,
    },
    /// Write a synthetic ping cube.
    SynthCube {
        /// Cube file, default `<out>/cube.pcub`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        /// `bin:theta1:theta2:snr_db`, repeatable; replaces the configured targets.
        #[arg(long = "inject", allow_hyphen_values = true)]
        inject: Vec<String>,
        /// Clutter only.
        #[arg(long, conflicts_with = "inject")]
        no_targets: bool,
    },
    /// Sliding-window detection over a ping cube.
    DetectCube {
        #[arg(long)]
        cube: PathBuf,
        /// Combined with a known detector id, e.g. `--detector m-nmf-r --estimator tyl`.
        #[arg(long)]
        estimator: Option<String>,
        /// Training bins per cell.
        #[arg(long)]
        window_k: Option<usize>,
        #[arg(long)]
        guard: Option<usize>,
        /// shrink or skip.
        #[arg(long)]
        edge: Option<String>,
        /// Range bins to process, default all.
        #[arg(long, value_delimiter = ',')]
        bins: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
