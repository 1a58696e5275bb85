//! `calloss`: bounds tables, verification sweeps, Monte Carlo experiments and
//! the trigram comparison from the command line.
//!
//! Exit codes: 0 all assertions hold, 1 usage or parameter error, 2 an
//! assertion failed (named on stderr), 3 I/O failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "calloss",
    version,
    about = "Local losses under calibration constraints"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write the table here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form sample-complexity and gap bounds.
    Bounds(BoundsArgs),
    /// Brute-force sweeps over calibrated sets and identity checks.
    Verify(VerifyArgs),
    /// Counterexample reproductions.
    Demo(DemoArgs),
    /// Approximate-calibration construction from samples.
    Calibrate(CalibrateArgs),
    /// Monte Carlo concentration of the empirical loss.
    Concentrate(ConcentrateArgs),
    /// Monte Carlo check that the true distribution wins on samples.
    SampleProper(SampleProperArgs),
    /// Character-trigram comparison of plain and reweighted training.
    Trigram(TrigramArgs),
    /// Bregman divergences of the concave generators.
    Scoring(ScoringArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Loss names, comma separated (log, powlog:<p>, loglog, loglog:e, loglog:<k>, sqlog, linear, negsqrt).
    #[arg(long, value_delimiter = ',', default_value = "log")]
    pub loss: Vec<String>,
    /// Domain size; accepts forms like 1e6.
    #[arg(long = "N")]
    pub n: f64,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Constant in front of the sample count.
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// strict-properness, strong-properness, level-inverse-mean, mass-bound,
    /// kl-pinsker, bregman, l2, concavity, or all.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub suite: Vec<String>,
    /// Largest domain size in the sweeps (at most 12 for calibrated-set enumeration).
    #[arg(long = "N", default_value_t = 6)]
    pub n: usize,
    /// Random distributions (or pairs) per suite.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Largest even N for the l2 suite.
    #[arg(long, default_value_t = 2048)]
    pub l2_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// logloss-nonconcentration or linear-loss-improperness.
    #[arg(long)]
    pub name: String,
    #[arg(long = "N", default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: u64,
    #[arg(long, default_value_t = 1_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Require at least this reversal rate in the linear-loss demo.
    #[arg(long)]
    pub min_reversal: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Target distribution (JSON or TSV).
    #[arg(long)]
    pub p: PathBuf,
    /// Candidate distribution to repair.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub alpha1: f64,
    #[arg(long)]
    pub alpha2: f64,
    #[arg(long)]
    pub delta: f64,
    /// Scales the theoretical sample count.
    #[arg(long, default_value_t = 1.0)]
    pub multiplier: f64,
    /// Refuse to draw more samples than this per run.
    #[arg(long, default_value_t = 1e9)]
    pub max_samples: f64,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the repaired distribution (single run only).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairSource {
    /// Target distribution file; omit to draw a random one of size --N.
    #[arg(long)]
    pub p: Option<PathBuf>,
    /// Candidate distribution file; omit to coarsen p into --blocks sorted blocks.
    #[arg(long)]
    pub q: Option<PathBuf>,
    #[arg(long = "N", default_value_t = 1_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub blocks: usize,
}

#[derive(Debug, Args)]
pub struct ConcentrateArgs {
    #[arg(long, default_value = "loglog")]
    pub loss: String,
    #[command(flatten)]
    pub source: PairSource,
    #[arg(long)]
    pub m: u64,
    #[arg(long, default_value_t = 1_000)]
    pub trials: u64,
    #[arg(long)]
    pub gamma: f64,
    /// Require a deviation rate of at most this.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleProperArgs {
    #[arg(long, default_value = "log")]
    pub loss: String,
    #[command(flatten)]
    pub source: PairSource,
    #[arg(long)]
    pub m: u64,
    #[arg(long, default_value_t = 1_000)]
    pub trials: u64,
    /// Require a success rate of at least this.
    #[arg(long)]
    pub min_success: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrigramArgs {
    /// Base word list (word<TAB>frequency); defaults to the bundled English list.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Noise word list; defaults to the bundled French/German list.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[arg(long, default_value_t = 0.12)]
    pub noise_mass: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,1.4")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "log,loglog")]
    pub losses: Vec<String>,
    /// Pseudo-count added to every symbol of every context.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    /// Word samples to draw per model.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the cumulative-mass curve (rank, p_cum, one q_cum per alpha) as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// With --q, report divergences for this pair only.
    #[arg(long, requires = "q")]
    pub p: Option<PathBuf>,
    #[arg(long, requires = "p")]
    pub q: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000)]
    pub pairs: usize,
    #[arg(long = "N", default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(report) => {
            if let Err(e) = report.emit(cli.format, cli.output.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(3);
            }
            match &report.violation {
                Some(v) => {
                    eprintln!("assertion failed: {v}");
                    ExitCode::from(2)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
