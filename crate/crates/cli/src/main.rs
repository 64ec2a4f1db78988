//! `hsr-attn` — seeded attention experiments with CSV output.
//!
//! CSV goes to `--out` (stdout when omitted); human-readable summaries go to
//! stderr. Exit code 0 only when asserted suites pass; benchmark timings are
//! reported, never asserted.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hsr_attn::analysis::CalibrationMode;
use hsr_attn::hsr::ReporterBackend;
use hsr_attn_cli::{
    run_bench, run_equivalence, run_error_vs_r, run_gen_demo, run_sparsity, ExperimentSpec,
    RunOutput,
};

#[derive(Parser)]
#[command(
    name = "hsr-attn",
    about = "Experiment runner for half-space-reported sparse attention",
    long_about = "Runs seeded synthetic attention experiments and emits plot-ready CSV.\n\
                  Defaults are desk scale (n <= 2^16, d <= 8). The env var\n\
                  HSR_ATTN_THREADS caps the worker pool."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense-vs-sparse ReLU equivalence and backend set equality (asserted at 1e-10)
    Equivalence(SpecArgs),
    /// Fired-count statistics per n against the 2*n^(4/5) bound, plus the log-log slope
    Sparsity(SpecArgs),
    /// Softmax truncation error and error bounds over the --r list
    #[command(name = "error-vs-r")]
    ErrorVsR(SpecArgs),
    /// Autoregressive generation replayed against a dense oracle (asserted at 1e-10)
    #[command(name = "gen-demo")]
    GenDemo(SpecArgs),
    /// Cost counters for dense vs sparse; wall-clock reported on stderr only
    Bench(SpecArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// sigma_a = 4*(1 + ln(m/delta)/d)^(1/2)*sigma_q*sigma_k (guaranteed bound)
    Conservative,
    /// sigma_a = sigma_q*sigma_k (realized score deviation)
    Calibrated,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    /// Exact linear scan (the oracle)
    Linear,
    /// Median-split spatial tree with bounding-box pruning
    Tree,
}

#[derive(Args)]
struct SpecArgs {
    /// Context lengths, comma separated (each >= 2)
    #[arg(long = "n", value_delimiter = ',', default_values_t = vec![1024usize, 4096, 16384])]
    n: Vec<usize>,
    /// Feature dimension
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Query rows (equivalence, sparsity, bench) or generation steps (gen-demo)
    #[arg(long, default_value_t = 64)]
    m: usize,
    /// ReLU power alpha
    #[arg(long, default_value_t = 1)]
    alpha: u32,
    /// Top-r values, comma separated (error-vs-r; each in [1, first n])
    #[arg(long = "r", value_delimiter = ',', default_values_t = vec![4usize, 16, 64, 256])]
    r: Vec<usize>,
    /// Base seed; all sampling derives from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Query entry standard deviation
    #[arg(long = "sigma-q", default_value_t = 1.0)]
    sigma_q: f64,
    /// Key entry standard deviation
    #[arg(long = "sigma-k", default_value_t = 1.0)]
    sigma_k: f64,
    /// Failure probability for the conservative calibration
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Threshold calibration mode
    #[arg(long, value_enum, default_value_t = ModeArg::Calibrated)]
    mode: ModeArg,
    /// Reporting backend for the sparse paths
    #[arg(long, value_enum, default_value_t = BackendArg::Tree)]
    backend: BackendArg,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// FMAT1 file with K and V records for gen-demo; created from the seed when missing
    #[arg(long)]
    kv: Option<PathBuf>,
}

impl From<SpecArgs> for ExperimentSpec {
    fn from(args: SpecArgs) -> Self {
        ExperimentSpec {
            n_list: args.n,
            d: args.d,
            m: args.m,
            alpha: args.alpha,
            r_list: args.r,
            seed: args.seed,
            sigma_q: args.sigma_q,
            sigma_k: args.sigma_k,
            delta: args.delta,
            mode: match args.mode {
                ModeArg::Conservative => CalibrationMode::Conservative,
                ModeArg::Calibrated => CalibrationMode::Calibrated,
            },
            backend: match args.backend {
                BackendArg::Linear => ReporterBackend::LinearScan,
                BackendArg::Tree => ReporterBackend::SpatialTree,
            },
            kv: args.kv,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out_path): (hsr_attn::Result<RunOutput>, Option<PathBuf>) = match cli.command {
        Command::Equivalence(args) => {
            let out = args.out.clone();
            (run_equivalence(&args.into()), out)
        }
        Command::Sparsity(args) => {
            let out = args.out.clone();
            (run_sparsity(&args.into()), out)
        }
        Command::ErrorVsR(args) => {
            let out = args.out.clone();
            (run_error_vs_r(&args.into()), out)
        }
        Command::GenDemo(args) => {
            let out = args.out.clone();
            (run_gen_demo(&args.into()), out)
        }
        Command::Bench(args) => {
            let out = args.out.clone();
            (run_bench(&args.into()), out)
        }
    };
    let output = match result {
        Ok(output) => output,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    match &out_path {
        Some(path) => {
            if let Err(err) = std::fs::write(path, output.csv.as_bytes()) {
                eprintln!("error: cannot write {}: {err}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{}", output.csv),
    }
    eprint!("{}", output.summary);
    if output.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
