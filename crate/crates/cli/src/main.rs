mod commands;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

/// Matrix Freedman and Bennett tail bounds: evaluation, simulation,
/// empirical checks and certification of the underlying trace inequalities.
///
/// Exit status: 0 success, 1 a check failed (a bound or inequality was
/// contradicted), 2 usage, input or computation error.
#[derive(Debug, Parser)]
#[command(name = "matfreedman", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,

    /// Write results to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a tail bound.
    Bound(BoundArgs),
    /// Smallest level t whose Freedman bound is at most delta.
    Invert(InvertArgs),
    /// Simulate one trajectory and report λ_max(Y_k), λ_max(W_k) and S_k(θ).
    Simulate(SimulateArgs),
    /// Estimate a tail probability and compare it with the bounds.
    VerifyTail(TailArgs),
    /// Estimate tail probabilities over a grid of levels.
    Sweep(SweepArgs),
    /// Run certification suites.
    Certify(CertifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundKind {
    Freedman,
    Bennett,
    Rectangular,
    Master,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CgfChoice {
    /// (e^{Rθ} − Rθ − 1)/R²
    Freedman,
    /// θ²/2
    SubGaussian,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct BoundArgs {
    #[arg(long, value_enum, default_value = "freedman")]
    kind: BoundKind,
    /// Level t.
    #[arg(short = 't')]
    t: f64,
    /// Variance budget σ² (the `w` of the master bound).
    #[arg(long)]
    sigma2: f64,
    /// Almost-sure bound R on λ_max of each difference.
    #[arg(short = 'R', default_value_t = 1.0)]
    r: f64,
    /// Matrix dimension.
    #[arg(short = 'd')]
    d: Option<usize>,
    /// Rows of the rectangular martingale.
    #[arg(long)]
    d1: Option<usize>,
    /// Columns of the rectangular martingale.
    #[arg(long)]
    d2: Option<usize>,
    /// cgf bound for --kind master.
    #[arg(long, value_enum, default_value = "freedman")]
    cgf: CgfChoice,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct InvertArgs {
    /// Target failure probability.
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    sigma2: f64,
    #[arg(short = 'R', default_value_t = 1.0)]
    r: f64,
    #[arg(short = 'd', default_value_t = 1)]
    d: usize,
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Built-in kernel name (walk1d, rademacher2d, statewalk) or kernel file path.
    #[arg(long)]
    kernel: String,
    /// Number of steps. Required for built-ins; defaults to a file's horizon.
    #[arg(long = "K")]
    k: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// θ values tracked by S_k(θ); repeat or comma-separate.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    theta: Vec<f64>,
    /// Trajectory index within the master seed.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct TailArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(short = 't')]
    t: f64,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Comma-separated levels.
    #[arg(long = "t-grid", value_delimiter = ',', required = true)]
    t_grid: Vec<f64>,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lieb,
    Mgf,
    Supermartingale,
    HInequality,
    All,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    /// Random instances for the lieb and mgf suites.
    #[arg(long, default_value_t = 1000)]
    instances: u64,
    /// Required by the lieb and mgf suites.
    #[arg(long)]
    seed: Option<u64>,
    /// Certify this kernel instead of the built-in set (supermartingale suite).
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long = "K")]
    k: Option<usize>,
}

/// A command outcome: the document to emit and whether every check passed.
struct Outcome {
    document: output::Document,
    ok: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();

    let outcome = match commands::run(&cli.command, &argv) {
        Ok(o) => o,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&outcome.document, cli.format, cli.output.as_ref()) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    if outcome.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn emit(doc: &output::Document, format: Format, path: Option<&PathBuf>) -> io::Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            doc.write(format, &mut w)?;
            w.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            doc.write(format, &mut lock)?;
            lock.flush()
        }
    }
}
