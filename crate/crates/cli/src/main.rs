//! `qrl`: batch runner for states, tests, measurement, complexity, entropy and oracle checks.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qrl_core::QrlError;

use report::Format;

#[derive(Debug)]
pub enum Failure {
    Core(QrlError),
    /// Unreadable or malformed input.
    Input(String),
    Io(String),
    /// The run completed but found a violation; the report has been written.
    Violation(String),
}

impl From<QrlError> for Failure {
    fn from(e: QrlError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(QrlError::Parse(_) | QrlError::Domain(_)) | Failure::Input(_) => 2,
            Failure::Core(QrlError::Capacity(_)) => 3,
            Failure::Core(QrlError::Invariant(_) | QrlError::Sampling(_)) | Failure::Violation(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Input(s) => write!(f, "input error: {s}"),
            Failure::Io(s) => write!(f, "i/o error: {s}"),
            Failure::Violation(s) => write!(f, "violation: {s}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "qrl", version, about = "Experiments on finite prefixes of qubit sequences")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build, check and dump states.
    State {
        #[command(subcommand)]
        cmd: StateCmd,
    },
    /// Build and evaluate randomness tests.
    Test {
        #[command(subcommand)]
        cmd: TestCmd,
    },
    /// Qubit-wise measurement.
    Measure {
        #[command(subcommand)]
        cmd: MeasureCmd,
    },
    /// Prefix-free machines and QK complexity.
    Qk {
        #[command(subcommand)]
        cmd: QkCmd,
    },
    /// Von Neumann entropy series and bounds.
    Entropy {
        #[command(subcommand)]
        cmd: EntropyCmd,
    },
    /// Randomized checks of the finite-dimensional lemmas.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCmd,
    },
}

#[derive(Args, Clone)]
pub struct Out {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Indented JSON and a summary on stderr.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Args, Clone)]
pub struct StateArg {
    /// State descriptor JSON.
    #[arg(long)]
    pub state: PathBuf,
    /// Overrides the descriptor's prefix length.
    #[arg(long = "N")]
    pub big_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StateKind {
    Tracial,
    Classical,
    Bernoulli,
    Chapter4,
    DiagonalF,
}

#[derive(Subcommand)]
enum StateCmd {
    /// Write a state descriptor.
    Build {
        #[arg(long, value_enum)]
        kind: StateKind,
        #[arg(long = "N")]
        n: usize,
        /// Bit string for `classical`.
        #[arg(long)]
        x: Option<String>,
        /// μ(0) for `bernoulli`.
        #[arg(long)]
        p: Option<f64>,
        /// f1 or f2 for `diagonal-f`.
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial-trace coherence of every level.
    Coherence {
        #[command(flatten)]
        state: StateArg,
        #[command(flatten)]
        out: Out,
    },
    /// Nonzero entries of one level.
    Dump {
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        level: usize,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Builder {
    Chapter4,
    Lln,
    Smb,
    Eigenmass,
}

#[derive(Args, Clone)]
pub struct TestArgs {
    #[arg(long, value_enum)]
    pub builder: Builder,
    /// Test index; for `eigenmass` the largest index searched.
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// δ as a fraction or decimal.
    #[arg(long)]
    pub delta: Option<String>,
    /// ε for `eigenmass`.
    #[arg(long)]
    pub eps: Option<String>,
    /// μ(0) for `smb`.
    #[arg(long)]
    pub p: Option<f64>,
    /// Last level for `lln` and `smb`.
    #[arg(long, default_value_t = 20)]
    pub n_max: usize,
    /// State to evaluate on; each builder has a default.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long = "N")]
    pub big_n: Option<usize>,
}

#[derive(Subcommand)]
enum TestCmd {
    /// Construct a test and report its members.
    Build {
        #[command(flatten)]
        args: TestArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Construct a test and evaluate it on a state.
    Run {
        #[command(flatten)]
        args: TestArgs,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Cylinder premeasure table up to a depth.
    Premeasure {
        #[command(flatten)]
        state: StateArg,
        /// standard, hadamard, periodic:FILE or explicit:FILE.
        #[arg(long, default_value = "standard")]
        basis: String,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Sample the first n outcomes.
    Sample {
        #[command(flatten)]
        state: StateArg,
        #[arg(long, default_value = "standard")]
        basis: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Expected frequency of ones per level, and a sampled frequency when seeded.
    Lln {
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum QkCmd {
    /// Prefix-freeness, Kraft sum and output orthonormality.
    Validate {
        #[arg(long)]
        machine: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// QK^ε of one level of a state.
    Eval {
        #[arg(long)]
        machine: PathBuf,
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Orthonormal sets of low complexity against ε^{-1}2^B.
    Count {
        #[arg(long)]
        machine: PathBuf,
        /// Qubit count.
        #[arg(long)]
        s: usize,
        /// Complexity budget B.
        #[arg(long)]
        b: f64,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum EntropyCmd {
    /// H(ρ_n), H/n, H−n and S_{m,n} per level.
    Report {
        #[command(flatten)]
        state: StateArg,
        /// Comma separated m values for the S_{m,n} columns.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        #[command(flatten)]
        out: Out,
    },
    /// H(ρ_n) ≤ 1 − m S_{m,n} + n on every materialized level.
    Bound {
        #[command(flatten)]
        state: StateArg,
        #[arg(long)]
        m: usize,
        #[command(flatten)]
        out: Out,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    Run {
        /// all, lina, lemma30, kron, dn or atomic.
        #[arg(long, default_value = "all")]
        check: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scales every trial count, in percent.
        #[arg(long, default_value_t = 100)]
        scale: usize,
        #[command(flatten)]
        out: Out,
    },
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    use commands::*;
    match cmd {
        Cmd::State { cmd } => match cmd {
            StateCmd::Build { kind, n, x, p, f, out } => state_build(kind, n, x, p, f, out),
            StateCmd::Coherence { state, out } => state_coherence(&state, &out),
            StateCmd::Dump { state, level, out } => state_dump(&state, level, &out),
        },
        Cmd::Test { cmd } => match cmd {
            TestCmd::Build { args, out } => test_cmd(&args, false, &out),
            TestCmd::Run { args, out } => test_cmd(&args, true, &out),
        },
        Cmd::Measure { cmd } => match cmd {
            MeasureCmd::Premeasure { state, basis, depth, out } => measure_premeasure(&state, &basis, depth, &out),
            MeasureCmd::Sample { state, basis, n, seed, out } => measure_sample(&state, &basis, n, seed, &out),
            MeasureCmd::Lln { state, seed, out } => measure_lln(&state, seed, &out),
        },
        Cmd::Qk { cmd } => match cmd {
            QkCmd::Validate { machine, out } => qk_validate(&machine, &out),
            QkCmd::Eval { machine, state, level, eps, out } => qk_eval(&machine, &state, level, eps, &out),
            QkCmd::Count { machine, s, b, eps, out } => qk_count(&machine, s, b, eps, &out),
        },
        Cmd::Entropy { cmd } => match cmd {
            EntropyCmd::Report { state, m, out } => entropy_report(&state, &m, &out),
            EntropyCmd::Bound { state, m, out } => entropy_bound(&state, m, &out),
        },
        Cmd::Oracle { cmd } => match cmd {
            OracleCmd::Run { check, seed, scale, out } => oracle_run(&check, seed, scale, &out),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(s) = std::env::var("QRL_MAX_DIM") {
        if let Err(e) = qrl_core::limits::Limits::parse(&s) {
            eprintln!("qrl: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qrl: {e}");
            ExitCode::from(e.code())
        }
    }
}
