//! `lowdeg`: verification suites, parameter sweeps, cloning tests and
//! statistical-query simulations over problem files.

mod evaluate;
mod report;
mod simulate;
mod sweep;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes shared by every subcommand.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "lowdeg", version, about = "Low-degree likelihood ratios and statistical dimension")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Problem file (ldlr, sda, sq-sim) or sweep file (sweep).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output path; standard output when absent. A JSON manifest is written
    /// next to it as `<out>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Largest null state space expanded into dense tables.
    #[arg(long, global = true, default_value_t = lowdeg::measures::DENSE_STATE_CAP as u64)]
    pub cap_states: u64,
    /// Write per-answer oracle transcripts to this CSV file (sq-sim).
    #[arg(long, global = true)]
    pub dump_transcripts: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a verification suite and print a JSON report.
    Verify {
        #[arg(value_enum)]
        suite: verify::Suite,
    },
    /// Evaluate quantities over a parameter grid given by `--spec`.
    Sweep,
    /// One `(d, k)`-LDLR row for the problem in `--spec`.
    Ldlr {
        #[arg(long)]
        m: u64,
        /// Per-sample degree; `inf` for no limit.
        #[arg(long, default_value = "inf")]
        d: String,
        #[arg(long)]
        k: u32,
        /// Pair budget when the prior must be sampled.
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// One SDA row for the problem in `--spec`.
    Sda {
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// Statistical checks of the cloning maps.
    CloneTest(simulate::CloneArgs),
    /// Simulate a query policy against a VSTAT oracle.
    SqSim(simulate::SqArgs),
}

/// A failure reported to the user with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<lowdeg::Error> for Failure {
    fn from(e: lowdeg::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::usage(format!("csv error: {e}"))
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let c = &cli.common;
    match cli.command {
        Command::Verify { suite } => verify::cmd_verify(suite, c),
        Command::Sweep => sweep::cmd_sweep(c),
        Command::Ldlr { m, d, k, budget } => evaluate::cmd_ldlr(c, m, &d, k, budget),
        Command::Sda { m, budget } => evaluate::cmd_sda(c, m, budget),
        Command::CloneTest(args) => simulate::cmd_clone_test(c, &args),
        Command::SqSim(args) => simulate::cmd_sq_sim(c, &args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
