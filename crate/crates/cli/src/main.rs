//! `gqms`: command-line front end for graph quantum magic squares.
//!
//! Exit codes: 0 success or pass, 1 semantic failure (invalid square,
//! rejected certificate, exhausted search, non-optimal solve), 2 usage or
//! input error.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gqms_core::separation::ZeVariant;

/// Default tolerance when neither `--tol` nor `GQMS_TOL` is given.
const DEFAULT_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "gqms", version, about = "Graph quantum magic squares: verification, pencils and separation certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the magic relations, block positivity, class flags and graph commutation of a square.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        graph: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Commutant dimension of a graph's adjacency matrix and the GQMS parameter count.
    Commutant {
        #[arg(long)]
        graph: String,
    },
    /// Export the monic linear pencil of M^(n)_s or M^(G)_s.
    Pencil {
        /// Graph the squares commute with; omit for plain squares of size `--n`.
        #[arg(long)]
        graph: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1)]
        s: usize,
        #[arg(long, value_enum, default_value_t = PencilFormat::Json)]
        format: PencilFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a C4-commuting square separated from the matrix convex hull of permutation squares.
    Counterexample(SearchArgs),
    /// Re-validate a certificate file using direct arithmetic only.
    Certify {
        #[arg(long)]
        check: PathBuf,
    },
    /// Average a square over the rotations (c4) or symmetries (d4) of the 4-cycle.
    Average {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Group::C4)]
        group: Group,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random quantum magic square by operator Sinkhorn scaling.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rank of the Gaussian factors before scaling (defaults to s).
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dual separation certificate for a given square.
    Separate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = ZeVariant::RowOnly)]
        variant: ZeVariant,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-row dilation probe: search for nontrivial dilations along random directions.
    Probe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        graph: Option<String>,
        #[arg(long, default_value_t = 20)]
        directions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Standalone semidefinite programs in SDPA sparse format.
    Sdp {
        #[command(subcommand)]
        command: SdpCommand,
    },
}

#[derive(Subcommand, Debug)]
enum SdpCommand {
    /// Solve an SDPA `.dat-s` problem.
    Solve {
        file: PathBuf,
        /// Write the primal blocks as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, default_value_t = 5000)]
    budget: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long, default_value_t = ZeVariant::RowOnly)]
    variant: ZeVariant,
    /// Rank of the sampled squares before averaging (defaults to s).
    #[arg(long)]
    rank: Option<usize>,
    /// Skip the C4 averaging; certificates then refer to plain squares.
    #[arg(long)]
    no_average: bool,
    /// Coordinate perturbation steps per candidate.
    #[arg(long, default_value_t = 0)]
    refine: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PencilFormat {
    Sdpa,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Group {
    C4,
    D4,
}

/// Outcome of a subcommand that ran to completion.
enum Verdict {
    Pass,
    Fail,
}

fn tolerance(flag: Option<f64>) -> Result<f64, String> {
    if let Some(t) = flag {
        return check_tol(t);
    }
    match std::env::var("GQMS_TOL") {
        Ok(v) => check_tol(v.trim().parse().map_err(|_| format!("GQMS_TOL={v:?} is not a number"))?),
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn check_tol(t: f64) -> Result<f64, String> {
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(format!("tolerance must be positive, got {t}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("gqms: {e}");
            ExitCode::from(2)
        }
    }
}
