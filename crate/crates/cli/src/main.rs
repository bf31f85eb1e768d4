use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod figures;

/// Simulation and numerics for respondent-driven sampling on Erdős–Rényi graphs.
#[derive(Debug, Parser)]
#[command(name = "rds", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` file read before flags are applied.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Leave the timestamp line out of CSV headers.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Chain,
    Graph,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Chain => "chain",
            Engine::Graph => "graph",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Engine as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample trajectories of (A_n, B_n).
    Simulate(SimulateArgs),
    /// Solve the fluid limit and report t0 and z_c.
    Ode(OdeArgs),
    /// Hitting-time table u_{n0}(n, a).
    Hitprob(HitprobArgs),
    /// Survival table and seed survival curves.
    Survival(SurvivalArgs),
    /// Empirical against propagated fluctuation covariance.
    Clt(CltArgs),
    /// Law of large numbers and CLT reports together.
    Compare(CompareArgs),
    /// Regenerate every figure data set and the discrepancy reports.
    Figures(FiguresArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    /// Initial coupon-holder fraction; A0 = round(a0 · N), at least 1.
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Replicate r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Steps to simulate (default N).
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// Write each sampled graph as an edge list (graph engine only).
    #[arg(long)]
    pub dump_graph: bool,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HitprobArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    /// Start step; with --ell restricts the table to states reachable from (m, ell).
    #[arg(long, requires = "ell")]
    pub m: Option<usize>,
    #[arg(long, requires = "m")]
    pub ell: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    /// Seed curves are produced for c = 1..=cmax.
    #[arg(long)]
    pub cmax: Option<usize>,
    /// Horizon of the survival table and of the seed curves.
    #[arg(long)]
    pub n0: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CltArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Rate formulas for the propagated covariance: paper or oracle.
    #[arg(long)]
    pub rates: Option<String>,
    /// Checkpoints as fractions of t0, comma separated.
    #[arg(long)]
    pub checkpoints: Option<String>,
    /// Keep replicates with τ >= ⌊N t⌋ for this t (default: last checkpoint).
    #[arg(long)]
    pub condition_on: Option<f64>,
    /// Initial covariance as s11,s12,s22.
    #[arg(long)]
    pub sigma0: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<usize>,
    #[arg(long)]
    pub a0: Option<f64>,
    /// Population sizes, comma separated and increasing; the CLT report uses the largest.
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long)]
    pub checkpoints: Option<String>,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
