//! Command-line front end for `treeharm-core`.
//!
//! Every command returns a JSON report and whether all of its exact checks
//! passed; the binary maps a failed check to exit status 1 and an error to 2.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::*;
pub use config::{RunConfig, SpaceKind, TreeSource};
pub use report::{annotate, Outcome};

#[derive(Debug, Parser)]
#[command(name = "treeharm", version, about = "Frequently universal harmonic functions on trees, in exact arithmetic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a tree document.
    GenTree(GenTreeArgs),
    /// Scheduling sequence report.
    Schedule(ScheduleArgs),
    /// Scheduled construction of a frequently universal function.
    Build(BuildArgs),
    /// Witness whose hit set has upper density close to 1.
    BuildX(BuildXArgs),
    /// Span inclusion check for combinations of a vector build.
    Span(SpanArgs),
    /// Hit set and density estimates of a stored function.
    Analyze(AnalyzeArgs),
    /// Harmonicity, martingale and measure checks on a stored function.
    Verify(VerifyArgs),
    /// Re-encode a stored function or write one of its boundary traces.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    /// Tree document; when absent a homogeneous tree is generated.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    /// Child weights as comma-separated fractions, e.g. `1/4,3/4`.
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SpaceArgs {
    #[arg(long, value_enum, default_value_t = SpaceKind::Scalar)]
    pub space: SpaceKind,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dense,
    Compact,
    Auto,
}

#[derive(Debug, Args)]
pub struct GenTreeArgs {
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    #[arg(long)]
    pub depth: usize,
    #[arg(long)]
    pub weights: Option<String>,
    /// Random weights (and, with --max-branching, random branching) from this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw each vertex's branching from 2..=this (needs --seed).
    #[arg(long)]
    pub max_branching: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 256)]
    pub horizon: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Depth budget; also the depth of a generated tree.
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub targets_seed: u64,
    /// Function file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Build log; printed to stdout when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Step-function document for the target.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Index into the dyadic target enumeration (used without --target).
    #[arg(long, default_value_t = 4)]
    pub target_index: u64,
}

#[derive(Debug, Args)]
pub struct BuildXArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 0)]
    pub targets_seed: u64,
    #[arg(long, default_value = "1/4")]
    pub epsilon: String,
    #[arg(long, default_value_t = 4)]
    pub m: u32,
    #[arg(long)]
    pub depth: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpanArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub targets_seed: u64,
    /// Comma-separated coefficients `a_1,...,a_s`, `a_s != 0`.
    #[arg(long)]
    pub coefficients: String,
    /// Scalar target for the combination; zero when absent.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub function: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 0)]
    pub targets_seed: u64,
    #[arg(long)]
    pub epsilon: String,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Comma-separated checkpoint horizons; default `⌈N/2⌉..=N`.
    #[arg(long)]
    pub checkpoints: Option<String>,
    /// Restrict hits to these indices (comma-separated).
    #[arg(long)]
    pub theta: Option<String>,
    /// Also write `n,distance,hit,density` rows here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub function: PathBuf,
    /// Also re-check the schedule memberships against this target seed.
    #[arg(long)]
    pub targets_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long)]
    pub function: PathBuf,
    /// Write `ω_n` at this level instead of the function.
    #[arg(long)]
    pub trace: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Dense)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::GenTree(a) => cmd_gen_tree(&a),
        Command::Schedule(a) => cmd_schedule(&a),
        Command::Build(a) => cmd_build(&a),
        Command::BuildX(a) => cmd_build_x(&a),
        Command::Span(a) => cmd_span(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Export(a) => cmd_export(&a),
    }
}
