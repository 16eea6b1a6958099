//! Command-line experiments: dataset generation, single-order solving,
//! stream simulation, layout and strategy comparisons, plan validation and
//! LP export.

pub mod commands;
pub mod scenario;

use adds_core::catalog::Layout;
use adds_core::sequencing::Strategy;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "adds", version, about = "Drug retrieval sequencing for automated dispensing racks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario file (TOML); defaults to the paper-5 rack and the synthetic benchmark.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Experiment seed; the dataset seed for `generate`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Restrict to one layout.
    #[arg(long, global = true, value_enum)]
    pub layout: Option<LayoutArg>,
    /// Restrict to one strategy.
    #[arg(long, global = true, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    /// Rack preset.
    #[arg(long, global = true)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::A => Layout::A,
            LayoutArg::B => Layout::B,
        }
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

#[derive(Debug, Args, Clone)]
pub struct OrderArgs {
    /// Order id; the first order of the stream by default.
    #[arg(long)]
    pub order: Option<u32>,
    /// Mean sorting time; the first grid value by default.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Sorting time standard deviation; the first grid value by default.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Bins waiting at the I/O points, oldest first, e.g. `12,-`
    /// (`-` marks a free point).
    #[arg(long)]
    pub trailing: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic inventory and order stream.
    Generate,
    /// Solve one order and print the plan.
    Solve(OrderArgs),
    /// Run the order stream for one layout and strategy over the grid.
    Simulate,
    /// Both layouts on the same stream over the (mu, sigma) grid.
    CompareLayouts,
    /// All strategies on the same stream over the grid.
    CompareStrategies,
    /// Check a plan bundle written by `solve`.
    Validate {
        /// Plan bundle (JSON).
        bundle: PathBuf,
    },
    /// Write the 0-1 model of one order in LP format.
    ExportLp {
        #[command(flatten)]
        order: OrderArgs,
        /// Add closing arcs back into the trailing nodes.
        #[arg(long)]
        closed_tour: bool,
    },
}

pub use commands::run;
