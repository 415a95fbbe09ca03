use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mt_core::dominance::MarginRule;
use mt_core::{Money, TieBreak};

#[derive(Debug, Parser)]
#[command(name = "mt", version, about = "Marginal-price ticket auctions: clearing, simulation, verification, protocol")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Clear a bid file under the marginal-price rule and first-come-first-serve.
    Auction(AuctionArgs),
    /// Monte Carlo comparison of the two allocation systems.
    Simulate(SimulateArgs),
    /// Property verifiers; exit status 1 when a violation is found.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Run a scripted bidding window and print every transition.
    DemoProtocol(DemoArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TieBreakArg {
    Chrono,
    Lottery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MarginArg {
    /// The marginal bidder wins and pays its own bid (the clearing engine).
    Wins,
    /// A bid equal to the price goes unserved.
    Loses,
}

impl From<MarginArg> for MarginRule {
    fn from(m: MarginArg) -> Self {
        match m {
            MarginArg::Wins => MarginRule::WinsAtPrice,
            MarginArg::Loses => MarginRule::LosesAtPrice,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TieBreakArgs {
    #[arg(long, value_enum, default_value_t = TieBreakArg::Chrono)]
    pub tie_break: TieBreakArg,
    /// Seed for lottery tie-breaks and random instances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TieBreakArgs {
    pub fn tie_break(&self) -> TieBreak {
        match self.tie_break {
            TieBreakArg::Chrono => TieBreak::Chronological,
            TieBreakArg::Lottery => TieBreak::Lottery { seed: self.seed },
        }
    }
}

#[derive(Debug, Args)]
pub struct AuctionArgs {
    /// CSV with header `bidder_id,amount[,valuation]`, rows in arrival order.
    pub bids: PathBuf,
    #[arg(long, default_value = "0")]
    pub floor: Money,
    #[arg(long)]
    pub capacity: usize,
    #[command(flatten)]
    pub tie: TieBreakArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON scenario; omitted fields take the defaults (K=1000, 1.5x demand, floor 100, Normal(125, 25), 1000 runs).
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long)]
    pub floor: Option<Money>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub tie_break: Option<TieBreakArg>,
    /// Also write `summary.csv`, `summary.json` and `runs.csv` into this directory.
    #[arg(long)]
    pub summary_dir: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCmd {
    /// Exhaustive check that bidding one's valuation is never beaten on a grid.
    Dominance(DominanceArgs),
    /// Random-instance sweep of the rents, valuation and scalper orderings.
    Theorems(TheoremArgs),
    /// Whether any losing bidder would gain from buying at the scalper price.
    Scalper(ScalperArgs),
}

#[derive(Debug, Args)]
pub struct DominanceArgs {
    #[arg(long, default_value_t = 4)]
    pub bidders: usize,
    #[arg(long, default_value_t = 2)]
    pub capacity: usize,
    #[arg(long, default_value = "0")]
    pub floor: Money,
    /// Comma-separated grid, e.g. `0,5,10,15,20`.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15,20")]
    pub grid: Vec<Money>,
    #[arg(long, default_value = "10")]
    pub valuation: Money,
    #[arg(long, value_enum, default_value_t = MarginArg::Wins)]
    pub margin: MarginArg,
    /// Refuse enumerations above this many evaluations.
    #[arg(long, default_value_t = 50_000_000)]
    pub limit: u128,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    #[arg(long, default_value_t = 10_000)]
    pub instances: usize,
    #[arg(long, default_value_t = 50)]
    pub max_bidders: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1.0,1.1,1.5")]
    pub markups: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScalperArgs {
    /// Bid file; the valuation column defaults to the bid (truthful bidders).
    pub bids: PathBuf,
    #[arg(long, default_value = "0")]
    pub floor: Money,
    #[arg(long)]
    pub capacity: usize,
    #[arg(long, default_value_t = 1.2)]
    pub markup: f64,
    #[command(flatten)]
    pub tie: TieBreakArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// JSON script `{"params": {...}, "steps": [...]}`; the built-in example runs when omitted.
    pub script: Option<PathBuf>,
    /// Rebate per ticket for the built-in example.
    #[arg(long, default_value = "0")]
    pub rebate: Money,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MT_ADDR", default_value = "127.0.0.1")]
    pub addr: IpAddr,
    #[arg(long, env = "MT_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Persist accepted commands here and replay them on start.
    #[arg(long, env = "MT_JOURNAL")]
    pub journal: Option<PathBuf>,
}
