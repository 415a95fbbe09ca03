mod args;
mod bids;
mod demo;
mod report;

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use mt_core::auction::{clear_fcfs, clear_marginal_price};
use mt_core::dominance::{check_weak_dominance_with_rule, DominanceScenario};
use mt_core::scalper::{check_scalper_rationality, ScalperMarket};
use mt_core::simulation::{run_all, summarize, ScenarioConfig};
use mt_core::theorems::{theorem_sweep, SweepConfig};
use mt_core::welfare::{economic_rents, excess_metrics, welfare_report};
use thiserror::Error;
use tracing_subscriber::EnvFilter;

use args::{Cli, Cmd, Format, VerifyCmd};
use report::{AuctionReport, ScalperReport, SystemReport};

#[derive(Debug, Error)]
enum CliError {
    /// A verifier found a counterexample, or a script step went wrong.
    #[error("{0}")]
    Violation(String),
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    fn io(context: impl std::fmt::Display) -> impl FnOnce(io::Error) -> Self {
        let context = context.to_string();
        move |source| CliError::Io { context, source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Input(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(CliError::io(path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(CliError::io(path.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(CliError::io("stdout")),
    }
}

fn system(outcome: mt_core::auction::AuctionOutcome, population: Option<&[mt_core::agents::BidderProfile]>) -> Result<SystemReport, CliError> {
    let welfare = population
        .map(|p| welfare_report(&outcome, p))
        .transpose()
        .map_err(CliError::input)?;
    Ok(SystemReport {
        rents: economic_rents(&outcome),
        outcome,
        welfare,
    })
}

fn cmd_auction(a: args::AuctionArgs) -> Result<(), CliError> {
    let rows = bids::parse_bids(open(&a.bids)?).map_err(CliError::input)?;
    let book = bids::book_from(&rows, a.floor, a.capacity).map_err(CliError::input)?;
    let population = bids::population(&rows);
    let mpa = system(clear_marginal_price(&book, a.tie.tie_break()), population.as_deref())?;
    let fcfs = system(clear_fcfs(&book), population.as_deref())?;
    let excess = match (&mpa.welfare, &fcfs.welfare) {
        (Some(m), Some(f)) => Some(excess_metrics(m, f)),
        _ => None,
    };
    let report = AuctionReport {
        excess_rents: mpa.rents - fcfs.rents,
        marginal_price: mpa,
        fcfs,
        excess,
    };
    emit(a.output.out.as_deref(), &report::auction(&report, a.output.format))
}

fn cmd_simulate(a: args::SimulateArgs) -> Result<(), CliError> {
    let mut config: ScenarioConfig = match &a.config {
        Some(path) => serde_json::from_reader(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => ScenarioConfig::default(),
    };
    if let Some(k) = a.capacity {
        config.capacity = k;
    }
    if let Some(floor) = a.floor {
        config.floor = floor;
    }
    if let Some(runs) = a.runs {
        config.runs = runs;
    }
    if let Some(seed) = a.seed {
        config.base_seed = seed;
    }
    if let Some(tb) = a.tie_break {
        config.tie_break = match tb {
            args::TieBreakArg::Chrono => mt_core::TieBreak::Chronological,
            args::TieBreakArg::Lottery => mt_core::TieBreak::Lottery { seed: config.base_seed },
        };
    }
    tracing::info!(capacity = config.capacity, runs = config.runs, "simulating");
    let runs = run_all(&config).map_err(CliError::input)?;
    let stats = summarize(&config, &runs);
    if let Some(dir) = &a.summary_dir {
        fs::create_dir_all(dir).map_err(CliError::io(dir.display()))?;
        let write = |name: &str, text: String| fs::write(dir.join(name), text).map_err(CliError::io(dir.join(name).display()));
        write("summary.csv", report::summary(&stats, Format::Csv))?;
        write("summary.json", report::summary(&stats, Format::Json))?;
        let mut per_run = csv::Writer::from_writer(Vec::new());
        for r in &runs {
            per_run.serialize(r).map_err(|e| CliError::Input(e.to_string()))?;
        }
        write("runs.csv", String::from_utf8(per_run.into_inner().expect("in-memory writer")).expect("utf-8"))?;
    }
    emit(a.output.out.as_deref(), &report::summary(&stats, a.output.format))
}

fn cmd_verify(v: VerifyCmd) -> Result<(), CliError> {
    match v {
        VerifyCmd::Dominance(a) => {
            let scenario = DominanceScenario {
                n_bidders: a.bidders,
                capacity: a.capacity,
                floor: a.floor,
                grid: a.grid,
                focal_valuation: a.valuation,
            };
            scenario.validate().map_err(CliError::input)?;
            scenario.ensure_feasible(a.limit).map_err(CliError::input)?;
            let verdict = check_weak_dominance_with_rule(&scenario, mt_core::TieBreak::Chronological, a.margin.into())
                .map_err(CliError::input)?;
            emit(a.output.out.as_deref(), &report::dominance(&verdict, a.output.format))?;
            if verdict.truthful_dominates {
                Ok(())
            } else {
                Err(CliError::Violation(format!(
                    "{} profitable deviations from truthful bidding",
                    verdict.violations.len()
                )))
            }
        }
        VerifyCmd::Theorems(a) => {
            let report = theorem_sweep(&SweepConfig {
                instances: a.instances,
                max_bidders: a.max_bidders,
                seed: a.seed,
                markups: a.markups,
            })
            .map_err(CliError::input)?;
            emit(a.output.out.as_deref(), &report::sweep(&report, a.output.format))?;
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::Violation("ordering violations found".into()))
            }
        }
        VerifyCmd::Scalper(a) => {
            let rows = bids::parse_bids(open(&a.bids)?).map_err(CliError::input)?;
            let book = bids::book_from(&rows, a.floor, a.capacity).map_err(CliError::input)?;
            let population: Vec<_> = rows
                .iter()
                .map(|r| mt_core::agents::BidderProfile {
                    id: r.bidder.clone(),
                    valuation: r.valuation.unwrap_or(r.amount),
                    strategy: mt_core::agents::Strategy::Fixed(r.amount),
                })
                .collect();
            let outcome = clear_marginal_price(&book, a.tie.tie_break());
            let market = ScalperMarket::new(a.markup, outcome.price).map_err(CliError::input)?;
            let decisions = check_scalper_rationality(&outcome, &population, &market).map_err(CliError::input)?;
            let buyers = decisions.iter().filter(|d| d.buys).count();
            let report = ScalperReport {
                price: outcome.price,
                markup: a.markup,
                decisions,
            };
            emit(a.output.out.as_deref(), &report::scalper(&report, a.output.format))?;
            if buyers == 0 {
                Ok(())
            } else {
                Err(CliError::Violation(format!("{buyers} losing bidders would buy from the scalper")))
            }
        }
    }
}

fn cmd_demo(a: args::DemoArgs) -> Result<(), CliError> {
    let script = match &a.script {
        Some(path) => serde_json::from_reader(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => demo::example_script(a.rebate),
    };
    let transcript = demo::run(&script).map_err(CliError::input)?;
    emit(a.output.out.as_deref(), &demo::render(&transcript, a.output.format))?;
    match transcript.unexpected.first() {
        None => Ok(()),
        Some(&step) => {
            let t = &transcript.transitions[step];
            Err(CliError::Violation(format!(
                "step {step}: {}",
                t.error.as_deref().unwrap_or("succeeded but an error was expected")
            )))
        }
    }
}

fn cmd_serve(a: args::ServeArgs) -> Result<(), CliError> {
    let state = match &a.journal {
        Some(dir) => mt_service::AppState::with_journal(mt_service::Journal::open(dir).map_err(CliError::input)?)
            .map_err(CliError::input)?,
        None => mt_service::AppState::new(),
    };
    let addr = SocketAddr::new(a.addr, a.port);
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io("runtime"))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(CliError::io(addr))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(CliError::io(addr))?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        mt_service::serve(listener, state, shutdown).await.map_err(CliError::io("server"))
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Auction(a) => cmd_auction(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Verify(v) => cmd_verify(v),
        Cmd::DemoProtocol(a) => cmd_demo(a),
        Cmd::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
