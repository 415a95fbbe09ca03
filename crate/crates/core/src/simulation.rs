//! Seeded Monte Carlo comparison of the marginal price auction against
//! first-come-first-serve on identical truthful populations.
//!
//! Each run draws `round(demand_ratio * capacity)` bidders, shuffles their
//! arrival order, clears both mechanisms on the same book and records the
//! excess (marginal price minus first-come) rents, winner valuation and
//! consumer surplus. Per-run seeds are a fixed mix of the base seed and the
//! run index, so runs can execute in any order or in parallel and the summary
//! is bit-identical.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{sample_population, strategy_bid, AgentError, ValuationDistribution};
use crate::auction::{clear_fcfs, clear_marginal_price, BidBook, TieBreak};
use crate::money::Money;
use crate::welfare::{excess_metrics, report_with, Valuations};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("runs must be at least 1")]
    ZeroRuns,
    #[error("demand_ratio must be positive and finite, got {0}")]
    BadDemandRatio(f64),
    #[error("demand_ratio {ratio} with capacity {capacity} yields no bidders")]
    NoBidders { ratio: f64, capacity: usize },
    #[error("floor {0} is negative")]
    NegativeFloor(Money),
    #[error("dist: {0}")]
    Distribution(#[from] AgentError),
}

/// Order in which sampled bidders arrive for first-come-first-serve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalOrder {
    /// Uniformly random permutation per run.
    #[default]
    Shuffled,
    /// Arrival follows sampling order (useful with empirical populations).
    AsSampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub capacity: usize,
    pub demand_ratio: f64,
    pub floor: Money,
    pub dist: ValuationDistribution,
    pub runs: usize,
    pub base_seed: u64,
    pub tie_break: TieBreak,
    pub arrival: ArrivalOrder,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            capacity: 1000,
            demand_ratio: 1.5,
            floor: Money::whole(100),
            dist: ValuationDistribution::Normal { mean: 125.0, stddev: 25.0 },
            runs: 1000,
            base_seed: 20_240_101,
            tie_break: TieBreak::Chronological,
            arrival: ArrivalOrder::Shuffled,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.capacity == 0 {
            return Err(SimulationError::ZeroCapacity);
        }
        if self.runs == 0 {
            return Err(SimulationError::ZeroRuns);
        }
        if !(self.demand_ratio > 0.0 && self.demand_ratio.is_finite()) {
            return Err(SimulationError::BadDemandRatio(self.demand_ratio));
        }
        if self.bidders() == 0 {
            return Err(SimulationError::NoBidders {
                ratio: self.demand_ratio,
                capacity: self.capacity,
            });
        }
        if self.floor.is_negative() {
            return Err(SimulationError::NegativeFloor(self.floor));
        }
        self.dist.validate()?;
        Ok(())
    }

    /// Population size per run.
    pub fn bidders(&self) -> usize {
        (self.demand_ratio * self.capacity as f64).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub ticket_price: Money,
    pub excess_rents: Money,
    pub excess_valuation: Money,
    pub excess_consumer_surplus: Money,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub min: Money,
    pub mean: f64,
    pub max: Money,
    pub per_person_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub capacity: usize,
    pub bidders: usize,
    pub floor: Money,
    pub runs: usize,
    pub ticket_price: MetricSummary,
    pub excess_rents: MetricSummary,
    pub excess_valuation: MetricSummary,
    pub excess_consumer_surplus: MetricSummary,
}

impl SummaryStats {
    /// `(row label, summary)` in table order.
    pub fn rows(&self) -> [(&'static str, &MetricSummary); 4] {
        [
            ("ticket_price", &self.ticket_price),
            ("excess_economic_rents", &self.excess_rents),
            ("excess_valuation", &self.excess_valuation),
            ("excess_consumer_surplus", &self.excess_consumer_surplus),
        ]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "metric,min,mean,max,per_person_mean")?;
        for (name, m) in self.rows() {
            writeln!(out, "{name},{},{:.4},{},{:.4}", m.min, m.mean, m.max, m.per_person_mean)?;
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_seed(base_seed: u64, run_index: usize) -> u64 {
    mix64(mix64(base_seed) ^ (run_index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn run_once(config: &ScenarioConfig, run_index: usize) -> Result<RunMetrics, SimulationError> {
    config.validate()?;
    Ok(run_validated(config, run_index))
}

fn run_validated(config: &ScenarioConfig, run_index: usize) -> RunMetrics {
    let seed = run_seed(config.base_seed, run_index);
    let population = sample_population(&config.dist, config.bidders(), seed).expect("validated config");

    let mut arrival: Vec<usize> = (0..population.len()).collect();
    if config.arrival == ArrivalOrder::Shuffled {
        arrival.shuffle(&mut ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x5348_5546_464c_4521)));
    }

    let mut book = BidBook::new(config.floor, config.capacity).expect("validated config");
    for i in arrival {
        let bidder = &population[i];
        let bid = strategy_bid(bidder);
        // a negative valuation never bids
        if !bid.is_negative() {
            book.submit(bidder.id.clone(), bid).expect("nonnegative bid");
        }
    }

    let tie_break = match config.tie_break {
        TieBreak::Lottery { seed } => TieBreak::Lottery {
            seed: run_seed(seed, run_index),
        },
        chrono => chrono,
    };
    let mpa = clear_marginal_price(&book, tie_break);
    let fcfs = clear_fcfs(&book);
    let valuations = Valuations::new(&population);
    let excess = excess_metrics(
        &report_with(&mpa, &valuations).expect("winners come from the population"),
        &report_with(&fcfs, &valuations).expect("winners come from the population"),
    );
    RunMetrics {
        ticket_price: mpa.price,
        excess_rents: excess.excess_rents,
        excess_valuation: excess.excess_valuation,
        excess_consumer_surplus: excess.excess_consumer_surplus,
    }
}

/// Every run's metrics, in run-index order.
pub fn run_all(config: &ScenarioConfig) -> Result<Vec<RunMetrics>, SimulationError> {
    config.validate()?;
    Ok((0..config.runs)
        .into_par_iter()
        .map(|i| run_validated(config, i))
        .collect())
}

pub fn run_many(config: &ScenarioConfig) -> Result<SummaryStats, SimulationError> {
    let runs = run_all(config)?;
    Ok(summarize(config, &runs))
}

pub fn summarize(config: &ScenarioConfig, runs: &[RunMetrics]) -> SummaryStats {
    let capacity = config.capacity;
    let metric = |get: fn(&RunMetrics) -> Money, per_person: bool| {
        let mut min = Money::from_cents(i64::MAX);
        let mut max = Money::from_cents(i64::MIN);
        let mut total: i128 = 0;
        for run in runs {
            let v = get(run);
            min = min.min(v);
            max = max.max(v);
            total += v.cents() as i128;
        }
        let mean = total as f64 / runs.len().max(1) as f64 / 100.0;
        MetricSummary {
            min,
            mean,
            max,
            per_person_mean: if per_person { mean / capacity as f64 } else { mean },
        }
    };
    SummaryStats {
        capacity,
        bidders: config.bidders(),
        floor: config.floor,
        runs: runs.len(),
        // a ticket price is already per person
        ticket_price: metric(|r| r.ticket_price, false),
        excess_rents: metric(|r| r.excess_rents, true),
        excess_valuation: metric(|r| r.excess_valuation, true),
        excess_consumer_surplus: metric(|r| r.excess_consumer_surplus, true),
    }
}
