//! Randomized sweep over small truthful instances checking the orderings the
//! marginal price auction guarantees against first-come-first-serve (rents
//! and winner valuation never lower) and that no loser profits from a
//! scalper charging at least the clearing price.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{BidderProfile, Strategy};
use crate::auction::{clear_fcfs, clear_marginal_price, BidBook, BidderId, TieBreak};
use crate::money::Money;
use crate::scalper::{check_scalper_rationality, ScalperMarket};
use crate::welfare::{report_with, Valuations};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub instances: usize,
    /// Largest population drawn; each instance has 2..=max_bidders bidders.
    pub max_bidders: usize,
    pub seed: u64,
    pub markups: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            instances: 10_000,
            max_bidders: 50,
            seed: 1,
            markups: vec![1.0, 1.1, 1.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("max_bidders must be at least 2, got {0}")]
    TooFewBidders(usize),
    #[error("markup {0} must be finite and at least 1")]
    BadMarkup(f64),
}

/// One randomly generated instance, enough to reproduce a failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub valuations: Vec<Money>,
    pub floor: Money,
    pub capacity: usize,
    pub tie_break: TieBreak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepViolation {
    pub property: String,
    pub instance: Instance,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub instances: usize,
    pub losers_checked: u64,
    pub rents_violations: usize,
    pub valuation_violations: usize,
    pub scalper_violations: usize,
    /// First few violations, for diagnosis.
    pub examples: Vec<SweepViolation>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.rents_violations == 0 && self.valuation_violations == 0 && self.scalper_violations == 0
    }
}

const KEPT_EXAMPLES: usize = 10;

pub fn random_instance(rng: &mut impl Rng, max_bidders: usize) -> Instance {
    let n = rng.random_range(2..=max_bidders);
    let capacity = rng.random_range(1..n);
    // coarse whole-unit values so that ties at the margin and at the floor are common
    let valuations = (0..n).map(|_| Money::whole(rng.random_range(0..=60))).collect();
    let floor = Money::whole(rng.random_range(0..=40));
    let tie_break = if rng.random_bool(0.5) {
        TieBreak::Chronological
    } else {
        TieBreak::Lottery { seed: rng.random() }
    };
    Instance {
        valuations,
        floor,
        capacity,
        tie_break,
    }
}

pub fn theorem_sweep(config: &SweepConfig) -> Result<SweepReport, SweepError> {
    if config.max_bidders < 2 {
        return Err(SweepError::TooFewBidders(config.max_bidders));
    }
    if let Some(&bad) = config.markups.iter().find(|m| !(**m >= 1.0 && m.is_finite())) {
        return Err(SweepError::BadMarkup(bad));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = SweepReport {
        instances: config.instances,
        ..SweepReport::default()
    };
    let note = |report: &mut SweepReport, property: &str, instance: &Instance, detail: String| {
        if report.examples.len() < KEPT_EXAMPLES {
            report.examples.push(SweepViolation {
                property: property.to_string(),
                instance: instance.clone(),
                detail,
            });
        }
    };

    for _ in 0..config.instances {
        let instance = random_instance(&mut rng, config.max_bidders);
        let population: Vec<BidderProfile> = instance
            .valuations
            .iter()
            .enumerate()
            .map(|(i, &v)| BidderProfile {
                id: BidderId::new(format!("b{i}")),
                valuation: v,
                strategy: Strategy::Truthful,
            })
            .collect();
        let mut book = BidBook::new(instance.floor, instance.capacity).expect("generated instance is valid");
        for p in &population {
            book.submit(p.id.clone(), p.valuation).expect("nonnegative valuations");
        }
        let mpa = clear_marginal_price(&book, instance.tie_break);
        let fcfs = clear_fcfs(&book);
        let valuations = Valuations::new(&population);
        let m = report_with(&mpa, &valuations).expect("winners come from the population");
        let f = report_with(&fcfs, &valuations).expect("winners come from the population");

        if m.rents < f.rents {
            report.rents_violations += 1;
            note(&mut report, "rents", &instance, format!("{} < {}", m.rents, f.rents));
        }
        if m.winner_valuation_sum < f.winner_valuation_sum {
            report.valuation_violations += 1;
            note(
                &mut report,
                "winner_valuation",
                &instance,
                format!("{} < {}", m.winner_valuation_sum, f.winner_valuation_sum),
            );
        }
        for &markup in &config.markups {
            let market = ScalperMarket::new(markup, mpa.price).expect("markup checked");
            let decisions = check_scalper_rationality(&mpa, &population, &market).expect("price matches");
            report.losers_checked += decisions.len() as u64;
            for d in decisions.iter().filter(|d| d.buys) {
                report.scalper_violations += 1;
                note(
                    &mut report,
                    "scalper",
                    &instance,
                    format!("{} would gain {} at markup {markup}", d.bidder, d.surplus_at_scalper),
                );
            }
        }
    }
    Ok(report)
}
