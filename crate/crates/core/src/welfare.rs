//! Welfare accounting over auction outcomes.
//!
//! Rents are seller revenue (`price * units sold`). Consumer surplus is the
//! winners' total valuation less what they paid. The excess metrics compare a
//! marginal price outcome against the first-come-first-serve outcome on the
//! same population.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::BidderProfile;
use crate::auction::{AuctionOutcome, BidderId};
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WelfareError {
    #[error("winner `{0}` is not in the population")]
    UnknownBidder(BidderId),
    #[error("rebate {rebate} per ticket is outside 0..={ceiling} (price minus floor)")]
    RebateOutOfRange { rebate: Money, ceiling: Money },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub price: Money,
    pub floor: Money,
    pub rents: Money,
    pub winner_valuation_sum: Money,
    pub consumer_surplus: Money,
    pub units_sold: usize,
    /// Cumulative per-ticket rebate already transferred back to winners.
    pub rebate_per_ticket: Money,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub excess_rents: Money,
    pub excess_valuation: Money,
    pub excess_consumer_surplus: Money,
}

/// Valuation lookup keyed by bidder id.
pub struct Valuations<'a>(HashMap<&'a BidderId, Money>);

impl<'a> Valuations<'a> {
    pub fn new(population: &'a [BidderProfile]) -> Self {
        Valuations(population.iter().map(|p| (&p.id, p.valuation)).collect())
    }

    pub fn get(&self, id: &BidderId) -> Result<Money, WelfareError> {
        self.0
            .get(id)
            .copied()
            .ok_or_else(|| WelfareError::UnknownBidder(id.clone()))
    }
}

pub fn economic_rents(outcome: &AuctionOutcome) -> Money {
    outcome.price.times(outcome.winners.len())
}

pub fn total_winner_valuation(
    outcome: &AuctionOutcome,
    population: &[BidderProfile],
) -> Result<Money, WelfareError> {
    winner_valuation_with(outcome, &Valuations::new(population))
}

pub fn consumer_surplus(
    outcome: &AuctionOutcome,
    population: &[BidderProfile],
) -> Result<Money, WelfareError> {
    Ok(total_winner_valuation(outcome, population)? - economic_rents(outcome))
}

/// Full report for one outcome.
pub fn welfare_report(
    outcome: &AuctionOutcome,
    population: &[BidderProfile],
) -> Result<WelfareReport, WelfareError> {
    report_with(outcome, &Valuations::new(population))
}

/// Same as [`welfare_report`] with a prebuilt lookup, for callers that
/// evaluate several outcomes over one population.
pub fn report_with(outcome: &AuctionOutcome, valuations: &Valuations<'_>) -> Result<WelfareReport, WelfareError> {
    let rents = economic_rents(outcome);
    let winner_valuation_sum = winner_valuation_with(outcome, valuations)?;
    Ok(WelfareReport {
        price: outcome.price,
        floor: outcome.floor,
        rents,
        winner_valuation_sum,
        consumer_surplus: winner_valuation_sum - rents,
        units_sold: outcome.winners.len(),
        rebate_per_ticket: Money::ZERO,
    })
}

fn winner_valuation_with(outcome: &AuctionOutcome, valuations: &Valuations<'_>) -> Result<Money, WelfareError> {
    outcome.winners.iter().map(|w| valuations.get(&w.bidder)).sum()
}

pub fn excess_metrics(mpa: &WelfareReport, fcfs: &WelfareReport) -> ExcessReport {
    let excess_rents = mpa.rents - fcfs.rents;
    let excess_valuation = mpa.winner_valuation_sum - fcfs.winner_valuation_sum;
    ExcessReport {
        excess_rents,
        excess_valuation,
        excess_consumer_surplus: excess_valuation - excess_rents,
    }
}

/// Moves `rebate_per_ticket * units_sold` from rents to consumer surplus.
/// The total rebate per ticket may not exceed `price - floor`.
pub fn apply_rebate(report: &WelfareReport, rebate_per_ticket: Money) -> Result<WelfareReport, WelfareError> {
    let ceiling = report.price - report.floor;
    let cumulative = report.rebate_per_ticket + rebate_per_ticket;
    if rebate_per_ticket.is_negative() || cumulative > ceiling {
        return Err(WelfareError::RebateOutOfRange {
            rebate: rebate_per_ticket,
            ceiling: ceiling - report.rebate_per_ticket,
        });
    }
    let transfer = rebate_per_ticket.times(report.units_sold);
    Ok(WelfareReport {
        rents: report.rents - transfer,
        consumer_surplus: report.consumer_surplus + transfer,
        rebate_per_ticket: cumulative,
        ..*report
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{sample_population, ValuationDistribution};
    use crate::auction::{clear_fcfs, clear_marginal_price, BidBook, TieBreak};

    fn example(floor: i64) -> (Vec<BidderProfile>, AuctionOutcome, AuctionOutcome) {
        let amounts: Vec<Money> = [35, 15, 40, 20, 25, 20].iter().map(|&u| Money::whole(u)).collect();
        let book = BidBook::from_amounts(Money::whole(floor), 3, amounts.clone()).unwrap();
        let population = amounts
            .iter()
            .enumerate()
            .map(|(i, &v)| BidderProfile {
                id: BidderId::new((i + 1).to_string()),
                valuation: v,
                strategy: crate::agents::Strategy::Truthful,
            })
            .collect();
        (
            population,
            clear_marginal_price(&book, TieBreak::Chronological),
            clear_fcfs(&book),
        )
    }

    #[test]
    fn example_one_rents_and_valuations() {
        let (pop, mpa, fcfs) = example(20);
        assert_eq!(economic_rents(&mpa), Money::whole(75));
        assert_eq!(economic_rents(&fcfs), Money::whole(60));
        assert_eq!(total_winner_valuation(&mpa, &pop).unwrap(), Money::whole(100));
        assert_eq!(total_winner_valuation(&fcfs, &pop).unwrap(), Money::whole(95));
        assert_eq!(consumer_surplus(&mpa, &pop).unwrap(), Money::whole(25));
        assert_eq!(consumer_surplus(&fcfs, &pop).unwrap(), Money::whole(35));
    }

    #[test]
    fn example_one_excess() {
        let (pop, mpa, fcfs) = example(20);
        let excess = excess_metrics(&welfare_report(&mpa, &pop).unwrap(), &welfare_report(&fcfs, &pop).unwrap());
        assert_eq!(excess.excess_rents, Money::whole(15));
        assert_eq!(excess.excess_valuation, Money::whole(5));
        assert_eq!(excess.excess_consumer_surplus, Money::whole(-10));
    }

    #[test]
    fn identical_reports_have_no_excess() {
        let (pop, mpa, _) = example(20);
        let r = welfare_report(&mpa, &pop).unwrap();
        assert_eq!(excess_metrics(&r, &r), ExcessReport::default());
    }

    #[test]
    fn empty_outcome_has_zero_welfare() {
        let book = BidBook::new(Money::whole(10), 2).unwrap();
        let outcome = clear_marginal_price(&book, TieBreak::Chronological);
        assert_eq!(economic_rents(&outcome), Money::ZERO);
        assert_eq!(total_winner_valuation(&outcome, &[]).unwrap(), Money::ZERO);
    }

    #[test]
    fn marginal_winner_has_zero_surplus() {
        let book = BidBook::from_amounts(Money::whole(10), 1, [Money::whole(40), Money::whole(40)]).unwrap();
        let outcome = clear_marginal_price(&book, TieBreak::Chronological);
        let pop = vec![
            BidderProfile { id: "1".into(), valuation: Money::whole(40), strategy: crate::agents::Strategy::Truthful },
            BidderProfile { id: "2".into(), valuation: Money::whole(40), strategy: crate::agents::Strategy::Truthful },
        ];
        assert_eq!(consumer_surplus(&outcome, &pop).unwrap(), Money::ZERO);
    }

    #[test]
    fn unknown_winner_is_an_error() {
        let (_, mpa, _) = example(20);
        assert!(matches!(
            total_winner_valuation(&mpa, &[]),
            Err(WelfareError::UnknownBidder(_))
        ));
    }

    #[test]
    fn rebate_transfers_surplus() {
        let (pop, mpa, _) = example(20);
        let report = welfare_report(&mpa, &pop).unwrap();
        let rebated = apply_rebate(&report, Money::whole(5)).unwrap();
        assert_eq!(rebated.rents, Money::whole(60));
        assert_eq!(rebated.consumer_surplus, Money::whole(40));
        assert_eq!(rebated.winner_valuation_sum, report.winner_valuation_sum);
        assert_eq!(apply_rebate(&report, Money::ZERO).unwrap(), report);
        assert!(matches!(
            apply_rebate(&report, Money::from_cents(501)),
            Err(WelfareError::RebateOutOfRange { .. })
        ));
        assert!(apply_rebate(&report, Money::from_cents(-1)).is_err());
        // cumulative ceiling
        let partial = apply_rebate(&report, Money::whole(3)).unwrap();
        assert!(apply_rebate(&partial, Money::whole(3)).is_err());
        assert!(apply_rebate(&partial, Money::whole(2)).is_ok());
    }

    #[test]
    fn rebate_conserves_total_welfare() {
        let pop = sample_population(&ValuationDistribution::Normal { mean: 125.0, stddev: 25.0 }, 60, 4).unwrap();
        let book = BidBook::from_amounts(Money::whole(100), 40, pop.iter().map(|p| p.valuation)).unwrap();
        let pop: Vec<BidderProfile> = pop
            .into_iter()
            .enumerate()
            .map(|(i, p)| BidderProfile { id: BidderId::new((i + 1).to_string()), ..p })
            .collect();
        let report = welfare_report(&clear_marginal_price(&book, TieBreak::Chronological), &pop).unwrap();
        let ceiling = report.price - report.floor;
        let rebated = apply_rebate(&report, ceiling).unwrap();
        assert_eq!(
            rebated.rents + rebated.consumer_surplus,
            report.rents + report.consumer_surplus
        );
        assert_eq!(rebated.rents, report.floor.times(report.units_sold));
    }
}
