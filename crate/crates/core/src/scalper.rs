//! Resale market check: a losing bidder whose valuation does not change
//! after the auction gains nothing by buying from a scalper who charges at
//! least the clearing price.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::BidderProfile;
use crate::auction::{AuctionOutcome, BidderId};
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalperError {
    #[error("markup {0} must be finite and at least 1")]
    MarkupBelowOne(f64),
    #[error("market price {market} does not match the clearing price {cleared}")]
    PriceMismatch { market: Money, cleared: Money },
}

/// Scalpers resell at `round(markup * clearing_price)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalperMarket {
    pub markup: f64,
    pub clearing_price: Money,
}

impl ScalperMarket {
    pub fn new(markup: f64, clearing_price: Money) -> Result<Self, ScalperError> {
        if !(markup >= 1.0 && markup.is_finite()) {
            return Err(ScalperError::MarkupBelowOne(markup));
        }
        Ok(ScalperMarket { markup, clearing_price })
    }

    pub fn scalper_price(&self) -> Money {
        self.clearing_price.scale(self.markup)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalperDecision {
    pub bidder: BidderId,
    pub valuation: Money,
    pub scalper_price: Money,
    pub surplus_at_scalper: Money,
    pub buys: bool,
}

/// One decision per population member who did not win.
pub fn check_scalper_rationality(
    outcome: &AuctionOutcome,
    population: &[BidderProfile],
    market: &ScalperMarket,
) -> Result<Vec<ScalperDecision>, ScalperError> {
    if !(market.markup >= 1.0 && market.markup.is_finite()) {
        return Err(ScalperError::MarkupBelowOne(market.markup));
    }
    if market.clearing_price != outcome.price {
        return Err(ScalperError::PriceMismatch {
            market: market.clearing_price,
            cleared: outcome.price,
        });
    }
    let scalper_price = market.scalper_price();
    let winners: std::collections::HashSet<&BidderId> = outcome.winners.iter().map(|w| &w.bidder).collect();
    Ok(population
        .iter()
        .filter(|p| !winners.contains(&p.id))
        .map(|p| {
            let surplus = p.valuation - scalper_price;
            ScalperDecision {
                bidder: p.id.clone(),
                valuation: p.valuation,
                scalper_price,
                surplus_at_scalper: surplus,
                buys: surplus > Money::ZERO,
            }
        })
        .collect())
}
