//! Bidder population: private valuations, bidding strategies and the
//! single-unit payoff.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::BidderId;
use crate::money::Money;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Truthful,
    /// Bid a fraction of valuation, factor in (0, 1].
    Shade(f64),
    /// Bid a multiple of valuation, factor >= 1.
    Overbid(f64),
    Fixed(Money),
}

impl Strategy {
    pub fn validate(&self) -> Result<(), AgentError> {
        match *self {
            Strategy::Shade(f) if !(f > 0.0 && f <= 1.0) => Err(AgentError::InvalidStrategy(*self)),
            Strategy::Overbid(f) if !(f >= 1.0 && f.is_finite()) => Err(AgentError::InvalidStrategy(*self)),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidderProfile {
    pub id: BidderId,
    pub valuation: Money,
    pub strategy: Strategy,
}

/// Valuation distribution, parameters in major currency units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationDistribution {
    Normal { mean: f64, stddev: f64 },
    Uniform { lo: f64, hi: f64 },
    /// A fixed list replayed in order (cycled when more bidders are requested).
    Empirical(Vec<Money>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("standard deviation must be positive and finite, got {0}")]
    NonPositiveStddev(f64),
    #[error("uniform bounds are invalid: lo {lo} > hi {hi}")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("distribution parameters must be finite")]
    NonFinite,
    #[error("empirical valuation list is empty")]
    EmptyEmpirical,
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("strategy {0:?} has an out-of-range factor")]
    InvalidStrategy(Strategy),
}

impl ValuationDistribution {
    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            ValuationDistribution::Normal { mean, stddev } => {
                if !mean.is_finite() {
                    return Err(AgentError::NonFinite);
                }
                if !(*stddev > 0.0 && stddev.is_finite()) {
                    return Err(AgentError::NonPositiveStddev(*stddev));
                }
            }
            ValuationDistribution::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(AgentError::NonFinite);
                }
                if lo > hi {
                    return Err(AgentError::InvalidBounds { lo: *lo, hi: *hi });
                }
            }
            ValuationDistribution::Empirical(values) if values.is_empty() => {
                return Err(AgentError::EmptyEmpirical)
            }
            ValuationDistribution::Empirical(_) => {}
        }
        Ok(())
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Money> {
        match self {
            ValuationDistribution::Normal { mean, stddev } => {
                let normal = Normal::new(*mean, *stddev).expect("validated");
                (0..n).map(|_| Money::from_units_f64(normal.sample(rng))).collect()
            }
            ValuationDistribution::Uniform { lo, hi } => {
                let uniform = Uniform::new_inclusive(*lo, *hi).expect("validated");
                (0..n).map(|_| Money::from_units_f64(uniform.sample(rng))).collect()
            }
            ValuationDistribution::Empirical(values) => values.iter().copied().cycle().take(n).collect(),
        }
    }
}

/// Draws `n` truthful bidders named `b0`, `b1`, ... Valuations are rounded
/// half-to-even to cents; negative draws are kept.
pub fn sample_population(
    dist: &ValuationDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<BidderProfile>, AgentError> {
    dist.validate()?;
    if n == 0 {
        return Err(AgentError::EmptyPopulation);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(dist
        .draw(n, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, valuation)| BidderProfile {
            id: BidderId::new(format!("b{i}")),
            valuation,
            strategy: Strategy::Truthful,
        })
        .collect())
}

pub fn strategy_bid(profile: &BidderProfile) -> Money {
    match profile.strategy {
        Strategy::Truthful => profile.valuation,
        Strategy::Shade(f) | Strategy::Overbid(f) => profile.valuation.scale(f),
        Strategy::Fixed(amount) => amount,
    }
}

/// Valuation minus price for a winner, nothing for a loser.
pub fn payoff(valuation: Money, won: bool, price: Money) -> Money {
    if won {
        valuation - price
    } else {
        Money::ZERO
    }
}
