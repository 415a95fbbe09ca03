//! Brute-force check that bidding one's valuation weakly dominates every
//! other bid on a finite money grid.
//!
//! A focal bidder with a fixed valuation is placed last in arrival order
//! behind every opponent profile drawn from `grid^(n-1)`. For each profile the
//! focal payoff from bidding the valuation is compared against the payoff from
//! every alternative bid on the grid.
//!
//! Two treatments of a bid sitting exactly at the clearing price are
//! supported. Under [`MarginRule::WinsAtPrice`], the clearing engine's own
//! semantics, the marginal winner takes a unit and pays its own bid. That makes
//! the marginal bid price-setting, so shading below the valuation can lower
//! the price; with one unit the rule is a first-price auction and the checker
//! reports the resulting violations. Under [`MarginRule::LosesAtPrice`] only bids
//! strictly above the price are served, the price never depends on the
//! winner's own bid, and truthful bidding is weakly dominant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::payoff;
use crate::auction::{clear_marginal_price, AuctionOutcome, BidBook, BidderId, TieBreak};
use crate::money::Money;

const FOCAL: &str = "focal";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DominanceError {
    #[error("need at least two bidders, got {0}")]
    TooFewBidders(usize),
    #[error("capacity {capacity} must be at least 1 and below the number of bidders {n_bidders}")]
    CapacityNotBelowBidders { capacity: usize, n_bidders: usize },
    #[error("grid must be nonempty and strictly increasing")]
    BadGrid,
    #[error("focal valuation {0} is not on the grid")]
    ValuationOffGrid(Money),
    #[error("grid contains a negative amount")]
    NegativeGridPoint,
    #[error("floor {0} is negative")]
    NegativeFloor(Money),
    #[error("enumeration needs {count} evaluations, limit is {limit}")]
    TooLarge { count: u128, limit: u128 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceScenario {
    pub n_bidders: usize,
    pub capacity: usize,
    pub floor: Money,
    pub grid: Vec<Money>,
    pub focal_valuation: Money,
}

impl DominanceScenario {
    pub fn validate(&self) -> Result<(), DominanceError> {
        if self.n_bidders < 2 {
            return Err(DominanceError::TooFewBidders(self.n_bidders));
        }
        if self.capacity == 0 || self.capacity >= self.n_bidders {
            return Err(DominanceError::CapacityNotBelowBidders {
                capacity: self.capacity,
                n_bidders: self.n_bidders,
            });
        }
        if self.grid.is_empty() || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DominanceError::BadGrid);
        }
        if self.grid[0].is_negative() {
            return Err(DominanceError::NegativeGridPoint);
        }
        if self.floor.is_negative() {
            return Err(DominanceError::NegativeFloor(self.floor));
        }
        if self.grid.binary_search(&self.focal_valuation).is_err() {
            return Err(DominanceError::ValuationOffGrid(self.focal_valuation));
        }
        Ok(())
    }

    /// Total payoff comparisons, `|grid|^(n-1) * |grid|`.
    pub fn evaluation_count(&self) -> u128 {
        (self.grid.len() as u128).saturating_pow(self.n_bidders as u32)
    }

    /// Refuses enumerations larger than `limit` evaluations.
    pub fn ensure_feasible(&self, limit: u128) -> Result<(), DominanceError> {
        let count = self.evaluation_count();
        if count > limit {
            return Err(DominanceError::TooLarge { count, limit });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub opponents: Vec<Money>,
    pub deviant_bid: Money,
    pub truthful_payoff: Money,
    pub deviant_payoff: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub truthful_dominates: bool,
    pub violations: Vec<Violation>,
    pub profiles_checked: u64,
    /// Comparisons where the truthful bid did strictly better than the deviation.
    pub strict_advantages: u64,
}

/// Every element of `grid^n` in lexicographic order, without materializing
/// the product.
pub fn enumerate_profiles(grid: &[Money], n: usize) -> Profiles<'_> {
    Profiles {
        grid,
        indices: vec![0; n],
        done: grid.is_empty() && n > 0,
    }
}

pub struct Profiles<'a> {
    grid: &'a [Money],
    indices: Vec<usize>,
    done: bool,
}

impl Iterator for Profiles<'_> {
    type Item = Vec<Money>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let profile = self.indices.iter().map(|&i| self.grid[i]).collect();
        // odometer increment, last position fastest
        self.done = true;
        for pos in (0..self.indices.len()).rev() {
            self.indices[pos] += 1;
            if self.indices[pos] < self.grid.len() {
                self.done = false;
                break;
            }
            self.indices[pos] = 0;
        }
        Some(profile)
    }
}

/// How a bid exactly at the clearing price is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginRule {
    /// The clearing engine's outcome as is: the marginal bidder wins and pays its bid.
    #[default]
    WinsAtPrice,
    /// Bids equal to the price are left without a unit.
    LosesAtPrice,
}

/// Exhaustive check against the clearing engine's own allocation.
pub fn check_weak_dominance(
    scenario: &DominanceScenario,
    tie_break: TieBreak,
) -> Result<DominanceVerdict, DominanceError> {
    check_weak_dominance_with_rule(scenario, tie_break, MarginRule::WinsAtPrice)
}

pub fn check_weak_dominance_with_rule(
    scenario: &DominanceScenario,
    tie_break: TieBreak,
    rule: MarginRule,
) -> Result<DominanceVerdict, DominanceError> {
    match rule {
        MarginRule::WinsAtPrice => check_with(scenario, &|book: &BidBook| clear_marginal_price(book, tie_break)),
        MarginRule::LosesAtPrice => check_with(scenario, &|book: &BidBook| {
            let mut outcome = clear_marginal_price(book, tie_break);
            let price = outcome.price;
            outcome.winners.retain(|w| w.amount > price);
            outcome
        }),
    }
}

fn check_with<F>(scenario: &DominanceScenario, clear: &F) -> Result<DominanceVerdict, DominanceError>
where
    F: Fn(&BidBook) -> AuctionOutcome + Sync,
{
    scenario.validate()?;
    let opponents = scenario.n_bidders - 1;

    // Partition by the first opponent's bid; results are merged in grid order
    // so the verdict does not depend on how work was scheduled.
    let parts: Vec<Partial> = scenario
        .grid
        .par_iter()
        .map(|&first| {
            let mut part = Partial::default();
            for rest in enumerate_profiles(&scenario.grid, opponents - 1) {
                let mut profile = Vec::with_capacity(opponents);
                profile.push(first);
                profile.extend(rest);
                check_profile(scenario, clear, &profile, &mut part);
            }
            part
        })
        .collect();

    let mut violations = Vec::new();
    let mut profiles_checked = 0;
    let mut strict_advantages = 0;
    for part in parts {
        violations.extend(part.violations);
        profiles_checked += part.checked;
        strict_advantages += part.strict;
    }
    Ok(DominanceVerdict {
        truthful_dominates: violations.is_empty(),
        violations,
        profiles_checked,
        strict_advantages,
    })
}

#[derive(Default)]
struct Partial {
    violations: Vec<Violation>,
    checked: u64,
    strict: u64,
}

fn check_profile<F>(scenario: &DominanceScenario, clear: &F, opponents: &[Money], out: &mut Partial)
where
    F: Fn(&BidBook) -> AuctionOutcome,
{
    let valuation = scenario.focal_valuation;
    let truthful = focal_payoff(scenario, clear, opponents, valuation);
    for &deviant_bid in &scenario.grid {
        out.checked += 1;
        let deviant = focal_payoff(scenario, clear, opponents, deviant_bid);
        if deviant > truthful {
            out.violations.push(Violation {
                opponents: opponents.to_vec(),
                deviant_bid,
                truthful_payoff: truthful,
                deviant_payoff: deviant,
            });
        } else if deviant < truthful {
            out.strict += 1;
        }
    }
}

fn focal_payoff<F>(scenario: &DominanceScenario, clear: &F, opponents: &[Money], bid: Money) -> Money
where
    F: Fn(&BidBook) -> AuctionOutcome,
{
    let mut book = BidBook::new(scenario.floor, scenario.capacity).expect("validated scenario");
    for (i, &amount) in opponents.iter().enumerate() {
        book.submit(BidderId::new(format!("o{i}")), amount).expect("grid is nonnegative");
    }
    let focal = BidderId::new(FOCAL);
    book.submit(focal.clone(), bid).expect("grid is nonnegative");
    let outcome = clear(&book);
    payoff(scenario.focal_valuation, outcome.is_winner(&focal), outcome.price)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(values: &[i64]) -> Vec<Money> {
        values.iter().map(|&v| Money::whole(v)).collect()
    }

    fn scenario(n: usize, k: usize, g: &[i64], v: i64) -> DominanceScenario {
        DominanceScenario {
            n_bidders: n,
            capacity: k,
            floor: Money::ZERO,
            grid: grid(g),
            focal_valuation: Money::whole(v),
        }
    }

    #[test]
    fn enumerates_cartesian_square() {
        let got: Vec<Vec<Money>> = enumerate_profiles(&grid(&[1, 2]), 2).collect();
        assert_eq!(got, vec![grid(&[1, 1]), grid(&[1, 2]), grid(&[2, 1]), grid(&[2, 2])]);
        let single: Vec<Vec<Money>> = enumerate_profiles(&grid(&[1]), 3).collect();
        assert_eq!(single, vec![grid(&[1, 1, 1])]);
        let nine: std::collections::BTreeSet<Vec<Money>> = enumerate_profiles(&grid(&[1, 2, 3]), 2).collect();
        assert_eq!(nine.len(), 9);
        assert_eq!(enumerate_profiles(&grid(&[1, 2, 3]), 2).count(), 9);
    }

    #[test]
    fn enumeration_edge_shapes() {
        assert_eq!(enumerate_profiles(&grid(&[1, 2]), 0).collect::<Vec<_>>(), vec![Vec::<Money>::new()]);
        assert_eq!(enumerate_profiles(&[], 2).count(), 0);
    }

    #[test]
    fn single_unit_marginal_winner_gains_by_shading() {
        // one unit priced at the lowest winning bid is a first-price auction
        let s = scenario(2, 1, &[0, 1, 2, 3, 4, 5], 3);
        let verdict = check_weak_dominance(&s, TieBreak::Chronological).unwrap();
        assert_eq!(verdict.profiles_checked, 36);
        assert!(!verdict.truthful_dominates);
        let v = verdict
            .violations
            .iter()
            .find(|v| v.opponents == grid(&[0]) && v.deviant_bid == Money::whole(1))
            .expect("bidding 1 against 0 beats bidding 3");
        assert_eq!(v.truthful_payoff, Money::ZERO);
        assert_eq!(v.deviant_payoff, Money::whole(2));
    }

    #[test]
    fn two_of_four_counterexample() {
        let s = scenario(4, 2, &[0, 5, 10, 15, 20], 10);
        let verdict = check_weak_dominance(&s, TieBreak::Chronological).unwrap();
        assert_eq!(verdict.profiles_checked, 125 * 5);
        assert!(verdict.strict_advantages > 0);
        // opponents (20, 0, 0): truthful 10 is marginal and pays 10, bidding 5 pays 5
        let v = verdict
            .violations
            .iter()
            .find(|v| v.opponents == grid(&[20, 0, 0]) && v.deviant_bid == Money::whole(5))
            .expect("shading to 5 beats bidding 10");
        assert_eq!(v.truthful_payoff, Money::ZERO);
        assert_eq!(v.deviant_payoff, Money::whole(5));
        assert!(v.deviant_bid < s.focal_valuation);
        assert!(verdict.violations.iter().all(|v| v.deviant_bid < s.focal_valuation));
    }

    #[test]
    fn lose_at_price_rule_is_dominant_and_not_vacuous() {
        for (n, k, g, v) in [
            (2usize, 1usize, (0..=10).collect::<Vec<i64>>(), 3),
            (3, 1, vec![0, 2, 4, 6], 4),
            (3, 2, vec![0, 1, 2, 3], 1),
            (4, 2, vec![0, 5, 10, 15, 20], 10),
        ] {
            let s = scenario(n, k, &g, v);
            let verdict = check_weak_dominance_with_rule(&s, TieBreak::Chronological, MarginRule::LosesAtPrice).unwrap();
            assert!(verdict.truthful_dominates, "{n} {k} {g:?} {v}");
            assert!(verdict.strict_advantages > 0 || k == 1);
        }
    }

    #[test]
    fn singleton_grid_is_trivially_dominant() {
        let s = scenario(2, 1, &[7], 7);
        let verdict = check_weak_dominance(&s, TieBreak::Chronological).unwrap();
        assert!(verdict.truthful_dominates);
        assert_eq!(verdict.profiles_checked, 1);
    }

    #[test]
    fn verdict_is_deterministic() {
        let s = scenario(3, 1, &[0, 2, 4, 6], 4);
        let a = check_weak_dominance(&s, TieBreak::Chronological).unwrap();
        let b = check_weak_dominance(&s, TieBreak::Chronological).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feasibility_limit() {
        let s = scenario(4, 2, &[0, 5, 10, 15, 20], 10);
        assert_eq!(s.evaluation_count(), 625);
        assert!(s.ensure_feasible(625).is_ok());
        assert_eq!(
            s.ensure_feasible(624),
            Err(DominanceError::TooLarge { count: 625, limit: 624 })
        );
    }

    #[test]
    fn rejects_invalid_scenarios() {
        assert_eq!(
            check_weak_dominance(&scenario(2, 2, &[1, 2], 1), TieBreak::Chronological),
            Err(DominanceError::CapacityNotBelowBidders { capacity: 2, n_bidders: 2 })
        );
        assert_eq!(
            check_weak_dominance(&scenario(1, 1, &[1], 1), TieBreak::Chronological),
            Err(DominanceError::TooFewBidders(1))
        );
        assert_eq!(
            check_weak_dominance(&scenario(3, 1, &[2, 1], 1), TieBreak::Chronological),
            Err(DominanceError::BadGrid)
        );
        assert_eq!(
            check_weak_dominance(&scenario(3, 1, &[1, 2], 3), TieBreak::Chronological),
            Err(DominanceError::ValuationOffGrid(Money::whole(3)))
        );
    }

    #[test]
    fn overbidding_never_helps_under_either_rule() {
        let s = scenario(3, 2, &[0, 1, 2, 3, 4], 2);
        for rule in [MarginRule::WinsAtPrice, MarginRule::LosesAtPrice] {
            let verdict = check_weak_dominance_with_rule(&s, TieBreak::Chronological, rule).unwrap();
            assert!(verdict.violations.iter().all(|v| v.deviant_bid < s.focal_valuation));
        }
    }
}
