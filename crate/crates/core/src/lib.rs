//! Marginal-price ticket auctions.
//!
//! The clearing engine lives in [`auction`]; [`welfare`] accounts for rents
//! and surplus; [`dominance`], [`scalper`] and [`theorems`] verify the
//! mechanism's incentive properties; [`simulation`] runs seeded Monte Carlo
//! comparisons against first-come-first-serve; [`protocol`] drives a complete
//! bidding window with identities, collateral and settlement.

pub mod agents;
pub mod auction;
pub mod dominance;
pub mod money;
pub mod protocol;
pub mod scalper;
pub mod simulation;
pub mod theorems;
pub mod welfare;

pub use auction::{
    clear_fcfs, clear_marginal_price, indicative_price, rank_descending, AuctionOutcome, Bid, BidBook, BidderId,
    TieBreak,
};
pub use money::Money;
