//! Clearing rules: the marginal (lowest winning bid) price auction and the
//! first-come-first-serve baseline it is compared against.
//!
//! Both rules first restrict the book to *eligible* bids, those with
//! `amount >= floor`. When eligible demand does not exceed capacity every
//! eligible bidder wins at the floor. Otherwise the top `capacity` eligible
//! bids win and everyone pays the lowest winning bid. Bids sitting exactly at
//! the marginal amount are resolved by a [`TieBreak`] policy.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Money;

/// Opaque identity of a bidder.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BidderId(String);

impl BidderId {
    pub fn new(id: impl Into<String>) -> Self {
        BidderId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BidderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BidderId {
    fn from(s: &str) -> Self {
        BidderId(s.to_string())
    }
}

impl From<String> for BidderId {
    fn from(s: String) -> Self {
        BidderId(s)
    }
}

/// A sealed single-unit bid. `seq` is the chronological position in its book.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub bidder: BidderId,
    pub amount: Money,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("price floor {0} is negative")]
    NegativeFloor(Money),
    #[error("bid amount {0} is negative")]
    NegativeAmount(Money),
    #[error("bid seq {seq} does not follow previous seq {previous}")]
    OutOfOrder { seq: u64, previous: u64 },
}

/// Bids in chronological order together with the floor and the number of
/// units on offer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBook")]
pub struct BidBook {
    bids: Vec<Bid>,
    floor: Money,
    capacity: usize,
}

#[derive(Deserialize)]
struct RawBook {
    bids: Vec<Bid>,
    floor: Money,
    capacity: usize,
}

impl TryFrom<RawBook> for BidBook {
    type Error = BookError;

    fn try_from(raw: RawBook) -> Result<Self, Self::Error> {
        let mut book = BidBook::new(raw.floor, raw.capacity)?;
        for bid in raw.bids {
            book.push(bid)?;
        }
        Ok(book)
    }
}

impl BidBook {
    pub fn new(floor: Money, capacity: usize) -> Result<Self, BookError> {
        if capacity == 0 {
            return Err(BookError::ZeroCapacity);
        }
        if floor.is_negative() {
            return Err(BookError::NegativeFloor(floor));
        }
        Ok(BidBook {
            bids: Vec::new(),
            floor,
            capacity,
        })
    }

    /// Builds a book from a chronological list of amounts. Bidders are named
    /// `"1"`, `"2"`, ... after their arrival position.
    pub fn from_amounts(
        floor: Money,
        capacity: usize,
        amounts: impl IntoIterator<Item = Money>,
    ) -> Result<Self, BookError> {
        let mut book = BidBook::new(floor, capacity)?;
        for (i, amount) in amounts.into_iter().enumerate() {
            book.submit(BidderId::new((i + 1).to_string()), amount)?;
        }
        Ok(book)
    }

    /// Appends a bid with the next sequence number and returns that number.
    pub fn submit(&mut self, bidder: BidderId, amount: Money) -> Result<u64, BookError> {
        let seq = self.next_seq();
        self.push(Bid { bidder, amount, seq })?;
        Ok(seq)
    }

    /// Appends a bid that already carries a sequence number.
    pub fn push(&mut self, bid: Bid) -> Result<(), BookError> {
        if bid.amount.is_negative() {
            return Err(BookError::NegativeAmount(bid.amount));
        }
        if let Some(last) = self.bids.last() {
            if bid.seq <= last.seq {
                return Err(BookError::OutOfOrder {
                    seq: bid.seq,
                    previous: last.seq,
                });
            }
        }
        self.bids.push(bid);
        Ok(())
    }

    pub fn next_seq(&self) -> u64 {
        self.bids.last().map_or(0, |b| b.seq + 1)
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn floor(&self) -> Money {
        self.floor
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    /// Bids at or above the floor, in chronological order.
    pub fn eligible(&self) -> impl Iterator<Item = &Bid> {
        let floor = self.floor;
        self.bids.iter().filter(move |b| b.amount >= floor)
    }
}

/// How bids tied at the marginal amount share the remaining units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Earlier submissions win.
    #[default]
    Chronological,
    /// Seeded uniform shuffle of the tied group.
    Lottery { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MarginalPrice,
    FirstComeFirstServe,
}

/// One allocated unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub bidder: BidderId,
    pub seq: u64,
    pub amount: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub method: Method,
    pub price: Money,
    pub floor: Money,
    pub capacity: usize,
    /// Winners in allocation order: rank order for the marginal price
    /// auction, arrival order for first-come-first-serve.
    pub winners: Vec<Allocation>,
    pub units_unsold: usize,
    pub tie_break: TieBreak,
    pub bids_received: usize,
    pub bids_eligible: usize,
}

impl AuctionOutcome {
    pub fn units_sold(&self) -> usize {
        self.winners.len()
    }

    pub fn is_winner(&self, bidder: &BidderId) -> bool {
        self.winners.iter().any(|w| &w.bidder == bidder)
    }

    /// Winning sequence numbers in ascending (arrival) order.
    pub fn winning_seqs(&self) -> Vec<u64> {
        let mut seqs: Vec<u64> = self.winners.iter().map(|w| w.seq).collect();
        seqs.sort_unstable();
        seqs
    }
}

/// All bids sorted by amount, highest first. Equal amounts keep arrival order.
pub fn rank_descending(book: &BidBook) -> Vec<Bid> {
    let mut ranked = book.bids.clone();
    // stable: bids are stored in seq order
    ranked.sort_by(|a, b| b.amount.cmp(&a.amount));
    ranked
}

pub fn clear_marginal_price(book: &BidBook, tie_break: TieBreak) -> AuctionOutcome {
    let capacity = book.capacity;
    let mut eligible: Vec<&Bid> = book.eligible().collect();
    let bids_eligible = eligible.len();
    eligible.sort_by(|a, b| b.amount.cmp(&a.amount));

    let (price, winners) = if eligible.len() <= capacity {
        (book.floor, eligible)
    } else {
        let marginal = eligible[capacity - 1].amount;
        let above = eligible.partition_point(|b| b.amount > marginal);
        let tied_end = eligible.partition_point(|b| b.amount >= marginal);
        let slots = capacity - above;
        let mut tied: Vec<&Bid> = eligible[above..tied_end].to_vec();
        if let TieBreak::Lottery { seed } = tie_break {
            tied.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            tied.truncate(slots);
            tied.sort_by_key(|b| b.seq);
        } else {
            tied.truncate(slots);
        }
        let mut winners = eligible[..above].to_vec();
        winners.extend(tied);
        (marginal, winners)
    };

    AuctionOutcome {
        method: Method::MarginalPrice,
        price,
        floor: book.floor,
        capacity,
        units_unsold: capacity - winners.len(),
        winners: winners.into_iter().map(allocation).collect(),
        tie_break,
        bids_received: book.len(),
        bids_eligible,
    }
}

/// Baseline: the first `capacity` eligible bidders by arrival each pay the floor.
pub fn clear_fcfs(book: &BidBook) -> AuctionOutcome {
    let winners: Vec<Allocation> = book.eligible().take(book.capacity).map(allocation).collect();
    AuctionOutcome {
        method: Method::FirstComeFirstServe,
        price: book.floor,
        floor: book.floor,
        capacity: book.capacity,
        units_unsold: book.capacity - winners.len(),
        winners,
        tie_break: TieBreak::Chronological,
        bids_received: book.len(),
        bids_eligible: book.eligible().count(),
    }
}

/// The price the auction would clear at if it closed now.
pub fn indicative_price(book: &BidBook) -> Money {
    clear_marginal_price(book, TieBreak::Chronological).price
}

fn allocation(bid: &Bid) -> Allocation {
    Allocation {
        bidder: bid.bidder.clone(),
        seq: bid.seq,
        amount: bid.amount,
    }
}
