//! Bidding-window lifecycle as a single-writer state machine.
//!
//! ```text
//! Announced --open--> Open --close--> Closed --clear--> Cleared --settle--> Settled
//! ```
//!
//! Identities register while the window is announced or open. Bids are
//! accepted only while open, one per verified identity, at or above the floor
//! and backed by collateral of at least `collateral_ratio * amount`. Closing
//! clears the marginal price auction; settlement nets collateral against the
//! price, refunds losers, and pays any per-ticket rebate. Winners whose
//! collateral did not cover the price owe the rest before a deadline on the
//! logical clock, or forfeit the ticket and the collateral already paid.
//!
//! Every accepted mutation is also appended to a [`Command`] log, which
//! [`ProtocolState::replay`] turns back into an identical state.

mod ledger;
mod registry;
mod session;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{clear_marginal_price, indicative_price, AuctionOutcome, BidBook, BidderId, TieBreak};
use crate::money::Money;

pub use ledger::{CollateralLedger, EntryKind, JournalEntry, LedgerError, LedgerTotals};
pub use registry::{AcceptAll, DenyList, IdentityRecord, IdentityRegistry, IdentityVerifier};
pub use session::{run_random_session, SessionFailure, SessionStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Announced,
    Open,
    Closed,
    Cleared,
    Settled,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

const PPM: u32 = 1_000_000;

/// Required collateral as a fraction of the bid, held in parts per million
/// so the requirement is computed exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CollateralRatio(u32);

impl CollateralRatio {
    pub const FULL: CollateralRatio = CollateralRatio(PPM);

    pub fn new(ratio: f64) -> Result<Self, ProtocolError> {
        let ppm = (ratio * PPM as f64).round();
        if !(ratio.is_finite() && ppm >= 1.0 && ppm <= PPM as f64) {
            return Err(ProtocolError::InvalidParams(format!(
                "collateral_ratio must be in (0, 1], got {ratio}"
            )));
        }
        Ok(CollateralRatio(ppm as u32))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / PPM as f64
    }

    /// `ceil(ratio * amount)` in cents.
    pub fn required_for(self, amount: Money) -> Money {
        let scaled = amount.cents() as i128 * self.0 as i128;
        let ppm = PPM as i128;
        Money::from_cents(((scaled + ppm - 1).div_euclid(ppm)) as i64)
    }
}

impl Serialize for CollateralRatio {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for CollateralRatio {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ratio = f64::deserialize(deserializer)?;
        CollateralRatio::new(ratio).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    pub floor: Money,
    pub capacity: usize,
    pub collateral_ratio: CollateralRatio,
    /// Logical ticks after settlement within which an amount due must be paid.
    pub settlement_deadline: u64,
    pub disclosure_enabled: bool,
    pub rebate_per_ticket: Money,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            floor: Money::ZERO,
            capacity: 1,
            collateral_ratio: CollateralRatio::FULL,
            settlement_deadline: 100,
            disclosure_enabled: true,
            rebate_per_ticket: Money::ZERO,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.capacity == 0 {
            return Err(ProtocolError::InvalidParams("capacity must be at least 1".into()));
        }
        if self.floor.is_negative() {
            return Err(ProtocolError::InvalidParams("floor must be nonnegative".into()));
        }
        if self.rebate_per_ticket.is_negative() {
            return Err(ProtocolError::InvalidParams("rebate_per_ticket must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("operation requires phase {expected}, auction is {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("bidding window has not opened")]
    NotYetOpen,
    #[error("bidding window is closed")]
    WindowClosed,
    #[error("identity {0} is not verified")]
    UnverifiedIdentity(BidderId),
    #[error("identity {0} is already registered")]
    DuplicateIdentity(BidderId),
    #[error("requested units must be at least 1")]
    InvalidUnits,
    #[error("bid {amount} is below the floor {floor}")]
    BelowFloor { amount: Money, floor: Money },
    #[error("collateral {posted} is below the required {required}")]
    InsufficientCollateral { required: Money, posted: Money },
    #[error("identity {0} already has an active bid")]
    DuplicateBid(BidderId),
    #[error("indicative price disclosure is disabled")]
    DisclosureDisabled,
    #[error("identity {0} owes nothing")]
    NothingDue(BidderId),
    #[error("payment {paid} does not match the amount due {due}")]
    PaymentMismatch { due: Money, paid: Money },
    #[error("settlement deadline {deadline} has passed (now {now})")]
    DeadlinePassed { deadline: u64, now: u64 },
    #[error("logical clock cannot move backwards from {now} to {requested}")]
    ClockRewind { now: u64, requested: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
}

impl ProtocolError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::WrongPhase { .. } => "WrongPhase",
            ProtocolError::NotYetOpen => "NotYetOpen",
            ProtocolError::WindowClosed => "WindowClosed",
            ProtocolError::UnverifiedIdentity(_) => "UnverifiedIdentity",
            ProtocolError::DuplicateIdentity(_) => "DuplicateIdentity",
            ProtocolError::InvalidUnits => "InvalidUnits",
            ProtocolError::BelowFloor { .. } => "BelowFloor",
            ProtocolError::InsufficientCollateral { .. } => "InsufficientCollateral",
            ProtocolError::DuplicateBid(_) => "DuplicateBid",
            ProtocolError::DisclosureDisabled => "DisclosureDisabled",
            ProtocolError::NothingDue(_) => "NothingDue",
            ProtocolError::PaymentMismatch { .. } => "PaymentMismatch",
            ProtocolError::DeadlinePassed { .. } => "DeadlinePassed",
            ProtocolError::ClockRewind { .. } => "ClockRewind",
            ProtocolError::InvalidParams(_) => "InvalidParams",
            ProtocolError::Ledger(_) => "LedgerError",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub token: BidderId,
    pub verified: bool,
    pub max_units: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidReceipt {
    pub token: BidderId,
    pub seq: u64,
    pub amount: Money,
    pub collateral: Money,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TicketStatus {
    Issued,
    AwaitingPayment,
    Forfeited,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub token: BidderId,
    pub seq: u64,
    pub bid: Money,
    pub collateral: Money,
    pub price: Money,
    pub paid_from_collateral: Money,
    pub collateral_refund: Money,
    pub amount_due: Money,
    pub deadline: Option<u64>,
    pub rebate: Money,
    pub status: TicketStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoserRefund {
    pub token: BidderId,
    pub seq: u64,
    pub refund: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub price: Money,
    /// Rebate actually paid per ticket, capped at `price - floor`.
    pub rebate_per_ticket: Money,
    pub winners: Vec<SettlementRecord>,
    pub losers: Vec<LoserRefund>,
    pub tickets_issued: usize,
    pub bids_received: usize,
    pub capacity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forfeiture {
    pub token: BidderId,
    pub retained: Money,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForfeitureReport {
    pub at: u64,
    pub forfeited: Vec<Forfeiture>,
    /// Unsold at clearing plus every ticket forfeited so far.
    pub units_unsold: usize,
}

/// One protocol action. Accepted mutating actions form the replay log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Register {
        token: BidderId,
        #[serde(default = "one")]
        units: u32,
    },
    Open,
    Bid {
        token: BidderId,
        amount: Money,
        collateral: Money,
    },
    Disclose,
    Close {
        #[serde(default)]
        tie_break: TieBreak,
    },
    Settle,
    Pay {
        token: BidderId,
        amount: Money,
    },
    Expire {
        now: u64,
    },
    Advance {
        to: u64,
    },
}

fn one() -> u32 {
    1
}

impl Command {
    pub fn is_mutation(&self) -> bool {
        !matches!(self, Command::Disclose)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Response {
    Registered(Verification),
    Opened { phase: Phase },
    BidAccepted(BidReceipt),
    Indicative { price: Money },
    Cleared(AuctionOutcome),
    Settled(SettlementReport),
    Paid(SettlementRecord),
    Expired(ForfeitureReport),
    ClockAdvanced { now: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct ActiveBid {
    seq: u64,
    amount: Money,
    collateral: Money,
}

/// Read-only copy of the ledger for queries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerView {
    pub now: u64,
    pub phase: Phase,
    pub balances: BTreeMap<BidderId, Money>,
    pub totals: LedgerTotals,
    pub journal: Vec<JournalEntry>,
}

#[derive(Clone)]
pub struct ProtocolState {
    phase: Phase,
    params: ProtocolParams,
    book: BidBook,
    registry: IdentityRegistry,
    ledger: CollateralLedger,
    outcome: Option<AuctionOutcome>,
    settlement: Option<SettlementReport>,
    active: BTreeMap<BidderId, ActiveBid>,
    forfeited_units: usize,
    now: u64,
    verifier: Arc<dyn IdentityVerifier>,
    log: Vec<Command>,
}

impl fmt::Debug for ProtocolState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolState")
            .field("phase", &self.phase)
            .field("params", &self.params)
            .field("bids", &self.book.len())
            .field("now", &self.now)
            .finish_non_exhaustive()
    }
}

impl ProtocolState {
    /// A freshly announced auction that approves every identity.
    pub fn new(params: ProtocolParams) -> Result<Self, ProtocolError> {
        Self::with_verifier(params, Arc::new(AcceptAll))
    }

    pub fn with_verifier(params: ProtocolParams, verifier: Arc<dyn IdentityVerifier>) -> Result<Self, ProtocolError> {
        params.validate()?;
        let book = BidBook::new(params.floor, params.capacity)
            .map_err(|e| ProtocolError::InvalidParams(e.to_string()))?;
        Ok(ProtocolState {
            phase: Phase::Announced,
            params,
            book,
            registry: IdentityRegistry::default(),
            ledger: CollateralLedger::default(),
            outcome: None,
            settlement: None,
            active: BTreeMap::new(),
            forfeited_units: 0,
            now: 0,
            verifier,
            log: Vec::new(),
        })
    }

    /// Rebuilds a state by re-applying a command log.
    pub fn replay(
        params: ProtocolParams,
        verifier: Arc<dyn IdentityVerifier>,
        commands: impl IntoIterator<Item = Command>,
    ) -> Result<Self, (usize, ProtocolError)> {
        let mut state = Self::with_verifier(params, verifier).map_err(|e| (0, e))?;
        for (i, cmd) in commands.into_iter().enumerate() {
            state.apply(cmd).map_err(|e| (i, e))?;
        }
        Ok(state)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn book(&self) -> &BidBook {
        &self.book
    }

    pub fn registry(&self) -> &IdentityRegistry {
        &self.registry
    }

    pub fn ledger(&self) -> &CollateralLedger {
        &self.ledger
    }

    pub fn outcome(&self) -> Option<&AuctionOutcome> {
        self.outcome.as_ref()
    }

    pub fn settlement(&self) -> Option<&SettlementReport> {
        self.settlement.as_ref()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn command_log(&self) -> &[Command] {
        &self.log
    }

    pub fn forfeited_units(&self) -> usize {
        self.forfeited_units
    }

    pub fn ledger_view(&self) -> LedgerView {
        LedgerView {
            now: self.now,
            phase: self.phase,
            balances: self.ledger.balances().clone(),
            totals: self.ledger.totals(),
            journal: self.ledger.journal().to_vec(),
        }
    }

    /// Dispatches one command. Accepted mutations, whether they arrive here or
    /// through the typed methods, are appended to the log.
    pub fn apply(&mut self, command: Command) -> Result<Response, ProtocolError> {
        let response = match &command {
            Command::Register { token, units } => Response::Registered(self.register_identity(token.clone(), *units)?),
            Command::Open => {
                self.open()?;
                Response::Opened { phase: self.phase }
            }
            Command::Bid {
                token,
                amount,
                collateral,
            } => Response::BidAccepted(self.submit_bid(token.clone(), *amount, *collateral)?),
            Command::Disclose => Response::Indicative {
                price: self.disclose_indicative()?,
            },
            Command::Close { tie_break } => Response::Cleared(self.close_and_clear(*tie_break)?),
            Command::Settle => Response::Settled(self.settle()?),
            Command::Pay { token, amount } => Response::Paid(self.pay_due(token, *amount)?),
            Command::Expire { now } => Response::Expired(self.expire_defaults(*now)?),
            Command::Advance { to } => {
                self.advance_clock(*to)?;
                Response::ClockAdvanced { now: self.now }
            }
        };
        Ok(response)
    }

    pub fn advance_clock(&mut self, to: u64) -> Result<(), ProtocolError> {
        if to < self.now {
            return Err(ProtocolError::ClockRewind {
                now: self.now,
                requested: to,
            });
        }
        if to != self.now {
            self.log.push(Command::Advance { to });
        }
        self.now = to;
        Ok(())
    }

    pub fn register_identity(&mut self, token: BidderId, requested_units: u32) -> Result<Verification, ProtocolError> {
        if !matches!(self.phase, Phase::Announced | Phase::Open) {
            return Err(ProtocolError::WindowClosed);
        }
        if requested_units < 1 {
            return Err(ProtocolError::InvalidUnits);
        }
        if self.registry.contains(&token) {
            return Err(ProtocolError::DuplicateIdentity(token));
        }
        let verified = self.verifier.verify(&token);
        self.registry.insert(
            token.clone(),
            IdentityRecord {
                verified,
                max_units: requested_units,
            },
        );
        self.log.push(Command::Register {
            token: token.clone(),
            units: requested_units,
        });
        Ok(Verification {
            token,
            verified,
            max_units: requested_units,
        })
    }

    pub fn open(&mut self) -> Result<(), ProtocolError> {
        self.expect_phase(Phase::Announced)?;
        self.phase = Phase::Open;
        self.log.push(Command::Open);
        Ok(())
    }

    pub fn submit_bid(&mut self, token: BidderId, amount: Money, collateral: Money) -> Result<BidReceipt, ProtocolError> {
        match self.phase {
            Phase::Announced => return Err(ProtocolError::NotYetOpen),
            Phase::Open => {}
            _ => return Err(ProtocolError::WindowClosed),
        }
        if !self.registry.is_verified(&token) {
            return Err(ProtocolError::UnverifiedIdentity(token));
        }
        if self.active.contains_key(&token) {
            return Err(ProtocolError::DuplicateBid(token));
        }
        if amount < self.params.floor {
            return Err(ProtocolError::BelowFloor {
                amount,
                floor: self.params.floor,
            });
        }
        let required = self.params.collateral_ratio.required_for(amount);
        if collateral < required {
            return Err(ProtocolError::InsufficientCollateral {
                required,
                posted: collateral,
            });
        }
        let seq = self
            .book
            .submit(token.clone(), amount)
            .map_err(|e| ProtocolError::InvalidParams(e.to_string()))?;
        self.ledger.deposit(&token, collateral, self.now)?;
        self.active.insert(token.clone(), ActiveBid { seq, amount, collateral });
        self.log.push(Command::Bid {
            token: token.clone(),
            amount,
            collateral,
        });
        Ok(BidReceipt {
            token,
            seq,
            amount,
            collateral,
        })
    }

    pub fn disclose_indicative(&self) -> Result<Money, ProtocolError> {
        self.expect_phase(Phase::Open)?;
        if !self.params.disclosure_enabled {
            return Err(ProtocolError::DisclosureDisabled);
        }
        Ok(indicative_price(&self.book))
    }

    pub fn close_and_clear(&mut self, tie_break: TieBreak) -> Result<AuctionOutcome, ProtocolError> {
        self.expect_phase(Phase::Open)?;
        self.phase = Phase::Closed;
        let outcome = clear_marginal_price(&self.book, tie_break);
        self.outcome = Some(outcome.clone());
        self.phase = Phase::Cleared;
        self.log.push(Command::Close { tie_break });
        Ok(outcome)
    }

    pub fn settle(&mut self) -> Result<SettlementReport, ProtocolError> {
        self.expect_phase(Phase::Cleared)?;
        let outcome = self.outcome.clone().expect("cleared auctions carry an outcome");
        let price = outcome.price;
        let rebate = self.params.rebate_per_ticket.min(price - self.params.floor).max(Money::ZERO);
        let now = self.now;

        let mut winners = Vec::with_capacity(outcome.winners.len());
        for w in &outcome.winners {
            let bid = self.active[&w.bidder].clone();
            let mut record = SettlementRecord {
                token: w.bidder.clone(),
                seq: bid.seq,
                bid: bid.amount,
                collateral: bid.collateral,
                price,
                paid_from_collateral: Money::ZERO,
                collateral_refund: Money::ZERO,
                amount_due: Money::ZERO,
                deadline: None,
                rebate: Money::ZERO,
                status: TicketStatus::Issued,
            };
            if bid.collateral >= price {
                record.paid_from_collateral = price;
                record.collateral_refund = bid.collateral - price;
                self.ledger.pay(&w.bidder, price, now)?;
                if record.collateral_refund > Money::ZERO {
                    self.ledger.refund(&w.bidder, record.collateral_refund, now)?;
                }
                if rebate > Money::ZERO {
                    self.ledger.rebate(&w.bidder, rebate, now)?;
                    record.rebate = rebate;
                }
            } else {
                // rebate waits until the balance is paid
                record.paid_from_collateral = bid.collateral;
                record.amount_due = price - bid.collateral;
                record.deadline = Some(now + self.params.settlement_deadline);
                record.status = TicketStatus::AwaitingPayment;
                self.ledger.pay(&w.bidder, bid.collateral, now)?;
            }
            winners.push(record);
        }

        let mut losers = Vec::new();
        for (token, bid) in &self.active {
            if outcome.is_winner(token) {
                continue;
            }
            self.ledger.refund(token, bid.collateral, now)?;
            losers.push(LoserRefund {
                token: token.clone(),
                seq: bid.seq,
                refund: bid.collateral,
            });
        }
        losers.sort_by_key(|l| l.seq);

        let report = SettlementReport {
            price,
            rebate_per_ticket: rebate,
            tickets_issued: winners.iter().filter(|r| r.status == TicketStatus::Issued).count(),
            winners,
            losers,
            bids_received: self.book.len(),
            capacity: self.params.capacity,
        };
        self.settlement = Some(report.clone());
        self.phase = Phase::Settled;
        self.log.push(Command::Settle);
        Ok(report)
    }

    /// Pays the outstanding balance of an under-collateralized winner.
    pub fn pay_due(&mut self, token: &BidderId, amount: Money) -> Result<SettlementRecord, ProtocolError> {
        self.expect_phase(Phase::Settled)?;
        let now = self.now;
        let settlement = self.settlement.as_mut().expect("settled auctions carry a report");
        let record = settlement
            .winners
            .iter_mut()
            .find(|r| &r.token == token && r.status == TicketStatus::AwaitingPayment)
            .ok_or_else(|| ProtocolError::NothingDue(token.clone()))?;
        let deadline = record.deadline.expect("awaiting payment has a deadline");
        if now >= deadline {
            return Err(ProtocolError::DeadlinePassed { deadline, now });
        }
        if amount != record.amount_due {
            return Err(ProtocolError::PaymentMismatch {
                due: record.amount_due,
                paid: amount,
            });
        }
        self.ledger.deposit(token, amount, now)?;
        self.ledger.pay(token, amount, now)?;
        let rebate = settlement.rebate_per_ticket;
        if rebate > Money::ZERO {
            self.ledger.rebate(token, rebate, now)?;
            record.rebate = rebate;
        }
        record.amount_due = Money::ZERO;
        record.status = TicketStatus::Issued;
        let updated = record.clone();
        settlement.tickets_issued += 1;
        self.log.push(Command::Pay {
            token: token.clone(),
            amount,
        });
        Ok(updated)
    }

    /// Forfeits every ticket whose balance is still unpaid at `now`.
    pub fn expire_defaults(&mut self, now: u64) -> Result<ForfeitureReport, ProtocolError> {
        self.expect_phase(Phase::Settled)?;
        let now = now.max(self.now);
        self.now = now;
        let settlement = self.settlement.as_mut().expect("settled auctions carry a report");
        let mut forfeited = Vec::new();
        for record in settlement.winners.iter_mut() {
            let overdue = record.status == TicketStatus::AwaitingPayment && record.deadline.is_some_and(|d| now >= d);
            if overdue {
                record.status = TicketStatus::Forfeited;
                self.ledger.forfeit(&record.token, record.paid_from_collateral, now)?;
                forfeited.push(Forfeiture {
                    token: record.token.clone(),
                    retained: record.paid_from_collateral,
                });
            }
        }
        self.forfeited_units += forfeited.len();
        let units_unsold = self.outcome.as_ref().map_or(0, |o| o.units_unsold) + self.forfeited_units;
        self.log.push(Command::Expire { now });
        Ok(ForfeitureReport {
            at: now,
            forfeited,
            units_unsold,
        })
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), ProtocolError> {
        if self.phase != expected {
            return Err(ProtocolError::WrongPhase {
                expected,
                actual: self.phase,
            });
        }
        Ok(())
    }

    /// Checks every structural invariant, returning the first broken one.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.ledger.totals().is_conserved() {
            return Err(format!("collateral not conserved: {:?}", self.ledger.totals()));
        }
        if CollateralLedger::replay(self.ledger.journal()) != *self.ledger.balances() {
            return Err("journal replay disagrees with balances".into());
        }
        let has_outcome = self.outcome.is_some();
        let cleared = matches!(self.phase, Phase::Cleared | Phase::Settled);
        if has_outcome != cleared {
            return Err(format!("outcome presence {has_outcome} in phase {}", self.phase));
        }
        if self.active.len() != self.book.len() || self.active.len() > self.registry.verified_count() {
            return Err("more active bids than verified identities".into());
        }
        if self.book.bids().windows(2).any(|w| w[0].seq >= w[1].seq) {
            return Err("bid sequence numbers are not strictly increasing".into());
        }
        for token in self.active.keys() {
            if !self.registry.is_verified(token) {
                return Err(format!("active bid from unverified {token}"));
            }
        }
        if let Some(outcome) = &self.outcome {
            if outcome.winners.len() > self.params.capacity || outcome.price < self.params.floor {
                return Err("outcome breaks capacity or floor".into());
            }
        }
        match self.phase {
            Phase::Settled => self.check_settled_flows(),
            _ => {
                let held: Money = self.active.values().map(|b| b.collateral).sum();
                if held != self.ledger.totals().held {
                    return Err("unsettled collateral does not match active bids".into());
                }
                Ok(())
            }
        }
    }

    fn check_settled_flows(&self) -> Result<(), String> {
        let settlement = self.settlement.as_ref().ok_or("settled without a report")?;
        if self.ledger.totals().held != Money::ZERO {
            return Err("collateral still held after settlement".into());
        }
        for loser in &settlement.losers {
            if self.ledger.net_flows(&loser.token) != (Money::ZERO, Money::ZERO) {
                return Err(format!("loser {} has nonzero net flow", loser.token));
            }
        }
        for record in &settlement.winners {
            let (_, paid) = self.ledger.net_flows(&record.token);
            let expected = match record.status {
                TicketStatus::Issued => record.price - settlement.rebate_per_ticket,
                TicketStatus::AwaitingPayment | TicketStatus::Forfeited => record.paid_from_collateral,
            };
            if paid != expected {
                return Err(format!("winner {} paid {paid}, expected {expected}", record.token));
            }
        }
        Ok(())
    }

    /// Accepted commands as newline-delimited JSON.
    pub fn write_command_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        for cmd in &self.log {
            serde_json::to_writer(&mut out, cmd)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
