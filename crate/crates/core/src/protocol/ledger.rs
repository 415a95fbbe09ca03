//! Collateral ledger with an append-only journal.
//!
//! Balances only move through journaled deposits, refunds and payments, so
//! replaying the journal always reproduces them. Rebates are seller-funded
//! and forfeitures reclassify money already paid; both are journaled for audit
//! but do not touch collateral balances.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::BidderId;
use crate::money::Money;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// Funds posted by the identity (collateral or a later balance payment).
    Deposit,
    /// Held funds returned to the identity.
    Refund,
    /// Held funds transferred to the seller.
    Payment,
    /// Seller-funded transfer back to a winner.
    Rebate,
    /// A payment kept as a default penalty.
    Forfeit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub index: u64,
    pub at: u64,
    pub kind: EntryKind,
    pub identity: BidderId,
    pub amount: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("negative amount {0}")]
    NegativeAmount(Money),
    #[error("{identity} holds {held}, cannot release {requested}")]
    InsufficientBalance {
        identity: BidderId,
        held: Money,
        requested: Money,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub deposits: Money,
    pub refunds: Money,
    pub payments: Money,
    pub rebates: Money,
    pub forfeited: Money,
    pub held: Money,
}

impl LedgerTotals {
    /// Every deposited cent is either refunded, paid out, or still held.
    pub fn is_conserved(&self) -> bool {
        self.deposits == self.refunds + self.payments + self.held
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollateralLedger {
    balances: BTreeMap<BidderId, Money>,
    journal: Vec<JournalEntry>,
}

impl CollateralLedger {
    pub fn balance(&self, identity: &BidderId) -> Money {
        self.balances.get(identity).copied().unwrap_or_default()
    }

    pub fn balances(&self) -> &BTreeMap<BidderId, Money> {
        &self.balances
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn deposit(&mut self, identity: &BidderId, amount: Money, at: u64) -> Result<(), LedgerError> {
        non_negative(amount)?;
        *self.balances.entry(identity.clone()).or_default() += amount;
        self.record(EntryKind::Deposit, identity, amount, at);
        Ok(())
    }

    pub fn refund(&mut self, identity: &BidderId, amount: Money, at: u64) -> Result<(), LedgerError> {
        self.release(EntryKind::Refund, identity, amount, at)
    }

    pub fn pay(&mut self, identity: &BidderId, amount: Money, at: u64) -> Result<(), LedgerError> {
        self.release(EntryKind::Payment, identity, amount, at)
    }

    pub fn rebate(&mut self, identity: &BidderId, amount: Money, at: u64) -> Result<(), LedgerError> {
        non_negative(amount)?;
        self.record(EntryKind::Rebate, identity, amount, at);
        Ok(())
    }

    pub fn forfeit(&mut self, identity: &BidderId, amount: Money, at: u64) -> Result<(), LedgerError> {
        non_negative(amount)?;
        self.record(EntryKind::Forfeit, identity, amount, at);
        Ok(())
    }

    fn release(&mut self, kind: EntryKind, identity: &BidderId, amount: Money, at: u64) -> Result<(), LedgerError> {
        non_negative(amount)?;
        let held = self.balance(identity);
        if held < amount {
            return Err(LedgerError::InsufficientBalance {
                identity: identity.clone(),
                held,
                requested: amount,
            });
        }
        self.balances.insert(identity.clone(), held - amount);
        self.record(kind, identity, amount, at);
        Ok(())
    }

    fn record(&mut self, kind: EntryKind, identity: &BidderId, amount: Money, at: u64) {
        self.journal.push(JournalEntry {
            index: self.journal.len() as u64,
            at,
            kind,
            identity: identity.clone(),
            amount,
        });
    }

    pub fn totals(&self) -> LedgerTotals {
        let mut t = LedgerTotals {
            held: self.balances.values().sum(),
            ..LedgerTotals::default()
        };
        for e in &self.journal {
            match e.kind {
                EntryKind::Deposit => t.deposits += e.amount,
                EntryKind::Refund => t.refunds += e.amount,
                EntryKind::Payment => t.payments += e.amount,
                EntryKind::Rebate => t.rebates += e.amount,
                EntryKind::Forfeit => t.forfeited += e.amount,
            }
        }
        t
    }

    /// Balances recomputed from the journal alone.
    pub fn replay(journal: &[JournalEntry]) -> BTreeMap<BidderId, Money> {
        let mut balances: BTreeMap<BidderId, Money> = BTreeMap::new();
        for e in journal {
            let delta = match e.kind {
                EntryKind::Deposit => e.amount,
                EntryKind::Refund | EntryKind::Payment => -e.amount,
                EntryKind::Rebate | EntryKind::Forfeit => continue,
            };
            *balances.entry(e.identity.clone()).or_default() += delta;
        }
        balances
    }

    /// Conservation plus exact agreement between balances and journal replay.
    pub fn is_consistent(&self) -> bool {
        self.totals().is_conserved() && Self::replay(&self.journal) == self.balances
    }

    /// Net flows per identity: `(deposits - refunds, payments - rebates)`.
    pub fn net_flows(&self, identity: &BidderId) -> (Money, Money) {
        let mut posted = Money::ZERO;
        let mut paid = Money::ZERO;
        for e in self.journal.iter().filter(|e| &e.identity == identity) {
            match e.kind {
                EntryKind::Deposit => posted += e.amount,
                EntryKind::Refund => posted -= e.amount,
                EntryKind::Payment => paid += e.amount,
                EntryKind::Rebate => paid -= e.amount,
                EntryKind::Forfeit => {}
            }
        }
        (posted, paid)
    }

    /// One JSON object per line, oldest first.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> io::Result<()> {
        for entry in &self.journal {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn non_negative(amount: Money) -> Result<(), LedgerError> {
    if amount.is_negative() {
        Err(LedgerError::NegativeAmount(amount))
    } else {
        Ok(())
    }
}
