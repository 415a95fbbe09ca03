//! Bid files: `bidder_id,amount[,valuation]`, one bid per row in arrival order.

use std::collections::HashSet;
use std::io::Read;

use mt_core::agents::{BidderProfile, Strategy};
use mt_core::auction::{BidBook, BidderId};
use mt_core::Money;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BidFileError {
    #[error("row {row}: {message}")]
    Row { row: u64, message: String },
    #[error("bid file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidRow {
    pub bidder: BidderId,
    pub amount: Money,
    pub valuation: Option<Money>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    bidder_id: String,
    amount: String,
    #[serde(default)]
    valuation: Option<String>,
}

fn money(row: u64, field: &str, text: &str) -> Result<Money, BidFileError> {
    let value: Money = text.parse().map_err(|e| BidFileError::Row {
        row,
        message: format!("{field} {text:?}: {e}"),
    })?;
    if value.is_negative() {
        return Err(BidFileError::Row {
            row,
            message: format!("{field} {text:?} is negative"),
        });
    }
    Ok(value)
}

/// Parses a bid file. Row numbers in errors count the header as row 1.
pub fn parse_bids(input: impl Read) -> Result<Vec<BidRow>, BidFileError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| BidFileError::Format(e.to_string()))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    for required in ["bidder_id", "amount"] {
        if !headers.iter().any(|h| h == required) {
            return Err(BidFileError::Format(format!("missing column {required:?}")));
        }
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.deserialize::<RawRow>().enumerate() {
        let row = i as u64 + 2;
        let raw = record.map_err(|e| BidFileError::Row {
            row,
            message: e.to_string(),
        })?;
        if raw.bidder_id.is_empty() {
            return Err(BidFileError::Row {
                row,
                message: "empty bidder_id".into(),
            });
        }
        if !seen.insert(raw.bidder_id.clone()) {
            return Err(BidFileError::Row {
                row,
                message: format!("bidder {:?} already bid", raw.bidder_id),
            });
        }
        let amount = money(row, "amount", &raw.amount)?;
        let valuation = match raw.valuation.as_deref() {
            None | Some("") => None,
            Some(text) => Some(money(row, "valuation", text)?),
        };
        rows.push(BidRow {
            bidder: BidderId::new(raw.bidder_id),
            amount,
            valuation,
        });
    }
    let with_valuation = rows.iter().filter(|r| r.valuation.is_some()).count();
    if with_valuation != 0 && with_valuation != rows.len() {
        let first_missing = rows.iter().position(|r| r.valuation.is_none()).expect("some row lacks one");
        return Err(BidFileError::Row {
            row: first_missing as u64 + 2,
            message: "valuation missing; give it on every row or none".into(),
        });
    }
    Ok(rows)
}

pub fn book_from(rows: &[BidRow], floor: Money, capacity: usize) -> Result<BidBook, mt_core::auction::BookError> {
    let mut book = BidBook::new(floor, capacity)?;
    for r in rows {
        book.submit(r.bidder.clone(), r.amount)?;
    }
    Ok(book)
}

/// Bidder profiles when every row carries a valuation.
pub fn population(rows: &[BidRow]) -> Option<Vec<BidderProfile>> {
    rows.iter()
        .map(|r| {
            r.valuation.map(|valuation| BidderProfile {
                id: r.bidder.clone(),
                valuation,
                strategy: Strategy::Fixed(r.amount),
            })
        })
        .collect()
}
