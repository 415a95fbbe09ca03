use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::auction::BidderId;

/// Decides whether an identity token belongs to a real, distinct person.
pub trait IdentityVerifier: Send + Sync {
    fn verify(&self, token: &BidderId) -> bool;
}

/// Approves every token.
#[derive(Clone, Copy, Debug, Default)]
pub struct AcceptAll;

impl IdentityVerifier for AcceptAll {
    fn verify(&self, _token: &BidderId) -> bool {
        true
    }
}

/// Approves every token except the listed ones.
#[derive(Clone, Debug, Default)]
pub struct DenyList(BTreeSet<BidderId>);

impl DenyList {
    pub fn new(denied: impl IntoIterator<Item = BidderId>) -> Self {
        DenyList(denied.into_iter().collect())
    }
}

impl IdentityVerifier for DenyList {
    fn verify(&self, token: &BidderId) -> bool {
        !self.0.contains(token)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub verified: bool,
    /// Party size declared at registration. Each token still carries a
    /// single bid right; a party of three registers three tokens.
    pub max_units: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRegistry {
    records: BTreeMap<BidderId, IdentityRecord>,
}

impl IdentityRegistry {
    pub fn get(&self, token: &BidderId) -> Option<&IdentityRecord> {
        self.records.get(token)
    }

    pub fn contains(&self, token: &BidderId) -> bool {
        self.records.contains_key(token)
    }

    pub fn is_verified(&self, token: &BidderId) -> bool {
        self.records.get(token).is_some_and(|r| r.verified)
    }

    pub(crate) fn insert(&mut self, token: BidderId, record: IdentityRecord) {
        self.records.insert(token, record);
    }

    pub fn verified_count(&self) -> usize {
        self.records.values().filter(|r| r.verified).count()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BidderId, &IdentityRecord)> {
        self.records.iter()
    }
}
