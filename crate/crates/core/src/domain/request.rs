use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::money::Money;
use crate::error::{Error, Result};

pub const MAX_PATH_DEPTH: usize = 8;

/// Path from a hierarchy root (exclusive) down to a node, as node ids.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeaturePath {
    ids: [u32; MAX_PATH_DEPTH],
    len: u8,
}

impl FeaturePath {
    pub const ROOT: FeaturePath = FeaturePath {
        ids: [0; MAX_PATH_DEPTH],
        len: 0,
    };

    pub fn new(ids: &[u32]) -> Result<Self> {
        if ids.len() > MAX_PATH_DEPTH {
            return Err(Error::invalid(format!(
                "path depth {} exceeds {MAX_PATH_DEPTH}",
                ids.len()
            )));
        }
        let mut out = Self::ROOT;
        out.ids[..ids.len()].copy_from_slice(ids);
        out.len = ids.len() as u8;
        Ok(out)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ids[..self.len as usize]
    }

    pub fn depth(&self) -> usize {
        self.len as usize
    }

    pub fn starts_with(&self, prefix: &FeaturePath) -> bool {
        self.as_slice().starts_with(prefix.as_slice())
    }
}

impl fmt::Debug for FeaturePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeaturePath({self})")
    }
}

impl fmt::Display for FeaturePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 0 {
            return f.write_str("/");
        }
        for (i, id) in self.as_slice().iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

impl FromStr for FeaturePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_matches('/');
        if s.is_empty() {
            return Ok(Self::ROOT);
        }
        let ids = s
            .split('/')
            .map(|part| {
                part.parse::<u32>()
                    .map_err(|_| Error::invalid(format!("bad node id {part:?} in path")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&ids)
    }
}

impl Serialize for FeaturePath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeaturePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One bidding opportunity as seen by decision code.
///
/// The simulator keeps the true response probability beside the request (see
/// `exchange_sim::SimRequest`), never inside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdRequest {
    pub id: u64,
    pub slot: usize,
    pub advertiser: FeaturePath,
    pub publisher: FeaturePath,
    pub user: FeaturePath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Click,
    Conversion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub won: bool,
    /// Price actually paid; zero on a loss.
    pub clearing_price: Money,
    pub submitted_bid: Money,
}

impl AuctionOutcome {
    pub fn won(submitted_bid: Money, clearing_price: Money) -> Self {
        Self {
            won: true,
            clearing_price,
            submitted_bid,
        }
    }

    pub fn lost(submitted_bid: Money) -> Self {
        Self {
            won: false,
            clearing_price: Money::ZERO,
            submitted_bid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.won && self.clearing_price > self.submitted_bid {
            return Err(Error::InvalidOutcome("clearing price above submitted bid"));
        }
        if !self.won && !self.clearing_price.is_zero() {
            return Err(Error::InvalidOutcome("lost auction with a nonzero price"));
        }
        Ok(())
    }
}
