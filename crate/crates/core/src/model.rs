//! Domain records shared by every part of the game.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("ticker must be non-empty")]
    EmptyTicker,
    #[error("player id must be non-empty")]
    EmptyPlayerId,
    #[error("price for {ticker} must be strictly positive, got {value}")]
    NonPositivePrice { ticker: String, value: f64 },
    #[error("unknown orientation `{0}` (expected `outperform` or `underperform`)")]
    UnknownOrientation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstrumentKind {
    Stock,
    Index,
}

impl fmt::Display for InstrumentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstrumentKind::Stock => f.write_str("stock"),
            InstrumentKind::Index => f.write_str("index"),
        }
    }
}

/// A tradable stock or a benchmark index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instrument {
    pub ticker: String,
    pub kind: InstrumentKind,
}

impl Instrument {
    pub fn new(ticker: impl Into<String>, kind: InstrumentKind) -> Result<Self, ModelError> {
        let ticker = ticker.into();
        if ticker.is_empty() {
            return Err(ModelError::EmptyTicker);
        }
        Ok(Self { ticker, kind })
    }

    pub fn stock(ticker: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(ticker, InstrumentKind::Stock)
    }

    pub fn index(ticker: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(ticker, InstrumentKind::Index)
    }
}

/// One observed price of an instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub ticker: String,
    pub at: Timestamp,
    pub value: f64,
}

impl PricePoint {
    pub fn new(ticker: impl Into<String>, at: Timestamp, value: f64) -> Result<Self, ModelError> {
        let ticker = ticker.into();
        if ticker.is_empty() {
            return Err(ModelError::EmptyTicker);
        }
        // Also rejects NaN.
        if !(value.is_finite() && value > 0.0) {
            return Err(ModelError::NonPositivePrice { ticker, value });
        }
        Ok(Self { ticker, at, value })
    }
}

/// Direction of a pick relative to its benchmark index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Outperform,
    Underperform,
}

impl Orientation {
    pub const ALL: [Orientation; 2] = [Orientation::Outperform, Orientation::Underperform];

    pub fn opposite(self) -> Self {
        match self {
            Orientation::Outperform => Orientation::Underperform,
            Orientation::Underperform => Orientation::Outperform,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Outperform => "outperform",
            Orientation::Underperform => "underperform",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "outperform" => Ok(Orientation::Outperform),
            "underperform" => Ok(Orientation::Underperform),
            other => Err(ModelError::UnknownOrientation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ModelError::EmptyPlayerId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub id: PlayerId,
    pub name: String,
    pub registered_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionId(String);

impl PredictionId {
    /// Ids are assigned in log order, so the n-th prediction is always `pr-n`.
    pub fn from_ordinal(n: usize) -> Self {
        Self(format!("pr-{n}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PredictionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A player's pick, with the delayed entry quotes captured at submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: PredictionId,
    pub player_id: PlayerId,
    pub stock_ticker: String,
    pub index_ticker: String,
    pub orientation: Orientation,
    pub entered_at: Timestamp,
    pub stock_entry_value: f64,
    pub index_entry_value: f64,
}
