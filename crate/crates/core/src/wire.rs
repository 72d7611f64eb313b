//! JSON bodies exchanged by the HTTP service and its client. Every read
//! response names the log sequence number it was computed from.

use serde::{Deserialize, Serialize};

use crate::model::{Instrument, Player, PlayerId, Prediction, Timestamp};
use crate::ranking::{LeaderboardEntry, PlayerStats};
use crate::stock_rating::{ReportRow, StockRating};

pub use crate::game::SubmissionRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCreated {
    pub sequence: u64,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsResponse {
    pub sequence: u64,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardResponse {
    pub sequence: u64,
    pub as_of: Option<Timestamp>,
    pub entries: Vec<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockRatingsResponse {
    pub sequence: u64,
    pub as_of: Option<Timestamp>,
    pub ratings: Vec<StockRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResponse {
    pub sequence: u64,
    pub as_of: Option<Timestamp>,
    pub rows: Vec<ReportRow>,
}

/// A registered player. `stats` and `entry` are absent until the player has
/// enough matured picks to be ranked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerResponse {
    pub sequence: u64,
    pub as_of: Option<Timestamp>,
    pub player: Player,
    pub stats: Option<PlayerStats>,
    pub entry: Option<LeaderboardEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentsResponse {
    pub sequence: u64,
    pub instruments: Vec<Instrument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterPlayerRequest {
    pub id: PlayerId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRegistered {
    pub sequence: u64,
    pub player: Player,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Stable machine-readable category, e.g. `not_found`, `conflict`.
    pub kind: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricesIngested {
    pub sequence: u64,
    pub prices: usize,
    /// Events appended, including listings of new instruments.
    pub events: usize,
}
