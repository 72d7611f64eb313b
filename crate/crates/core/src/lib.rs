//! Crowd-sourced stock ratings from a prediction game.
//!
//! Players pick stocks to outperform or underperform a benchmark index.
//! Matured picks are scored against the index, players are ranked by a blend
//! of score and Bayesian-shrunk accuracy percentiles, and each stock is rated
//! by the leaderboard mass of the players who picked it.
//!
//! All inputs live in an append-only [`event_store`] log; every rating is a
//! pure function of a log prefix.

pub mod config;
pub mod engine;
pub mod event_store;
pub mod game;
pub mod market_data;
pub mod model;
pub mod ranking;
pub mod scoring;
pub mod simulate;
pub mod stock_rating;
pub mod wire;

pub use config::{BlendWeights, Config, ConfigError, ConfigFile, Settings};
pub use engine::{evaluate, Evaluation};
pub use game::{Event, EventPayload, GameError, GameState, SubmissionRequest};
pub use model::{
    Instrument, InstrumentKind, Orientation, Player, PlayerId, Prediction, PredictionId, PricePoint, Timestamp,
};
