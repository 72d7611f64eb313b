//! Materialized game state and the rules every event must satisfy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::market_data::{delayed_quote, MarketDataError, PriceSeries};
use crate::model::{
    Instrument, InstrumentKind, Orientation, Player, PlayerId, Prediction, PredictionId, PricePoint, Timestamp,
};

/// The inputs the game is built from. Every state is a left fold of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    PlayerRegistered { player: Player },
    InstrumentListed { instrument: Instrument },
    PredictionEntered { prediction: Prediction },
    PriceObserved { price: PricePoint },
    ConfigChanged { config: Config },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub sequence: u64,
    pub at: Timestamp,
    pub payload: EventPayload,
}

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("expected sequence number {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("event time {at} is earlier than the previous event at {last}")]
    TimestampRegression { at: Timestamp, last: Timestamp },
    #[error("player {0} is already registered")]
    DuplicatePlayer(PlayerId),
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("unknown instrument {0}")]
    UnknownInstrument(String),
    #[error("instrument {ticker} is a {actual}, expected a {expected}")]
    WrongKind { ticker: String, expected: InstrumentKind, actual: InstrumentKind },
    #[error("instrument {ticker} is already listed as a {kind}")]
    InstrumentConflict { ticker: String, kind: InstrumentKind },
    #[error("player {player} already has an open prediction on {ticker}")]
    DuplicateOpenPrediction { player: PlayerId, ticker: String },
    #[error("prediction id {got} out of order, expected {expected}")]
    PredictionIdOutOfOrder { expected: PredictionId, got: PredictionId },
    #[error("entry values must be strictly positive")]
    NonPositiveEntry,
    #[error(transparent)]
    Quote(#[from] MarketDataError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub config: Config,
    pub players: BTreeMap<PlayerId, Player>,
    pub instruments: BTreeMap<String, Instrument>,
    pub predictions: Vec<Prediction>,
    pub prices: BTreeMap<String, PriceSeries>,
    pub last_sequence: u64,
    /// Timestamp of the latest applied event; the game's notion of "now".
    pub last_at: Option<Timestamp>,
}

/// A pick as submitted by a player, before entry prices are captured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRequest {
    pub player_id: PlayerId,
    pub stock_ticker: String,
    pub index_ticker: String,
    pub orientation: Orientation,
}

impl GameState {
    pub fn with_config(config: Config) -> Self {
        Self { config, ..Self::default() }
    }

    pub fn now(&self) -> Option<Timestamp> {
        self.last_at
    }

    pub fn next_sequence(&self) -> u64 {
        self.last_sequence + 1
    }

    pub fn instrument(&self, ticker: &str, kind: InstrumentKind) -> Result<&Instrument, GameError> {
        let inst = self.instruments.get(ticker).ok_or_else(|| GameError::UnknownInstrument(ticker.to_string()))?;
        if inst.kind != kind {
            return Err(GameError::WrongKind { ticker: ticker.to_string(), expected: kind, actual: inst.kind });
        }
        Ok(inst)
    }

    /// Predictions never close, so "open" means any earlier pick on the stock.
    pub fn has_open_prediction(&self, player: &PlayerId, stock: &str) -> bool {
        self.predictions.iter().any(|p| &p.player_id == player && p.stock_ticker == stock)
    }

    pub fn predictions_of<'a>(&'a self, player: &'a PlayerId) -> impl Iterator<Item = &'a Prediction> + 'a {
        self.predictions.iter().filter(move |p| &p.player_id == player)
    }

    /// Checks a payload against the current state without applying it.
    pub fn check(&self, payload: &EventPayload) -> Result<(), GameError> {
        match payload {
            EventPayload::PlayerRegistered { player } => {
                if self.players.contains_key(&player.id) {
                    return Err(GameError::DuplicatePlayer(player.id.clone()));
                }
            }
            EventPayload::InstrumentListed { instrument } => {
                if let Some(existing) = self.instruments.get(&instrument.ticker) {
                    if existing.kind != instrument.kind {
                        return Err(GameError::InstrumentConflict {
                            ticker: instrument.ticker.clone(),
                            kind: existing.kind,
                        });
                    }
                }
            }
            EventPayload::PredictionEntered { prediction: p } => {
                if !self.players.contains_key(&p.player_id) {
                    return Err(GameError::UnknownPlayer(p.player_id.clone()));
                }
                self.instrument(&p.stock_ticker, InstrumentKind::Stock)?;
                self.instrument(&p.index_ticker, InstrumentKind::Index)?;
                let expected = PredictionId::from_ordinal(self.predictions.len() + 1);
                if p.id != expected {
                    return Err(GameError::PredictionIdOutOfOrder { expected, got: p.id.clone() });
                }
                if !(p.stock_entry_value > 0.0 && p.index_entry_value > 0.0) {
                    return Err(GameError::NonPositiveEntry);
                }
                if self.has_open_prediction(&p.player_id, &p.stock_ticker) {
                    return Err(GameError::DuplicateOpenPrediction {
                        player: p.player_id.clone(),
                        ticker: p.stock_ticker.clone(),
                    });
                }
            }
            EventPayload::PriceObserved { price } => {
                if !self.instruments.contains_key(&price.ticker) {
                    return Err(GameError::UnknownInstrument(price.ticker.clone()));
                }
            }
            EventPayload::ConfigChanged { config } => {
                config.clone().validate()?;
            }
        }
        Ok(())
    }

    /// Checks that `at` may follow the last applied event.
    pub fn check_time(&self, at: Timestamp) -> Result<(), GameError> {
        match self.last_at {
            Some(last) if at < last => Err(GameError::TimestampRegression { at, last }),
            _ => Ok(()),
        }
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), GameError> {
        if event.sequence != self.next_sequence() {
            return Err(GameError::SequenceGap { expected: self.next_sequence(), got: event.sequence });
        }
        self.check_time(event.at)?;
        self.check(&event.payload)?;
        match &event.payload {
            EventPayload::PlayerRegistered { player } => {
                self.players.insert(player.id.clone(), player.clone());
            }
            EventPayload::InstrumentListed { instrument } => {
                self.instruments.insert(instrument.ticker.clone(), instrument.clone());
            }
            EventPayload::PredictionEntered { prediction } => self.predictions.push(prediction.clone()),
            EventPayload::PriceObserved { price } => {
                self.prices
                    .entry(price.ticker.clone())
                    .or_insert_with(|| PriceSeries::new(price.ticker.clone()))
                    .insert(price.clone())?;
            }
            EventPayload::ConfigChanged { config } => self.config = config.clone(),
        }
        self.last_sequence = event.sequence;
        self.last_at = Some(event.at);
        Ok(())
    }

    /// Turns a submission into a prediction with delayed entry quotes as of
    /// `now`. The result is ready to be appended as `PredictionEntered`.
    pub fn prepare_prediction(&self, request: &SubmissionRequest, now: Timestamp) -> Result<Prediction, GameError> {
        if !self.players.contains_key(&request.player_id) {
            return Err(GameError::UnknownPlayer(request.player_id.clone()));
        }
        self.instrument(&request.stock_ticker, InstrumentKind::Stock)?;
        self.instrument(&request.index_ticker, InstrumentKind::Index)?;
        if self.has_open_prediction(&request.player_id, &request.stock_ticker) {
            return Err(GameError::DuplicateOpenPrediction {
                player: request.player_id.clone(),
                ticker: request.stock_ticker.clone(),
            });
        }
        let quote = |ticker: &str| -> Result<f64, GameError> {
            let series = self.prices.get(ticker).ok_or_else(|| MarketDataError::NoQuoteAvailable {
                ticker: ticker.to_string(),
                cutoff: now - self.config.price_delay(),
            })?;
            Ok(delayed_quote(series, now, &self.config)?.value)
        };
        Ok(Prediction {
            id: PredictionId::from_ordinal(self.predictions.len() + 1),
            player_id: request.player_id.clone(),
            stock_ticker: request.stock_ticker.clone(),
            index_ticker: request.index_ticker.clone(),
            orientation: request.orientation,
            entered_at: now,
            stock_entry_value: quote(&request.stock_ticker)?,
            index_entry_value: quote(&request.index_ticker)?,
        })
    }
}

/// Events that bring `points` into the game: listings for tickers not seen
/// before (as indexes when named in `index_tickers`, otherwise stocks), then
/// one price event per point in time order. Each event is stamped with the
/// later of `now` and the point's own time, so prices from the future move
/// the game clock forward.
pub fn price_ingest_events(
    state: &GameState,
    mut points: Vec<PricePoint>,
    index_tickers: &[String],
    now: Timestamp,
) -> Result<Vec<(Timestamp, EventPayload)>, GameError> {
    points.sort_by(|a, b| (a.at, &a.ticker).cmp(&(b.at, &b.ticker)));
    let mut out = Vec::new();
    let mut listed: Vec<&str> = Vec::new();
    for p in &points {
        if state.instruments.contains_key(&p.ticker) || listed.contains(&p.ticker.as_str()) {
            continue;
        }
        let kind = if index_tickers.contains(&p.ticker) { InstrumentKind::Index } else { InstrumentKind::Stock };
        out.push((
            now,
            EventPayload::InstrumentListed {
                instrument: Instrument::new(p.ticker.clone(), kind).expect("ticker validated"),
            },
        ));
        listed.push(&p.ticker);
    }
    for ticker in index_tickers {
        if let Some(inst) = state.instruments.get(ticker) {
            if inst.kind != InstrumentKind::Index {
                return Err(GameError::InstrumentConflict { ticker: ticker.clone(), kind: inst.kind });
            }
        }
    }
    for p in points {
        out.push((now.max(p.at), EventPayload::PriceObserved { price: p }));
    }
    Ok(out)
}

/// Replays events on top of `state`, stopping after `up_to` when given.
pub fn fold_events<'a>(
    mut state: GameState,
    events: impl IntoIterator<Item = &'a Event>,
    up_to: Option<u64>,
) -> Result<GameState, (u64, GameError)> {
    for event in events {
        if up_to.is_some_and(|limit| event.sequence > limit) {
            break;
        }
        state.apply(event).map_err(|e| (event.sequence, e))?;
    }
    Ok(state)
}
