//! Evaluates a materialized game state: scores every pick as of the state's
//! latest event, ranks players and rates stocks.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::game::GameState;
use crate::market_data::delayed_quote;
use crate::model::{InstrumentKind, PlayerId, PredictionId, Timestamp};
use crate::ranking::{rank_players, LeaderboardEntry, PlayerStats, Ranking};
use crate::scoring::{score_prediction, PredictionScore};
use crate::stock_rating::{rate_all_stocks, report_top, ReportRow, StockPick, StockRating};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Last event sequence the evaluation covers.
    pub sequence: u64,
    pub as_of: Option<Timestamp>,
    pub scores: Vec<PredictionScore>,
    /// Picks that could not be scored (no quote for one of the instruments).
    pub unscored: Vec<PredictionId>,
    pub ranking: Ranking,
    pub stock_ratings: Vec<StockRating>,
}

impl Evaluation {
    pub fn leaderboard(&self) -> &[LeaderboardEntry] {
        &self.ranking.leaderboard
    }

    pub fn player(&self, id: &PlayerId) -> Option<(&PlayerStats, &LeaderboardEntry)> {
        let stats = self.ranking.stats.iter().find(|s| &s.player_id == id)?;
        let entry = self.ranking.leaderboard.iter().find(|e| &e.player_id == id)?;
        Some((stats, entry))
    }
}

pub fn evaluate(state: &GameState) -> Evaluation {
    let Some(now) = state.now() else {
        return Evaluation::default();
    };
    let config = &state.config;

    let mut scores = Vec::with_capacity(state.predictions.len());
    let mut unscored = Vec::new();
    for p in &state.predictions {
        let quote = |ticker: &str| state.prices.get(ticker).and_then(|s| delayed_quote(s, now, config).ok());
        match score_prediction(p, quote(&p.stock_ticker), quote(&p.index_ticker), config, now) {
            Ok(s) => scores.push(s),
            Err(_) => unscored.push(p.id.clone()),
        }
    }

    let owner: HashMap<&PredictionId, &PlayerId> = state.predictions.iter().map(|p| (&p.id, &p.player_id)).collect();
    let mut by_player: BTreeMap<&PlayerId, Vec<&PredictionScore>> =
        state.players.keys().map(|id| (id, Vec::new())).collect();
    for s in &scores {
        if let Some(list) = by_player.get_mut(owner[&s.prediction_id]) {
            list.push(s);
        }
    }
    let tallies = by_player.into_iter().map(|(id, list)| PlayerStats::tally(id.clone(), list, config)).collect();
    let ranking = rank_players(tallies, config);

    let mature: HashMap<&PredictionId, bool> = scores.iter().map(|s| (&s.prediction_id, s.mature)).collect();
    let mut picks_by_stock: BTreeMap<String, Vec<StockPick>> = state
        .instruments
        .values()
        .filter(|i| i.kind == InstrumentKind::Stock)
        .map(|i| (i.ticker.clone(), Vec::new()))
        .collect();
    for p in &state.predictions {
        if mature.get(&p.id).copied().unwrap_or(false) {
            picks_by_stock
                .entry(p.stock_ticker.clone())
                .or_default()
                .push(StockPick { player_id: p.player_id.clone(), orientation: p.orientation });
        }
    }
    let stock_ratings = rate_all_stocks(&picks_by_stock, &ranking.leaderboard, config);

    Evaluation { sequence: state.last_sequence, as_of: Some(now), scores, unscored, ranking, stock_ratings }
}

/// Top-`n` report rows for an evaluation of `state`.
pub fn report(state: &GameState, evaluation: &Evaluation, n: usize) -> Vec<ReportRow> {
    match evaluation.as_of {
        Some(now) => report_top(&evaluation.stock_ratings, &state.prices, now, &state.config, n),
        None => Vec::new(),
    }
}
