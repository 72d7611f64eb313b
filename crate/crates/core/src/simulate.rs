//! Seeded synthetic games.
//!
//! The market is a set of independent geometric random walks, one per stock,
//! with the benchmark index the equal-weighted average of all stocks'
//! relative moves. Three kinds of agents enter picks:
//!
//! - skilled agents look one pending period ahead and pick the right side
//!   with a per-agent probability,
//! - noise agents pick uniformly at random,
//! - imitators copy the pick that the current leaderboard leader entered
//!   exactly `lag_days` earlier.
//!
//! Base agents enter exactly `predictions` picks between them, all early
//! enough to mature before the last simulated close. Imitator copies come on
//! top of that budget.

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::Config;
use crate::engine::evaluate;
use crate::game::{Event, EventPayload, GameError, GameState};
use crate::model::{Instrument, Orientation, Player, PlayerId, Prediction, PredictionId, PricePoint, Timestamp};

pub const INDEX_TICKER: &str = "IDX";

/// Picks per player in the reference game: 667 picks over 47 players.
pub const REFERENCE_PICKS_PER_PLAYER: f64 = 667.0 / 47.0;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("{0}")]
    Parameters(String),
    #[error("generated event {sequence} was rejected: {source}")]
    Rejected { sequence: u64, source: GameError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    pub players: usize,
    pub stocks: usize,
    pub days: u32,
    pub seed: u64,
    pub imitators: usize,
    pub lag_days: u32,
    /// Total picks by skilled and noise agents. Defaults to the reference
    /// picks-per-player rate.
    pub predictions: Option<usize>,
    pub skilled_fraction: f64,
    pub daily_drift: f64,
    pub daily_volatility: f64,
    pub start: Timestamp,
    pub config: Config,
}

impl SimulationParams {
    pub fn new(players: usize, stocks: usize, days: u32, seed: u64) -> Self {
        Self {
            players,
            stocks,
            days,
            seed,
            imitators: 0,
            lag_days: 1,
            predictions: None,
            skilled_fraction: 0.5,
            daily_drift: 0.0003,
            daily_volatility: 0.02,
            start: Utc.with_ymd_and_hms(2013, 1, 2, 16, 0, 0).unwrap(),
            config: Config::default(),
        }
    }

    pub fn prediction_budget(&self) -> usize {
        self.predictions.unwrap_or_else(|| (self.players as f64 * REFERENCE_PICKS_PER_PLAYER).round() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Agent {
    Skilled { hit_rate: f64 },
    Noise,
    Imitator,
}

struct Market {
    /// `closes[day][stock]`
    closes: Vec<Vec<f64>>,
    index: Vec<f64>,
}

impl Market {
    fn generate(p: &SimulationParams, rng: &mut ChaCha8Rng) -> Self {
        let days = p.days as usize;
        let mut current: Vec<f64> = (0..p.stocks).map(|_| rng.random_range(10.0..500.0)).collect();
        let starts = current.clone();
        let drift: Vec<f64> = (0..p.stocks).map(|_| p.daily_drift * rng.random_range(-1.0..3.0)).collect();
        let vol: Vec<f64> = (0..p.stocks).map(|_| p.daily_volatility * rng.random_range(0.5..1.5)).collect();

        let mut closes = Vec::with_capacity(days);
        let mut index = Vec::with_capacity(days);
        for day in 0..days {
            if day > 0 {
                for (i, price) in current.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *price *= (drift[i] - 0.5 * vol[i] * vol[i] + vol[i] * z).exp();
                }
            }
            let relative: f64 = current.iter().zip(&starts).map(|(c, s)| c / s).sum::<f64>() / p.stocks as f64;
            index.push(100.0 * relative);
            closes.push(current.clone());
        }
        Self { closes, index }
    }

    /// Whether the stock beats the index between two closes.
    fn outperforms(&self, stock: usize, from: usize, to: usize) -> bool {
        self.closes[to][stock] / self.closes[from][stock] > self.index[to] / self.index[from]
    }
}

fn stock_ticker(i: usize) -> String {
    format!("S{:03}", i + 1)
}

struct Builder {
    state: GameState,
    events: Vec<Event>,
}

impl Builder {
    fn push(&mut self, at: Timestamp, payload: EventPayload) -> Result<(), SimulationError> {
        let event = Event { sequence: self.state.next_sequence(), at, payload };
        self.state.apply(&event).map_err(|source| SimulationError::Rejected { sequence: event.sequence, source })?;
        self.events.push(event);
        Ok(())
    }

    fn enter(
        &mut self,
        player: &PlayerId,
        stock: usize,
        orientation: Orientation,
        at: Timestamp,
        market: &Market,
        day: usize,
    ) -> Result<(), SimulationError> {
        let prediction = Prediction {
            id: PredictionId::from_ordinal(self.state.predictions.len() + 1),
            player_id: player.clone(),
            stock_ticker: stock_ticker(stock),
            index_ticker: INDEX_TICKER.to_string(),
            orientation,
            entered_at: at,
            stock_entry_value: market.closes[day][stock],
            index_entry_value: market.index[day],
        };
        self.push(at, EventPayload::PredictionEntered { prediction })
    }
}

/// Generates a complete event log for a fresh game.
pub fn simulate(p: &SimulationParams) -> Result<Vec<Event>, SimulationError> {
    let config = p.config.clone().validate().map_err(|e| SimulationError::Parameters(e.to_string()))?;
    let pending = config.pending_period_days as usize;
    let days = p.days as usize;
    if p.stocks == 0 || p.players == 0 {
        return Err(SimulationError::Parameters("need at least one player and one stock".into()));
    }
    if days < pending + 2 {
        return Err(SimulationError::Parameters(format!("need at least {} days so picks can mature", pending + 2)));
    }
    let budget = p.prediction_budget();
    if budget > p.players * p.stocks {
        return Err(SimulationError::Parameters(format!(
            "{budget} picks do not fit {} players x {} stocks",
            p.players, p.stocks
        )));
    }
    if !(0.0..=1.0).contains(&p.skilled_fraction) {
        return Err(SimulationError::Parameters("skilled fraction must be in [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let market = Market::generate(p, &mut rng);

    let skilled = (p.players as f64 * p.skilled_fraction).round() as usize;
    let mut agents: Vec<(PlayerId, Agent)> = Vec::new();
    for i in 0..p.players {
        let agent = if i < skilled { Agent::Skilled { hit_rate: rng.random_range(0.55..0.8) } } else { Agent::Noise };
        agents.push((PlayerId::new(format!("sim-{:03}", i + 1)).unwrap(), agent));
    }
    for i in 0..p.imitators {
        agents.push((PlayerId::new(format!("imi-{:03}", i + 1)).unwrap(), Agent::Imitator));
    }

    // Pick budget: one per base agent first, the rest spread at random.
    let mut per_player = vec![0usize; p.players];
    for slot in per_player.iter_mut().take(budget) {
        *slot = 1;
    }
    let mut remaining = budget.saturating_sub(p.players);
    while remaining > 0 {
        let i = rng.random_range(0..p.players);
        if per_player[i] < p.stocks {
            per_player[i] += 1;
            remaining -= 1;
        }
    }
    // Entries on days 0..=last_pick_day mature before the final close.
    let last_pick_day = days - 2 - pending;
    let mut schedule: Vec<Vec<usize>> = vec![Vec::new(); last_pick_day + 1];
    for (player, &count) in per_player.iter().enumerate() {
        for _ in 0..count {
            schedule[rng.random_range(0..=last_pick_day)].push(player);
        }
    }
    let mut unpicked: Vec<Vec<usize>> = (0..agents.len()).map(|_| (0..p.stocks).collect()).collect();
    for list in &mut unpicked {
        list.shuffle(&mut rng);
    }

    let close = |day: usize| p.start + Duration::days(day as i64);
    let entry_time = |day: usize| close(day) + Duration::hours(1);

    let mut b = Builder { state: GameState::default(), events: Vec::new() };
    let setup_at = p.start - Duration::hours(1);
    b.push(setup_at, EventPayload::ConfigChanged { config: config.clone() })?;
    b.push(setup_at, EventPayload::InstrumentListed { instrument: Instrument::index(INDEX_TICKER).unwrap() })?;
    for s in 0..p.stocks {
        b.push(setup_at, EventPayload::InstrumentListed { instrument: Instrument::stock(stock_ticker(s)).unwrap() })?;
    }
    for (id, agent) in &agents {
        let name = match agent {
            Agent::Skilled { hit_rate } => format!("skilled agent (hit rate {hit_rate:.2})"),
            Agent::Noise => "noise agent".to_string(),
            Agent::Imitator => format!("imitator (lag {}d)", p.lag_days),
        };
        b.push(
            setup_at,
            EventPayload::PlayerRegistered { player: Player { id: id.clone(), name, registered_at: setup_at } },
        )?;
    }

    for day in 0..days {
        let at = close(day);
        for s in 0..p.stocks {
            b.push(
                at,
                EventPayload::PriceObserved {
                    price: PricePoint::new(stock_ticker(s), at, market.closes[day][s]).unwrap(),
                },
            )?;
        }
        b.push(
            at,
            EventPayload::PriceObserved { price: PricePoint::new(INDEX_TICKER, at, market.index[day]).unwrap() },
        )?;

        let pick_at = entry_time(day);
        if let Some(todays) = schedule.get(day) {
            let horizon = (day + pending + 1).min(days - 1);
            for &player in todays {
                let Some(stock) = unpicked[player].pop() else { continue };
                let orientation = match agents[player].1 {
                    Agent::Skilled { hit_rate } => {
                        let right = if market.outperforms(stock, day, horizon) {
                            Orientation::Outperform
                        } else {
                            Orientation::Underperform
                        };
                        if rng.random_bool(hit_rate) {
                            right
                        } else {
                            right.opposite()
                        }
                    }
                    _ => {
                        if rng.random_bool(0.5) {
                            Orientation::Outperform
                        } else {
                            Orientation::Underperform
                        }
                    }
                };
                let id = agents[player].0.clone();
                b.enter(&id, stock, orientation, pick_at, &market, day)?;
            }
        }

        if p.imitators > 0 && day >= p.lag_days as usize {
            copy_leader(&mut b, &agents, &mut unpicked, p, pick_at, &market, day)?;
        }
    }
    Ok(b.events)
}

fn copy_leader(
    b: &mut Builder,
    agents: &[(PlayerId, Agent)],
    unpicked: &mut [Vec<usize>],
    p: &SimulationParams,
    pick_at: Timestamp,
    market: &Market,
    day: usize,
) -> Result<(), SimulationError> {
    let evaluation = evaluate(&b.state);
    let Some(leader) = evaluation.leaderboard().first().map(|e| e.player_id.clone()) else {
        return Ok(());
    };
    let source_at = pick_at - Duration::days(i64::from(p.lag_days));
    let Some(original) = b.state.predictions_of(&leader).filter(|pr| pr.entered_at == source_at).last().cloned() else {
        return Ok(());
    };
    let stock: usize = original.stock_ticker[1..].parse::<usize>().expect("simulated tickers are S<n>") - 1;
    for (i, (id, agent)) in agents.iter().enumerate() {
        if *agent != Agent::Imitator || *id == leader {
            continue;
        }
        let Some(pos) = unpicked[i].iter().position(|&s| s == stock) else { continue };
        unpicked[i].swap_remove(pos);
        b.enter(id, stock, original.orientation, pick_at, market, day)?;
    }
    Ok(())
}
