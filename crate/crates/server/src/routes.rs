use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crowdrate_core::engine::report;
use crowdrate_core::game::price_ingest_events;
use crowdrate_core::market_data::parse_price_csv;
use crowdrate_core::wire::{
    InstrumentsResponse, LeaderboardResponse, PlayerRegistered, PlayerResponse, PredictionCreated, PredictionsResponse,
    PricesIngested, RegisterPlayerRequest, ReportResponse, StockRatingsResponse, SubmissionRequest,
};
use crowdrate_core::{EventPayload, Player, PlayerId};

use crate::error::ApiError;
use crate::state::{AppState, Clock};

type ApiResult<T> = Result<T, ApiError>;

pub fn api_router(state: AppState) -> Router {
    Router::new()
        .route("/api/predictions", post(submit_prediction).get(list_predictions))
        .route("/api/leaderboard", get(leaderboard))
        .route("/api/stocks/ratings", get(stock_ratings))
        .route("/api/stocks/report", get(stock_report))
        .route("/api/players", post(register_player))
        .route("/api/players/{id}", get(player))
        .route("/api/instruments", get(instruments))
        .route("/api/prices", post(ingest_prices))
        .with_state(state)
}

async fn submit_prediction(
    State(app): State<AppState>,
    body: Result<Json<SubmissionRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<PredictionCreated>)> {
    let Json(request) = body?;
    let (event, prediction) = app
        .record(|state, now| {
            let prediction = state.prepare_prediction(&request, now).map_err(ApiError::from)?;
            Ok::<_, ApiError>((EventPayload::PredictionEntered { prediction: prediction.clone() }, prediction))
        })
        .await?;
    Ok((StatusCode::CREATED, Json(PredictionCreated { sequence: event.sequence, prediction })))
}

async fn register_player(
    State(app): State<AppState>,
    body: Result<Json<RegisterPlayerRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<PlayerRegistered>)> {
    let Json(request) = body?;
    let (event, player) = app
        .record(|_, now| {
            let player = Player { id: request.id.clone(), name: request.name.clone(), registered_at: now };
            Ok::<_, ApiError>((EventPayload::PlayerRegistered { player: player.clone() }, player))
        })
        .await?;
    Ok((StatusCode::CREATED, Json(PlayerRegistered { sequence: event.sequence, player })))
}

#[derive(Debug, Deserialize)]
struct PredictionFilter {
    player: Option<PlayerId>,
}

async fn list_predictions(
    State(app): State<AppState>,
    query: Result<Query<PredictionFilter>, QueryRejection>,
) -> ApiResult<Json<PredictionsResponse>> {
    let Query(filter) = query?;
    let snap = app.snapshot();
    let predictions = snap
        .state
        .predictions
        .iter()
        .filter(|p| filter.player.as_ref().is_none_or(|id| &p.player_id == id))
        .cloned()
        .collect();
    Ok(Json(PredictionsResponse { sequence: snap.sequence(), predictions }))
}

async fn leaderboard(State(app): State<AppState>) -> Json<LeaderboardResponse> {
    let snap = app.snapshot();
    let evaluation = snap.evaluation();
    Json(LeaderboardResponse {
        sequence: snap.sequence(),
        as_of: evaluation.as_of,
        entries: evaluation.leaderboard().to_vec(),
    })
}

async fn stock_ratings(State(app): State<AppState>) -> Json<StockRatingsResponse> {
    let snap = app.snapshot();
    let evaluation = snap.evaluation();
    Json(StockRatingsResponse {
        sequence: snap.sequence(),
        as_of: evaluation.as_of,
        ratings: evaluation.stock_ratings.clone(),
    })
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    top: Option<usize>,
}

async fn stock_report(
    State(app): State<AppState>,
    query: Result<Query<ReportQuery>, QueryRejection>,
) -> ApiResult<Json<ReportResponse>> {
    let Query(q) = query?;
    let snap = app.snapshot();
    let evaluation = snap.evaluation();
    Ok(Json(ReportResponse {
        sequence: snap.sequence(),
        as_of: evaluation.as_of,
        rows: report(&snap.state, &evaluation, q.top.unwrap_or(10)),
    }))
}

async fn player(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<PlayerResponse>> {
    let snap = app.snapshot();
    let player = PlayerId::new(id)
        .ok()
        .and_then(|id| snap.state.players.get(&id).cloned())
        .ok_or_else(|| ApiError::NotFound("unknown player".into()))?;
    let evaluation = snap.evaluation();
    let ranked = evaluation.player(&player.id);
    Ok(Json(PlayerResponse {
        sequence: snap.sequence(),
        as_of: evaluation.as_of,
        stats: ranked.map(|(s, _)| s.clone()),
        entry: ranked.map(|(_, e)| e.clone()),
        player,
    }))
}

async fn instruments(State(app): State<AppState>) -> Json<InstrumentsResponse> {
    let snap = app.snapshot();
    Json(InstrumentsResponse {
        sequence: snap.sequence(),
        instruments: snap.state.instruments.values().cloned().collect(),
    })
}

#[derive(Debug, Deserialize)]
struct IngestQuery {
    /// Comma-separated tickers to list as indexes.
    index: Option<String>,
}

/// Body: price CSV (`ticker,timestamp,value`).
async fn ingest_prices(
    State(app): State<AppState>,
    query: Result<Query<IngestQuery>, QueryRejection>,
    body: String,
) -> ApiResult<(StatusCode, Json<PricesIngested>)> {
    let Query(q) = query?;
    let points = parse_price_csv(body.as_bytes()).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let index_tickers: Vec<String> =
        q.index.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    let count = points.len();
    // A log-clocked game with no events yet starts at its first price.
    let earliest = points.iter().map(|p| p.at).min();
    let log_clock = app.clock() == Clock::Log;
    let (events, ()) = app
        .record_batch(|state, now| {
            let now = match earliest {
                Some(first) if log_clock && state.last_at.is_none() => first,
                _ => now,
            };
            Ok::<_, ApiError>((price_ingest_events(state, points, &index_tickers, now)?, ()))
        })
        .await?;
    let sequence = events.last().map_or(app.snapshot().sequence(), |e| e.sequence);
    Ok((StatusCode::CREATED, Json(PricesIngested { sequence, prices: count, events: events.len() })))
}
