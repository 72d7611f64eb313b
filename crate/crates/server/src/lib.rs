//! HTTP/JSON service for the prediction game.
//!
//! | Method | Path                   | Body / query        |
//! |--------|------------------------|---------------------|
//! | POST   | `/api/predictions`     | `SubmissionRequest` |
//! | GET    | `/api/predictions`     | `?player=<id>`      |
//! | GET    | `/api/leaderboard`     |                     |
//! | GET    | `/api/stocks/ratings`  |                     |
//! | GET    | `/api/stocks/report`   | `?top=<n>`          |
//! | POST   | `/api/players`         | `RegisterPlayerRequest` |
//! | GET    | `/api/players/{id}`    |                     |
//! | GET    | `/api/instruments`     |                     |
//! | POST   | `/api/prices`          | price CSV, `?index=<tickers>` |
//!
//! Writes go through a single journal writer; reads use the latest published
//! snapshot and never touch the log.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

pub use error::ApiError;
pub use routes::api_router;
pub use state::{AppState, Clock, Snapshot, SnapshotPolicy};

/// The API plus, optionally, a directory of static assets served at `/`.
pub fn app(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let router = api_router(state);
    let router = match static_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    };
    router.layer(TraceLayer::new_for_http())
}

pub async fn serve(listener: TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}

/// Binds `addr` and serves until the task is dropped or the listener fails.
pub async fn bind_and_serve(addr: SocketAddr, router: Router) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve(listener, router).await
}
