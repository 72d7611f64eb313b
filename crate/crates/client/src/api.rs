use reqwest::{Client, Response, StatusCode, Url};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crowdrate_core::wire::{
    ErrorBody, InstrumentsResponse, LeaderboardResponse, PlayerRegistered, PlayerResponse, PredictionCreated,
    PredictionsResponse, PricesIngested, RegisterPlayerRequest, ReportResponse, StockRatingsResponse,
    SubmissionRequest,
};
use crowdrate_core::PlayerId;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid service URL `{0}`")]
    BadUrl(String),
    #[error("{status}: {}", body.error)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected {status} response: {text}")]
    Unexpected { status: StatusCode, text: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } | ClientError::Unexpected { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
            ClientError::BadUrl(_) => None,
        }
    }
}

/// Typed wrapper over the service's HTTP/JSON endpoints.
#[derive(Debug, Clone)]
pub struct ApiClient {
    base: Url,
    http: Client,
}

impl ApiClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let mut base = Url::parse(base_url).map_err(|_| ClientError::BadUrl(base_url.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::BadUrl(base_url.to_string()));
        }
        if !base.path().ends_with('/') {
            let path = format!("{}/", base.path());
            base.set_path(&path);
        }
        Ok(Self { base, http: Client::new() })
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("checked in new").pop_if_empty().extend(segments);
        url
    }

    async fn decode<T: DeserializeOwned>(response: Response) -> Result<T, ClientError> {
        let status = response.status();
        if status.is_success() {
            return Ok(response.json().await?);
        }
        let text = response.text().await?;
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api { status, body }),
            Err(_) => Err(ClientError::Unexpected { status, text }),
        }
    }

    async fn get<T: DeserializeOwned>(&self, url: Url) -> Result<T, ClientError> {
        Self::decode(self.http.get(url).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, url: Url, body: &B) -> Result<T, ClientError> {
        Self::decode(self.http.post(url).json(body).send().await?).await
    }

    pub async fn submit_prediction(&self, request: &SubmissionRequest) -> Result<PredictionCreated, ClientError> {
        self.post(self.url(&["api", "predictions"]), request).await
    }

    pub async fn predictions(&self, player: Option<&PlayerId>) -> Result<PredictionsResponse, ClientError> {
        let mut url = self.url(&["api", "predictions"]);
        if let Some(p) = player {
            url.query_pairs_mut().append_pair("player", p.as_str());
        }
        self.get(url).await
    }

    pub async fn register_player(&self, request: &RegisterPlayerRequest) -> Result<PlayerRegistered, ClientError> {
        self.post(self.url(&["api", "players"]), request).await
    }

    pub async fn leaderboard(&self) -> Result<LeaderboardResponse, ClientError> {
        self.get(self.url(&["api", "leaderboard"])).await
    }

    pub async fn stock_ratings(&self) -> Result<StockRatingsResponse, ClientError> {
        self.get(self.url(&["api", "stocks", "ratings"])).await
    }

    pub async fn report(&self, top: usize) -> Result<ReportResponse, ClientError> {
        let mut url = self.url(&["api", "stocks", "report"]);
        url.query_pairs_mut().append_pair("top", &top.to_string());
        self.get(url).await
    }

    pub async fn player(&self, id: &str) -> Result<PlayerResponse, ClientError> {
        self.get(self.url(&["api", "players", id])).await
    }

    pub async fn instruments(&self) -> Result<InstrumentsResponse, ClientError> {
        self.get(self.url(&["api", "instruments"])).await
    }

    /// Sends price CSV to the service; `index_tickers` are listed as indexes
    /// if new.
    pub async fn ingest_prices(&self, csv: String, index_tickers: &[String]) -> Result<PricesIngested, ClientError> {
        let mut url = self.url(&["api", "prices"]);
        if !index_tickers.is_empty() {
            url.query_pairs_mut().append_pair("index", &index_tickers.join(","));
        }
        let response = self.http.post(url).header("content-type", "text/csv").body(csv).send().await?;
        Self::decode(response).await
    }
}
