use std::time::Duration;

use futures::future::try_join_all;
use reqwest::{Client, Url};
use thiserror::Error;

use crowdrate_core::market_data::{parse_price_csv, MarketDataError};
use crowdrate_core::PricePoint;

#[derive(Debug, Error)]
pub enum QuoteError {
    #[error("invalid quote endpoint `{0}`")]
    BadEndpoint(String),
    #[error("{ticker}: gave up after {attempts} attempts: {last}")]
    RetriesExhausted { ticker: String, attempts: u32, last: String },
    #[error("{ticker}: {source}")]
    Schema { ticker: String, source: MarketDataError },
    #[error("{ticker}: response contained prices for {other}")]
    UnexpectedTicker { ticker: String, other: String },
}

/// A quote server reached at `<base>/quotes?tickers=<comma-list>`, answering
/// with price CSV.
#[derive(Debug, Clone)]
pub struct QuoteEndpoint {
    base: Url,
}

impl QuoteEndpoint {
    pub fn new(base_url: &str) -> Result<Self, QuoteError> {
        let base = Url::parse(base_url).map_err(|_| QuoteError::BadEndpoint(base_url.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(QuoteError::BadEndpoint(base_url.to_string()));
        }
        Ok(Self { base })
    }

    pub fn quotes_url(&self, tickers: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut().expect("checked in new").pop_if_empty().push("quotes");
        url.query_pairs_mut().append_pair("tickers", &tickers.join(","));
        url
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff: Duration::from_millis(200) }
    }
}

/// Fetches each ticker concurrently and merges the results sorted by ticker,
/// then time. Transport failures and 5xx answers are retried with doubling
/// backoff; schema errors are not.
pub async fn fetch_remote(
    endpoint: &QuoteEndpoint,
    tickers: &[String],
    policy: RetryPolicy,
) -> Result<Vec<PricePoint>, QuoteError> {
    let http = Client::new();
    let per_ticker = tickers.iter().map(|t| fetch_one(&http, endpoint, t, policy));
    let mut points: Vec<PricePoint> = try_join_all(per_ticker).await?.into_iter().flatten().collect();
    points.sort_by(|a, b| (&a.ticker, a.at).cmp(&(&b.ticker, b.at)));
    Ok(points)
}

async fn fetch_one(
    http: &Client,
    endpoint: &QuoteEndpoint,
    ticker: &str,
    policy: RetryPolicy,
) -> Result<Vec<PricePoint>, QuoteError> {
    let url = endpoint.quotes_url(&[ticker]);
    let mut backoff = policy.initial_backoff;
    let mut last = String::from("no attempt made");
    for attempt in 1..=policy.attempts.max(1) {
        match http.get(url.clone()).send().await {
            Ok(resp) if resp.status().is_success() => {
                let body = resp.bytes().await.map_err(|e| QuoteError::RetriesExhausted {
                    ticker: ticker.to_string(),
                    attempts: attempt,
                    last: e.to_string(),
                })?;
                let points = parse_price_csv(&body)
                    .map_err(|source| QuoteError::Schema { ticker: ticker.to_string(), source })?;
                if let Some(p) = points.iter().find(|p| p.ticker != ticker) {
                    return Err(QuoteError::UnexpectedTicker { ticker: ticker.to_string(), other: p.ticker.clone() });
                }
                return Ok(points);
            }
            Ok(resp) if resp.status().is_client_error() => {
                return Err(QuoteError::RetriesExhausted {
                    ticker: ticker.to_string(),
                    attempts: attempt,
                    last: format!("HTTP {}", resp.status()),
                });
            }
            Ok(resp) => last = format!("HTTP {}", resp.status()),
            Err(e) => last = e.to_string(),
        }
        if attempt < policy.attempts {
            tokio::time::sleep(backoff).await;
            backoff *= 2;
        }
    }
    Err(QuoteError::RetriesExhausted { ticker: ticker.to_string(), attempts: policy.attempts.max(1), last })
}
