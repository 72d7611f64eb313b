use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::Router;
use crowdrate_client::{fetch_remote, QuoteEndpoint, QuoteError, RetryPolicy};

const FAST: RetryPolicy = RetryPolicy { attempts: 3, initial_backoff: Duration::from_millis(5) };

#[derive(Clone, Default)]
struct Mock {
    hits: Arc<AtomicUsize>,
    failures_before_success: usize,
    malformed: Option<&'static str>,
}

async fn quotes(State(mock): State<Mock>, Query(q): Query<HashMap<String, String>>) -> (StatusCode, String) {
    let n = mock.hits.fetch_add(1, Ordering::SeqCst);
    if n < mock.failures_before_success {
        return (StatusCode::SERVICE_UNAVAILABLE, "busy".into());
    }
    let ticker = q.get("tickers").cloned().unwrap_or_default();
    if mock.malformed == Some(ticker.as_str()) {
        return (StatusCode::OK, format!("ticker,timestamp,value\n{ticker},2024-01-02T16:00:00Z,abc\n"));
    }
    let body =
        format!("ticker,timestamp,value\n{t},2024-01-03T16:00:00Z,11.5\n{t},2024-01-02T16:00:00Z,10\n", t = ticker);
    (StatusCode::OK, body)
}

async fn spawn(mock: Mock) -> String {
    let app = Router::new().route("/quotes", get(quotes)).with_state(mock);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn tickers(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

#[tokio::test]
async fn healthy_endpoint_merges_tickers_in_order() {
    let base = spawn(Mock::default()).await;
    let ep = QuoteEndpoint::new(&base).unwrap();
    let points = fetch_remote(&ep, &tickers(&["ZZZ", "AAA"]), FAST).await.unwrap();
    let got: Vec<(String, f64)> = points.iter().map(|p| (p.ticker.clone(), p.value)).collect();
    assert_eq!(got, vec![("AAA".into(), 10.0), ("AAA".into(), 11.5), ("ZZZ".into(), 10.0), ("ZZZ".into(), 11.5)]);
}

#[tokio::test]
async fn transient_failures_are_retried() {
    let mock = Mock { failures_before_success: 2, ..Mock::default() };
    let hits = mock.hits.clone();
    let base = spawn(mock).await;
    let points = fetch_remote(&QuoteEndpoint::new(&base).unwrap(), &tickers(&["AAA"]), FAST).await.unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn malformed_row_names_the_ticker_and_is_not_retried() {
    let mock = Mock { malformed: Some("BAD"), ..Mock::default() };
    let hits = mock.hits.clone();
    let base = spawn(mock).await;
    let err = fetch_remote(&QuoteEndpoint::new(&base).unwrap(), &tickers(&["BAD"]), FAST).await.unwrap_err();
    match &err {
        QuoteError::Schema { ticker, .. } => assert_eq!(ticker, "BAD"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().starts_with("BAD: line 2"), "{err}");
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn endpoint_down_gives_up_after_bounded_attempts() {
    // Bind then drop to get a port nobody listens on.
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let ep = QuoteEndpoint::new(&format!("http://{addr}")).unwrap();
    let started = std::time::Instant::now();
    let err = fetch_remote(&ep, &tickers(&["AAA"]), FAST).await.unwrap_err();
    match err {
        QuoteError::RetriesExhausted { ticker, attempts, .. } => {
            assert_eq!(ticker, "AAA");
            assert_eq!(attempts, 3);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[tokio::test]
async fn persistent_server_errors_exhaust_retries() {
    let mock = Mock { failures_before_success: usize::MAX, ..Mock::default() };
    let hits = mock.hits.clone();
    let base = spawn(mock).await;
    let err = fetch_remote(&QuoteEndpoint::new(&base).unwrap(), &tickers(&["AAA"]), FAST).await.unwrap_err();
    assert!(matches!(err, QuoteError::RetriesExhausted { attempts: 3, .. }), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}
