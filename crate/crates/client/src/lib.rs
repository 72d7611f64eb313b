//! Client side of the prediction game service, plus the remote price-quote
//! fetcher used by `ingest`.

mod api;
mod quotes;

pub use api::{ApiClient, ClientError};
pub use quotes::{fetch_remote, QuoteEndpoint, QuoteError, RetryPolicy};
