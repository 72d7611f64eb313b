//! Price series, the `ticker,timestamp,value` CSV format and delayed quotes.

use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::model::{PricePoint, Timestamp};

pub const PRICE_CSV_HEADER: &str = "ticker,timestamp,value";

#[derive(Debug, Error, PartialEq)]
pub enum MarketDataError {
    #[error("line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error("no quote available for {ticker} at or before {cutoff}")]
    NoQuoteAvailable { ticker: String, cutoff: Timestamp },
    #[error("price point for {got} added to series {expected}")]
    WrongTicker { expected: String, got: String },
}

/// Time-ordered prices of one instrument; timestamps strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub ticker: String,
    points: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>) -> Self {
        Self { ticker: ticker.into(), points: Vec::new() }
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Inserts in time order. A point at an already-present timestamp
    /// replaces the old value.
    pub fn insert(&mut self, point: PricePoint) -> Result<(), MarketDataError> {
        if point.ticker != self.ticker {
            return Err(MarketDataError::WrongTicker { expected: self.ticker.clone(), got: point.ticker });
        }
        match self.points.last() {
            Some(last) if last.at < point.at => self.points.push(point),
            None => self.points.push(point),
            _ => match self.points.binary_search_by(|p| p.at.cmp(&point.at)) {
                Ok(i) => self.points[i] = point,
                Err(i) => self.points.insert(i, point),
            },
        }
        Ok(())
    }

    /// Latest point with `at <= cutoff`.
    pub fn at_or_before(&self, cutoff: Timestamp) -> Option<&PricePoint> {
        let idx = self.points.partition_point(|p| p.at <= cutoff);
        idx.checked_sub(1).map(|i| &self.points[i])
    }

    pub fn latest(&self) -> Option<&PricePoint> {
        self.points.last()
    }
}

/// The quote a player is allowed to see at `now`: the latest point at least
/// `price_delay` old. Staleness is not bounded.
pub fn delayed_quote<'a>(
    series: &'a PriceSeries,
    now: Timestamp,
    config: &Config,
) -> Result<&'a PricePoint, MarketDataError> {
    let cutoff = now - config.price_delay();
    series
        .at_or_before(cutoff)
        .ok_or_else(|| MarketDataError::NoQuoteAvailable { ticker: series.ticker.clone(), cutoff })
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    ticker: String,
    timestamp: String,
    value: String,
}

/// Parses price CSV. Rows may come in any order; the result is sorted by
/// ticker, then time. Two rows for the same instant of one ticker are an
/// error.
pub fn parse_price_csv(content: &[u8]) -> Result<Vec<PricePoint>, MarketDataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(content);

    let headers = reader.headers().map_err(|e| csv_error(1, e.to_string()))?.clone();
    let expected: Vec<&str> = PRICE_CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(csv_error(1, format!("expected header `{PRICE_CSV_HEADER}`")));
    }

    let mut points = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow =
            record.deserialize(Some(&headers)).map_err(|e| csv_error(line, format!("malformed row: {e}")))?;
        let at = DateTime::parse_from_rfc3339(&row.timestamp)
            .map_err(|e| csv_error(line, format!("bad timestamp `{}`: {e}", row.timestamp)))?
            .with_timezone(&Utc);
        let value: f64 = row.value.parse().map_err(|_| csv_error(line, format!("bad value `{}`", row.value)))?;
        let point = PricePoint::new(row.ticker, at, value).map_err(|e| csv_error(line, e.to_string()))?;
        points.push(point);
        lines.push(line);
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| (&points[a].ticker, points[a].at).cmp(&(&points[b].ticker, points[b].at)));
    for pair in order.windows(2) {
        let (a, b) = (&points[pair[0]], &points[pair[1]]);
        if a.ticker == b.ticker && a.at == b.at {
            let line = lines[pair[0]].max(lines[pair[1]]);
            return Err(csv_error(line, format!("duplicate timestamp {} for {}", b.at, b.ticker)));
        }
    }
    let mut slots: Vec<Option<PricePoint>> = points.into_iter().map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().expect("each index once")).collect())
}

fn csv_error(line: u64, reason: String) -> MarketDataError {
    MarketDataError::Csv { line, reason }
}

/// Writes points in the CSV format read by [`parse_price_csv`]. Floats use the
/// shortest round-trip representation.
pub fn write_price_csv<'a>(points: impl IntoIterator<Item = &'a PricePoint>) -> String {
    let mut out = String::from(PRICE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.ticker, format_timestamp(p.at), p.value));
    }
    out
}

pub fn format_timestamp(at: Timestamp) -> String {
    at.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Groups points into per-ticker series.
pub fn into_series(points: impl IntoIterator<Item = PricePoint>) -> BTreeMap<String, PriceSeries> {
    let mut out: BTreeMap<String, PriceSeries> = BTreeMap::new();
    for p in points {
        out.entry(p.ticker.clone())
            .or_insert_with(|| PriceSeries::new(p.ticker.clone()))
            .insert(p)
            .expect("grouped by ticker");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};
    use proptest::prelude::*;

    fn at(h: u32, m: u32) -> Timestamp {
        Utc.with_ymd_and_hms(2013, 1, 2, h, m, 0).unwrap()
    }

    fn series(points: &[(u32, u32, f64)]) -> PriceSeries {
        let mut s = PriceSeries::new("A");
        for &(h, m, v) in points {
            s.insert(PricePoint::new("A", at(h, m), v).unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn parses_single_row() {
        let pts = parse_price_csv(b"ticker,timestamp,value\nVDKT-R-A,2013-01-02T15:00:00Z,120.5\n").unwrap();
        assert_eq!(pts, vec![PricePoint::new("VDKT-R-A", at(15, 0), 120.5).unwrap()]);
    }

    #[test]
    fn zero_value_reports_line() {
        let err = parse_price_csv(b"ticker,timestamp,value\nA,2013-01-02T15:00:00Z,1\nA,2013-01-02T16:00:00Z,0\n")
            .unwrap_err();
        assert!(matches!(err, MarketDataError::Csv { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = parse_price_csv(b"ticker,timestamp,value\nA,yesterday,1\n").unwrap_err();
        assert!(matches!(err, MarketDataError::Csv { line: 2, .. }), "{err:?}");
        let err = parse_price_csv(b"ticker,timestamp,value\nA,2013-01-02T15:00:00Z,abc\n").unwrap_err();
        assert!(matches!(err, MarketDataError::Csv { line: 2, .. }));
        assert!(parse_price_csv(b"sym,when,px\n").is_err());
        let err = parse_price_csv(b"ticker,timestamp,value\nA,2013-01-02T15:00:00Z,1\nA,2013-01-02T15:00:00Z,2\n")
            .unwrap_err();
        assert!(matches!(err, MarketDataError::Csv { line: 3, .. }));
    }

    #[test]
    fn delayed_quote_examples() {
        let s = series(&[(10, 0, 1.0), (10, 10, 2.0)]);
        let c = Config::default();
        assert_eq!(delayed_quote(&s, at(10, 20), &c).unwrap().value, 1.0);

        let no_delay = Config { price_delay_minutes: 0, ..Config::default() };
        assert_eq!(delayed_quote(&s, at(10, 20), &no_delay).unwrap().value, 2.0);
        assert_eq!(delayed_quote(&s, at(10, 10), &no_delay).unwrap().value, 2.0);

        assert!(matches!(delayed_quote(&s, at(10, 14), &c), Err(MarketDataError::NoQuoteAvailable { .. })));
    }

    #[test]
    fn insert_replaces_same_instant() {
        let mut s = series(&[(10, 0, 1.0), (11, 0, 2.0)]);
        s.insert(PricePoint::new("A", at(10, 0), 5.0).unwrap()).unwrap();
        s.insert(PricePoint::new("A", at(10, 30), 6.0).unwrap()).unwrap();
        let values: Vec<f64> = s.points().iter().map(|p| p.value).collect();
        assert_eq!(values, vec![5.0, 6.0, 2.0]);
        assert!(s.insert(PricePoint::new("B", at(9, 0), 1.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn shuffled_rows_come_back_sorted(
            values in proptest::collection::vec(0.01f64..1e5, 1..40),
            keys in proptest::collection::vec(any::<u32>(), 40),
        ) {
            let base = at(0, 0);
            let points: Vec<PricePoint> = values
                .iter()
                .enumerate()
                .map(|(i, v)| PricePoint::new(if i % 3 == 0 { "B" } else { "A" }, base + Duration::minutes(i as i64), *v).unwrap())
                .collect();
            let mut shuffled: Vec<(u32, &PricePoint)> = keys.iter().copied().zip(points.iter()).collect();
            shuffled.sort_by_key(|(k, _)| *k);
            let csv = write_price_csv(shuffled.iter().map(|(_, p)| *p));
            let parsed = parse_price_csv(csv.as_bytes()).unwrap();

            // Oracle: plain sort of the original points.
            let mut expected = points.clone();
            expected.sort_by(|a, b| (&a.ticker, a.at).cmp(&(&b.ticker, b.at)));
            prop_assert_eq!(&parsed, &expected);
            // Bit-exact round trip of a sorted series.
            prop_assert_eq!(write_price_csv(&parsed), write_price_csv(&expected));
        }

        #[test]
        fn delayed_quote_never_inside_window(offsets in proptest::collection::vec(0i64..10_000, 1..30), now_off in 0i64..12_000, delay in 0u32..500) {
            let c = Config { price_delay_minutes: delay, ..Config::default() };
            let base = at(0, 0);
            let s = into_series(offsets.iter().map(|o| PricePoint::new("A", base + Duration::minutes(*o), 1.0).unwrap()));
            let s = &s["A"];
            let now = base + Duration::minutes(now_off);
            match delayed_quote(s, now, &c) {
                Ok(q) => {
                    prop_assert!(q.at <= now - c.price_delay());
                    prop_assert!(s.points().iter().all(|p| p.at <= q.at || p.at > now - c.price_delay()));
                }
                Err(_) => prop_assert!(s.points().iter().all(|p| p.at > now - c.price_delay())),
            }
        }
    }
}
