//! Stock qualification, rating-mass aggregation, stock percentiles and the
//! top-N report.
//!
//! A stock is rated once it has enough matured picks and at least one of its
//! predictors sits above the configured leaderboard percentile. Its score is
//! the share of predictor rating mass on the outperform side.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use chrono::Months;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::market_data::{delayed_quote, PriceSeries};
use crate::model::{Orientation, PlayerId, Timestamp};
use crate::ranking::{percentile_ranks, LeaderboardEntry};

pub const REPORT_CSV_HEADER: &str = "ticker,rank,gain_1y,gain_1m";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StockRatingError {
    #[error("stock score needs at least one rated predictor")]
    NoRaters,
}

pub fn qualify(active_predictions: usize, predictor_percentiles: &[f64], config: &Config) -> bool {
    active_predictions >= config.min_stock_predictions as usize
        && predictor_percentiles.iter().any(|&p| p > config.min_top_player_percentile)
}

fn rating_mass(percentiles: &[f64], exponent: f64) -> f64 {
    let mut weights: Vec<f64> = percentiles.iter().map(|p| p.powf(exponent)).collect();
    weights.sort_by(f64::total_cmp);
    weights.iter().fold(0.0, |acc, w| acc + w)
}

/// Outperform share of the (optionally exponent-weighted) rating mass.
///
/// The smaller side is derived as the complement of the larger one so that
/// swapping the two sides always yields exactly `1 - score`.
pub fn stock_score(outperform: &[f64], underperform: &[f64], config: &Config) -> Result<f64, StockRatingError> {
    let e = config.rating_weight_exponent;
    let (out_mass, under_mass) = (rating_mass(outperform, e), rating_mass(underperform, e));
    share(out_mass, under_mass)
}

fn share(out_mass: f64, under_mass: f64) -> Result<f64, StockRatingError> {
    let total = out_mass + under_mass;
    if total.is_nan() || total <= 0.0 {
        return Err(StockRatingError::NoRaters);
    }
    Ok(if out_mass > under_mass {
        out_mass / total
    } else if out_mass < under_mass {
        1.0 - under_mass / total
    } else {
        0.5
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockRating {
    pub ticker: String,
    pub qualified: bool,
    pub prediction_count: usize,
    pub outperform_mass: f64,
    pub underperform_mass: f64,
    /// Present whenever at least one predictor is on the leaderboard.
    pub score: Option<f64>,
    /// Present iff the stock qualified.
    pub percentile: Option<f64>,
}

/// One matured pick on a stock.
#[derive(Debug, Clone, PartialEq)]
pub struct StockPick {
    pub player_id: PlayerId,
    pub orientation: Orientation,
}

/// Rates every stock in `picks_by_stock`. Predictors missing from the
/// leaderboard add to the pick count but carry no rating. Percentiles are
/// ranked over qualified stocks only. Output: qualified stocks by percentile
/// descending, then the rest; ties by ticker.
pub fn rate_all_stocks(
    picks_by_stock: &BTreeMap<String, Vec<StockPick>>,
    leaderboard: &[LeaderboardEntry],
    config: &Config,
) -> Vec<StockRating> {
    let rating_of: HashMap<&PlayerId, f64> = leaderboard.iter().map(|e| (&e.player_id, e.rating_percentile)).collect();
    let e = config.rating_weight_exponent;

    let mut ratings: Vec<StockRating> = picks_by_stock
        .iter()
        .map(|(ticker, picks)| {
            let mut outperform = Vec::new();
            let mut underperform = Vec::new();
            for pick in picks {
                if let Some(&y) = rating_of.get(&pick.player_id) {
                    match pick.orientation {
                        Orientation::Outperform => outperform.push(y),
                        Orientation::Underperform => underperform.push(y),
                    }
                }
            }
            let all: Vec<f64> = outperform.iter().chain(&underperform).copied().collect();
            let qualified = qualify(picks.len(), &all, config);
            let (outperform_mass, underperform_mass) = (rating_mass(&outperform, e), rating_mass(&underperform, e));
            StockRating {
                ticker: ticker.clone(),
                qualified,
                prediction_count: picks.len(),
                outperform_mass,
                underperform_mass,
                score: share(outperform_mass, underperform_mass).ok(),
                percentile: None,
            }
        })
        .collect();

    let scored: Vec<(usize, f64)> = ratings
        .iter()
        .enumerate()
        .filter(|(_, r)| r.qualified)
        .map(|(i, r)| (i, r.score.expect("qualified stocks have a rated predictor")))
        .collect();
    for (i, p) in percentile_ranks(&scored) {
        ratings[i].percentile = Some(p);
    }

    ratings.sort_by(|a, b| match (a.percentile, b.percentile) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.ticker.cmp(&b.ticker)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.ticker.cmp(&b.ticker),
    });
    ratings
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub ticker: String,
    pub rank: f64,
    pub gain_1y: Option<f64>,
    pub gain_1m: Option<f64>,
}

/// Signed change in percent, `100 * (now / then - 1)`.
pub fn signed_change(then: f64, now: f64) -> f64 {
    100.0 * (now / then - 1.0)
}

/// Top `n` qualified stocks by percentile with their one-year and one-month
/// price changes as of `now`. Prices are read through the delayed-quote view.
pub fn report_top(
    ratings: &[StockRating],
    prices: &BTreeMap<String, PriceSeries>,
    now: Timestamp,
    config: &Config,
    n: usize,
) -> Vec<ReportRow> {
    let mut qualified: Vec<&StockRating> = ratings.iter().filter(|r| r.percentile.is_some()).collect();
    qualified
        .sort_by(|a, b| b.percentile.unwrap().total_cmp(&a.percentile.unwrap()).then_with(|| a.ticker.cmp(&b.ticker)));
    qualified
        .into_iter()
        .take(n)
        .map(|r| {
            let series = prices.get(&r.ticker);
            let change_since = |months: u32| -> Option<f64> {
                let series = series?;
                let current = delayed_quote(series, now, config).ok()?;
                let then = now.checked_sub_months(Months::new(months))?;
                let past = delayed_quote(series, then, config).ok()?;
                Some(signed_change(past.value, current.value))
            };
            ReportRow {
                ticker: r.ticker.clone(),
                rank: r.percentile.expect("filtered to qualified"),
                gain_1y: change_since(12),
                gain_1m: change_since(1),
            }
        })
        .collect()
}

fn fixed2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn format_report_row(row: &ReportRow) -> String {
    let opt = |v: Option<f64>| v.map(fixed2).unwrap_or_default();
    format!("{},{},{},{}", row.ticker, fixed2(row.rank), opt(row.gain_1y), opt(row.gain_1m))
}

/// The report as CSV with a header line.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", format_report_row(row));
    }
    out
}
