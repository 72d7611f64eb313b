//! Prediction and player scores.
//!
//! A gain is the observed value as a percentage of the entry value. A pick's
//! score is the stock gain minus the index gain for an outperform pick and the
//! negation for an underperform pick, so the two orientations are exact
//! mirror images and a broad market move cancels out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::model::Orientation;
use crate::model::{PlayerId, Prediction, PredictionId, PricePoint, Timestamp};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("price values must be strictly positive (entry {entry}, observed {observed})")]
    NonPositivePrice { entry: f64, observed: f64 },
    #[error("no price available for {0}")]
    MissingPrice(String),
    #[error("price point for {got} does not match instrument {expected}")]
    TickerMismatch { expected: String, got: String },
    #[error("price point for {ticker} observed at {at} is after the scoring time {now}")]
    FutureQuote { ticker: String, at: Timestamp, now: Timestamp },
}

/// Observed value as percent of the entry value: `observed / entry * 100`.
pub fn gain(entry_value: f64, observed_value: f64) -> Result<f64, ScoringError> {
    if !(entry_value > 0.0 && observed_value > 0.0) {
        return Err(ScoringError::NonPositivePrice { entry: entry_value, observed: observed_value });
    }
    Ok(scaled_ratio(observed_value, entry_value))
}

/// `100 * num / den` with one correction step, so results that are exactly
/// representable (110 for 110/100, 100 for v/v) come out exact.
fn scaled_ratio(num: f64, den: f64) -> f64 {
    let hi = 100.0 * num;
    let lo = 100.0f64.mul_add(num, -hi);
    let q = hi / den;
    let residual = (-q).mul_add(den, hi) + lo;
    q + residual / den
}

/// `(stock_multiplier, index_multiplier)`; always of opposite sign.
pub fn multipliers(orientation: Orientation) -> (f64, f64) {
    match orientation {
        Orientation::Outperform => (1.0, -1.0),
        Orientation::Underperform => (-1.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScore {
    pub prediction_id: PredictionId,
    pub stock_gain: f64,
    pub index_gain: f64,
    pub stock_multiplier: f64,
    pub index_multiplier: f64,
    pub score: f64,
    pub mature: bool,
    pub as_of: Timestamp,
}

pub fn is_mature(prediction: &Prediction, config: &Config, now: Timestamp) -> bool {
    now >= prediction.entered_at + config.pending_period()
}

pub fn score_prediction(
    prediction: &Prediction,
    stock_now: Option<&PricePoint>,
    index_now: Option<&PricePoint>,
    config: &Config,
    now: Timestamp,
) -> Result<PredictionScore, ScoringError> {
    let stock_now = check_quote(stock_now, &prediction.stock_ticker, now)?;
    let index_now = check_quote(index_now, &prediction.index_ticker, now)?;

    let stock_gain = gain(prediction.stock_entry_value, stock_now.value)?;
    let index_gain = gain(prediction.index_entry_value, index_now.value)?;
    let (stock_multiplier, index_multiplier) = multipliers(prediction.orientation);

    Ok(PredictionScore {
        prediction_id: prediction.id.clone(),
        stock_gain,
        index_gain,
        stock_multiplier,
        index_multiplier,
        score: stock_gain * stock_multiplier + index_gain * index_multiplier,
        mature: is_mature(prediction, config, now),
        as_of: now,
    })
}

fn check_quote<'a>(
    quote: Option<&'a PricePoint>,
    ticker: &str,
    now: Timestamp,
) -> Result<&'a PricePoint, ScoringError> {
    let quote = quote.ok_or_else(|| ScoringError::MissingPrice(ticker.to_string()))?;
    if quote.ticker != ticker {
        return Err(ScoringError::TickerMismatch { expected: ticker.to_string(), got: quote.ticker.clone() });
    }
    if quote.at > now {
        return Err(ScoringError::FutureQuote { ticker: ticker.to_string(), at: quote.at, now });
    }
    Ok(quote)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerScore {
    pub player_id: PlayerId,
    pub total_score: f64,
    pub counted_predictions: usize,
}

/// Whether a matured score enters the player's total: negative scores always
/// do, positive ones only once they reach the threshold.
pub fn counts_toward_total(score: f64, config: &Config) -> bool {
    !(score > 0.0 && score < config.positive_score_threshold)
}

/// Sums the matured scores of one player.
pub fn player_score<'a>(
    player_id: &PlayerId,
    scores: impl IntoIterator<Item = &'a PredictionScore>,
    config: &Config,
) -> PlayerScore {
    let mut counted: Vec<f64> =
        scores.into_iter().filter(|s| s.mature && counts_toward_total(s.score, config)).map(|s| s.score).collect();
    // Summation order is fixed so the total does not depend on input order.
    counted.sort_by(f64::total_cmp);
    PlayerScore {
        player_id: player_id.clone(),
        total_score: counted.iter().fold(0.0, |acc, s| acc + s),
        counted_predictions: counted.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;

    fn t0() -> Timestamp {
        Utc.with_ymd_and_hms(2013, 1, 2, 16, 0, 0).unwrap()
    }

    fn pick(orientation: Orientation, stock: f64, index: f64) -> Prediction {
        Prediction {
            id: PredictionId::from_ordinal(1),
            player_id: PlayerId::new("p").unwrap(),
            stock_ticker: "S".into(),
            index_ticker: "I".into(),
            orientation,
            entered_at: t0(),
            stock_entry_value: stock,
            index_entry_value: index,
        }
    }

    fn quote(ticker: &str, value: f64) -> PricePoint {
        PricePoint::new(ticker, t0() + Duration::days(7), value).unwrap()
    }

    fn scored(score: f64, mature: bool) -> PredictionScore {
        PredictionScore {
            prediction_id: PredictionId::from_ordinal(1),
            stock_gain: 0.0,
            index_gain: 0.0,
            stock_multiplier: 1.0,
            index_multiplier: -1.0,
            score,
            mature,
            as_of: t0(),
        }
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(100.0, 110.0).unwrap(), 110.0);
        assert_eq!(gain(80.0, 60.0).unwrap(), 75.0);
        for v in [0.01, 1.0, 37.5, 1e6] {
            assert_eq!(gain(v, v).unwrap(), 100.0);
        }
        assert!(gain(0.0, 1.0).is_err());
        assert!(gain(1.0, -1.0).is_err());
    }

    #[test]
    fn multiplier_signs() {
        assert_eq!(multipliers(Orientation::Outperform), (1.0, -1.0));
        assert_eq!(multipliers(Orientation::Underperform), (-1.0, 1.0));
        for o in Orientation::ALL {
            let (s, i) = multipliers(o);
            assert_eq!(s * i, -1.0);
        }
    }

    #[test]
    fn score_examples() {
        let c = Config::default();
        let now = t0() + Duration::days(7);
        let s = |o, sv, iv| {
            score_prediction(&pick(o, 100.0, 100.0), Some(&quote("S", sv)), Some(&quote("I", iv)), &c, now).unwrap()
        };
        assert_eq!(s(Orientation::Outperform, 110.0, 104.0).score, 6.0);
        assert_eq!(s(Orientation::Underperform, 110.0, 104.0).score, -6.0);

        let flat = score_prediction(
            &pick(Orientation::Outperform, 50.0, 200.0),
            Some(&quote("S", 50.0)),
            Some(&quote("I", 200.0)),
            &c,
            now,
        )
        .unwrap();
        assert_eq!(flat.score, 0.0);
        assert!(flat.mature);
    }

    #[test]
    fn maturity_boundary_is_inclusive() {
        let c = Config::default();
        let p = pick(Orientation::Outperform, 1.0, 1.0);
        assert!(!is_mature(&p, &c, t0() + Duration::days(7) - Duration::seconds(1)));
        assert!(is_mature(&p, &c, t0() + Duration::days(7)));
    }

    #[test]
    fn score_errors() {
        let c = Config::default();
        let now = t0() + Duration::days(7);
        let p = pick(Orientation::Outperform, 100.0, 100.0);
        assert_eq!(
            score_prediction(&p, None, Some(&quote("I", 1.0)), &c, now),
            Err(ScoringError::MissingPrice("S".into()))
        );
        assert!(matches!(
            score_prediction(&p, Some(&quote("X", 1.0)), Some(&quote("I", 1.0)), &c, now),
            Err(ScoringError::TickerMismatch { .. })
        ));
        assert!(matches!(
            score_prediction(&p, Some(&quote("S", 1.0)), Some(&quote("I", 1.0)), &c, t0()),
            Err(ScoringError::FutureQuote { .. })
        ));
    }

    #[test]
    fn player_score_examples() {
        let id = PlayerId::new("p").unwrap();
        let c = Config::default();
        let s = [scored(6.0, true), scored(-2.0, true), scored(9.0, false)];
        let total = player_score(&id, &s, &c);
        assert_eq!(total.total_score, 4.0);
        assert_eq!(total.counted_predictions, 2);

        let empty = player_score(&id, &[], &c);
        assert_eq!((empty.total_score, empty.counted_predictions), (0.0, 0));
        assert!(empty.total_score.is_sign_positive());
    }

    #[test]
    fn threshold_filters_small_positive_scores() {
        // Oracle: apply the inclusion rule to every element independently.
        let id = PlayerId::new("p").unwrap();
        let c = Config { positive_score_threshold: 5.0, ..Config::default() };
        let s = [scored(3.0, true), scored(10.0, true)];
        let oracle: f64 = s.iter().filter(|x| x.mature && !(x.score > 0.0 && x.score < 5.0)).map(|x| x.score).sum();
        let total = player_score(&id, &s, &c);
        assert_eq!(total.total_score, oracle);
        assert_eq!(total.total_score, 10.0);
        assert_eq!(total.counted_predictions, 1);

        // Negative and zero scores always count.
        let s = [scored(-3.0, true), scored(0.0, true), scored(5.0, true)];
        let total = player_score(&id, &s, &c);
        assert_eq!((total.total_score, total.counted_predictions), (2.0, 3));
    }

    proptest! {
        #[test]
        fn orientations_are_antisymmetric(
            se in 0.01f64..1e4, so in 0.01f64..1e4, ie in 0.01f64..1e4, io in 0.01f64..1e4,
        ) {
            let c = Config::default();
            let now = t0() + Duration::days(30);
            let run = |o| score_prediction(&pick(o, se, ie), Some(&quote("S", so)), Some(&quote("I", io)), &c, now).unwrap();
            let out = run(Orientation::Outperform);
            let under = run(Orientation::Underperform);
            prop_assert_eq!(out.score + under.score, 0.0);
            prop_assert_eq!(out.stock_multiplier, -out.index_multiplier);
            let direct = so / se * 100.0 - io / ie * 100.0;
            prop_assert!((out.score - direct).abs() <= 1e-9);
            // Score sign matches whether the pick was right.
            let stock_beat = so / se > io / ie;
            if out.score != 0.0 {
                prop_assert_eq!(out.score > 0.0, stock_beat);
            }
        }

        #[test]
        fn common_moves_cancel(
            stock_entry in 1.0f64..1000.0, index_entry in 1.0f64..1000.0,
            stock_gain in 50.0f64..200.0, index_gain in 50.0f64..200.0, shift in -40.0f64..40.0,
        ) {
            // Move both gains by the same number of percentage points.
            let c = Config::default();
            let now = t0() + Duration::days(30);
            let p = pick(Orientation::Outperform, stock_entry, index_entry);
            let run = |sg: f64, ig: f64| {
                score_prediction(
                    &p,
                    Some(&quote("S", stock_entry * sg / 100.0)),
                    Some(&quote("I", index_entry * ig / 100.0)),
                    &c,
                    now,
                )
                .unwrap()
                .score
            };
            let base = run(stock_gain, index_gain);
            let shifted = run(stock_gain + shift, index_gain + shift);
            prop_assert!((base - shifted).abs() <= 1e-9);
        }

        #[test]
        fn identical_prices_gain_exactly_one_hundred(v in 1e-6f64..1e9) {
            prop_assert_eq!(gain(v, v).unwrap(), 100.0);
        }

        #[test]
        fn gain_matches_ratio(entry in 1e-3f64..1e6, observed in 1e-3f64..1e6) {
            let g = gain(entry, observed).unwrap();
            prop_assert!((g - observed / entry * 100.0).abs() <= 1e-12 * g.abs());
        }

        #[test]
        fn maturity_is_monotone(offset_h in 0i64..1000, later_h in 0i64..1000) {
            let c = Config::default();
            let p = pick(Orientation::Outperform, 1.0, 1.0);
            let t = t0() + Duration::hours(offset_h);
            if is_mature(&p, &c, t) {
                prop_assert!(is_mature(&p, &c, t + Duration::hours(later_h)));
            }
        }

        #[test]
        fn player_score_is_permutation_invariant(
            raw in proptest::collection::vec((-50.0f64..50.0, any::<bool>()), 0..30),
            seed in any::<u64>(),
        ) {
            let id = PlayerId::new("p").unwrap();
            let c = Config { positive_score_threshold: 1.5, ..Config::default() };
            let scores: Vec<_> = raw.iter().map(|&(s, m)| scored(s, m)).collect();
            let mut shuffled = scores.clone();
            // Deterministic Fisher-Yates driven by the seed.
            let mut state = seed | 1;
            for i in (1..shuffled.len()).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                shuffled.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let a = player_score(&id, &scores, &c);
            let b = player_score(&id, &shuffled, &c);
            prop_assert_eq!(a.total_score.to_bits(), b.total_score.to_bits());
            prop_assert_eq!(a.counted_predictions, b.counted_predictions);
        }
    }
}
