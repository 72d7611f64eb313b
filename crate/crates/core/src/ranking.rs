//! Player accuracy, Bayesian accuracy rank, percentile ranks and the blended
//! leaderboard.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::model::PlayerId;
use crate::scoring::{counts_toward_total, PredictionScore};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RankingError {
    #[error("positive count {positive} exceeds prediction count {total}")]
    PositiveExceedsTotal { positive: usize, total: usize },
}

/// Share of positive predictions, in percent. Zero predictions give 0.
pub fn accuracy(prediction_count: usize, positive_count: usize) -> Result<f64, RankingError> {
    if positive_count > prediction_count {
        return Err(RankingError::PositiveExceedsTotal { positive: positive_count, total: prediction_count });
    }
    if prediction_count == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * positive_count as f64 / prediction_count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerStats {
    pub player_id: PlayerId,
    /// Matured predictions only.
    pub prediction_count: usize,
    pub positive_count: usize,
    pub accuracy: f64,
    pub total_score: f64,
    /// `prediction_count * accuracy`.
    pub weighted_accuracy: f64,
    pub bayesian_accuracy: f64,
}

impl PlayerStats {
    /// Tallies one player's scored predictions. `bayesian_accuracy` starts out
    /// equal to `accuracy`; [`rank_players`] shrinks it against the pool.
    pub fn tally<'a>(
        player_id: PlayerId,
        scores: impl IntoIterator<Item = &'a PredictionScore>,
        config: &Config,
    ) -> Self {
        let mut prediction_count = 0;
        let mut positive_count = 0;
        let mut counted = Vec::new();
        for s in scores.into_iter().filter(|s| s.mature) {
            prediction_count += 1;
            if s.score > 0.0 {
                positive_count += 1;
            }
            if counts_toward_total(s.score, config) {
                counted.push(s.score);
            }
        }
        counted.sort_by(f64::total_cmp);
        let accuracy = accuracy(prediction_count, positive_count).expect("positive picks are a subset");
        Self {
            player_id,
            prediction_count,
            positive_count,
            accuracy,
            total_score: counted.iter().fold(0.0, |acc, s| acc + s),
            weighted_accuracy: prediction_count as f64 * accuracy,
            bayesian_accuracy: accuracy,
        }
    }

    pub fn is_active(&self, config: &Config) -> bool {
        self.prediction_count >= config.min_player_mature_predictions as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolAggregates {
    pub active_player_count: usize,
    pub total_predictions: usize,
    pub mean_prediction_count: f64,
    pub mean_accuracy: f64,
}

/// Averages over active players. Mean accuracy divides by the player count,
/// not by the mean prediction count.
pub fn pool_aggregates(active: &[PlayerStats]) -> PoolAggregates {
    if active.is_empty() {
        return PoolAggregates::default();
    }
    let n = active.len() as f64;
    let total_predictions: usize = active.iter().map(|s| s.prediction_count).sum();
    let mut accuracies: Vec<f64> = active.iter().map(|s| s.accuracy).collect();
    accuracies.sort_by(f64::total_cmp);
    PoolAggregates {
        active_player_count: active.len(),
        total_predictions,
        mean_prediction_count: total_predictions as f64 / n,
        mean_accuracy: accuracies.iter().sum::<f64>() / n,
    }
}

/// Accuracy shrunk toward the pool mean, weighted by the player's pick count
/// against the pool's mean pick count. Players at or above the normalization
/// cap keep their raw accuracy.
pub fn bayesian_accuracy(stats: &PlayerStats, pool: &PoolAggregates, config: &Config) -> f64 {
    if stats.prediction_count >= config.accuracy_normalization_cap as usize {
        return stats.accuracy;
    }
    let prior_weight = pool.mean_prediction_count;
    let count = stats.prediction_count as f64;
    let denominator = count + prior_weight;
    if denominator == 0.0 {
        return pool.mean_accuracy;
    }
    (prior_weight * pool.mean_accuracy + stats.weighted_accuracy) / denominator
}

/// Percentile rank of every value: sort ascending, take the 1-based position
/// `i`, report `100 * i / n`. Tied values all get the lowest position of
/// their group. Output order follows input order.
pub fn percentile_ranks<K: Clone>(values: &[(K, f64)]) -> Vec<(K, f64)> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].1.total_cmp(&values[b].1));

    let mut positions = vec![0usize; n];
    let mut group_start = 0;
    for (rank, &idx) in order.iter().enumerate() {
        if rank == 0 || values[idx].1.partial_cmp(&values[order[rank - 1]].1) != Some(Ordering::Equal) {
            group_start = rank + 1;
        }
        positions[idx] = group_start;
    }
    values.iter().zip(positions).map(|((k, _), pos)| (k.clone(), 100.0 * pos as f64 / n as f64)).collect()
}

/// Weighted blend of the score and accuracy percentiles. The result is kept
/// inside the closed interval spanned by the two inputs.
pub fn raw_rating(score_percentile: f64, accuracy_percentile: f64, config: &Config) -> f64 {
    let w = config.score_blend_weights;
    let blended = w.score * score_percentile + w.accuracy * accuracy_percentile;
    let lo = score_percentile.min(accuracy_percentile);
    let hi = score_percentile.max(accuracy_percentile);
    blended.clamp(lo, hi)
}

const RATING_TIE_SCALE: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub player_id: PlayerId,
    pub score_percentile: f64,
    pub accuracy_percentile: f64,
    pub raw_rating: f64,
    pub rating_percentile: f64,
}

/// Builds the leaderboard from finished stats: score percentile from
/// `total_score`, accuracy percentile from `bayesian_accuracy`, their blend,
/// and the blend's own percentile. Sorted by rating percentile descending,
/// then player id.
pub fn build_leaderboard(stats: &[PlayerStats], config: &Config) -> Vec<LeaderboardEntry> {
    let by_score: Vec<(usize, f64)> = stats.iter().enumerate().map(|(i, s)| (i, s.total_score)).collect();
    let by_accuracy: Vec<(usize, f64)> = stats.iter().enumerate().map(|(i, s)| (i, s.bayesian_accuracy)).collect();
    let score_pct = percentile_ranks(&by_score);
    let accuracy_pct = percentile_ranks(&by_accuracy);

    let raw: Vec<(usize, f64)> =
        (0..stats.len()).map(|i| (i, raw_rating(score_pct[i].1, accuracy_pct[i].1, config))).collect();
    // Blends that agree to nine decimals are ties; rounding in the weights
    // must not split e.g. 2/3*60 + 1/3*40 from 2/3*40 + 1/3*80.
    let tie_keys: Vec<(usize, f64)> = raw.iter().map(|&(i, r)| (i, (r * RATING_TIE_SCALE).round())).collect();
    let rating_pct = percentile_ranks(&tie_keys);

    let mut entries: Vec<LeaderboardEntry> = stats
        .iter()
        .enumerate()
        .map(|(i, s)| LeaderboardEntry {
            player_id: s.player_id.clone(),
            score_percentile: score_pct[i].1,
            accuracy_percentile: accuracy_pct[i].1,
            raw_rating: raw[i].1,
            rating_percentile: rating_pct[i].1,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.rating_percentile.total_cmp(&a.rating_percentile).then_with(|| a.player_id.cmp(&b.player_id))
    });
    entries
}

/// Everything the ranking stage produces for one snapshot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub pool: PoolAggregates,
    /// Active players, in input order, with Bayesian accuracy filled in.
    pub stats: Vec<PlayerStats>,
    pub leaderboard: Vec<LeaderboardEntry>,
}

/// Filters tallies to active players, shrinks their accuracies against the
/// pool and builds the leaderboard.
pub fn rank_players(tallies: Vec<PlayerStats>, config: &Config) -> Ranking {
    let mut stats: Vec<PlayerStats> = tallies.into_iter().filter(|s| s.is_active(config)).collect();
    let pool = pool_aggregates(&stats);
    for s in &mut stats {
        s.bayesian_accuracy = bayesian_accuracy(s, &pool, config);
    }
    let leaderboard = build_leaderboard(&stats, config);
    Ranking { pool, stats, leaderboard }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(id: &str, count: usize, positive: usize, total_score: f64) -> PlayerStats {
        let acc = accuracy(count, positive).unwrap();
        PlayerStats {
            player_id: PlayerId::new(id).unwrap(),
            prediction_count: count,
            positive_count: positive,
            accuracy: acc,
            total_score,
            weighted_accuracy: count as f64 * acc,
            bayesian_accuracy: acc,
        }
    }

    fn pct(values: &[f64]) -> Vec<f64> {
        let v: Vec<(usize, f64)> = values.iter().copied().enumerate().collect();
        percentile_ranks(&v).into_iter().map(|(_, p)| p).collect()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(10, 7).unwrap(), 70.0);
        assert_eq!(accuracy(250, 100).unwrap(), 40.0);
        assert_eq!(accuracy(0, 0).unwrap(), 0.0);
        for n in 1..50 {
            assert_eq!(accuracy(n, n).unwrap(), 100.0);
        }
        assert!(accuracy(3, 4).is_err());
    }

    #[test]
    fn pool_examples() {
        let one = pool_aggregates(&[stats("a", 10, 7, 0.0)]);
        assert_eq!(one.mean_accuracy, 70.0);
        let two = pool_aggregates(&[stats("a", 5, 2, 0.0), stats("b", 5, 3, 0.0)]);
        assert_eq!(two.mean_accuracy, 50.0);
        assert_eq!(two.mean_prediction_count, 5.0);
        let empty = pool_aggregates(&[]);
        assert_eq!(empty, PoolAggregates::default());
    }

    #[test]
    fn pool_mean_prediction_count_at_desk_scale() {
        // 47 players sharing 667 picks.
        let all: Vec<_> = (0..47)
            .map(|i| {
                let n = 14 + usize::from(i < 667 - 47 * 14);
                stats(&format!("p{i}"), n, n / 2, 0.0)
            })
            .collect();
        let pool = pool_aggregates(&all);
        assert_eq!(pool.total_predictions, 667);
        assert!((pool.mean_prediction_count - 14.1915).abs() < 1e-4);
    }

    #[test]
    fn bayesian_examples() {
        let c = Config::default();
        let pool = PoolAggregates {
            active_player_count: 3,
            total_predictions: 30,
            mean_prediction_count: 10.0,
            mean_accuracy: 50.0,
        };
        let r = bayesian_accuracy(&stats("a", 4, 3, 0.0), &pool, &c);
        assert!((r - 800.0 / 14.0).abs() < 1e-12);
        assert!((r - 57.142857).abs() < 1e-6);

        assert_eq!(bayesian_accuracy(&stats("a", 0, 0, 0.0), &pool, &c), 50.0);

        let mut capped = stats("a", 150, 0, 0.0);
        capped.accuracy = 63.0;
        capped.weighted_accuracy = 150.0 * 63.0;
        assert_eq!(bayesian_accuracy(&capped, &pool, &c), 63.0);
    }

    #[test]
    fn bayesian_converges_to_accuracy_as_count_grows() {
        // The cap branch continues the limit of the shrinkage formula.
        let pool = PoolAggregates {
            active_player_count: 3,
            total_predictions: 30,
            mean_prediction_count: 10.0,
            mean_accuracy: 50.0,
        };
        let c = Config { accuracy_normalization_cap: u32::MAX, ..Config::default() };
        let mut prev = f64::INFINITY;
        for n in [100usize, 1_000, 100_000, 10_000_000] {
            let mut s = stats("a", n, 0, 0.0);
            s.accuracy = 63.0;
            s.weighted_accuracy = n as f64 * 63.0;
            let gap = (bayesian_accuracy(&s, &pool, &c) - 63.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn percentile_examples() {
        let p = pct(&[5.0, 9.0, 1.0]);
        assert!((p[0] - 66.666_666).abs() < 1e-3);
        assert_eq!(p[1], 100.0);
        assert!((p[2] - 33.333_333).abs() < 1e-3);

        let p = pct(&[4.0, 4.0, 7.0]);
        assert_eq!(p[0], p[1]);
        assert!((p[0] - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(p[2], 100.0);

        let seventy_two: Vec<f64> = (0..72).map(f64::from).collect();
        let p = pct(&seventy_two);
        assert_eq!(format!("{:.2}", p[68]), "95.83");
        assert_eq!(format!("{:.2}", p[67]), "94.44");
        assert_eq!(format!("{:.2}", p[66]), "93.06");

        assert!(pct(&[]).is_empty());
    }

    #[test]
    fn raw_rating_examples() {
        let c = Config::default();
        assert!((raw_rating(90.0, 60.0, &c) - 80.0).abs() < 1e-12);
        assert!((raw_rating(100.0, 1.0, &c) - 67.0).abs() < 1e-12);
        for x in [0.5, 1.0, 33.3, 99.99, 100.0] {
            assert_eq!(raw_rating(x, x, &c), x);
        }
    }

    #[test]
    fn leaderboard_singleton_and_dominance() {
        let c = Config::default();
        let board = build_leaderboard(&[stats("a", 3, 2, 5.0)], &c);
        let e = &board[0];
        assert_eq!(
            (e.score_percentile, e.accuracy_percentile, e.raw_rating, e.rating_percentile),
            (100.0, 100.0, 100.0, 100.0)
        );

        let board = build_leaderboard(&[stats("weak", 4, 1, -3.0), stats("strong", 4, 3, 12.0)], &c);
        assert_eq!(board[0].player_id.as_str(), "strong");
        assert_eq!(board[0].rating_percentile, 100.0);
        assert_eq!(board[1].rating_percentile, 50.0);
    }

    #[test]
    fn leaderboard_matches_hand_recomputation() {
        // Five players; expected values worked out column by column.
        // scores:   a=10  b=-4  c=25  d=10  e=0
        // bayes:    a=60  b=70  c=40  d=55  e=70
        // y_S: b=20 e=40 a=60 d=60 c=100
        // y_A: c=20 d=40 a=60 b=80 e=80
        // r:   a=60 b=40 c=220/3 d=160/3 e=160/3
        // y_R: b=20 d=40 e=40 a=80 c=100
        let c = Config::default();
        let mk = |id: &str, score: f64, bayes: f64| {
            let mut s = stats(id, 10, 5, score);
            s.bayesian_accuracy = bayes;
            s
        };
        let input =
            [mk("a", 10.0, 60.0), mk("b", -4.0, 70.0), mk("c", 25.0, 40.0), mk("d", 10.0, 55.0), mk("e", 0.0, 70.0)];
        let board = build_leaderboard(&input, &c);
        let expect = [
            ("c", 100.0, 20.0, 220.0 / 3.0, 100.0),
            ("a", 60.0, 60.0, 60.0, 80.0),
            ("d", 60.0, 40.0, 160.0 / 3.0, 40.0),
            ("e", 40.0, 80.0, 160.0 / 3.0, 40.0),
            ("b", 20.0, 80.0, 40.0, 20.0),
        ];
        assert_eq!(board.len(), expect.len());
        for (e, (id, ys, ya, r, yr)) in board.iter().zip(expect) {
            assert_eq!(e.player_id.as_str(), id);
            assert!((e.score_percentile - ys).abs() < 1e-9, "{id} y_S");
            assert!((e.accuracy_percentile - ya).abs() < 1e-9, "{id} y_A");
            assert!((e.raw_rating - r).abs() < 1e-9, "{id} r");
            assert!((e.rating_percentile - yr).abs() < 1e-9, "{id} y_R");
        }
    }

    #[test]
    fn rank_players_drops_inactive() {
        let c = Config { min_player_mature_predictions: 2, ..Config::default() };
        let ranking = rank_players(vec![stats("a", 1, 1, 1.0), stats("b", 4, 2, 3.0)], &c);
        assert_eq!(ranking.stats.len(), 1);
        assert_eq!(ranking.pool.active_player_count, 1);
        assert_eq!(ranking.leaderboard[0].player_id.as_str(), "b");
    }

    proptest! {
        #[test]
        fn percentiles_in_range_and_top_is_hundred(values in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let p = pct(&values);
            for x in &p {
                prop_assert!(*x > 0.0 && *x <= 100.0);
            }
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let i = values.iter().position(|v| *v == max).unwrap();
            // The maximum always lands at 100 when it is unique.
            if values.iter().filter(|v| **v == max).count() == 1 {
                prop_assert_eq!(p[i], 100.0);
            }
        }

        #[test]
        fn percentiles_invariant_under_increasing_maps(values in proptest::collection::vec(-50.0f64..50.0, 0..40)) {
            let mapped: Vec<f64> = values.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            prop_assert_eq!(pct(&values), pct(&mapped));
        }

        #[test]
        fn raw_rating_is_bounded_and_monotone(a in 0.01f64..=100.0, b in 0.01f64..=100.0, bump in 0.0f64..10.0) {
            let c = Config::default();
            let r = raw_rating(a, b, &c);
            prop_assert!(a.min(b) <= r && r <= a.max(b));
            prop_assert!(raw_rating(a + bump, b, &c) >= r);
            prop_assert!(raw_rating(a, b + bump, &c) >= r);
        }

        #[test]
        fn bayesian_lies_between_prior_and_evidence(
            positive in 0usize..100, count in 1usize..100, prior_acc in 0.0f64..=100.0, prior_n in 0.5f64..50.0,
        ) {
            prop_assume!(positive <= count);
            let c = Config::default();
            let s = stats("a", count, positive, 0.0);
            let pool = PoolAggregates { active_player_count: 10, total_predictions: 0, mean_prediction_count: prior_n, mean_accuracy: prior_acc };
            let r = bayesian_accuracy(&s, &pool, &c);
            if s.accuracy != prior_acc {
                prop_assert!(r > s.accuracy.min(prior_acc) && r < s.accuracy.max(prior_acc));
            }
        }
    }
}
