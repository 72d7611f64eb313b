//! Game tunables and the flat `key = value` config file.
//!
//! The file holds the game [`Config`] plus optional deployment settings
//! (log path, snapshot directory, listen address). Durations are written as
//! `<int>d` (days) or `<int>m` (minutes); fractions as decimals. Lines
//! starting with `#` and blank lines are ignored. Unknown keys are an error.

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
}

impl ConfigError {
    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field, reason: reason.into() }
    }
}

/// Relative weights of the score and accuracy percentiles in a player's raw rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub score: f64,
    pub accuracy: f64,
}

impl Default for BlendWeights {
    fn default() -> Self {
        Self { score: 2.0 / 3.0, accuracy: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Days after entry before a prediction counts.
    pub pending_period_days: u32,
    pub min_stock_predictions: u32,
    /// A stock needs at least one predictor rated strictly above this percentile.
    pub min_top_player_percentile: f64,
    pub accuracy_normalization_cap: u32,
    pub score_blend_weights: BlendWeights,
    /// Positive prediction scores below this are left out of a player's total.
    pub positive_score_threshold: f64,
    pub min_player_mature_predictions: u32,
    /// Exponent applied to predictor rating percentiles when weighting stock scores.
    pub rating_weight_exponent: f64,
    pub price_delay_minutes: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            pending_period_days: 7,
            min_stock_predictions: 5,
            min_top_player_percentile: 60.0,
            accuracy_normalization_cap: 100,
            score_blend_weights: BlendWeights::default(),
            positive_score_threshold: 0.0,
            min_player_mature_predictions: 1,
            rating_weight_exponent: 1.0,
            price_delay_minutes: 15,
        }
    }
}

impl Config {
    pub fn pending_period(&self) -> Duration {
        Duration::days(i64::from(self.pending_period_days))
    }

    pub fn price_delay(&self) -> Duration {
        Duration::minutes(i64::from(self.price_delay_minutes))
    }

    /// Returns the config unchanged iff every invariant holds, otherwise the
    /// first violation with its field name.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.pending_period_days == 0 {
            return Err(ConfigError::invalid("pending_period", "must be at least one day"));
        }
        let p = self.min_top_player_percentile;
        if !p.is_finite() || !(0.0..=100.0).contains(&p) {
            return Err(ConfigError::invalid("min_top_player_percentile", format!("{p} is outside [0, 100]")));
        }
        let BlendWeights { score, accuracy } = self.score_blend_weights;
        for w in [score, accuracy] {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(ConfigError::invalid("score_blend_weights", format!("weight {w} is outside [0, 1]")));
            }
        }
        if ((score + accuracy) - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(ConfigError::invalid(
                "score_blend_weights",
                format!("weights must sum to 1, got {}", score + accuracy),
            ));
        }
        let t = self.positive_score_threshold;
        if !t.is_finite() || t < 0.0 {
            return Err(ConfigError::invalid("positive_score_threshold", format!("{t} must be >= 0")));
        }
        let e = self.rating_weight_exponent;
        if !e.is_finite() || e < 1.0 {
            return Err(ConfigError::invalid("rating_weight_exponent", format!("{e} must be >= 1")));
        }
        Ok(self)
    }
}

/// Deployment settings that live next to the game config in the same file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    pub log_path: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub listen: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub game: Config,
    pub settings: Settings,
}

const KEYS: &[&str] = &[
    "pending_period",
    "min_stock_predictions",
    "min_top_player_percentile",
    "accuracy_normalization_cap",
    "score_blend_weights",
    "positive_score_threshold",
    "min_player_mature_predictions",
    "rating_weight_exponent",
    "price_delay",
    "log_path",
    "snapshot_dir",
    "listen",
];

impl ConfigFile {
    /// Parses the file text. Missing keys keep their defaults; the resulting
    /// game config is validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = ConfigFile::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, reason: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            };
            if seen.contains(&known) {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
            seen.push(known);
            let syntax = |reason: String| ConfigError::Syntax { line, reason };
            let game = &mut out.game;
            match known {
                "pending_period" => {
                    let minutes = parse_duration_minutes(value).map_err(syntax)?;
                    if minutes % (24 * 60) != 0 {
                        return Err(ConfigError::Syntax { line, reason: "pending_period must be whole days".into() });
                    }
                    game.pending_period_days = u32::try_from(minutes / (24 * 60))
                        .map_err(|_| ConfigError::Syntax { line, reason: "pending_period too large".into() })?;
                }
                "price_delay" => {
                    game.price_delay_minutes = u32::try_from(parse_duration_minutes(value).map_err(syntax)?)
                        .map_err(|_| ConfigError::Syntax { line, reason: "price_delay too large".into() })?;
                }
                "min_stock_predictions" => game.min_stock_predictions = parse_count(value).map_err(syntax)?,
                "accuracy_normalization_cap" => game.accuracy_normalization_cap = parse_count(value).map_err(syntax)?,
                "min_player_mature_predictions" => {
                    game.min_player_mature_predictions = parse_count(value).map_err(syntax)?
                }
                "min_top_player_percentile" => game.min_top_player_percentile = parse_real(value).map_err(syntax)?,
                "positive_score_threshold" => game.positive_score_threshold = parse_real(value).map_err(syntax)?,
                "rating_weight_exponent" => game.rating_weight_exponent = parse_real(value).map_err(syntax)?,
                "score_blend_weights" => {
                    let (s, a) = value
                        .split_once(',')
                        .ok_or_else(|| syntax("expected `<score weight>, <accuracy weight>`".into()))?;
                    game.score_blend_weights = BlendWeights {
                        score: parse_real(s.trim()).map_err(syntax)?,
                        accuracy: parse_real(a.trim()).map_err(syntax)?,
                    };
                }
                "log_path" => out.settings.log_path = Some(PathBuf::from(value)),
                "snapshot_dir" => out.settings.snapshot_dir = Some(PathBuf::from(value)),
                "listen" => out.settings.listen = Some(value.to_string()),
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        out.game = out.game.validate()?;
        Ok(out)
    }

    /// Canonical text form. `parse(to_text(c)) == c` and the text itself is
    /// stable under a second round trip.
    pub fn to_text(&self) -> String {
        let mut s = config_to_text(&self.game);
        let settings = &self.settings;
        if let Some(p) = &settings.log_path {
            let _ = writeln!(s, "log_path = {}", p.display());
        }
        if let Some(p) = &settings.snapshot_dir {
            let _ = writeln!(s, "snapshot_dir = {}", p.display());
        }
        if let Some(l) = &settings.listen {
            let _ = writeln!(s, "listen = {l}");
        }
        s
    }
}

/// Writes every game key in canonical order. Floats use Rust's shortest
/// round-trip representation, so parsing the output restores identical bits.
pub fn config_to_text(c: &Config) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pending_period = {}d", c.pending_period_days);
    let _ = writeln!(s, "min_stock_predictions = {}", c.min_stock_predictions);
    let _ = writeln!(s, "min_top_player_percentile = {:?}", c.min_top_player_percentile);
    let _ = writeln!(s, "accuracy_normalization_cap = {}", c.accuracy_normalization_cap);
    let _ =
        writeln!(s, "score_blend_weights = {:?}, {:?}", c.score_blend_weights.score, c.score_blend_weights.accuracy);
    let _ = writeln!(s, "positive_score_threshold = {:?}", c.positive_score_threshold);
    let _ = writeln!(s, "min_player_mature_predictions = {}", c.min_player_mature_predictions);
    let _ = writeln!(s, "rating_weight_exponent = {:?}", c.rating_weight_exponent);
    let _ = writeln!(s, "price_delay = {}m", c.price_delay_minutes);
    s
}

fn parse_duration_minutes(value: &str) -> Result<u64, String> {
    let (digits, unit) = value.split_at(value.len().saturating_sub(1));
    let n: u64 = digits.parse().map_err(|_| format!("bad duration `{value}` (expected `<int>d` or `<int>m`)"))?;
    match unit {
        "d" => n.checked_mul(24 * 60).ok_or_else(|| format!("duration `{value}` overflows")),
        "m" => Ok(n),
        _ => Err(format!("bad duration `{value}` (expected `<int>d` or `<int>m`)")),
    }
}

fn parse_count(value: &str) -> Result<u32, String> {
    value.parse().map_err(|_| format!("expected a non-negative integer, got `{value}`"))
}

fn parse_real(value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("expected a decimal number, got `{value}`"))?;
    if !v.is_finite() {
        return Err(format!("expected a finite number, got `{value}`"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let c = Config::default().validate().unwrap();
        assert_eq!(c.pending_period_days, 7);
        assert_eq!(c.min_stock_predictions, 5);
        assert_eq!(c.min_top_player_percentile, 60.0);
        assert_eq!(c.accuracy_normalization_cap, 100);
        assert_eq!(c.price_delay_minutes, 15);
    }

    #[test]
    fn equal_weights_accepted() {
        let c = Config { score_blend_weights: BlendWeights { score: 0.5, accuracy: 0.5 }, ..Config::default() };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn weights_not_summing_to_one_rejected() {
        let c = Config { score_blend_weights: BlendWeights { score: 0.9, accuracy: 0.2 }, ..Config::default() };
        let err = c.validate().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { field: "score_blend_weights", .. }));
        assert!(err.to_string().contains("score_blend_weights"));
    }

    #[test]
    fn first_violation_is_reported() {
        let c = Config { pending_period_days: 0, rating_weight_exponent: 0.5, ..Config::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "pending_period", .. })));
        let c = Config { rating_weight_exponent: 0.5, ..Config::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "rating_weight_exponent", .. })));
        let c = Config { positive_score_threshold: -1.0, ..Config::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid { field: "positive_score_threshold", .. })));
    }

    #[test]
    fn parses_file_with_settings_and_comments() {
        let text = "# game\npending_period = 3d\nprice_delay = 1d\nscore_blend_weights = 0.5, 0.5\n\nlisten = 127.0.0.1:8080\nlog_path = /tmp/x.log\n";
        let f = ConfigFile::parse(text).unwrap();
        assert_eq!(f.game.pending_period_days, 3);
        assert_eq!(f.game.price_delay_minutes, 1440);
        assert_eq!(f.game.score_blend_weights.score, 0.5);
        assert_eq!(f.settings.listen.as_deref(), Some("127.0.0.1:8080"));
        assert_eq!(f.settings.log_path, Some(PathBuf::from("/tmp/x.log")));
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        assert_eq!(
            ConfigFile::parse("colour = red").unwrap_err(),
            ConfigError::UnknownKey { line: 1, key: "colour".into() }
        );
        assert!(matches!(
            ConfigFile::parse("price_delay = 1m\nprice_delay = 2m").unwrap_err(),
            ConfigError::DuplicateKey { line: 2, .. }
        ));
    }

    #[test]
    fn bad_durations_rejected() {
        assert!(ConfigFile::parse("pending_period = 90m").is_err());
        assert!(ConfigFile::parse("pending_period = 7").is_err());
        assert!(ConfigFile::parse("price_delay = 5h").is_err());
        assert!(ConfigFile::parse("pending_period = 0d").is_err());
    }

    #[test]
    fn invalid_weights_in_file_rejected() {
        let err = ConfigFile::parse("score_blend_weights = 0.9, 0.2").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { field: "score_blend_weights", .. }));
    }

    proptest! {
        #[test]
        fn config_text_round_trips_bit_exactly(
            days in 1u32..400,
            min_preds in 0u32..50,
            pct in 0.0f64..=100.0,
            cap in 0u32..1000,
            w in 0.0f64..=1.0,
            threshold in 0.0f64..1e6,
            min_player in 0u32..20,
            exponent in 1.0f64..8.0,
            delay in 0u32..100_000,
        ) {
            let game = Config {
                pending_period_days: days,
                min_stock_predictions: min_preds,
                min_top_player_percentile: pct,
                accuracy_normalization_cap: cap,
                score_blend_weights: BlendWeights { score: w, accuracy: 1.0 - w },
                positive_score_threshold: threshold,
                min_player_mature_predictions: min_player,
                rating_weight_exponent: exponent,
                price_delay_minutes: delay,
            };
            prop_assume!(game.clone().validate().is_ok());
            let file = ConfigFile { game, settings: Settings::default() };
            let text = file.to_text();
            let parsed = ConfigFile::parse(&text).unwrap();
            prop_assert_eq!(&parsed, &file);
            prop_assert_eq!(parsed.game.min_top_player_percentile.to_bits(), pct.to_bits());
            prop_assert_eq!(parsed.to_text(), text);
        }
    }
}
