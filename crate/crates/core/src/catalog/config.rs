use chrono::NaiveDate;
use serde_json::{Map, Value};
use thiserror::Error;

/// Upper probability bound (inclusive) of one probability-number bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnLimit {
    pub upper: f64,
    pub pn: u8,
}

/// Tunable thresholds. Defaults reproduce the published classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    /// Upper bound (exclusive) of slow tumbling, deg/s.
    pub slow_max_deg_s: f64,
    /// Upper bound (exclusive) of medium tumbling, deg/s.
    pub medium_max_deg_s: f64,
    /// Smallest broad clearance area (inclusive), m².
    pub clearance_broad_min_m2: f64,
    /// Orbit age up to which a non-passivated rocket body counts as fresh.
    pub rb_fresh_age_years: f64,
    pub pn_limits: Vec<PnLimit>,
    pub window_end: NaiveDate,
    /// SN of an aged, non-passivated rocket body whose propellant is hybrid,
    /// other or unknown.
    pub unlisted_propellant_sn: u8,
    /// SN of an aged, non-passivated rocket body without propellant.
    pub no_propellant_sn: u8,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            slow_max_deg_s: 5.0,
            medium_max_deg_s: 18.0,
            clearance_broad_min_m2: 0.28,
            rb_fresh_age_years: 1.05,
            pn_limits: vec![
                PnLimit { upper: 1e-4, pn: 1 },
                PnLimit { upper: 1e-2, pn: 2 },
                PnLimit { upper: 1e-1, pn: 3 },
                PnLimit {
                    upper: f64::INFINITY,
                    pn: 4,
                },
            ],
            window_end: NaiveDate::from_ymd_opt(2019, 7, 31).expect("valid date"),
            unlisted_propellant_sn: 3,
            no_propellant_sn: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("inconsistent thresholds: {0}")]
    Inconsistent(String),
}

fn violation(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::SchemaViolation {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Inconsistent(m.to_string()));
        let finite = [
            self.slow_max_deg_s,
            self.medium_max_deg_s,
            self.clearance_broad_min_m2,
            self.rb_fresh_age_years,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("thresholds must be finite");
        }
        if !(0.0 < self.slow_max_deg_s && self.slow_max_deg_s < self.medium_max_deg_s) {
            return bad("require 0 < slow_max_deg_s < medium_max_deg_s");
        }
        if self.clearance_broad_min_m2 <= 0.0 {
            return bad("clearance_broad_min_m2 must be positive");
        }
        if self.rb_fresh_age_years <= 0.0 {
            return bad("rb_fresh_age_years must be positive");
        }
        let Some(last) = self.pn_limits.last() else {
            return bad("pn_limits must not be empty");
        };
        if last.upper != f64::INFINITY {
            return bad("last pn_limits bound must be +inf");
        }
        for pair in self.pn_limits.windows(2) {
            if pair[0].upper.is_nan() || pair[0].upper >= pair[1].upper {
                return bad("pn_limits bounds must be strictly increasing");
            }
            if pair[0].pn >= pair[1].pn {
                return bad("pn_limits PN values must be strictly increasing");
            }
        }
        for sn in [self.unlisted_propellant_sn, self.no_propellant_sn] {
            if !(1..=4).contains(&sn) {
                return bad("severity numbers must lie in 1..=4");
            }
        }
        if self.pn_limits.iter().any(|l| !(1..=4).contains(&l.pn)) {
            return bad("probability numbers must lie in 1..=4");
        }
        Ok(())
    }

    /// Parses a standalone thresholds document (a JSON object).
    pub fn from_json(bytes: &[u8]) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| violation("$", e.to_string()))?;
        let mut cfg = Self::default();
        cfg.apply_overrides(&value, "$")?;
        Ok(cfg)
    }

    /// Overrides fields named in `overrides`, then re-validates.
    pub fn apply_overrides(&mut self, overrides: &Value, path: &str) -> Result<(), ConfigError> {
        let object: &Map<String, Value> = overrides
            .as_object()
            .ok_or_else(|| violation(path, "expected an object"))?;
        for (key, value) in object {
            let here = format!("{path}.{key}");
            match key.as_str() {
                "slow_max_deg_s" => self.slow_max_deg_s = number(value, &here)?,
                "medium_max_deg_s" => self.medium_max_deg_s = number(value, &here)?,
                "clearance_broad_min_m2" => self.clearance_broad_min_m2 = number(value, &here)?,
                "rb_fresh_age_years" => self.rb_fresh_age_years = number(value, &here)?,
                "unlisted_propellant_sn" => self.unlisted_propellant_sn = small_int(value, &here)?,
                "no_propellant_sn" => self.no_propellant_sn = small_int(value, &here)?,
                "window_end" => {
                    let text = value
                        .as_str()
                        .ok_or_else(|| violation(&here, "expected a date string"))?;
                    self.window_end = NaiveDate::parse_from_str(text, "%Y-%m-%d")
                        .map_err(|_| violation(&here, format!("invalid date {text:?}")))?;
                }
                "pn_limits" => self.pn_limits = pn_limits(value, &here)?,
                other => return Err(violation(&here, format!("unknown threshold `{other}`"))),
            }
        }
        self.validate()
    }
}

fn number(value: &Value, path: &str) -> Result<f64, ConfigError> {
    value.as_f64().ok_or_else(|| violation(path, "expected a number"))
}

fn small_int(value: &Value, path: &str) -> Result<u8, ConfigError> {
    value
        .as_u64()
        .and_then(|v| u8::try_from(v).ok())
        .ok_or_else(|| violation(path, "expected a small integer"))
}

/// `[[bound, pn], ...]` where the open-ended bound is `null` or `"inf"`.
fn pn_limits(value: &Value, path: &str) -> Result<Vec<PnLimit>, ConfigError> {
    let items = value.as_array().ok_or_else(|| violation(path, "expected an array"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let here = format!("{path}[{i}]");
            let pair = item
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| violation(&here, "expected [upper_bound, pn]"))?;
            let upper = match &pair[0] {
                Value::Null => f64::INFINITY,
                Value::String(s) if s == "inf" || s == "+inf" => f64::INFINITY,
                other => number(other, &format!("{here}[0]"))?,
            };
            let pn = small_int(&pair[1], &format!("{here}[1]"))?;
            Ok(PnLimit { upper, pn })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_are_consistent() {
        let cfg = ThresholdConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.slow_max_deg_s, 5.0);
        assert_eq!(cfg.medium_max_deg_s, 18.0);
        assert_eq!(cfg.clearance_broad_min_m2, 0.28);
        assert_eq!(cfg.rb_fresh_age_years, 1.05);
        assert_eq!(cfg.pn_limits.len(), 4);
    }

    #[test]
    fn overrides_by_name() {
        let mut cfg = ThresholdConfig::default();
        cfg.apply_overrides(
            &json!({"slow_max_deg_s": 4, "pn_limits": [[1e-3, 1], [null, 4]], "window_end": "2020-01-31"}),
            "$",
        )
        .unwrap();
        assert_eq!(cfg.slow_max_deg_s, 4.0);
        assert_eq!(
            cfg.pn_limits,
            vec![
                PnLimit { upper: 1e-3, pn: 1 },
                PnLimit {
                    upper: f64::INFINITY,
                    pn: 4
                }
            ]
        );
        assert_eq!(cfg.window_end, NaiveDate::from_ymd_opt(2020, 1, 31).unwrap());
    }

    #[test]
    fn rejects_bad_overrides() {
        let mut cfg = ThresholdConfig::default();
        let err = cfg
            .apply_overrides(&json!({"slow_max": 4}), "$.thresholds")
            .unwrap_err();
        assert_eq!(err, violation("$.thresholds.slow_max", "unknown threshold `slow_max`"));

        let err = ThresholdConfig::default()
            .apply_overrides(&json!({"slow_max_deg_s": 20}), "$")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Inconsistent(_)));

        let err = ThresholdConfig::default()
            .apply_overrides(&json!({"pn_limits": [[1e-2, 1], [1e-3, 2], [null, 3]]}), "$")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Inconsistent(_)));

        let err = ThresholdConfig::default()
            .apply_overrides(&json!({"pn_limits": [[1e-2, 1], [0.5, 2]]}), "$")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Inconsistent(_)));

        let err = ThresholdConfig::default()
            .apply_overrides(&json!({"pn_limits": [[1e-2, 2], [null, 2]]}), "$")
            .unwrap_err();
        assert!(matches!(err, ConfigError::Inconsistent(_)));
    }
}
