//! Rule-set configuration.
//!
//! Schema: a top-level object with a `rules` array and an optional
//! `thresholds` object. Each rule has a `name` and optional slot keys; an
//! omitted key accepts any value.
//!
//! ```json
//! { "rules": [ { "name": "Net_Based",
//!                "criticality": ["low", "medium"],
//!                "regimes": ["stable", "slow", "medium"] } ],
//!   "thresholds": { "slow_max_deg_s": 5 } }
//! ```

use std::collections::{BTreeSet, HashSet};
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{AttitudeRegime, CaptureRule, ClearanceClass, Slot, SlotValue};
use crate::catalog::{ConfigError, InterfaceMaterial, ObjectType, ThresholdConfig};
use crate::criticality::CriticalityLevel;

/// The shipped rule set, identical to [`default_rules`].
pub const DEFAULT_RULES_JSON: &str = include_str!("../../config/default_rules.json");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("duplicate rule name {0:?}")]
    DuplicateRuleName(String),
    #[error("empty value set at {0}")]
    EmptySlotSet(String),
}

impl From<ConfigError> for RuleError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::SchemaViolation { path, message } => RuleError::SchemaViolation { path, message },
            ConfigError::Inconsistent(message) => RuleError::SchemaViolation {
                path: "$.thresholds".into(),
                message,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleConfig {
    pub rules: Vec<CaptureRule>,
    pub thresholds: ThresholdConfig,
}

pub fn default_rules() -> Vec<CaptureRule> {
    use AttitudeRegime::*;
    use CriticalityLevel::*;
    let up_to_medium = || Slot::of([Stable, SlowTumbling, MediumTumbling]);
    let fast = || Slot::of([FastTumbling]);
    let low_medium = || Slot::of([Low, Medium]);
    vec![
        CaptureRule {
            criticality: Slot::of([Low]),
            regimes: up_to_medium(),
            grapple_feature: Slot::of([true]),
            ..CaptureRule::any("Manipulator_Based")
        },
        CaptureRule {
            object_type: Slot::of([ObjectType::RocketBody]),
            criticality: Slot::of([Low]),
            regimes: up_to_medium(),
            grapple_feature: Slot::of([false]),
            clearance: Slot::of([ClearanceClass::Broad]),
            ..CaptureRule::any("Clamp_Based")
        },
        CaptureRule {
            criticality: low_medium(),
            regimes: up_to_medium(),
            ..CaptureRule::any("Net_Based")
        },
        CaptureRule {
            object_type: Slot::of([ObjectType::Payload]),
            passivated: Slot::of([true]),
            regimes: Slot::of([Stable, SlowTumbling]),
            grapple_feature: Slot::of([false]),
            material: Slot::of([InterfaceMaterial::Isotropic]),
            ..CaptureRule::any("Harpoon_Based")
        },
        CaptureRule {
            object_type: Slot::of([ObjectType::Payload]),
            criticality: low_medium(),
            regimes: fast(),
            ..CaptureRule::any("Plume_Impingement")
        },
        CaptureRule {
            object_type: Slot::of([ObjectType::RocketBody]),
            criticality: low_medium(),
            regimes: fast(),
            ..CaptureRule::any("Electromagnetic_Based")
        },
        CaptureRule {
            object_type: Slot::of([ObjectType::Payload]),
            passivated: Slot::of([true]),
            regimes: fast(),
            ..CaptureRule::any("Ablation_Based")
        },
        CaptureRule {
            criticality: Slot::of([High]),
            passivated: Slot::of([false]),
            regimes: fast(),
            ..CaptureRule::any("No_Solution")
        },
    ]
}

fn violation(path: &str, message: impl Into<String>) -> RuleError {
    RuleError::SchemaViolation {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Token parsing specific to the rule schema.
trait RuleToken: SlotValue + Sized {
    const EXPECTED: &'static str;
    fn parse_token(s: &str) -> Option<Self>;
    fn to_token(self) -> &'static str;
}

impl RuleToken for ObjectType {
    const EXPECTED: &'static str = "\"PL\" or \"RB\"";
    fn parse_token(s: &str) -> Option<Self> {
        match s {
            "PL" => Some(ObjectType::Payload),
            "RB" => Some(ObjectType::RocketBody),
            _ => None,
        }
    }
    fn to_token(self) -> &'static str {
        self.abbreviation()
    }
}

impl RuleToken for CriticalityLevel {
    const EXPECTED: &'static str = "one of \"low\", \"medium\", \"high\"";
    fn parse_token(s: &str) -> Option<Self> {
        CriticalityLevel::ALL.into_iter().find(|l| l.token() == s)
    }
    fn to_token(self) -> &'static str {
        self.token()
    }
}

impl RuleToken for AttitudeRegime {
    const EXPECTED: &'static str = "one of \"stable\", \"slow\", \"medium\", \"fast\"";
    fn parse_token(s: &str) -> Option<Self> {
        AttitudeRegime::ALL.into_iter().find(|r| r.token() == s)
    }
    fn to_token(self) -> &'static str {
        self.token()
    }
}

impl RuleToken for InterfaceMaterial {
    const EXPECTED: &'static str = "\"isotropic\" or \"anisotropic\"";
    fn parse_token(s: &str) -> Option<Self> {
        InterfaceMaterial::from_str(s).ok().filter(|m| m.token() == s)
    }
    fn to_token(self) -> &'static str {
        self.token()
    }
}

impl RuleToken for ClearanceClass {
    const EXPECTED: &'static str = "\"narrow\" or \"broad\"";
    fn parse_token(s: &str) -> Option<Self> {
        ClearanceClass::ALL.into_iter().find(|c| c.token() == s)
    }
    fn to_token(self) -> &'static str {
        self.token()
    }
}

/// A string or an array of strings, each a valid token.
fn token_slot<T: RuleToken>(value: &Value, path: &str) -> Result<Slot<T>, RuleError> {
    let one = |v: &Value, p: &str| -> Result<T, RuleError> {
        let s = v
            .as_str()
            .ok_or_else(|| violation(p, format!("expected a string, {}", T::EXPECTED)))?;
        T::parse_token(s).ok_or_else(|| violation(p, format!("unknown value {s:?}, expected {}", T::EXPECTED)))
    };
    match value {
        Value::Array(items) => {
            if items.is_empty() {
                return Err(RuleError::EmptySlotSet(path.to_string()));
            }
            let set = items
                .iter()
                .enumerate()
                .map(|(i, v)| one(v, &format!("{path}[{i}]")))
                .collect::<Result<BTreeSet<T>, _>>()?;
            Ok(Slot::OneOf(set))
        }
        other => Ok(Slot::OneOf([one(other, path)?].into())),
    }
}

fn bool_slot(value: &Value, path: &str) -> Result<Slot<bool>, RuleError> {
    value
        .as_bool()
        .map(|b| Slot::OneOf([b].into()))
        .ok_or_else(|| violation(path, "expected a boolean"))
}

fn parse_rule(value: &Value, path: &str) -> Result<CaptureRule, RuleError> {
    let object = value.as_object().ok_or_else(|| violation(path, "expected an object"))?;
    let name = object
        .get("name")
        .and_then(Value::as_str)
        .filter(|n| !n.trim().is_empty())
        .ok_or_else(|| violation(&format!("{path}.name"), "expected a non-empty string"))?;
    let mut rule = CaptureRule::any(name);
    for (key, v) in object {
        let here = format!("{path}.{key}");
        match key.as_str() {
            "name" => {}
            "object_type" => rule.object_type = token_slot(v, &here)?,
            "criticality" => rule.criticality = token_slot(v, &here)?,
            "passivated" => rule.passivated = bool_slot(v, &here)?,
            "regimes" => rule.regimes = token_slot(v, &here)?,
            "grapple_feature" => rule.grapple_feature = bool_slot(v, &here)?,
            "material" => rule.material = token_slot(v, &here)?,
            "clearance" => rule.clearance = token_slot(v, &here)?,
            other => return Err(violation(&here, format!("unknown rule key `{other}`"))),
        }
    }
    Ok(rule)
}

pub fn load_rule_config(bytes: &[u8]) -> Result<RuleConfig, RuleError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| violation("$", e.to_string()))?;
    let top: &Map<String, Value> = doc.as_object().ok_or_else(|| violation("$", "expected an object"))?;
    let mut thresholds = ThresholdConfig::default();
    for key in top.keys() {
        if key != "rules" && key != "thresholds" {
            return Err(violation(&format!("$.{key}"), format!("unknown key `{key}`")));
        }
    }
    let items = top
        .get("rules")
        .ok_or_else(|| violation("$.rules", "missing"))?
        .as_array()
        .ok_or_else(|| violation("$.rules", "expected an array"))?;
    let mut rules = Vec::with_capacity(items.len());
    let mut seen = HashSet::new();
    for (i, item) in items.iter().enumerate() {
        let rule = parse_rule(item, &format!("$.rules[{i}]"))?;
        if !seen.insert(rule.name.clone()) {
            return Err(RuleError::DuplicateRuleName(rule.name));
        }
        rules.push(rule);
    }
    if let Some(overrides) = top.get("thresholds") {
        thresholds.apply_overrides(overrides, "$.thresholds")?;
    }
    Ok(RuleConfig { rules, thresholds })
}

pub fn load_rules(bytes: &[u8]) -> Result<Vec<CaptureRule>, RuleError> {
    load_rule_config(bytes).map(|c| c.rules)
}

fn slot_json<T: RuleToken>(slot: &Slot<T>) -> Option<Value> {
    match slot {
        Slot::Any => None,
        Slot::OneOf(set) => Some(Value::Array(set.iter().map(|v| json!(v.to_token())).collect())),
    }
}

/// A set holding both booleans is written as an omitted key.
fn bool_json(slot: &Slot<bool>) -> Option<Value> {
    match slot {
        Slot::OneOf(set) if set.len() == 1 => set.iter().next().map(|b| json!(b)),
        _ => None,
    }
}

/// Serializes rules in the configuration schema, pretty-printed, keys in
/// schema order.
pub fn rules_to_json(rules: &[CaptureRule]) -> String {
    let items: Vec<Value> = rules
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("name".into(), json!(r.name));
            let object_type = match &r.object_type {
                Slot::OneOf(set) if set.len() == 1 => set.iter().next().map(|t| json!(t.to_token())),
                other => slot_json(other),
            };
            let slots = [
                ("object_type", object_type),
                ("criticality", slot_json(&r.criticality)),
                ("passivated", bool_json(&r.passivated)),
                ("regimes", slot_json(&r.regimes)),
                ("grapple_feature", bool_json(&r.grapple_feature)),
                ("material", slot_json(&r.material)),
                ("clearance", slot_json(&r.clearance)),
            ];
            for (key, value) in slots {
                if let Some(v) = value {
                    m.insert(key.into(), v);
                }
            }
            Value::Object(m)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&json!({ "rules": items })).expect("json");
    text.push('\n');
    text
}
