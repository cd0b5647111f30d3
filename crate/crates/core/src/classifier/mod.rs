//! Capture-method inference.
//!
//! An object is projected onto an [`UncooperativenessProfile`] (a closed
//! value for each of seven features) and every [`CaptureRule`] is evaluated
//! slot by slot. A rule matches when every slot accepts the profile value;
//! several rules may match, or none.

mod rules;

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CosparId, DebrisObject, InterfaceMaterial, ObjectType, ThresholdConfig};
use crate::criticality::{CriticalityAssessment, CriticalityLevel};

pub use rules::{
    default_rules, load_rule_config, load_rules, rules_to_json, RuleConfig, RuleError, DEFAULT_RULES_JSON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeRegime {
    Stable,
    SlowTumbling,
    MediumTumbling,
    FastTumbling,
}

impl AttitudeRegime {
    pub const ALL: [AttitudeRegime; 4] = [
        Self::Stable,
        Self::SlowTumbling,
        Self::MediumTumbling,
        Self::FastTumbling,
    ];

    /// Token used in rule configuration.
    pub fn token(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::SlowTumbling => "slow",
            Self::MediumTumbling => "medium",
            Self::FastTumbling => "fast",
        }
    }
}

impl fmt::Display for AttitudeRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stable => "Stable",
            Self::SlowTumbling => "Slow_Tumbling",
            Self::MediumTumbling => "Medium_Tumbling",
            Self::FastTumbling => "Fast_Tumbling",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceClass {
    Narrow,
    Broad,
}

impl ClearanceClass {
    pub const ALL: [ClearanceClass; 2] = [Self::Narrow, Self::Broad];

    pub fn token(self) -> &'static str {
        match self {
            Self::Narrow => "narrow",
            Self::Broad => "broad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },
}

pub fn attitude_regime(omega_deg_s: f64, cfg: &ThresholdConfig) -> Result<AttitudeRegime, ClassifierError> {
    if !omega_deg_s.is_finite() || omega_deg_s < 0.0 {
        return Err(ClassifierError::OutOfRange {
            what: "angular rate",
            value: omega_deg_s,
        });
    }
    Ok(if omega_deg_s == 0.0 {
        AttitudeRegime::Stable
    } else if omega_deg_s < cfg.slow_max_deg_s {
        AttitudeRegime::SlowTumbling
    } else if omega_deg_s < cfg.medium_max_deg_s {
        AttitudeRegime::MediumTumbling
    } else {
        AttitudeRegime::FastTumbling
    })
}

/// Broad is inclusive at the threshold.
pub fn clearance_class(area_m2: f64, cfg: &ThresholdConfig) -> Result<ClearanceClass, ClassifierError> {
    if !area_m2.is_finite() || area_m2 <= 0.0 {
        return Err(ClassifierError::OutOfRange {
            what: "clearance area",
            value: area_m2,
        });
    }
    Ok(if area_m2 < cfg.clearance_broad_min_m2 {
        ClearanceClass::Narrow
    } else {
        ClearanceClass::Broad
    })
}

/// Feature values the rule engine sees for one object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UncooperativenessProfile {
    pub cospar_id: CosparId,
    pub object_type: ObjectType,
    pub criticality: CriticalityLevel,
    pub passivated: bool,
    pub regime: AttitudeRegime,
    pub grapple_feature: bool,
    pub material: InterfaceMaterial,
    pub clearance: ClearanceClass,
}

pub fn profile(
    object: &DebrisObject,
    assessment: &CriticalityAssessment,
    cfg: &ThresholdConfig,
) -> Result<UncooperativenessProfile, ClassifierError> {
    Ok(UncooperativenessProfile {
        cospar_id: object.cospar_id.clone(),
        object_type: object.object_type,
        criticality: assessment.level,
        passivated: object.passivated,
        regime: attitude_regime(object.angular_rate_deg_s, cfg)?,
        grapple_feature: object.grapple_feature,
        material: object.interface_material,
        clearance: clearance_class(object.interface_clearance_m2, cfg)?,
    })
}

/// Human-readable label of a slot value.
pub trait SlotValue: Copy + Ord + fmt::Debug {
    fn label(&self) -> String;
}

impl SlotValue for ObjectType {
    fn label(&self) -> String {
        self.abbreviation().to_string()
    }
}

impl SlotValue for CriticalityLevel {
    fn label(&self) -> String {
        self.to_string()
    }
}

impl SlotValue for bool {
    fn label(&self) -> String {
        if *self { "True" } else { "False" }.to_string()
    }
}

impl SlotValue for AttitudeRegime {
    fn label(&self) -> String {
        self.to_string()
    }
}

impl SlotValue for InterfaceMaterial {
    fn label(&self) -> String {
        match self {
            InterfaceMaterial::Isotropic => "Isotropic",
            InterfaceMaterial::Anisotropic => "Anisotropic",
        }
        .to_string()
    }
}

impl SlotValue for ClearanceClass {
    fn label(&self) -> String {
        match self {
            ClearanceClass::Narrow => "Narrow",
            ClearanceClass::Broad => "Broad",
        }
        .to_string()
    }
}

/// Acceptance set of one rule slot. `OneOf` sets are never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot<T: Ord> {
    Any,
    OneOf(BTreeSet<T>),
}

impl<T: SlotValue> Slot<T> {
    pub fn of(values: impl IntoIterator<Item = T>) -> Self {
        let set: BTreeSet<T> = values.into_iter().collect();
        assert!(!set.is_empty(), "slot sets must not be empty");
        Slot::OneOf(set)
    }

    pub fn accepts(&self, value: &T) -> bool {
        match self {
            Slot::Any => true,
            Slot::OneOf(set) => set.contains(value),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Slot::Any => "Any".to_string(),
            Slot::OneOf(set) if set.len() == 1 => set.iter().next().expect("non-empty").label(),
            Slot::OneOf(set) => {
                let items: Vec<String> = set.iter().map(SlotValue::label).collect();
                format!("{{{}}}", items.join(", "))
            }
        }
    }
}

/// One conjunctive axiom over the profile features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRule {
    pub name: String,
    pub object_type: Slot<ObjectType>,
    pub criticality: Slot<CriticalityLevel>,
    pub passivated: Slot<bool>,
    pub regimes: Slot<AttitudeRegime>,
    pub grapple_feature: Slot<bool>,
    pub material: Slot<InterfaceMaterial>,
    pub clearance: Slot<ClearanceClass>,
}

impl CaptureRule {
    /// A rule accepting every profile.
    pub fn any(name: &str) -> Self {
        Self {
            name: name.to_string(),
            object_type: Slot::Any,
            criticality: Slot::Any,
            passivated: Slot::Any,
            regimes: Slot::Any,
            grapple_feature: Slot::Any,
            material: Slot::Any,
            clearance: Slot::Any,
        }
    }

    pub fn trace(&self, p: &UncooperativenessProfile) -> RuleTrace {
        fn slot<T: SlotValue>(name: &'static str, required: &Slot<T>, actual: T) -> SlotTrace {
            SlotTrace {
                slot: name,
                required: required.label(),
                actual: actual.label(),
                satisfied: required.accepts(&actual),
            }
        }
        let slots = vec![
            slot("object_type", &self.object_type, p.object_type),
            slot("criticality", &self.criticality, p.criticality),
            slot("passivated", &self.passivated, p.passivated),
            slot("regime", &self.regimes, p.regime),
            slot("grapple_feature", &self.grapple_feature, p.grapple_feature),
            slot("material", &self.material, p.material),
            slot("clearance", &self.clearance, p.clearance),
        ];
        RuleTrace {
            rule: self.name.clone(),
            matched: slots.iter().all(|s| s.satisfied),
            slots,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotTrace {
    pub slot: &'static str,
    pub required: String,
    pub actual: String,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleTrace {
    pub rule: String,
    pub matched: bool,
    pub slots: Vec<SlotTrace>,
}

impl RuleTrace {
    pub fn violations(&self) -> impl Iterator<Item = &SlotTrace> {
        self.slots.iter().filter(|s| !s.satisfied)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationResult {
    pub cospar_id: CosparId,
    pub matched: BTreeSet<String>,
    /// Sorted by rule name.
    pub traces: Vec<RuleTrace>,
}

impl ClassificationResult {
    pub fn is_unclassified(&self) -> bool {
        self.matched.is_empty()
    }
}

pub fn classify(p: &UncooperativenessProfile, rules: &[CaptureRule]) -> ClassificationResult {
    let mut traces: Vec<RuleTrace> = rules.iter().map(|r| r.trace(p)).collect();
    traces.sort_by(|a, b| a.rule.cmp(&b.rule));
    let matched = traces.iter().filter(|t| t.matched).map(|t| t.rule.clone()).collect();
    ClassificationResult {
        cospar_id: p.cospar_id.clone(),
        matched,
        traces,
    }
}

/// Deterministic explanation: matched rules first, then rejected ones, each
/// group in name order.
pub fn explain(result: &ClassificationResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "capture-method classification for {}", result.cospar_id);
    if result.is_unclassified() {
        let _ = writeln!(out, "summary: no rule matched (unclassified)");
    } else {
        let names: Vec<&str> = result.matched.iter().map(String::as_str).collect();
        let _ = writeln!(out, "summary: {} rule(s) matched: {}", names.len(), names.join(", "));
    }
    let matched = result.traces.iter().filter(|t| t.matched);
    let rejected = result.traces.iter().filter(|t| !t.matched);
    for trace in matched.chain(rejected) {
        out.push('\n');
        let header = if trace.matched { "MATCHED" } else { "REJECTED" };
        let _ = writeln!(out, "{header} {}", trace.rule);
        for s in &trace.slots {
            if s.satisfied {
                let _ = writeln!(out, "  ok       {:<16} {} (required {})", s.slot, s.actual, s.required);
            } else {
                let _ = writeln!(
                    out,
                    "  violated {:<16} required {}, found {}",
                    s.slot, s.required, s.actual
                );
            }
        }
    }
    out
}
