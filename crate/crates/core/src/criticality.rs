//! FMECA breakup criticality: severity (SN), probability (PN), criticality
//! number (CN = SN·PN) and the derived level.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CosparId, DebrisObject, ObjectType, PropellantClass, ThresholdConfig};

/// The criticality matrix, indexed `[sn - 1][pn - 1]`.
pub const CRITICALITY_MATRIX: [[u8; 4]; 4] = [[1, 2, 3, 4], [2, 4, 6, 8], [3, 6, 9, 12], [4, 8, 12, 16]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalityLevel {
    Low,
    Medium,
    High,
}

impl CriticalityLevel {
    pub const ALL: [CriticalityLevel; 3] = [Self::Low, Self::Medium, Self::High];

    pub fn token(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Medium => "medium",
            Self::High => "high",
        }
    }
}

impl fmt::Display for CriticalityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Low => "Low",
            Self::Medium => "Medium",
            Self::High => "High",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticalityError {
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("no breakup probability available for {0}")]
    MissingProbability(String),
    #[error("cannot compute orbit age for {0}")]
    Age(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalityAssessment {
    pub cospar_id: CosparId,
    /// Breakup probability the PN was derived from.
    pub probability: f64,
    /// Orbit age the SN was derived from, years.
    pub age_years: f64,
    pub sn: u8,
    pub pn: u8,
    pub cn: u8,
    pub level: CriticalityLevel,
    pub rationale: Vec<String>,
}

/// Severity of the worst fragmentation event, with the matched row.
pub fn severity_number(object: &DebrisObject, age_years: f64, cfg: &ThresholdConfig) -> (u8, String) {
    let fresh = cfg.rb_fresh_age_years;
    match object.object_type {
        ObjectType::Payload => {
            let state = if object.passivated {
                "passivated"
            } else {
                "non-passivated"
            };
            (
                2,
                format!("severity: {state} payload, anomalous/electrical-class event -> SN 2"),
            )
        }
        ObjectType::RocketBody if object.passivated => (
            1,
            "severity: passivated rocket body, anomalous event -> SN 1".to_string(),
        ),
        ObjectType::RocketBody if age_years <= fresh => (
            4,
            format!(
                "severity: non-passivated rocket body, orbit age {age_years:.2} y <= {fresh} y, any propellant -> SN 4"
            ),
        ),
        ObjectType::RocketBody => {
            let (sn, row) = match object.propellant {
                PropellantClass::Hypergolic => (3, "hypergolic propulsion event"),
                PropellantClass::Cryogenic => (2, "cryogenic propulsion event"),
                PropellantClass::Petroleum | PropellantClass::Solid => (1, "petroleum/solid propulsion event"),
                PropellantClass::NoPropellant => (cfg.no_propellant_sn, "no propellant on board (configured)"),
                PropellantClass::Hybrid | PropellantClass::Other | PropellantClass::Unknown => (
                    cfg.unlisted_propellant_sn,
                    "propellant not in severity table (configured)",
                ),
            };
            (
                sn,
                format!(
                    "severity: non-passivated rocket body, orbit age {age_years:.2} y > {fresh} y, {} propellant, {row} -> SN {sn}",
                    object.propellant
                ),
            )
        }
    }
}

/// Smallest PN whose inclusive upper bound is at least `p`.
pub fn probability_number(p: f64, cfg: &ThresholdConfig) -> Result<u8, CriticalityError> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(CriticalityError::OutOfRange {
            what: "probability",
            value: p,
        });
    }
    let limit = cfg.pn_limits.iter().find(|l| p <= l.upper).expect("last bound is +inf");
    Ok(limit.pn)
}

fn bracket_text(p: f64, cfg: &ThresholdConfig) -> String {
    let idx = cfg.pn_limits.iter().position(|l| p <= l.upper).unwrap_or(0);
    let upper = cfg.pn_limits[idx].upper;
    let lower = if idx == 0 {
        None
    } else {
        Some(cfg.pn_limits[idx - 1].upper)
    };
    match (lower, upper.is_finite()) {
        (None, _) => format!("p <= {upper:e}"),
        (Some(lo), true) => format!("{lo:e} < p <= {upper:e}"),
        (Some(lo), false) => format!("p > {lo:e}"),
    }
}

pub fn criticality_number(sn: u8, pn: u8) -> Result<u8, CriticalityError> {
    for (what, v) in [("SN", sn), ("PN", pn)] {
        if !(1..=4).contains(&v) {
            return Err(CriticalityError::OutOfRange { what, value: v as f64 });
        }
    }
    Ok(sn * pn)
}

/// High when SN = 4 or CN ≥ 8 (checked first), Medium when CN = 6,
/// Low otherwise.
pub fn criticality_level(sn: u8, cn: u8) -> CriticalityLevel {
    if sn == 4 || cn >= 8 {
        CriticalityLevel::High
    } else if cn == 6 {
        CriticalityLevel::Medium
    } else {
        CriticalityLevel::Low
    }
}

/// Picks the probability for an object: a value carried by the record wins
/// over a survival-curve estimate.
pub fn resolve_probability(
    object: &DebrisObject,
    estimate: Option<f64>,
) -> Result<(f64, Option<String>), CriticalityError> {
    match (object.breakup_probability, estimate) {
        (Some(given), Some(est)) => Ok((
            given,
            Some(format!(
                "probability: record value {given:e} used instead of curve estimate {est:e}"
            )),
        )),
        (Some(given), None) => Ok((given, None)),
        (None, Some(est)) => Ok((est, Some(format!("probability: curve estimate {est:e}")))),
        (None, None) => Err(CriticalityError::MissingProbability(object.cospar_id.to_string())),
    }
}

pub fn assess(
    object: &DebrisObject,
    probability: f64,
    cfg: &ThresholdConfig,
) -> Result<CriticalityAssessment, CriticalityError> {
    let age = object
        .age_at(cfg.window_end)
        .map_err(|_| CriticalityError::Age(object.cospar_id.to_string()))?;
    let (sn, severity_row) = severity_number(object, age, cfg);
    let pn = probability_number(probability, cfg)?;
    let cn = criticality_number(sn, pn)?;
    let level = criticality_level(sn, cn);
    let rationale = vec![
        severity_row,
        format!(
            "probability: p = {probability:e}, {} -> PN {pn}",
            bracket_text(probability, cfg)
        ),
        format!("criticality: CN = {sn} x {pn} = {cn} -> {level}"),
    ];
    Ok(CriticalityAssessment {
        cospar_id: object.cospar_id.clone(),
        probability,
        age_years: age,
        sn,
        pn,
        cn,
        level,
        rationale,
    })
}
