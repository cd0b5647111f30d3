//! Typed data model for intact derelict objects.
//!
//! Everything that reaches the estimators and the rule engine goes through
//! [`validate_object`], which either yields a fully checked [`DebrisObject`]
//! or the complete list of violations found in the raw field map.

mod config;
mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ConfigError, PnLimit, ThresholdConfig};
pub use store::{decode, encode, load, store, write_atomic, StoreError, FORMAT_HEADER};

/// Length of a Julian year in days.
pub const DAYS_PER_YEAR: f64 = 365.25;

/// Earliest admissible launch year in an international designator.
pub const FIRST_LAUNCH_YEAR: i32 = 1957;

/// International designator, `YYYY-NNNP`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CosparId(String);

impl CosparId {
    pub fn parse(raw: &str) -> Result<Self, ValidationError> {
        let value = raw.trim();
        let malformed = || ValidationError::MalformedId(raw.to_string());
        let bytes = value.as_bytes();
        if bytes.len() < 9 || bytes.len() > 11 || bytes[4] != b'-' {
            return Err(malformed());
        }
        if !bytes[..4].iter().all(u8::is_ascii_digit) || !bytes[5..8].iter().all(u8::is_ascii_digit) {
            return Err(malformed());
        }
        if !bytes[8..].iter().all(u8::is_ascii_uppercase) {
            return Err(malformed());
        }
        let year: i32 = value[..4].parse().map_err(|_| malformed())?;
        let current = chrono::Utc::now().year();
        if !(FIRST_LAUNCH_YEAR..=current).contains(&year) {
            return Err(malformed());
        }
        Ok(Self(value.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn launch_year(&self) -> i32 {
        self.0[..4].parse().expect("validated on construction")
    }
}

impl fmt::Display for CosparId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl FromStr for CosparId {
    type Err = ValidationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for CosparId {
    type Error = ValidationError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<CosparId> for String {
    fn from(id: CosparId) -> Self {
        id.0
    }
}

/// Declares a closed enumeration with a canonical token and accepted aliases.
macro_rules! closed_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $field:literal {
            $($variant:ident => $token:literal $(| $alias:literal)*),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $token)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl FromStr for $name {
            type Err = ValidationError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let key = s.trim().to_ascii_lowercase();
                match key.as_str() {
                    $($token $(| $alias)* => Ok($name::$variant),)+
                    _ => Err(ValidationError::UnknownEnumValue {
                        field: $field.to_string(),
                        value: s.to_string(),
                    }),
                }
            }
        }
    };
}

closed_enum! {
    /// Object type of an intact derelict object.
    ObjectType, "object_type" {
        Payload => "payload" | "pl",
        RocketBody => "rocket_body" | "rb" | "rocket body",
    }
}

impl ObjectType {
    pub fn abbreviation(self) -> &'static str {
        match self {
            ObjectType::Payload => "PL",
            ObjectType::RocketBody => "RB",
        }
    }
}

closed_enum! {
    /// Propellant of the main propulsion system (bus or propulsion unit).
    PropellantClass, "propellant" {
        Cryogenic => "cryogenic",
        Hypergolic => "hypergolic",
        Petroleum => "petroleum",
        Solid => "solid",
        Hybrid => "hybrid",
        NoPropellant => "none" | "no_propellant",
        Other => "other",
        Unknown => "unknown",
    }
}

impl PropellantClass {
    pub fn is_liquid(self) -> bool {
        matches!(self, Self::Cryogenic | Self::Hypergolic | Self::Petroleum)
    }
}

closed_enum! {
    OrbitClass, "orbit_class" {
        Leo => "leo",
        Meo => "meo",
        Geo => "geo",
        Gto => "gto",
        Heo => "heo",
    }
}

impl OrbitClass {
    pub fn abbreviation(self) -> &'static str {
        match self {
            OrbitClass::Leo => "LEO",
            OrbitClass::Meo => "MEO",
            OrbitClass::Geo => "GEO",
            OrbitClass::Gto => "GTO",
            OrbitClass::Heo => "HEO",
        }
    }
}

closed_enum! {
    /// Material class of the capture interface.
    InterfaceMaterial, "interface_material" {
        Isotropic => "isotropic",
        Anisotropic => "anisotropic",
    }
}

closed_enum! {
    /// Tri-state passivation input as found in annotation sources.
    Passivation, "passivated" {
        True => "true" | "yes" | "1",
        False => "false" | "no" | "0",
        Unknown => "unknown" | "" | "n/a",
    }
}

impl Passivation {
    /// Unknown is treated as not passivated.
    pub fn collapse(self) -> bool {
        matches!(self, Passivation::True)
    }
}

/// One cataloged intact object.
///
/// Field order is the persistence key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebrisObject {
    pub cospar_id: CosparId,
    pub name: String,
    pub object_type: ObjectType,
    pub orbit_class: OrbitClass,
    pub launch_epoch: NaiveDate,
    pub reentry_epoch: Option<NaiveDate>,
    pub deactivation_epoch: Option<NaiveDate>,
    pub failure_epoch: Option<NaiveDate>,
    pub failure_kind: Option<String>,
    pub passivated: bool,
    /// Passivation backed by curated documentation rather than a date.
    pub passivation_documented: bool,
    pub propellant: PropellantClass,
    pub platform_name: String,
    pub mass_kg: Option<f64>,
    /// Magnitude of the angular velocity, deg/s.
    pub angular_rate_deg_s: f64,
    pub grapple_feature: bool,
    pub interface_material: InterfaceMaterial,
    /// Area enclosed by a circle centred on the capture interface, m².
    pub interface_clearance_m2: f64,
    /// Orbit age recorded by the data source; takes precedence over the
    /// age computed from the launch epoch.
    pub recorded_age_years: Option<f64>,
    /// Breakup probability supplied with the record.
    pub breakup_probability: Option<f64>,
}

impl DebrisObject {
    /// Orbit age at `epoch`, or the recorded age when one is present.
    pub fn age_at(&self, epoch: NaiveDate) -> Result<f64, CatalogError> {
        match self.recorded_age_years {
            Some(age) => Ok(age),
            None => orbit_age_years(self.launch_epoch, epoch),
        }
    }

    /// All invariant violations of an already-typed object.
    pub fn violations(&self) -> Vec<ValidationError> {
        let mut errors = Vec::new();
        let dated = [
            ("reentry_epoch", self.reentry_epoch),
            ("deactivation_epoch", self.deactivation_epoch),
            ("failure_epoch", self.failure_epoch),
        ];
        for (field, date) in dated {
            if let Some(date) = date {
                if date < self.launch_epoch {
                    errors.push(ValidationError::DateOrderViolation {
                        field: field.to_string(),
                        date,
                        launch: self.launch_epoch,
                    });
                }
            }
        }
        check_non_negative(&mut errors, "angular_rate_deg_s", self.angular_rate_deg_s, true);
        check_positive(&mut errors, "interface_clearance_m2", self.interface_clearance_m2);
        if let Some(mass) = self.mass_kg {
            check_positive(&mut errors, "mass_kg", mass);
        }
        if let Some(age) = self.recorded_age_years {
            check_non_negative(&mut errors, "orbit_age_years", age, true);
        }
        if let Some(p) = self.breakup_probability {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                errors.push(ValidationError::OutOfRange {
                    field: "breakup_probability".to_string(),
                    value: p,
                });
            }
        }
        if self.passivated && self.deactivation_epoch.is_none() && !self.passivation_documented {
            errors.push(ValidationError::UnsupportedPassivation);
        }
        errors
    }
}

fn check_non_negative(errors: &mut Vec<ValidationError>, field: &str, value: f64, zero_ok: bool) {
    if !value.is_finite() {
        errors.push(ValidationError::OutOfRange {
            field: field.to_string(),
            value,
        });
    } else if value < 0.0 || (!zero_ok && value == 0.0) {
        errors.push(ValidationError::NegativeQuantity {
            field: field.to_string(),
            value,
        });
    }
}

fn check_positive(errors: &mut Vec<ValidationError>, field: &str, value: f64) {
    check_non_negative(errors, field, value, false)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("malformed COSPAR id {0:?}")]
    MalformedId(String),
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("`{field}` {date} precedes launch epoch {launch}")]
    DateOrderViolation {
        field: String,
        date: NaiveDate,
        launch: NaiveDate,
    },
    #[error("`{field}` must be positive, got {value}")]
    NegativeQuantity { field: String, value: f64 },
    #[error("`{field}` out of range: {value}")]
    OutOfRange { field: String, value: f64 },
    #[error("unknown value {value:?} for `{field}`")]
    UnknownEnumValue { field: String, value: String },
    #[error("cannot parse {value:?} as `{field}`")]
    UnparsableValue { field: String, value: String },
    #[error("passivated=true without a deactivation epoch or documented passivation")]
    UnsupportedPassivation,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("epoch {epoch} precedes launch epoch {launch}")]
    NegativeAge { launch: NaiveDate, epoch: NaiveDate },
}

/// Untyped record as assembled from input sources.
pub type RawFields = BTreeMap<String, String>;

/// Accepts `YYYY-MM-DD` and, for month-precision sources, `YYYY-MM`.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .or_else(|| NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d").ok())
}

pub fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Years between two calendar dates, in Julian years.
pub fn orbit_age_years(launch_epoch: NaiveDate, epoch: NaiveDate) -> Result<f64, CatalogError> {
    if epoch < launch_epoch {
        return Err(CatalogError::NegativeAge {
            launch: launch_epoch,
            epoch,
        });
    }
    let days = (epoch - launch_epoch).num_days();
    Ok(days as f64 / DAYS_PER_YEAR)
}

struct FieldReader<'a> {
    raw: &'a RawFields,
    errors: Vec<ValidationError>,
}

impl<'a> FieldReader<'a> {
    fn text(&self, key: &str) -> Option<&'a str> {
        self.raw.get(key).map(|v| v.trim()).filter(|v| !v.is_empty())
    }

    fn required<T>(&mut self, key: &str, parse: impl FnOnce(&mut Self, &str) -> Option<T>) -> Option<T> {
        match self.text(key) {
            Some(value) => parse(self, value),
            None => {
                self.errors.push(ValidationError::MissingField(key.to_string()));
                None
            }
        }
    }

    fn optional<T>(&mut self, key: &str, parse: impl FnOnce(&mut Self, &str) -> Option<T>) -> Option<T> {
        self.text(key).and_then(|value| parse(self, value))
    }

    fn enum_value<T: FromStr<Err = ValidationError>>(&mut self, value: &str) -> Option<T> {
        value.parse().map_err(|e| self.errors.push(e)).ok()
    }

    fn date(&mut self, key: &str, value: &str) -> Option<NaiveDate> {
        let parsed = parse_date(value);
        if parsed.is_none() {
            self.unparsable(key, value);
        }
        parsed
    }

    fn real(&mut self, key: &str, value: &str) -> Option<f64> {
        match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.unparsable(key, value);
                None
            }
        }
    }

    fn boolean(&mut self, key: &str, value: &str) -> Option<bool> {
        let parsed = parse_bool(value);
        if parsed.is_none() {
            self.unparsable(key, value);
        }
        parsed
    }

    fn unparsable(&mut self, field: &str, value: &str) {
        self.errors.push(ValidationError::UnparsableValue {
            field: field.to_string(),
            value: value.to_string(),
        });
    }
}

/// Validates a raw field map into a [`DebrisObject`], reporting every
/// violation rather than stopping at the first.
///
/// `passivation_documented` (boolean) marks a passivation flag that comes
/// from curated documentation; without it or a deactivation epoch a
/// `passivated=true` input is rejected.
pub fn validate_object(raw: &RawFields) -> Result<DebrisObject, Vec<ValidationError>> {
    let mut r = FieldReader {
        raw,
        errors: Vec::new(),
    };

    let cospar_id = r.required("cospar_id", |r, v| {
        CosparId::parse(v).map_err(|e| r.errors.push(e)).ok()
    });
    let object_type = r.required("object_type", |r, v| r.enum_value::<ObjectType>(v));
    let launch_epoch = r.required("launch_epoch", |r, v| r.date("launch_epoch", v));
    let orbit_class = r.required("orbit_class", |r, v| r.enum_value::<OrbitClass>(v));
    let reentry_epoch = r.optional("reentry_epoch", |r, v| r.date("reentry_epoch", v));
    let deactivation_epoch = r.optional("deactivation_epoch", |r, v| r.date("deactivation_epoch", v));
    let failure_epoch = r.optional("failure_epoch", |r, v| r.date("failure_epoch", v));
    let failure_kind = r.text("failure_kind").map(str::to_string);
    let passivation = r
        .optional("passivated", |r, v| r.enum_value::<Passivation>(v))
        .unwrap_or(Passivation::Unknown);
    let passivation_documented = r
        .optional("passivation_documented", |r, v| r.boolean("passivation_documented", v))
        .unwrap_or(false);
    let propellant = r
        .optional("propellant", |r, v| r.enum_value::<PropellantClass>(v))
        .unwrap_or(PropellantClass::Unknown);
    let mass_kg = r.optional("mass_kg", |r, v| r.real("mass_kg", v));
    let angular_rate = r.required("angular_rate_deg_s", |r, v| r.real("angular_rate_deg_s", v));
    let grapple = r.required("grapple_feature", |r, v| r.boolean("grapple_feature", v));
    let material = r.required("interface_material", |r, v| r.enum_value::<InterfaceMaterial>(v));
    let clearance = r.required("interface_clearance_m2", |r, v| r.real("interface_clearance_m2", v));
    let recorded_age = r.optional("orbit_age_years", |r, v| r.real("orbit_age_years", v));
    let probability = r.optional("breakup_probability", |r, v| r.real("breakup_probability", v));

    let mut errors = r.errors;
    let (
        Some(cospar_id),
        Some(object_type),
        Some(launch_epoch),
        Some(orbit_class),
        Some(angular_rate_deg_s),
        Some(grapple_feature),
        Some(interface_material),
        Some(interface_clearance_m2),
    ) = (
        cospar_id,
        object_type,
        launch_epoch,
        orbit_class,
        angular_rate,
        grapple,
        material,
        clearance,
    )
    else {
        return Err(errors);
    };

    let object = DebrisObject {
        cospar_id,
        name: raw.get("name").map(|s| s.trim().to_string()).unwrap_or_default(),
        object_type,
        orbit_class,
        launch_epoch,
        reentry_epoch,
        deactivation_epoch,
        failure_epoch,
        failure_kind,
        passivated: passivation.collapse(),
        passivation_documented,
        propellant,
        platform_name: raw
            .get("platform_name")
            .map(|s| s.trim().to_string())
            .unwrap_or_default(),
        mass_kg,
        angular_rate_deg_s,
        grapple_feature,
        interface_material,
        interface_clearance_m2,
        recorded_age_years: recorded_age,
        breakup_probability: probability,
    };
    errors.extend(object.violations());
    if errors.is_empty() {
        Ok(object)
    } else {
        Err(errors)
    }
}
