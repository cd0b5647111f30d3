//! Product-limit survival estimation over right-censored breakup histories.
//!
//! [`build_cohort`] reduces raw per-object histories to exactly one
//! [`EventRecord`] per subject for a chosen set of breakup classes;
//! [`kaplan_meier`] turns those into a [`SurvivalCurve`], and
//! [`greenwood_ci`] attaches pointwise confidence bands. The estimator is
//! generic over [`Scalar`], so the same code runs on floats and on exact
//! rationals.

mod quantile;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{orbit_age_years, CosparId, DebrisObject};
use crate::scalar::Scalar;

pub use quantile::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakupClass {
    Propulsion,
    Anomalous,
    Electrical,
    Collision,
    Unknown,
}

impl BreakupClass {
    pub const ALL: [BreakupClass; 5] = [
        BreakupClass::Propulsion,
        BreakupClass::Anomalous,
        BreakupClass::Electrical,
        BreakupClass::Collision,
        BreakupClass::Unknown,
    ];

    pub fn token(self) -> &'static str {
        match self {
            BreakupClass::Propulsion => "propulsion",
            BreakupClass::Anomalous => "anomalous",
            BreakupClass::Electrical => "electrical",
            BreakupClass::Collision => "collision",
            BreakupClass::Unknown => "unknown",
        }
    }
}

impl FromStr for BreakupClass {
    type Err = SurvivalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.token() == key)
            .ok_or_else(|| SurvivalError::UnknownEventKind(s.to_string()))
    }
}

impl fmt::Display for BreakupClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorCause {
    Reentered,
    WindowEnd,
    UnknownReentry,
    OtherBreakup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Breakup(BreakupClass),
    Censored(CensorCause),
}

impl EventKind {
    pub fn is_event(self) -> bool {
        matches!(self, EventKind::Breakup(_))
    }
}

/// Orbit age of a subject at its first qualifying event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord<T = f64> {
    pub subject_id: CosparId,
    pub time_years: T,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalStep<T = f64> {
    pub time_years: T,
    pub survival: T,
    pub ci_low: T,
    pub ci_high: T,
    pub at_risk: usize,
    pub events: usize,
}

/// Right-continuous step function, one step per distinct breakup time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve<T = f64> {
    pub steps: Vec<SurvivalStep<T>>,
    pub n_subjects: usize,
}

impl<T: Scalar> SurvivalCurve<T> {
    /// `S(t)`: survival of the last step at or before `t`, 1 before the first.
    pub fn survival_at(&self, t: &T) -> T {
        let idx = self.steps.partition_point(|s| s.time_years <= *t);
        match idx {
            0 => T::one(),
            i => self.steps[i - 1].survival.clone(),
        }
    }

    /// `(S(t), ci_low(t), ci_high(t))`; `(1, 1, 1)` before the first step.
    pub fn band_at(&self, t: &T) -> (T, T, T) {
        let idx = self.steps.partition_point(|s| s.time_years <= *t);
        match idx {
            0 => (T::one(), T::one(), T::one()),
            i => {
                let s = &self.steps[i - 1];
                (s.survival.clone(), s.ci_low.clone(), s.ci_high.clone())
            }
        }
    }
}

/// Breakup probability `1 − S(age)`.
pub fn breakup_probability<T: Scalar>(curve: &SurvivalCurve<T>, age_years: &T) -> T {
    T::one() - curve.survival_at(age_years)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurvivalError {
    #[error("no records")]
    EmptyInput,
    #[error("event references unknown subject {0}")]
    UnknownSubject(String),
    #[error("event for {0} lies after the observation window")]
    EventAfterWindow(String),
    #[error("subject {0} has more than one record")]
    DuplicateSubject(String),
    #[error("invalid event time for {0}")]
    InvalidTime(String),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("unknown event kind {0:?}")]
    UnknownEventKind(String),
}

/// Raw history entry for one object.
#[derive(Debug, Clone, PartialEq)]
pub enum RawEvent {
    Breakup {
        subject: CosparId,
        epoch: NaiveDate,
        class: BreakupClass,
    },
    Reentry {
        subject: CosparId,
        epoch: NaiveDate,
    },
    /// The object reentered but the date is not known.
    ReentryUnknown {
        subject: CosparId,
    },
}

impl RawEvent {
    pub fn subject(&self) -> &CosparId {
        match self {
            RawEvent::Breakup { subject, .. }
            | RawEvent::Reentry { subject, .. }
            | RawEvent::ReentryUnknown { subject } => subject,
        }
    }
}

/// Candidate terminations; derived `Ord` breaks date ties in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Termination {
    TargetBreakup(BreakupClass),
    OtherBreakup,
    Reentered,
    UnknownReentry,
    WindowEnd,
}

/// One record per object: the earliest of target breakup, other breakup
/// (censoring), reentry (censoring) and window end. Objects known to have
/// reentered on an unknown date censor at window end with their own cause.
/// Reentries recorded past the window censor at window end.
pub fn build_cohort(
    objects: &[DebrisObject],
    events: &[RawEvent],
    target_classes: &BTreeSet<BreakupClass>,
    window_end: NaiveDate,
) -> Result<Vec<EventRecord<f64>>, SurvivalError> {
    let mut index: BTreeMap<&CosparId, &DebrisObject> = BTreeMap::new();
    for object in objects {
        if index.insert(&object.cospar_id, object).is_some() {
            return Err(SurvivalError::DuplicateSubject(object.cospar_id.to_string()));
        }
    }
    let mut candidates: BTreeMap<&CosparId, Vec<(NaiveDate, Termination)>> = BTreeMap::new();
    for (id, object) in &index {
        if object.launch_epoch > window_end {
            return Err(SurvivalError::EventAfterWindow(id.to_string()));
        }
        let mut own = vec![(window_end, Termination::WindowEnd)];
        if let Some(reentry) = object.reentry_epoch {
            if reentry <= window_end {
                own.push((reentry, Termination::Reentered));
            }
        }
        candidates.insert(id, own);
    }
    for event in events {
        let subject = event.subject();
        let slot = candidates
            .get_mut(subject)
            .ok_or_else(|| SurvivalError::UnknownSubject(subject.to_string()))?;
        let entry = match *event {
            RawEvent::Breakup { epoch, class, .. } => {
                if epoch > window_end {
                    return Err(SurvivalError::EventAfterWindow(subject.to_string()));
                }
                if target_classes.contains(&class) {
                    (epoch, Termination::TargetBreakup(class))
                } else {
                    (epoch, Termination::OtherBreakup)
                }
            }
            RawEvent::Reentry { epoch, .. } if epoch <= window_end => (epoch, Termination::Reentered),
            RawEvent::Reentry { .. } => (window_end, Termination::WindowEnd),
            RawEvent::ReentryUnknown { .. } => (window_end, Termination::UnknownReentry),
        };
        slot.push(entry);
    }

    candidates
        .into_iter()
        .map(|(id, options)| {
            let object = index[id];
            let (epoch, termination) = options.into_iter().min().expect("window end always present");
            let time_years =
                orbit_age_years(object.launch_epoch, epoch).map_err(|_| SurvivalError::InvalidTime(id.to_string()))?;
            let kind = match termination {
                Termination::TargetBreakup(class) => EventKind::Breakup(class),
                Termination::OtherBreakup => EventKind::Censored(CensorCause::OtherBreakup),
                Termination::Reentered => EventKind::Censored(CensorCause::Reentered),
                Termination::UnknownReentry => EventKind::Censored(CensorCause::UnknownReentry),
                Termination::WindowEnd => EventKind::Censored(CensorCause::WindowEnd),
            };
            Ok(EventRecord {
                subject_id: id.clone(),
                time_years,
                kind,
            })
        })
        .collect()
}

/// Product-limit estimate `S(t) = Π (1 − dᵢ/nᵢ)` over distinct breakup
/// times. Subjects censored at a breakup time are still at risk there.
/// Confidence bands are initialised to the point estimate.
pub fn kaplan_meier<T: Scalar>(records: &[EventRecord<T>]) -> Result<SurvivalCurve<T>, SurvivalError> {
    if records.is_empty() {
        return Err(SurvivalError::EmptyInput);
    }
    let mut seen = HashSet::with_capacity(records.len());
    for record in records {
        if !seen.insert(&record.subject_id) {
            return Err(SurvivalError::DuplicateSubject(record.subject_id.to_string()));
        }
        // Rejects NaN as well as negative times.
        if record.time_years.partial_cmp(&T::zero()).is_none_or(|o| o.is_lt()) {
            return Err(SurvivalError::InvalidTime(record.subject_id.to_string()));
        }
    }

    let mut order: Vec<&EventRecord<T>> = records.iter().collect();
    order.sort_by(|a, b| a.time_years.partial_cmp(&b.time_years).expect("times are ordered"));

    let mut steps = Vec::new();
    let mut survival = T::one();
    let mut remaining = records.len();
    let mut i = 0;
    while i < order.len() {
        let time = &order[i].time_years;
        let tied = order[i..].iter().take_while(|r| r.time_years == *time).count();
        let events = order[i..i + tied].iter().filter(|r| r.kind.is_event()).count();
        if events > 0 {
            let at_risk = T::from_count(remaining);
            let factor = (at_risk.clone() - T::from_count(events)) / at_risk;
            survival = survival * factor;
            steps.push(SurvivalStep {
                time_years: time.clone(),
                survival: survival.clone(),
                ci_low: survival.clone(),
                ci_high: survival.clone(),
                at_risk: remaining,
                events,
            });
        }
        remaining -= tied;
        i += tied;
    }
    Ok(SurvivalCurve {
        steps,
        n_subjects: records.len(),
    })
}

/// Confidence-band construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMethod {
    /// `S ± z·√Var`, clamped to `[0, 1]`.
    #[default]
    Linear,
    /// Exponential Greenwood (complementary log-log) bands.
    LogLog,
}

impl FromStr for CiMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "plain" => Ok(CiMethod::Linear),
            "loglog" | "log-log" => Ok(CiMethod::LogLog),
            other => Err(format!("unknown CI method {other:?}")),
        }
    }
}

/// Greenwood sum `Σ dᵢ/(nᵢ(nᵢ − dᵢ))` along the curve; `None` once a step
/// exhausts its risk set.
fn greenwood_sums<T: Float + Scalar>(curve: &SurvivalCurve<T>) -> Vec<Option<T>> {
    let mut acc = Some(T::zero());
    curve
        .steps
        .iter()
        .map(|step| {
            acc = match acc {
                Some(sum) if step.at_risk > step.events => {
                    let n = T::from_count(step.at_risk);
                    let d = T::from_count(step.events);
                    Some(sum + d / (n * (n - d)))
                }
                _ => None,
            };
            acc
        })
        .collect()
}

/// Greenwood variance `S(t)² · Σ dᵢ/(nᵢ(nᵢ − dᵢ))` at each step; `None`
/// where it is unbounded.
pub fn greenwood_variance<T: Float + Scalar>(curve: &SurvivalCurve<T>) -> Vec<Option<T>> {
    curve
        .steps
        .iter()
        .zip(greenwood_sums(curve))
        .map(|(step, sum)| sum.map(|s| step.survival * step.survival * s))
        .collect()
}

/// Attaches `1 − alpha` pointwise bands. Once a step has `nᵢ = dᵢ` the
/// estimate is 0 and the band collapses to `[0, S] = [0, 0]`.
pub fn greenwood_ci<T: Float + Scalar>(
    curve: &SurvivalCurve<T>,
    alpha: f64,
    method: CiMethod,
) -> Result<SurvivalCurve<T>, SurvivalError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SurvivalError::InvalidAlpha(alpha));
    }
    let z = <T as num_traits::NumCast>::from(normal_quantile(1.0 - alpha / 2.0)).expect("quantile representable");
    let zero = T::zero();
    let one = T::one();
    let steps = curve
        .steps
        .iter()
        .zip(greenwood_sums(curve))
        .map(|(step, sum)| {
            let s = step.survival;
            let (low, high) = match sum {
                None => (zero, s),
                Some(sum) => match method {
                    CiMethod::Linear => {
                        let half = z * (s * s * sum).sqrt();
                        ((s - half).max(zero), (s + half).min(one))
                    }
                    CiMethod::LogLog => {
                        if s >= one || s <= zero {
                            (s, s)
                        } else {
                            let ln_s = s.ln();
                            let c = z * (sum / (ln_s * ln_s)).sqrt();
                            (s.powf(c.exp()), s.powf((-c).exp()))
                        }
                    }
                },
            };
            SurvivalStep {
                ci_low: low,
                ci_high: high,
                ..step.clone()
            }
        })
        .collect();
    Ok(SurvivalCurve {
        steps,
        n_subjects: curve.n_subjects,
    })
}

/// Step function as CSV: `time_years,survival,ci_low,ci_high,at_risk,events`.
pub fn curve_to_csv(curve: &SurvivalCurve<f64>) -> String {
    let mut out = String::from("time_years,survival,ci_low,ci_high,at_risk,events\n");
    for s in &curve.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.time_years, s.survival, s.ci_low, s.ci_high, s.at_risk, s.events
        ));
    }
    out
}

/// Reads a curve written by [`curve_to_csv`].
pub fn curve_from_csv(text: &str) -> Result<SurvivalCurve<f64>, String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let expected = ["time_years", "survival", "ci_low", "ci_high", "at_risk", "events"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(format!(
            "unexpected curve header {:?}",
            headers.iter().collect::<Vec<_>>()
        ));
    }
    let mut steps: Vec<SurvivalStep<f64>> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let line = i + 2;
        let real = |k: usize| {
            row[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("line {line}: bad number"))
        };
        let count = |k: usize| {
            row[k]
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("line {line}: bad count"))
        };
        let step = SurvivalStep {
            time_years: real(0)?,
            survival: real(1)?,
            ci_low: real(2)?,
            ci_high: real(3)?,
            at_risk: count(4)?,
            events: count(5)?,
        };
        if let Some(prev) = steps.last() {
            if step.time_years <= prev.time_years || step.survival > prev.survival {
                return Err(format!("line {line}: curve is not a non-increasing step function"));
            }
        }
        if !(0.0..=1.0).contains(&step.survival) {
            return Err(format!("line {line}: survival outside [0, 1]"));
        }
        steps.push(step);
    }
    let n_subjects = steps.first().map(|s| s.at_risk).unwrap_or(0);
    Ok(SurvivalCurve { steps, n_subjects })
}

/// Parses a raw event table `cospar_id,epoch,kind` where `kind` is a
/// breakup class, `reentry`, or `reentry_unknown` (empty epoch).
pub fn parse_events(text: &str) -> Result<Vec<RawEvent>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column {name:?}"))
    };
    let (id_col, epoch_col, kind_col) = (column("cospar_id")?, column("epoch")?, column("kind")?);
    let mut events = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let line = i + 2;
        let subject = CosparId::parse(&row[id_col]).map_err(|e| format!("line {line}: {e}"))?;
        let epoch = || crate::catalog::parse_date(&row[epoch_col]).ok_or_else(|| format!("line {line}: bad epoch"));
        let kind = row[kind_col].to_ascii_lowercase();
        let event = match kind.as_str() {
            "reentry" => RawEvent::Reentry {
                subject,
                epoch: epoch()?,
            },
            "reentry_unknown" => RawEvent::ReentryUnknown { subject },
            other => {
                let class = other.parse().map_err(|e: SurvivalError| format!("line {line}: {e}"))?;
                RawEvent::Breakup {
                    subject,
                    epoch: epoch()?,
                    class,
                }
            }
        };
        events.push(event);
    }
    Ok(events)
}
