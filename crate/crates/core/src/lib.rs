//! Breakup criticality and active-debris-removal capture-method triage for
//! intact derelict space objects.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`ingest`] reads a structured catalog document and a curated annotation
//!    table and merges them into validated [`catalog::DebrisObject`]s.
//! 2. [`survival`] estimates breakup-free survival with the product-limit
//!    estimator and Greenwood bands.
//! 3. [`criticality`] scores each object with a severity/probability matrix.
//! 4. [`classifier`] maps an uncooperativeness profile to the capture methods
//!    whose rules it satisfies, with a slot-by-slot trace.
//! 5. [`report`] aggregates a run into per-method tables.
//!
//! The estimators are generic over [`Scalar`]; the aliases below name the
//! common instantiations.

pub mod catalog;
pub mod classifier;
pub mod cli;
pub mod criticality;
pub mod ingest;
pub mod report;
pub mod scalar;
pub mod survival;

pub use scalar::Scalar;

use num_rational::BigRational;

pub type SurvivalCurveF64 = survival::SurvivalCurve<f64>;
pub type SurvivalCurveF32 = survival::SurvivalCurve<f32>;
/// Survival curve in exact arbitrary-precision rationals.
pub type ExactSurvivalCurve = survival::SurvivalCurve<BigRational>;
pub type EventRecordF64 = survival::EventRecord<f64>;
pub type EventRecordF32 = survival::EventRecord<f32>;
pub type ExactEventRecord = survival::EventRecord<BigRational>;
