//! Fixture loading shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use debris_triage::catalog::{DebrisObject, ThresholdConfig};
use debris_triage::classifier::{self, default_rules, ClassificationResult};
use debris_triage::criticality::{self, CriticalityAssessment};
use debris_triage::ingest;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Merged objects from catalog pages, annotations and reference values.
pub fn load_objects(pages: &[&str], annotations: &str, reference: &str) -> Vec<DebrisObject> {
    let mut records = Vec::new();
    for page in pages {
        records.extend(
            ingest::parse_structured_document(&read(page))
                .expect("catalog page")
                .records,
        );
    }
    let (notes, _) = ingest::parse_annotations(&read(annotations)).expect("annotations");
    let mut merged = ingest::merge(&records, &notes).expect("merge");
    assert!(merged.unmatched_structured.is_empty() && merged.unmatched_annotations.is_empty());
    let values = ingest::parse_reference(&read(reference)).expect("reference");
    ingest::apply_reference(&mut merged.objects, &values).expect("reference values");
    merged.objects
}

pub fn published_objects() -> Vec<DebrisObject> {
    load_objects(&["catalog.json"], "annotations.csv", "reference.csv")
}

pub fn all_objects() -> Vec<DebrisObject> {
    load_objects(
        &["catalog30_page1.json", "catalog30_page2.json"],
        "annotations30.csv",
        "reference30.csv",
    )
}

pub fn run(objects: &[DebrisObject]) -> (Vec<CriticalityAssessment>, Vec<ClassificationResult>) {
    let cfg = ThresholdConfig::default();
    let rules = default_rules();
    let assessments: Vec<_> = objects
        .iter()
        .map(|o| {
            let (p, _) = criticality::resolve_probability(o, None).expect("record probability");
            criticality::assess(o, p, &cfg).expect("assessment")
        })
        .collect();
    let results = objects
        .iter()
        .zip(&assessments)
        .map(|(o, a)| classifier::classify(&classifier::profile(o, a, &cfg).expect("profile"), &rules))
        .collect();
    (assessments, results)
}
