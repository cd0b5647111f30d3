//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::cell::Cell;
use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use debris_triage::catalog::{CosparId, DebrisObject, InterfaceMaterial, ObjectType, PropellantClass, ThresholdConfig};
use debris_triage::classifier::{
    attitude_regime, classify, clearance_class, default_rules, AttitudeRegime, ClearanceClass, UncooperativenessProfile,
};
use debris_triage::criticality::{
    criticality_level, criticality_number, probability_number, severity_number, CriticalityLevel,
};
use debris_triage::report::{median, summarize, DEFAULT_HI_PCT, DEFAULT_LO_PCT};
use debris_triage::survival::{
    greenwood_ci, greenwood_variance, kaplan_meier, CensorCause, CiMethod, EventKind, EventRecord,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Criticality matrix as published, indexed `[sn - 1][pn - 1]`.
const PUBLISHED_MATRIX: [[u8; 4]; 4] = [[1, 2, 3, 4], [2, 4, 6, 8], [3, 6, 9, 12], [4, 8, 12, 16]];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut levels = Vec::with_capacity(16);
    for sn in 1..=4u8 {
        for pn in 1..=4u8 {
            let cn = criticality_number(sn, pn).map_err(|e| e.to_string())?;
            ensure(cn == PUBLISHED_MATRIX[sn as usize - 1][pn as usize - 1], || {
                format!("CN({sn},{pn}) = {cn}")
            })?;
            levels.push((sn, cn, criticality_level(sn, cn)));
        }
    }
    let elapsed = start.elapsed();
    for (sn, cn, level) in levels {
        let high = sn == 4 || cn >= 8;
        let medium = !high && cn == 6;
        let low = !high && !medium;
        let flags = [high, medium, low];
        ensure(flags.iter().filter(|f| **f).count() == 1, || {
            format!("levels overlap at SN {sn}, CN {cn}")
        })?;
        let expected = if high {
            CriticalityLevel::High
        } else if medium {
            CriticalityLevel::Medium
        } else {
            CriticalityLevel::Low
        };
        ensure(level == expected, || {
            format!("level({sn},{cn}) = {level}, expected {expected}")
        })?;
    }
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("16 cells and levels match ({elapsed:?})"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let objects = common::published_objects();
    let (_, results) = common::run(&objects);
    let elapsed = start.elapsed();
    let expected: [(&str, &[&str]); 10] = [
        ("1978-018B", &["Electromagnetic_Based"]),
        ("1978-121A", &["Net_Based"]),
        ("1989-001B", &["Plume_Impingement"]),
        ("1990-005H", &["Manipulator_Based", "Net_Based"]),
        ("1990-045A", &["Plume_Impingement"]),
        ("1991-084C", &["Net_Based"]),
        ("1992-052A", &["Ablation_Based", "Plume_Impingement"]),
        ("1993-061A", &["Net_Based"]),
        ("1994-021A", &["Net_Based"]),
        ("1994-021B", &["Net_Based"]),
    ];
    ensure(results.len() == expected.len(), || format!("{} results", results.len()))?;
    for (id, names) in expected {
        let r = results
            .iter()
            .find(|r| r.cospar_id.as_str() == id)
            .ok_or_else(|| format!("{id} missing"))?;
        let want: BTreeSet<String> = names.iter().map(|s| s.to_string()).collect();
        ensure(r.matched == want, || format!("{id}: {:?} != {want:?}", r.matched))?;
    }
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("10 matched sets exact ({elapsed:?})"))
}

fn criterion_3() -> Outcome {
    let objects = common::published_objects();
    let (assessments, results) = common::run(&objects);
    let cfg = ThresholdConfig::default();
    let summary =
        summarize(&results, &assessments, &objects, &cfg, DEFAULT_LO_PCT, DEFAULT_HI_PCT).map_err(|e| e.to_string())?;
    // (class, count, CN, PN, SN, rate, age) from the published results table.
    let rows: [(&str, usize, f64, f64, f64, f64, f64); 3] = [
        ("Plume_Impingement", 3, 6.0, 3.0, 2.0, 38.88, 29.71),
        ("Electromagnetic_Based", 1, 3.0, 3.0, 1.0, 67.8, 41.96),
        ("Ablation_Based", 1, 6.0, 3.0, 2.0, 32.1, 27.48),
    ];
    for (class, count, cn, pn, sn, rate, age) in rows {
        let row = summary
            .classes
            .iter()
            .find(|r| r.class == class)
            .ok_or_else(|| format!("{class} missing"))?;
        let got = (
            row.count,
            row.median_cn,
            row.median_pn,
            row.median_sn,
            row.median_rate_deg_s,
            row.median_age_years,
        );
        let want = (count, Some(cn), Some(pn), Some(sn), Some(rate), Some(age));
        ensure(got == want, || format!("{class}: {got:?} != {want:?}"))?;
    }

    let rules = default_rules();
    let profiles = (
        any::<bool>(),
        prop::sample::select(vec![
            AttitudeRegime::Stable,
            AttitudeRegime::SlowTumbling,
            AttitudeRegime::MediumTumbling,
        ]),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    );
    let mut runner = runner(500);
    runner
        .run(&profiles, |(rb, regime, passivated, anisotropic, narrow)| {
            let p = UncooperativenessProfile {
                cospar_id: CosparId::parse("2000-001A").unwrap(),
                object_type: if rb {
                    ObjectType::RocketBody
                } else {
                    ObjectType::Payload
                },
                criticality: CriticalityLevel::Low,
                passivated,
                regime,
                grapple_feature: true,
                material: if anisotropic {
                    InterfaceMaterial::Anisotropic
                } else {
                    InterfaceMaterial::Isotropic
                },
                clearance: if narrow {
                    ClearanceClass::Narrow
                } else {
                    ClearanceClass::Broad
                },
            };
            let r = classify(&p, &rules);
            prop_assert!(
                r.matched.contains("Manipulator_Based") && r.matched.contains("Net_Based"),
                "{:?}",
                p
            );
            Ok(())
        })
        .map_err(|e| format!("subsumption: {e}"))?;
    Ok("Plume, Electromagnetic and Ablation rows exact; subsumption holds over 500 profiles".into())
}

/// Fixed-seed runner so every run draws the same cases.
fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn subject(i: usize) -> CosparId {
    CosparId::parse(&format!("2000-{:03}A", i + 1)).unwrap()
}

fn kind(event: bool) -> EventKind {
    if event {
        EventKind::Breakup(debris_triage::survival::BreakupClass::Propulsion)
    } else {
        EventKind::Censored(CensorCause::WindowEnd)
    }
}

/// Product-limit estimate recomputed from scratch at each distinct event
/// time: `Π_{u ≤ t} (1 − d(u)/n(u))` with `n(u) = #{time ≥ u}`.
fn oracle(cohort: &[(u32, bool)]) -> Vec<(BigRational, BigRational, usize, usize)> {
    let half = |t: u32| BigRational::new(BigInt::from(t), BigInt::from(2));
    let times: BTreeSet<u32> = cohort.iter().filter(|(_, e)| *e).map(|(t, _)| *t).collect();
    times
        .iter()
        .map(|&t| {
            let mut s = BigRational::one();
            for &u in times.iter().filter(|&&u| u <= t) {
                let n = cohort.iter().filter(|(x, _)| *x >= u).count();
                let d = cohort.iter().filter(|(x, e)| *e && *x == u).count();
                s *= BigRational::one() - BigRational::new(BigInt::from(d), BigInt::from(n));
            }
            let n = cohort.iter().filter(|(x, _)| *x >= t).count();
            let d = cohort.iter().filter(|(x, e)| *e && *x == t).count();
            (half(t), s, n, d)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cohorts = (prop::collection::vec((1u32..=8, any::<bool>()), 1..=12), 0u8..4).prop_map(|(mut c, mode)| {
        if mode == 0 {
            c.iter_mut().for_each(|s| s.1 = true);
        }
        c
    });
    let mut runner = runner(200);
    let uncensored = Cell::new(0usize);
    let cases = Cell::new(0usize);
    runner
        .run(&cohorts, |cohort| {
            cases.set(cases.get() + 1);
            let records: Vec<EventRecord<f64>> = cohort
                .iter()
                .enumerate()
                .map(|(i, &(t, e))| EventRecord {
                    subject_id: subject(i),
                    time_years: t as f64 / 2.0,
                    kind: kind(e),
                })
                .collect();
            let curve = kaplan_meier(&records).unwrap();
            let expected = oracle(&cohort);
            prop_assert_eq!(curve.steps.len(), expected.len());
            for (step, (t, s, n, d)) in curve.steps.iter().zip(&expected) {
                prop_assert_eq!(step.time_years, t.to_f64().unwrap());
                prop_assert!((step.survival - s.to_f64().unwrap()).abs() <= 1e-12);
                prop_assert_eq!((step.at_risk, step.events), (*n, *d));
            }
            if cohort.iter().all(|(_, e)| *e) {
                uncensored.set(uncensored.get() + 1);
                let exact: Vec<EventRecord<BigRational>> = cohort
                    .iter()
                    .enumerate()
                    .map(|(i, &(t, e))| EventRecord {
                        subject_id: subject(i),
                        time_years: BigRational::new(BigInt::from(t), BigInt::from(2)),
                        kind: kind(e),
                    })
                    .collect();
                let curve = kaplan_meier(&exact).unwrap();
                let total = BigInt::from(cohort.len());
                for step in &curve.steps {
                    let beyond = cohort
                        .iter()
                        .filter(|(t, _)| BigRational::new(BigInt::from(*t), BigInt::from(2)) > step.time_years)
                        .count();
                    prop_assert_eq!(&step.survival, &BigRational::new(BigInt::from(beyond), total.clone()));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (cases, uncensored) = (cases.get(), uncensored.get());
    ensure(uncensored > 0, || "no zero-censoring cohort generated".into())?;
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{cases} cohorts agree with the exact oracle, {uncensored} uncensored exact ({elapsed:?})"
    ))
}

fn criterion_5() -> Outcome {
    let records: Vec<EventRecord<f64>> = (0..3)
        .map(|i| EventRecord {
            subject_id: subject(i),
            time_years: (i + 1) as f64,
            kind: kind(true),
        })
        .collect();
    let curve = kaplan_meier(&records).map_err(|e| e.to_string())?;
    let var = greenwood_variance(&curve)[0].ok_or("no variance at t=1")?;
    ensure(close(var, 4.0 / 54.0, 1e-12), || format!("Var(1) = {var}"))?;
    let banded = greenwood_ci(&curve, 0.05, CiMethod::Linear).map_err(|e| e.to_string())?;
    let z = 1.959_963_984_540_054;
    let half_width = z * (4.0f64 / 54.0).sqrt();
    let (s, lo, hi) = banded.band_at(&1.0);
    ensure(close(s, 2.0 / 3.0, 1e-12), || format!("S(1) = {s}"))?;
    ensure(close(lo, 2.0 / 3.0 - half_width, 1e-12), || format!("ci_low(1) = {lo}"))?;
    ensure(close(hi, (2.0 / 3.0 + half_width).min(1.0), 1e-12), || {
        format!("ci_high(1) = {hi}")
    })?;

    let censored: Vec<EventRecord<f64>> = (0..5)
        .map(|i| EventRecord {
            subject_id: subject(i),
            time_years: 0.5 + i as f64,
            kind: kind(false),
        })
        .collect();
    let flat = greenwood_ci(
        &kaplan_meier(&censored).map_err(|e| e.to_string())?,
        0.05,
        CiMethod::Linear,
    )
    .map_err(|e| e.to_string())?;
    for t in [0.0, 0.5, 2.0, 100.0] {
        ensure(flat.band_at(&t) == (1.0, 1.0, 1.0), || {
            format!("band at {t} = {:?}", flat.band_at(&t))
        })?;
    }
    Ok(format!("Var(1) = {var:.15}; zero-event bands are [1, 1]"))
}

fn criterion_6() -> Outcome {
    let cfg = ThresholdConfig::default();
    let ps = [0.0, 1e-4, 1e-4 + 1e-12, 1e-2, 1e-2 + 1e-12, 1e-1, 1e-1 + 1e-12, 0.5];
    let want = [1, 1, 2, 2, 3, 3, 4, 4];
    let got: Vec<u8> = ps
        .iter()
        .map(|p| probability_number(*p, &cfg))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(got == want, || format!("{got:?}"))?;
    Ok(format!("PN {got:?}"))
}

fn criterion_7() -> Outcome {
    use AttitudeRegime::*;
    let cfg = ThresholdConfig::default();
    let rates = [0.0, 4.999, 5.0, 17.999, 18.0, 67.8];
    let want = [
        Stable,
        SlowTumbling,
        MediumTumbling,
        MediumTumbling,
        FastTumbling,
        FastTumbling,
    ];
    let got: Vec<_> = rates
        .iter()
        .map(|w| attitude_regime(*w, &cfg))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(got == want, || format!("{got:?}"))?;
    let areas = [0.2799, 0.28, 0.2827];
    let want = [ClearanceClass::Narrow, ClearanceClass::Broad, ClearanceClass::Broad];
    let got: Vec<_> = areas
        .iter()
        .map(|a| clearance_class(*a, &cfg))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(got == want, || format!("{got:?}"))?;
    Ok("regimes and clearance classes match".into())
}

fn criterion_8() -> Outcome {
    let cfg = ThresholdConfig::default();
    let base: DebrisObject = common::published_objects().into_iter().next().ok_or("no fixture")?;
    let object = |t: ObjectType, passivated: bool, propellant: PropellantClass| DebrisObject {
        object_type: t,
        passivated,
        passivation_documented: passivated,
        propellant,
        ..base.clone()
    };
    let aged = 1.05 + 1e-9;
    let cases = [
        (
            "RB fresh, age 1.05",
            object(ObjectType::RocketBody, false, PropellantClass::Hypergolic),
            1.05,
            4,
        ),
        (
            "RB fresh, cryogenic, age 0.5",
            object(ObjectType::RocketBody, false, PropellantClass::Cryogenic),
            0.5,
            4,
        ),
        (
            "RB aged hypergolic",
            object(ObjectType::RocketBody, false, PropellantClass::Hypergolic),
            aged,
            3,
        ),
        (
            "RB aged cryogenic",
            object(ObjectType::RocketBody, false, PropellantClass::Cryogenic),
            aged,
            2,
        ),
        (
            "RB aged petroleum",
            object(ObjectType::RocketBody, false, PropellantClass::Petroleum),
            aged,
            1,
        ),
        (
            "RB aged solid",
            object(ObjectType::RocketBody, false, PropellantClass::Solid),
            aged,
            1,
        ),
        (
            "RB passivated",
            object(ObjectType::RocketBody, true, PropellantClass::Hypergolic),
            0.5,
            1,
        ),
        (
            "PL non-passivated",
            object(ObjectType::Payload, false, PropellantClass::Hypergolic),
            0.5,
            2,
        ),
        (
            "PL passivated",
            object(ObjectType::Payload, true, PropellantClass::Hypergolic),
            30.0,
            2,
        ),
    ];
    for (label, o, age, want) in cases {
        let (sn, _) = severity_number(&o, age, &cfg);
        ensure(sn == want, || format!("{label}: SN {sn}, expected {want}"))?;
    }
    Ok("rocket-body rows SN 4/3/2/1, payload SN 2, 1.05 boundary inclusive".into())
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_debris-triage"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let f = |n: &str| common::fixture(n).to_string_lossy().into_owned();
    let store = dir.join("objects.ndjson").to_string_lossy().into_owned();
    let out = dir.join("out").to_string_lossy().into_owned();
    cli(&[
        "ingest",
        "--catalog",
        &f("catalog.json"),
        "--annotations",
        &f("annotations.csv"),
        "--reference",
        &f("reference.csv"),
        "--store",
        &store,
    ])?;
    cli(&["classify", "--store", &store, "--output", &out])?;
    cli(&["report", "--store", &store, "--format", "csv", "--output", &out])?;
    cli(&["report", "--store", &store, "--format", "json", "--output", &out])?;
    cli(&["assess", "--store", &store, "--format", "csv", "--output", &out])?;
    let mut files = vec![(
        "objects.ndjson".to_string(),
        std::fs::read(&store).map_err(|e| e.to_string())?,
    )];
    let mut names: Vec<_> = std::fs::read_dir(&out)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in names {
        let bytes = std::fs::read(Path::new(&out).join(&name)).map_err(|e| e.to_string())?;
        files.push((name, bytes));
    }
    Ok(files)
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    ensure(first.len() >= 7, || format!("only {} artifacts", first.len()))?;
    ensure(first == second, || "artifacts differ between runs".into())?;
    Ok(format!("{} artifacts byte-identical across two runs", first.len()))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let objects = common::all_objects();
    let (assessments, results) = common::run(&objects);
    let summary = summarize(
        &results,
        &assessments,
        &objects,
        &ThresholdConfig::default(),
        DEFAULT_LO_PCT,
        DEFAULT_HI_PCT,
    )
    .map_err(|e| e.to_string())?;
    let text = summary.to_csv();
    let elapsed = start.elapsed();
    ensure(objects.len() == 30, || format!("{} objects", objects.len()))?;
    ensure(!text.is_empty(), || "empty report".into())?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    let ages: Vec<f64> = assessments.iter().map(|a| a.age_years).collect();
    let _ = median(&ages).map_err(|e| e.to_string())?;
    Ok(format!("ingest, classify and report of 30 objects in {elapsed:?}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("criticality matrix and levels", criterion_1),
        ("fixture classification", criterion_2),
        ("results table rows and subsumption", criterion_3),
        ("product-limit oracle equivalence", criterion_4),
        ("Greenwood bands", criterion_5),
        ("PN boundaries", criterion_6),
        ("regime and clearance boundaries", criterion_7),
        ("severity table", criterion_8),
        ("pipeline determinism", criterion_9),
        ("performance", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: panicked", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
