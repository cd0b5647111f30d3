//! Order statistics and the per-class summary of a classification run.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::ThresholdConfig;
use crate::catalog::{CosparId, DebrisObject, ObjectType};
use crate::classifier::{attitude_regime, AttitudeRegime, ClassificationResult};
use crate::criticality::CriticalityAssessment;
use crate::scalar::Scalar;

/// Every value `SN·PN` can take; the bins of the CN distribution.
pub const CN_BINS: [u8; 9] = [1, 2, 3, 4, 6, 8, 9, 12, 16];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("statistic of an empty list")]
    EmptyInput,
    #[error("values cannot be ordered (NaN?)")]
    Unordered,
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("percentile range {0}..{1} is not increasing")]
    InvalidRange(f64, f64),
    #[error("inputs are not aligned on id {0}")]
    IdMismatch(String),
    #[error("cannot derive attitude regime for {0}")]
    Regime(String),
}

fn sorted<T: Scalar>(values: &[T]) -> Result<Vec<T>, ReportError> {
    if values.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut v = values.to_vec();
    let mut unordered = false;
    v.sort_by(|a, b| {
        a.partial_cmp(b).unwrap_or_else(|| {
            unordered = true;
            Ordering::Equal
        })
    });
    if unordered || v.iter().any(|x| x.partial_cmp(x).is_none()) {
        return Err(ReportError::Unordered);
    }
    Ok(v)
}

/// Middle element, or the mean of the two middle elements for even length.
pub fn median<T: Scalar>(values: &[T]) -> Result<T, ReportError> {
    let v = sorted(values)?;
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2].clone()
    } else {
        (v[n / 2 - 1].clone() + v[n / 2].clone()) / T::from_count(2)
    })
}

fn percentile_sorted<T: Scalar>(v: &[T], pct: f64) -> Result<T, ReportError> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(ReportError::InvalidPercentile(pct));
    }
    let rank = pct / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        return Ok(v[lo].clone());
    }
    let frac = T::from_f64(rank - lo as f64).ok_or(ReportError::InvalidPercentile(pct))?;
    Ok(v[lo].clone() + (v[hi].clone() - v[lo].clone()) * frac)
}

/// Percentile by linear interpolation between the closest ranks.
pub fn percentile<T: Scalar>(values: &[T], pct: f64) -> Result<T, ReportError> {
    percentile_sorted(&sorted(values)?, pct)
}

/// `(P_lo, P_hi)`; the usual choice is 25 and 75.
pub fn interpercentile<T: Scalar>(values: &[T], lo_pct: f64, hi_pct: f64) -> Result<(T, T), ReportError> {
    if lo_pct.partial_cmp(&hi_pct).is_none_or(|o| o.is_gt()) {
        return Err(ReportError::InvalidRange(lo_pct, hi_pct));
    }
    let v = sorted(values)?;
    Ok((percentile_sorted(&v, lo_pct)?, percentile_sorted(&v, hi_pct)?))
}

pub const DEFAULT_LO_PCT: f64 = 25.0;
pub const DEFAULT_HI_PCT: f64 = 75.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRow {
    pub class: String,
    pub count: usize,
    pub median_cn: Option<f64>,
    pub median_pn: Option<f64>,
    pub median_sn: Option<f64>,
    pub median_rate_deg_s: Option<f64>,
    pub median_age_years: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionRow {
    pub class: String,
    pub bin: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortStat {
    /// `PL`, `RB` or `all`.
    pub group: String,
    pub metric: String,
    pub n: usize,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub lo_pct: f64,
    pub hi_pct: f64,
    pub objects: usize,
    /// One row per rule seen in the traces, by name.
    pub classes: Vec<ClassRow>,
    pub by_type: Vec<DistributionRow>,
    pub by_cn: Vec<DistributionRow>,
    pub by_regime: Vec<DistributionRow>,
    pub unclassified: Vec<CosparId>,
    pub cohort: Vec<CohortStat>,
}

type Metric = fn(&Joined) -> f64;

struct Joined<'a> {
    object: &'a DebrisObject,
    assessment: &'a CriticalityAssessment,
    result: &'a ClassificationResult,
    regime: AttitudeRegime,
}

fn by_id<T>(items: &[T], id: impl Fn(&T) -> &CosparId) -> Result<BTreeMap<CosparId, &T>, ReportError> {
    let mut map = BTreeMap::new();
    for item in items {
        let key = id(item).clone();
        if map.insert(key.clone(), item).is_some() {
            return Err(ReportError::IdMismatch(key.to_string()));
        }
    }
    Ok(map)
}

fn opt_median(values: &[f64]) -> Option<f64> {
    median(values).ok()
}

/// Aggregates a run. The three inputs must cover the same set of ids.
/// Objects count once per matched class.
pub fn summarize(
    results: &[ClassificationResult],
    assessments: &[CriticalityAssessment],
    objects: &[DebrisObject],
    cfg: &ThresholdConfig,
    lo_pct: f64,
    hi_pct: f64,
) -> Result<SummaryReport, ReportError> {
    if !(0.0..=100.0).contains(&lo_pct) {
        return Err(ReportError::InvalidPercentile(lo_pct));
    }
    if !(0.0..=100.0).contains(&hi_pct) {
        return Err(ReportError::InvalidPercentile(hi_pct));
    }
    if lo_pct > hi_pct {
        return Err(ReportError::InvalidRange(lo_pct, hi_pct));
    }
    let r = by_id(results, |x| &x.cospar_id)?;
    let a = by_id(assessments, |x| &x.cospar_id)?;
    let o = by_id(objects, |x| &x.cospar_id)?;
    let ids: BTreeSet<&CosparId> = r.keys().chain(a.keys()).chain(o.keys()).collect();
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let (Some(result), Some(assessment), Some(object)) = (r.get(id), a.get(id), o.get(id)) else {
            return Err(ReportError::IdMismatch(id.to_string()));
        };
        let regime =
            attitude_regime(object.angular_rate_deg_s, cfg).map_err(|_| ReportError::Regime(id.to_string()))?;
        rows.push(Joined {
            object,
            assessment,
            result,
            regime,
        });
    }

    let class_names: BTreeSet<&str> = rows
        .iter()
        .flat_map(|j| {
            j.result
                .traces
                .iter()
                .map(|t| t.rule.as_str())
                .chain(j.result.matched.iter().map(String::as_str))
        })
        .collect();

    let mut classes = Vec::new();
    let mut by_type = Vec::new();
    let mut by_cn = Vec::new();
    let mut by_regime = Vec::new();
    for class in &class_names {
        let members: Vec<&Joined> = rows.iter().filter(|j| j.result.matched.contains(*class)).collect();
        let col = |f: &dyn Fn(&Joined) -> f64| members.iter().map(|j| f(j)).collect::<Vec<f64>>();
        classes.push(ClassRow {
            class: class.to_string(),
            count: members.len(),
            median_cn: opt_median(&col(&|j| j.assessment.cn as f64)),
            median_pn: opt_median(&col(&|j| j.assessment.pn as f64)),
            median_sn: opt_median(&col(&|j| j.assessment.sn as f64)),
            median_rate_deg_s: opt_median(&col(&|j| j.object.angular_rate_deg_s)),
            median_age_years: opt_median(&col(&|j| j.assessment.age_years)),
        });
        for t in ObjectType::ALL {
            by_type.push(DistributionRow {
                class: class.to_string(),
                bin: t.abbreviation().into(),
                count: members.iter().filter(|j| j.object.object_type == *t).count(),
            });
        }
        for cn in CN_BINS {
            by_cn.push(DistributionRow {
                class: class.to_string(),
                bin: cn.to_string(),
                count: members.iter().filter(|j| j.assessment.cn == cn).count(),
            });
        }
        for regime in AttitudeRegime::ALL {
            by_regime.push(DistributionRow {
                class: class.to_string(),
                bin: regime.to_string(),
                count: members.iter().filter(|j| j.regime == regime).count(),
            });
        }
    }

    let unclassified = rows
        .iter()
        .filter(|j| j.result.matched.is_empty())
        .map(|j| j.object.cospar_id.clone())
        .collect();

    let mut cohort = Vec::new();
    let groups: [(&str, Option<ObjectType>); 3] = [
        ("PL", Some(ObjectType::Payload)),
        ("RB", Some(ObjectType::RocketBody)),
        ("all", None),
    ];
    for (group, filter) in groups {
        let members: Vec<&Joined> = rows
            .iter()
            .filter(|j| filter.is_none_or(|t| j.object.object_type == t))
            .collect();
        if members.is_empty() {
            continue;
        }
        let metrics: [(&str, Metric); 4] = [
            ("breakup_probability", |j| j.assessment.probability),
            ("orbit_age_years", |j| j.assessment.age_years),
            ("angular_rate_deg_s", |j| j.object.angular_rate_deg_s),
            ("cn", |j| j.assessment.cn as f64),
        ];
        for (metric, f) in metrics {
            let values: Vec<f64> = members.iter().map(|j| f(j)).collect();
            let (lo, hi) = interpercentile(&values, lo_pct, hi_pct)?;
            cohort.push(CohortStat {
                group: group.into(),
                metric: metric.into(),
                n: values.len(),
                median: median(&values)?,
                lo,
                hi,
            });
        }
    }

    Ok(SummaryReport {
        lo_pct,
        hi_pct,
        objects: rows.len(),
        classes,
        by_type,
        by_cn,
        by_regime,
        unclassified,
        cohort,
    })
}

/// Text form of a statistic: at most ten decimals, trailing zeros removed.
pub fn format_value(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn num(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

fn pct_label(p: f64) -> String {
    format!("p{p}")
}

impl SummaryReport {
    pub fn classes_csv(&self) -> String {
        let mut out = String::from("class,count,median_cn,median_pn,median_sn,median_rate_deg_s,median_age_years\n");
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.class,
                c.count,
                num(c.median_cn),
                num(c.median_pn),
                num(c.median_sn),
                num(c.median_rate_deg_s),
                num(c.median_age_years)
            );
        }
        out
    }

    fn distribution_csv(rows: &[DistributionRow], bin: &str) -> String {
        let mut out = format!("class,{bin},count\n");
        for r in rows {
            let _ = writeln!(out, "{},{},{}", r.class, r.bin, r.count);
        }
        out
    }

    pub fn cohort_csv(&self) -> String {
        let mut out = format!(
            "group,metric,n,median,{},{}\n",
            pct_label(self.lo_pct),
            pct_label(self.hi_pct)
        );
        for c in &self.cohort {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                c.group,
                c.metric,
                c.n,
                format_value(c.median),
                format_value(c.lo),
                format_value(c.hi)
            );
        }
        out
    }

    /// Named CSV tables, in a fixed order.
    pub fn csv_tables(&self) -> Vec<(&'static str, String)> {
        vec![
            ("classes", self.classes_csv()),
            ("by_type", Self::distribution_csv(&self.by_type, "object_type")),
            ("by_cn", Self::distribution_csv(&self.by_cn, "cn")),
            ("by_regime", Self::distribution_csv(&self.by_regime, "regime")),
            ("cohort", self.cohort_csv()),
        ]
    }

    /// All tables in one stream, each preceded by a `# name` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (i, (name, body)) in self.csv_tables().into_iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# {name}");
            out.push_str(&body);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text rendering of every table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "objects: {}  interpercentile range: {}-{}\n",
            self.objects, self.lo_pct, self.hi_pct
        );
        for (name, body) in self.csv_tables() {
            let _ = writeln!(out, "\n[{name}]");
            out.push_str(&align(&body));
        }
        if !self.unclassified.is_empty() {
            let ids: Vec<&str> = self.unclassified.iter().map(CosparId::as_str).collect();
            let _ = writeln!(out, "\nunclassified: {}", ids.join(" "));
        }
        out
    }
}

/// Pads the columns of simple CSV text (no quoted commas) to equal width.
fn align(csv_text: &str) -> String {
    let rows: Vec<Vec<&str>> = csv_text.lines().map(|l| l.split(',').collect()).collect();
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[38.88, 38.96, 32.1]).unwrap(), 38.88);
        assert_eq!(median(&[31.06, 29.71, 27.48]).unwrap(), 29.71);
        assert_eq!(median(&[1.0]).unwrap(), 1.0);
        assert_eq!(interpercentile(&[1.0], 25.0, 75.0).unwrap(), (1.0, 1.0));
        assert_eq!(median(&[3.0, 6.0]).unwrap(), 4.5);
        assert_eq!(median::<f64>(&[]), Err(ReportError::EmptyInput));
        assert_eq!(median(&[1.0, f64::NAN]), Err(ReportError::Unordered));
    }

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        // rank = 0.25 * 3 = 0.75
        assert_eq!(percentile(&v, 25.0).unwrap(), 1.75);
        assert_eq!(percentile(&v, 75.0).unwrap(), 3.25);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 4.0);
        assert_eq!(percentile(&v, 101.0), Err(ReportError::InvalidPercentile(101.0)));
        assert_eq!(
            interpercentile(&v, 75.0, 25.0),
            Err(ReportError::InvalidRange(75.0, 25.0))
        );
    }

    #[test]
    fn exact_rational_median() {
        let v = [Rational64::new(1, 3), Rational64::new(1, 2)];
        assert_eq!(median(&v).unwrap(), Rational64::new(5, 12));
        let (lo, _) = interpercentile(&[Rational64::from(0), Rational64::from(4)], 25.0, 75.0).unwrap();
        assert_eq!(lo, Rational64::from(1));
    }

    #[test]
    fn value_text() {
        assert_eq!(format_value(27.244999999999997), "27.245");
        assert_eq!(format_value(38.88), "38.88");
        assert_eq!(format_value(6.0), "6");
        assert_eq!(format_value(0.0305), "0.0305");
        assert_eq!(format_value(-1e-12), "0");
    }

    #[test]
    fn align_pads() {
        assert_eq!(align("a,bb\nccc,d\n"), "a    bb\nccc  d\n");
    }

    proptest! {
        #[test]
        fn median_permutation_invariant_and_bounded(mut v in proptest::collection::vec(-1e6f64..1e6, 1..40), seed in any::<u64>()) {
            let m = median(&v).unwrap();
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min <= m && m <= max);
            let k = (seed as usize) % v.len();
            v.rotate_left(k);
            v.reverse();
            prop_assert_eq!(median(&v).unwrap(), m);
        }

        #[test]
        fn percentile_monotone(v in proptest::collection::vec(-1e3f64..1e3, 1..30), a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (pl, ph) = interpercentile(&v, lo, hi).unwrap();
            prop_assert!(pl <= ph);
        }
    }
}
