//! Structured catalog documents, curated annotation tables, and their merge
//! into validated [`DebrisObject`]s.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::catalog::{
    parse_bool, parse_date, validate_object, CosparId, DebrisObject, InterfaceMaterial, ObjectType, OrbitClass,
    Passivation, PropellantClass, RawFields, ValidationError,
};

/// Non-fatal finding while reading an input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub source: String,
    /// Resource index or 1-based line number, depending on the source.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dimensions {
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    pub depth_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredRecord {
    pub cospar_id: CosparId,
    pub name: String,
    pub object_type: ObjectType,
    pub launch_epoch: Option<chrono::NaiveDate>,
    pub reentry_epoch: Option<chrono::NaiveDate>,
    pub orbit_class: OrbitClass,
    pub mass_kg: Option<f64>,
    pub dimensions: Option<Dimensions>,
    pub launcher_name: Option<String>,
    pub country: Option<String>,
    /// Propellant reported by the catalog, if any; curated annotations win.
    pub propellant: Option<PropellantClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredPage {
    pub records: Vec<StructuredRecord>,
    pub diagnostics: Vec<Diagnostic>,
    /// `links.next`, for fetching the following page.
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported document version {0:?}")]
    UnsupportedVersion(String),
    #[error("annotation table has no header")]
    MissingHeader,
    #[error("annotation table lacks column {0:?}")]
    MissingColumn(String),
    #[error("cannot parse row {row} column {column:?}: {value:?}")]
    UnparsableCell { row: usize, column: String, value: String },
    #[error("duplicate id {id} in {side}")]
    DuplicateId { side: Side, id: String },
    #[error("record {id} is invalid: {}", errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidObject { id: String, errors: Vec<ValidationError> },
    #[error("fetch failed for {url}: {message}")]
    Fetch { url: String, message: String },
    #[error("invalid reference table: {0}")]
    Reference(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Structured,
    Annotations,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Structured => "structured records",
            Side::Annotations => "annotations",
        })
    }
}

const SUPPORTED_VERSIONS: [&str; 2] = ["1.0", "1.1"];

fn opt_str<'a>(attrs: &'a serde_json::Map<String, Value>, key: &str) -> Option<&'a str> {
    attrs
        .get(key)
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

fn opt_f64(attrs: &serde_json::Map<String, Value>, key: &str) -> Result<Option<f64>, String> {
    match attrs.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| format!("`{key}` is not a finite number")),
    }
}

fn opt_date(attrs: &serde_json::Map<String, Value>, key: &str) -> Result<Option<chrono::NaiveDate>, String> {
    match opt_str(attrs, key) {
        None => Ok(None),
        Some(s) => parse_date(s)
            .map(Some)
            .ok_or_else(|| format!("`{key}` is not a date: {s:?}")),
    }
}

fn map_object_class(raw: &str) -> Option<ObjectType> {
    match raw {
        "Payload" => Some(ObjectType::Payload),
        "Rocket Body" => Some(ObjectType::RocketBody),
        _ => None,
    }
}

fn parse_resource(resource: &Value) -> Result<StructuredRecord, String> {
    let attrs = resource
        .get("attributes")
        .and_then(Value::as_object)
        .ok_or("resource has no `attributes` object")?;
    let id = opt_str(attrs, "cosparId").ok_or("missing `cosparId`")?;
    let cospar_id = CosparId::parse(id).map_err(|e| e.to_string())?;
    let class = opt_str(attrs, "objectClass").ok_or("missing `objectClass`")?;
    let object_type =
        map_object_class(class).ok_or_else(|| format!("object class {class:?} is not an intact object"))?;
    let orbit = opt_str(attrs, "orbitClass").ok_or("missing `orbitClass`")?;
    let orbit_class: OrbitClass = orbit.parse().map_err(|e: ValidationError| e.to_string())?;
    let dimensions = match attrs.get("dimensions").and_then(Value::as_object) {
        None => None,
        Some(d) => Some(Dimensions {
            width_m: opt_f64(d, "width")?,
            height_m: opt_f64(d, "height")?,
            depth_m: opt_f64(d, "depth")?,
        }),
    };
    let propellant = match opt_str(attrs, "propellant") {
        None => None,
        Some(p) => Some(p.parse().map_err(|e: ValidationError| e.to_string())?),
    };
    Ok(StructuredRecord {
        cospar_id,
        name: opt_str(attrs, "name").unwrap_or_default().to_string(),
        object_type,
        launch_epoch: opt_date(attrs, "launchEpoch")?,
        reentry_epoch: opt_date(attrs, "reentryEpoch")?,
        orbit_class,
        mass_kg: opt_f64(attrs, "mass")?,
        dimensions,
        launcher_name: opt_str(attrs, "launcherName").map(str::to_string),
        country: opt_str(attrs, "country").map(str::to_string),
        propellant,
    })
}

/// Parses one page of a resource-collection document. Resources that cannot
/// be mapped are skipped with a diagnostic.
pub fn parse_structured_document(bytes: &[u8]) -> Result<StructuredPage, IngestError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| IngestError::MalformedDocument(e.to_string()))?;
    let top = doc
        .as_object()
        .ok_or_else(|| IngestError::MalformedDocument("top level is not an object".into()))?;
    if let Some(version) = top.get("jsonapi").and_then(|j| j.get("version")) {
        let v = version.as_str().unwrap_or_default();
        if !SUPPORTED_VERSIONS.contains(&v) {
            return Err(IngestError::UnsupportedVersion(version.to_string()));
        }
    }
    let data = top
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::MalformedDocument("missing `data` array".into()))?;
    let mut records = Vec::with_capacity(data.len());
    let mut diagnostics = Vec::new();
    for (i, resource) in data.iter().enumerate() {
        match parse_resource(resource) {
            Ok(record) => records.push(record),
            Err(message) => diagnostics.push(Diagnostic {
                source: "structured".into(),
                location: format!("data[{i}]"),
                message: format!("skipped resource: {message}"),
            }),
        }
    }
    let next = top
        .get("links")
        .and_then(|l| l.get("next"))
        .and_then(Value::as_str)
        .map(str::to_string);
    Ok(StructuredPage {
        records,
        diagnostics,
        next,
    })
}

/// Follows `links.next` from `first_url`, parsing every page fetched with
/// `fetch`. Stops on a repeated link.
pub fn fetch_all_pages<F>(first_url: &str, mut fetch: F) -> Result<StructuredPage, IngestError>
where
    F: FnMut(&str) -> Result<Vec<u8>, String>,
{
    let mut all = StructuredPage {
        records: Vec::new(),
        diagnostics: Vec::new(),
        next: None,
    };
    let mut visited = BTreeSet::new();
    let mut url = Some(first_url.to_string());
    while let Some(current) = url.take() {
        if !visited.insert(current.clone()) {
            break;
        }
        let bytes = fetch(&current).map_err(|message| IngestError::Fetch {
            url: current.clone(),
            message,
        })?;
        let page = parse_structured_document(&bytes)?;
        all.records.extend(page.records);
        all.diagnostics.extend(page.diagnostics.into_iter().map(|mut d| {
            d.location = format!("{current}#{}", d.location);
            d
        }));
        url = page.next;
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationRecord {
    pub cospar_id: CosparId,
    pub angular_rate_deg_s: f64,
    pub passivated: Passivation,
    pub propellant: PropellantClass,
    pub platform_name: String,
    pub grapple_feature: bool,
    pub interface_material: InterfaceMaterial,
    pub interface_clearance_m2: f64,
    pub failure_epoch: Option<chrono::NaiveDate>,
    pub failure_kind: Option<String>,
}

pub const ANNOTATION_COLUMNS: [&str; 10] = [
    "cospar_id",
    "angular_rate_deg_s",
    "passivated",
    "propellant_class",
    "platform_name",
    "grapple_feature",
    "interface_material",
    "interface_clearance_m2",
    "failure_epoch",
    "failure_kind",
];

/// Parses the curated annotation table. Columns are located by header name;
/// extra columns are ignored with a diagnostic.
pub fn parse_annotations(bytes: &[u8]) -> Result<(Vec<AnnotationRecord>, Vec<Diagnostic>), IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(bytes);
    let headers = reader.headers().map_err(|_| IngestError::MissingHeader)?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(IngestError::MissingHeader);
    }
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let mut position = BTreeMap::new();
    for column in ANNOTATION_COLUMNS {
        let idx = names
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| IngestError::MissingColumn(column.to_string()))?;
        position.insert(column, idx);
    }
    let mut diagnostics: Vec<Diagnostic> = names
        .iter()
        .filter(|h| !ANNOTATION_COLUMNS.contains(&h.as_str()))
        .map(|h| Diagnostic {
            source: "annotations".into(),
            location: "line 1".into(),
            message: format!("ignored unknown column {h:?}"),
        })
        .collect();

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::UnparsableCell {
            row: line,
            column: "*".into(),
            value: e.to_string(),
        })?;
        let cell = |column: &str| row.get(position[column]).unwrap_or("").trim();
        let bad = |column: &str| IngestError::UnparsableCell {
            row: line,
            column: column.to_string(),
            value: cell(column).to_string(),
        };
        let real = |column: &str| {
            cell(column)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(column))
        };

        let cospar_id = CosparId::parse(cell("cospar_id")).map_err(|_| bad("cospar_id"))?;
        let failure_epoch = match cell("failure_epoch") {
            "" => None,
            s => Some(parse_date(s).ok_or_else(|| bad("failure_epoch"))?),
        };
        let failure_kind = Some(cell("failure_kind")).filter(|s| !s.is_empty()).map(str::to_string);
        if failure_kind.is_some() && failure_epoch.is_none() {
            diagnostics.push(Diagnostic {
                source: "annotations".into(),
                location: format!("line {line}"),
                message: "failure_kind given without failure_epoch".into(),
            });
        }
        records.push(AnnotationRecord {
            cospar_id,
            angular_rate_deg_s: real("angular_rate_deg_s")?,
            passivated: cell("passivated").parse().map_err(|_| bad("passivated"))?,
            propellant: cell("propellant_class").parse().map_err(|_| bad("propellant_class"))?,
            platform_name: cell("platform_name").to_string(),
            grapple_feature: parse_bool(cell("grapple_feature")).ok_or_else(|| bad("grapple_feature"))?,
            interface_material: cell("interface_material")
                .parse()
                .map_err(|_| bad("interface_material"))?,
            interface_clearance_m2: real("interface_clearance_m2")?,
            failure_epoch,
            failure_kind,
        });
    }
    Ok((records, diagnostics))
}

/// Values carried with a record rather than derived: orbit age and breakup
/// probability. Table header: `cospar_id,orbit_age_years,breakup_probability`;
/// either value may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues {
    pub cospar_id: CosparId,
    pub orbit_age_years: Option<f64>,
    pub breakup_probability: Option<f64>,
}

pub fn parse_reference(bytes: &[u8]) -> Result<Vec<ReferenceValues>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Reference(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Reference(format!("missing column {name:?}")))
    };
    let (id_col, age_col, p_col) = (col("cospar_id")?, col("orbit_age_years")?, col("breakup_probability")?);
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| IngestError::Reference(e.to_string()))?;
        let number = |k: usize| -> Result<Option<f64>, IngestError> {
            match row.get(k).unwrap_or("") {
                "" => Ok(None),
                s => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| IngestError::Reference(format!("line {line}: bad number {s:?}"))),
            }
        };
        out.push(ReferenceValues {
            cospar_id: CosparId::parse(&row[id_col])
                .map_err(|e| IngestError::Reference(format!("line {line}: {e}")))?,
            orbit_age_years: number(age_col)?,
            breakup_probability: number(p_col)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    /// Sorted by COSPAR id.
    pub objects: Vec<DebrisObject>,
    pub unmatched_structured: Vec<CosparId>,
    pub unmatched_annotations: Vec<CosparId>,
    pub diagnostics: Vec<Diagnostic>,
}

fn index_unique<T>(
    items: &[T],
    id: impl Fn(&T) -> &CosparId,
    side: Side,
) -> Result<BTreeMap<CosparId, &T>, IngestError> {
    let mut map = BTreeMap::new();
    for item in items {
        let key = id(item).clone();
        if map.contains_key(&key) {
            return Err(IngestError::DuplicateId {
                side,
                id: key.to_string(),
            });
        }
        map.insert(key, item);
    }
    Ok(map)
}

fn fields_for(s: &StructuredRecord, a: &AnnotationRecord) -> RawFields {
    let mut f = RawFields::new();
    let mut put = |k: &str, v: String| {
        f.insert(k.to_string(), v);
    };
    put("cospar_id", s.cospar_id.to_string());
    put("name", s.name.clone());
    put("object_type", s.object_type.token().into());
    put("orbit_class", s.orbit_class.token().into());
    if let Some(d) = s.launch_epoch {
        put("launch_epoch", d.to_string());
    }
    if let Some(d) = s.reentry_epoch {
        put("reentry_epoch", d.to_string());
    }
    if let Some(m) = s.mass_kg {
        put("mass_kg", m.to_string());
    }
    put("angular_rate_deg_s", a.angular_rate_deg_s.to_string());
    put("passivated", a.passivated.token().into());
    // A curated `true` is documented passivation.
    put(
        "passivation_documented",
        (a.passivated == Passivation::True).to_string(),
    );
    put("propellant", a.propellant.token().into());
    put("platform_name", a.platform_name.clone());
    put("grapple_feature", a.grapple_feature.to_string());
    put("interface_material", a.interface_material.token().into());
    put("interface_clearance_m2", a.interface_clearance_m2.to_string());
    if let Some(d) = a.failure_epoch {
        put("failure_epoch", d.to_string());
    }
    if let Some(k) = &a.failure_kind {
        put("failure_kind", k.clone());
    }
    f
}

/// Joins on COSPAR id; only ids present on both sides become objects.
/// Annotation values override catalog values where both exist.
pub fn merge(structured: &[StructuredRecord], annotations: &[AnnotationRecord]) -> Result<MergeOutcome, IngestError> {
    let left = index_unique(structured, |s| &s.cospar_id, Side::Structured)?;
    let right = index_unique(annotations, |a| &a.cospar_id, Side::Annotations)?;

    let mut objects = Vec::new();
    let mut diagnostics = Vec::new();
    let mut unmatched_structured = Vec::new();
    for (id, s) in &left {
        let Some(a) = right.get(id) else {
            unmatched_structured.push(id.clone());
            continue;
        };
        if let Some(catalog_propellant) = s.propellant {
            if catalog_propellant != a.propellant {
                diagnostics.push(Diagnostic {
                    source: "merge".into(),
                    location: id.to_string(),
                    message: format!(
                        "propellant conflict: catalog {catalog_propellant}, annotation {} (annotation kept)",
                        a.propellant
                    ),
                });
            }
        }
        let object = validate_object(&fields_for(s, a)).map_err(|errors| IngestError::InvalidObject {
            id: id.to_string(),
            errors,
        })?;
        objects.push(object);
    }
    let unmatched_annotations = right.keys().filter(|id| !left.contains_key(*id)).cloned().collect();
    Ok(MergeOutcome {
        objects,
        unmatched_structured,
        unmatched_annotations,
        diagnostics,
    })
}

/// Attaches reference values to merged objects; unknown ids are diagnostics.
pub fn apply_reference(
    objects: &mut [DebrisObject],
    reference: &[ReferenceValues],
) -> Result<Vec<Diagnostic>, IngestError> {
    let mut diagnostics = Vec::new();
    let mut by_id: BTreeMap<&CosparId, usize> = BTreeMap::new();
    for (i, o) in objects.iter().enumerate() {
        by_id.insert(&o.cospar_id, i);
    }
    let mut updates = Vec::new();
    for r in reference {
        match by_id.get(&r.cospar_id) {
            Some(&i) => updates.push((i, r)),
            None => diagnostics.push(Diagnostic {
                source: "reference".into(),
                location: r.cospar_id.to_string(),
                message: "reference values for an id not in the merged set".into(),
            }),
        }
    }
    for (i, r) in updates {
        let object = &mut objects[i];
        if r.orbit_age_years.is_some() {
            object.recorded_age_years = r.orbit_age_years;
        }
        if r.breakup_probability.is_some() {
            object.breakup_probability = r.breakup_probability;
        }
        let violations = object.violations();
        if !violations.is_empty() {
            return Err(IngestError::InvalidObject {
                id: object.cospar_id.to_string(),
                errors: violations,
            });
        }
    }
    Ok(diagnostics)
}
