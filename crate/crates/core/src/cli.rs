//! Command-line pipeline: ingest, survival, assess, classify, report and
//! explain.
//!
//! Each subcommand either reads the object store written by `ingest` or the
//! raw event table, recomputes the cheap upstream stages it depends on, and
//! writes its artifact atomically. Failures exit nonzero with a JSON error
//! report on stderr.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::catalog::{self, CosparId, DebrisObject, ObjectType, StoreError, ThresholdConfig};
use crate::classifier::{self, ClassificationResult};
use crate::classifier::{load_rule_config, RuleConfig, RuleError, DEFAULT_RULES_JSON};
use crate::criticality::{self, CriticalityAssessment};
use crate::ingest::{self, Diagnostic, IngestError};
use crate::report::{self, DEFAULT_HI_PCT, DEFAULT_LO_PCT};
use crate::survival::{self, BreakupClass, CiMethod, SurvivalCurve};

#[derive(Parser, Debug)]
#[command(
    name = "debris-triage",
    version,
    about = "Breakup criticality and capture-method triage for intact derelict objects"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Threshold overrides (JSON object), applied after any in the rules file
    #[arg(long, global = true)]
    pub thresholds: Option<PathBuf>,
    /// Rule table (JSON); the built-in table when omitted
    #[arg(long, global = true)]
    pub rules: Option<PathBuf>,
    /// End of the observation window, YYYY-MM-DD
    #[arg(long, global = true)]
    pub window_end: Option<NaiveDate>,
    /// Output format for tabular results
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write artifacts into this directory instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Include rationale and per-rule traces
    #[arg(long, global = true)]
    pub verbose: bool,
    /// Write a JSON list of non-fatal diagnostics to this path
    #[arg(long, global = true)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Probabilities {
    /// Survival curve CSV used to estimate payload breakup probability
    #[arg(long)]
    pub payload_curve: Option<PathBuf>,
    /// Survival curve CSV used to estimate rocket-body breakup probability
    #[arg(long)]
    pub rocket_body_curve: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Merge a catalog document and an annotation table into the object store
    Ingest {
        /// Structured catalog page (JSON); repeat for several pages
        #[arg(long, required = true)]
        catalog: Vec<PathBuf>,
        /// Curated annotation table (CSV)
        #[arg(long)]
        annotations: PathBuf,
        /// Recorded orbit ages and breakup probabilities (CSV)
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Follow `links.next` as paths relative to the first catalog page
        #[arg(long)]
        follow_links: bool,
        /// Object store to write
        #[arg(long)]
        store: PathBuf,
    },
    /// Estimate breakup-free survival and emit the step function as CSV
    Survival {
        #[arg(long)]
        store: PathBuf,
        /// Event table (CSV: cospar_id,epoch,kind)
        #[arg(long)]
        events: PathBuf,
        /// Breakup classes counted as events, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec!["propulsion".to_string(), "anomalous".to_string(), "electrical".to_string(), "collision".to_string(), "unknown".to_string()])]
        target: Vec<String>,
        /// Restrict the cohort to one object type
        #[arg(long, value_enum)]
        object_type: Option<TypeFilter>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Band construction: linear or loglog
        #[arg(long, default_value = "linear")]
        ci: String,
    },
    /// Score breakup criticality (SN, PN, CN, level) per object
    Assess {
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        probabilities: Probabilities,
    },
    /// Classify every object and stream JSON lines in batches
    Classify {
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        probabilities: Probabilities,
        #[arg(long, default_value_t = 50)]
        batch_size: usize,
    },
    /// Summarize a classification run per capture method
    Report {
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        probabilities: Probabilities,
        #[arg(long, default_value_t = DEFAULT_LO_PCT)]
        lo_pct: f64,
        #[arg(long, default_value_t = DEFAULT_HI_PCT)]
        hi_pct: f64,
    },
    /// Print the rule-by-rule trace for one object
    Explain {
        id: String,
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        probabilities: Probabilities,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TypeFilter {
    Payload,
    RocketBody,
}

/// Failure category; the discriminant is the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation = 1,
    Io = 2,
    Schema = 3,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind, "code": self.exit_code(), "message": self.message, "details": self.details } })
            .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let kind = match e {
            StoreError::IoFailure { .. } => ErrorKind::Io,
            StoreError::CorruptRecord { .. } => ErrorKind::Validation,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let kind = match e {
            IngestError::MalformedDocument(_)
            | IngestError::UnsupportedVersion(_)
            | IngestError::MissingHeader
            | IngestError::MissingColumn(_) => ErrorKind::Schema,
            IngestError::Fetch { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        };
        let details = match &e {
            IngestError::InvalidObject { errors, .. } => errors.iter().map(ToString::to_string).collect(),
            _ => Vec::new(),
        };
        CliError {
            kind,
            message: e.to_string(),
            details,
        }
    }
}

impl From<RuleError> for CliError {
    fn from(e: RuleError) -> Self {
        CliError::new(ErrorKind::Schema, e.to_string())
    }
}

impl From<catalog::ConfigError> for CliError {
    fn from(e: catalog::ConfigError) -> Self {
        CliError::new(ErrorKind::Schema, e.to_string())
    }
}

fn validation(e: impl fmt::Display) -> CliError {
    CliError::new(ErrorKind::Validation, e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::new(ErrorKind::Io, format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?)
        .map_err(|_| CliError::new(ErrorKind::Validation, format!("{} is not UTF-8", path.display())))
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ErrorKind::Schema as i32 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

struct Context {
    rules: RuleConfig,
    cfg: ThresholdConfig,
}

fn context(common: &Common) -> Result<Context, CliError> {
    let rules = match &common.rules {
        Some(path) => load_rule_config(&read(path)?)?,
        None => load_rule_config(DEFAULT_RULES_JSON.as_bytes())?,
    };
    let mut cfg = rules.thresholds.clone();
    if let Some(path) = &common.thresholds {
        let value: serde_json::Value = serde_json::from_slice(&read(path)?)
            .map_err(|e| CliError::new(ErrorKind::Schema, format!("thresholds {}: {e}", path.display())))?;
        cfg.apply_overrides(&value, "$")?;
    }
    if let Some(end) = common.window_end {
        cfg.window_end = end;
        cfg.validate()?;
    }
    Ok(Context { rules, cfg })
}

/// Writes `bytes` to `name` inside the output directory, or to `out`.
fn emit(common: &Common, name: &str, bytes: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match &common.output {
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot create {}: {e}", dir.display())))?;
            catalog::write_atomic(&dir.join(name), bytes)?;
            Ok(())
        }
        None => out
            .write_all(bytes)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot write output: {e}"))),
    }
}

fn write_diagnostics(common: &Common, diagnostics: &[Diagnostic]) -> Result<(), CliError> {
    if let Some(path) = &common.diagnostics {
        let mut text = serde_json::to_string_pretty(diagnostics).expect("diagnostics serialize");
        text.push('\n');
        catalog::write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Ingest {
            catalog,
            annotations,
            reference,
            follow_links,
            store,
        } => run_ingest(common, catalog, annotations, reference.as_deref(), *follow_links, store),
        Command::Survival {
            store,
            events,
            target,
            object_type,
            alpha,
            ci,
        } => {
            let ctx = context(common)?;
            let (objects, excluded): (Vec<DebrisObject>, Vec<DebrisObject>) =
                catalog::load(store)?.into_iter().partition(|o| match object_type {
                    None => true,
                    Some(TypeFilter::Payload) => o.object_type == ObjectType::Payload,
                    Some(TypeFilter::RocketBody) => o.object_type == ObjectType::RocketBody,
                });
            let excluded: BTreeSet<&CosparId> = excluded.iter().map(|o| &o.cospar_id).collect();
            let mut raw = survival::parse_events(&read_text(events)?).map_err(validation)?;
            raw.retain(|e| !excluded.contains(e.subject()));
            let targets = target
                .iter()
                .map(|t| t.parse::<BreakupClass>())
                .collect::<Result<BTreeSet<_>, _>>()
                .map_err(validation)?;
            let method: CiMethod = ci.parse().map_err(validation)?;
            let cohort = survival::build_cohort(&objects, &raw, &targets, ctx.cfg.window_end).map_err(validation)?;
            let curve = survival::kaplan_meier(&cohort).map_err(validation)?;
            let curve = survival::greenwood_ci(&curve, *alpha, method).map_err(validation)?;
            emit(common, "survival.csv", survival::curve_to_csv(&curve).as_bytes(), out)
        }
        Command::Assess { store, probabilities } => {
            let ctx = context(common)?;
            let objects = catalog::load(store)?;
            let assessments = assess_all(&objects, probabilities, &ctx.cfg)?;
            let (name, body) = render_assessments(&objects, &assessments, common.format, common.verbose);
            emit(common, name, body.as_bytes(), out)
        }
        Command::Classify {
            store,
            probabilities,
            batch_size,
        } => run_classify(common, store, probabilities, *batch_size, out),
        Command::Report {
            store,
            probabilities,
            lo_pct,
            hi_pct,
        } => {
            let ctx = context(common)?;
            let objects = catalog::load(store)?;
            let assessments = assess_all(&objects, probabilities, &ctx.cfg)?;
            let results = classify_all(&objects, &assessments, &ctx)?;
            let summary =
                report::summarize(&results, &assessments, &objects, &ctx.cfg, *lo_pct, *hi_pct).map_err(validation)?;
            match (common.format, &common.output) {
                (Format::Csv, Some(_)) => {
                    for (name, body) in summary.csv_tables() {
                        emit(common, &format!("report_{name}.csv"), body.as_bytes(), out)?;
                    }
                    Ok(())
                }
                (Format::Csv, None) => emit(common, "report.csv", summary.to_csv().as_bytes(), out),
                (Format::Json, _) => emit(common, "report.json", summary.to_json().as_bytes(), out),
                (Format::Table, _) => emit(common, "report.txt", summary.to_table().as_bytes(), out),
            }
        }
        Command::Explain {
            id,
            store,
            probabilities,
        } => {
            let ctx = context(common)?;
            let id = CosparId::parse(id).map_err(validation)?;
            let objects = catalog::load(store)?;
            let object = objects
                .iter()
                .find(|o| o.cospar_id == id)
                .ok_or_else(|| validation(format!("no object {id} in {}", store.display())))?;
            let one = std::slice::from_ref(object);
            let assessments = assess_all(one, probabilities, &ctx.cfg)?;
            let results = classify_all(one, &assessments, &ctx)?;
            let mut text = classifier::explain(&results[0]);
            if common.verbose {
                text.push_str("\ncriticality\n");
                for line in &assessments[0].rationale {
                    text.push_str(&format!("  {line}\n"));
                }
            }
            emit(common, &format!("explain_{id}.txt"), text.as_bytes(), out)
        }
    }
}

fn run_ingest(
    common: &Common,
    pages: &[PathBuf],
    annotations: &Path,
    reference: Option<&Path>,
    follow_links: bool,
    store: &Path,
) -> Result<(), CliError> {
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for page_path in pages {
        let page = if follow_links {
            let base = page_path.parent().map(Path::to_path_buf).unwrap_or_default();
            let first = page_path.to_string_lossy().into_owned();
            ingest::fetch_all_pages(&first, |link| {
                let path = if link == first {
                    PathBuf::from(link)
                } else {
                    base.join(link)
                };
                fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))
            })?
        } else {
            let page = ingest::parse_structured_document(&read(page_path)?)?;
            if let Some(next) = &page.next {
                diagnostics.push(Diagnostic {
                    source: "structured".into(),
                    location: page_path.display().to_string(),
                    message: format!("links.next {next:?} not followed"),
                });
            }
            page
        };
        records.extend(page.records);
        diagnostics.extend(page.diagnostics);
    }
    let (notes, notes_diagnostics) = ingest::parse_annotations(&read(annotations)?)?;
    diagnostics.extend(notes_diagnostics);
    let mut merged = ingest::merge(&records, &notes)?;
    diagnostics.extend(merged.diagnostics.iter().cloned());
    if let Some(path) = reference {
        let values = ingest::parse_reference(&read(path)?)?;
        diagnostics.extend(ingest::apply_reference(&mut merged.objects, &values)?);
    }
    for (side, ids) in [
        ("catalog", &merged.unmatched_structured),
        ("annotations", &merged.unmatched_annotations),
    ] {
        if !ids.is_empty() {
            let list: Vec<&str> = ids.iter().map(CosparId::as_str).collect();
            eprintln!("unmatched in {side}: {}", list.join(" "));
        }
        for id in ids.iter() {
            diagnostics.push(Diagnostic {
                source: "merge".into(),
                location: id.to_string(),
                message: format!("present only in {side}"),
            });
        }
    }
    if common.verbose {
        for d in &diagnostics {
            eprintln!("{} {}: {}", d.source, d.location, d.message);
        }
    }
    write_diagnostics(common, &diagnostics)?;
    let n = catalog::store(&merged.objects, store)?;
    eprintln!("stored {n} objects in {}", store.display());
    Ok(())
}

fn load_curve(path: &Option<PathBuf>) -> Result<Option<SurvivalCurve<f64>>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => survival::curve_from_csv(&read_text(p)?)
            .map(Some)
            .map_err(|e| CliError::new(ErrorKind::Schema, format!("curve {}: {e}", p.display()))),
    }
}

/// Scores every object; the probability comes from the record, else from
/// the curve for the object's type.
pub fn assess_all(
    objects: &[DebrisObject],
    probabilities: &Probabilities,
    cfg: &ThresholdConfig,
) -> Result<Vec<CriticalityAssessment>, CliError> {
    let payload = load_curve(&probabilities.payload_curve)?;
    let rocket_body = load_curve(&probabilities.rocket_body_curve)?;
    objects
        .iter()
        .map(|object| {
            let curve = match object.object_type {
                ObjectType::Payload => payload.as_ref(),
                ObjectType::RocketBody => rocket_body.as_ref(),
            };
            let age = object.age_at(cfg.window_end).map_err(validation)?;
            let estimate = curve.map(|c| survival::breakup_probability(c, &age));
            let (p, note) = criticality::resolve_probability(object, estimate).map_err(validation)?;
            let mut assessment = criticality::assess(object, p, cfg).map_err(validation)?;
            if let Some(note) = note {
                assessment.rationale.push(note);
            }
            Ok(assessment)
        })
        .collect()
}

fn classify_all(
    objects: &[DebrisObject],
    assessments: &[CriticalityAssessment],
    ctx: &Context,
) -> Result<Vec<ClassificationResult>, CliError> {
    objects
        .iter()
        .zip(assessments)
        .map(|(o, a)| {
            let p = classifier::profile(o, a, &ctx.cfg).map_err(validation)?;
            Ok(classifier::classify(&p, &ctx.rules.rules))
        })
        .collect()
}

fn render_assessments(
    objects: &[DebrisObject],
    assessments: &[CriticalityAssessment],
    format: Format,
    verbose: bool,
) -> (&'static str, String) {
    match format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = assessments
                .iter()
                .map(|a| {
                    let mut v = json!({
                        "cospar_id": a.cospar_id, "SN": a.sn, "PN": a.pn, "CN": a.cn, "level": a.level.token(),
                    });
                    if verbose {
                        v["rationale"] = json!(a.rationale);
                    }
                    v
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
            s.push('\n');
            ("assessments.json", s)
        }
        Format::Csv => {
            let mut s = String::from(if verbose {
                "cospar_id,SN,PN,CN,level,rationale\n"
            } else {
                "cospar_id,SN,PN,CN,level\n"
            });
            for a in assessments {
                s.push_str(&format!(
                    "{},{},{},{},{}",
                    a.cospar_id,
                    a.sn,
                    a.pn,
                    a.cn,
                    a.level.token()
                ));
                if verbose {
                    s.push_str(&format!(",\"{}\"", a.rationale.join(" | ").replace('"', "\"\"")));
                }
                s.push('\n');
            }
            ("assessments.csv", s)
        }
        Format::Table => {
            let mut s = format!(
                "{:<12} {:<4} {:>2} {:>2} {:>2}  {}\n",
                "cospar_id", "type", "SN", "PN", "CN", "level"
            );
            for (o, a) in objects.iter().zip(assessments) {
                s.push_str(&format!(
                    "{:<12} {:<4} {:>2} {:>2} {:>2}  {}\n",
                    a.cospar_id,
                    o.object_type.abbreviation(),
                    a.sn,
                    a.pn,
                    a.cn,
                    a.level
                ));
                if verbose {
                    for line in &a.rationale {
                        s.push_str(&format!("    {line}\n"));
                    }
                }
            }
            ("assessments.txt", s)
        }
    }
}

/// One streamed classification record.
#[derive(Debug, Serialize)]
struct ResultLine<'a> {
    cospar_id: &'a CosparId,
    object_type: &'static str,
    level: &'static str,
    cn: u8,
    regime: String,
    matched: &'a BTreeSet<String>,
    unclassified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    traces: Option<&'a [classifier::RuleTrace]>,
}

fn run_classify(
    common: &Common,
    store: &Path,
    probabilities: &Probabilities,
    batch_size: usize,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if batch_size == 0 {
        return Err(validation("batch size must be at least 1"));
    }
    let ctx = context(common)?;
    let objects = catalog::load(store)?;
    let assessments = assess_all(&objects, probabilities, &ctx.cfg)?;

    let io_err = |e: io::Error| CliError::new(ErrorKind::Io, format!("cannot write results: {e}"));
    let (mut temp, target) = match &common.output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err)?;
            (
                Some(tempfile::NamedTempFile::new_in(dir).map_err(io_err)?),
                Some(dir.join("results.jsonl")),
            )
        }
        None => (None, None),
    };
    let mut batches = 0;
    for (objects, assessments) in objects.chunks(batch_size).zip(assessments.chunks(batch_size)) {
        batches += 1;
        let results = classify_all(objects, assessments, &ctx)?;
        let mut chunk = String::new();
        for ((o, a), r) in objects.iter().zip(assessments).zip(&results) {
            let line = ResultLine {
                cospar_id: &o.cospar_id,
                object_type: o.object_type.abbreviation(),
                level: a.level.token(),
                cn: a.cn,
                regime: classifier::attitude_regime(o.angular_rate_deg_s, &ctx.cfg)
                    .map_err(validation)?
                    .to_string(),
                matched: &r.matched,
                unclassified: r.is_unclassified(),
                traces: common.verbose.then_some(r.traces.as_slice()),
            };
            chunk.push_str(&serde_json::to_string(&line).expect("result serializes"));
            chunk.push('\n');
        }
        match temp.as_mut() {
            Some(file) => file.write_all(chunk.as_bytes()).map_err(io_err)?,
            None => {
                out.write_all(chunk.as_bytes()).map_err(io_err)?;
                out.flush().map_err(io_err)?;
            }
        }
        if common.verbose {
            eprintln!("batch {batches}: {} objects", results.len());
        }
    }
    if let (Some(file), Some(target)) = (temp, target) {
        file.persist(&target)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("cannot write {}: {e}", target.display())))?;
    }
    eprintln!("classified {} objects in {batches} batch(es)", objects.len());
    Ok(())
}
