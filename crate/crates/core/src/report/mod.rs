//! Config-driven runs and their report files.
//!
//! A report directory holds plot-ready tables plus `metadata.json`:
//!
//! | file | rows |
//! |---|---|
//! | `aggregates.{csv,json}` | one per (task combo, lead) |
//! | `points.{csv,json}` | one per (task combo, lead, grid point) |
//! | `diagnostics.{csv,json}` | one per lead |
//! | `pit_histogram.{csv,json}` | one per (lead, bin) |
//! | `crps_points.{csv,json}` | one per (lead, grid point) |
//! | `records_<combo>.csv` | one per decision, when `write_records` is set |
//!
//! Everything is computed before the first file is written. If writing
//! fails, files written so far are removed.

mod compare;
mod config;
mod synth;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{
    run_compare, ComparisonReport, ComparisonRow, DiagnosticsComparisonRow, PointComparisonRow,
};
pub use config::{combo_columns, combo_slug, OutputFormat, RunConfig};
pub use synth::{synth_to_dir, SynthConfig, SynthOutput};

use crate::decision::{
    aggregate, evaluate, write_records_csv, AggregateResult, DecisionError, DecisionRecord, GroupBy,
    Weighting,
};
use crate::diagnostics::{summarize, DiagnosticsError, DiagnosticsSummary};
use crate::grid_store::{
    align, align_leads, load_ensemble, load_mask, load_observations, EnsembleDataset, GridError,
    ObservationDataset, RegionMask, Schema, Variable,
};
use crate::synthetic::SyntheticError;
use crate::tasks::{Task, TaskError, TaskKind};

pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("config error: {0}")]
    Config(String),
    #[error("reports are not comparable: {0}")]
    ConfigMismatch(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ReportError {
    /// Process exit code: 2 config, 3 data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) | ReportError::ConfigMismatch(_) => 2,
            ReportError::Data(_) => 3,
            ReportError::Internal(_) => 4,
        }
    }
}

impl From<GridError> for ReportError {
    fn from(e: GridError) -> Self {
        ReportError::Data(e.to_string())
    }
}

impl From<DecisionError> for ReportError {
    fn from(e: DecisionError) -> Self {
        ReportError::Data(e.to_string())
    }
}

impl From<DiagnosticsError> for ReportError {
    fn from(e: DiagnosticsError) -> Self {
        ReportError::Data(e.to_string())
    }
}

impl From<TaskError> for ReportError {
    fn from(e: TaskError) -> Self {
        ReportError::Config(e.to_string())
    }
}

impl From<SyntheticError> for ReportError {
    fn from(e: SyntheticError) -> Self {
        match e {
            SyntheticError::Param(m) => ReportError::Config(m),
            other => ReportError::Data(other.to_string()),
        }
    }
}

fn internal(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Internal(format!("{}: {e}", path.display()))
}

/// Runs `f` on a pool of `threads` workers, or the global pool for 0.
pub fn with_threads<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T, ReportError> + Send,
) -> Result<T, ReportError> {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ReportError::Internal(format!("thread pool: {e}")))?
        .install(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub combo: String,
    pub task: TaskKind,
    pub theta: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub u_pen: Option<f64>,
    pub lead_hours: u32,
    pub count: usize,
    pub mean_expected_cost: f64,
    pub mean_observed_cost: f64,
    pub mean_cost_gap: f64,
    pub gap_of_means: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub combo: String,
    pub task: TaskKind,
    pub theta: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub u_pen: Option<f64>,
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub count: usize,
    pub mean_expected_cost: f64,
    pub mean_observed_cost: f64,
    pub mean_cost_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub lead_hours: u32,
    pub count: usize,
    pub mean_crps: f64,
    pub ssr: f64,
    pub pit_chi_square: f64,
    pub pit_p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitRow {
    pub lead_hours: u32,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpsPointRow {
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub count: usize,
    pub mean_crps: f64,
}

/// Decision results of one task parameterization.
#[derive(Debug, Clone)]
pub struct ComboResult {
    pub task: Task,
    pub slug: String,
    pub aggregates: Vec<AggregateResult>,
    pub points: Vec<AggregateResult>,
    pub records: Vec<DecisionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub generated_at: String,
    pub config_hash: String,
    pub comparison_fingerprint: String,
    pub variable: Variable,
    pub members: usize,
    pub cases_per_combo: usize,
    pub lead_hours: Vec<u32>,
    pub combos: Vec<String>,
    pub files: Vec<String>,
    pub config: serde_json::Value,
}

/// Everything a run produces, before it is written.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub combos: Vec<ComboResult>,
    pub diagnostics: Option<DiagnosticsSummary>,
    pub lead_hours: Vec<u32>,
    pub members: usize,
    pub cases_per_combo: usize,
    pub variable: Variable,
}

impl EvaluationReport {
    pub fn aggregate_rows(&self) -> Vec<AggregateRow> {
        let mut rows = Vec::new();
        for c in &self.combos {
            let (theta, cost_ratio, u_pen) = combo_columns(&c.task);
            for a in &c.aggregates {
                rows.push(AggregateRow {
                    combo: c.slug.clone(),
                    task: c.task.kind(),
                    theta,
                    cost_ratio,
                    u_pen,
                    lead_hours: a.lead_hours,
                    count: a.count,
                    mean_expected_cost: a.mean_expected_cost,
                    mean_observed_cost: a.mean_observed_cost,
                    mean_cost_gap: a.mean_cost_gap,
                    gap_of_means: a.gap_of_means(),
                });
            }
        }
        rows
    }

    pub fn point_rows(&self) -> Vec<PointRow> {
        let mut rows = Vec::new();
        for c in &self.combos {
            let (theta, cost_ratio, u_pen) = combo_columns(&c.task);
            for a in &c.points {
                let (lat, lon) = a.point.expect("grouped by point");
                rows.push(PointRow {
                    combo: c.slug.clone(),
                    task: c.task.kind(),
                    theta,
                    cost_ratio,
                    u_pen,
                    lead_hours: a.lead_hours,
                    lat,
                    lon,
                    count: a.count,
                    mean_expected_cost: a.mean_expected_cost,
                    mean_observed_cost: a.mean_observed_cost,
                    mean_cost_gap: a.mean_cost_gap,
                });
            }
        }
        rows
    }
}

fn diagnostics_rows(d: &DiagnosticsSummary) -> (Vec<DiagnosticsRow>, Vec<PitRow>, Vec<CrpsPointRow>) {
    let mut summary = Vec::new();
    let mut pit = Vec::new();
    for l in &d.leads {
        summary.push(DiagnosticsRow {
            lead_hours: l.lead_hours,
            count: l.count,
            mean_crps: l.mean_crps,
            ssr: l.ssr,
            pit_chi_square: l.pit.chi_square(),
            pit_p_value: l.pit.uniformity_p_value(),
        });
        let b = l.pit.bins();
        for (i, &count) in l.pit.counts().iter().enumerate() {
            pit.push(PitRow {
                lead_hours: l.lead_hours,
                bin: i,
                lower: i as f64 / b as f64,
                upper: (i + 1) as f64 / b as f64,
                count,
            });
        }
    }
    let points = d
        .points
        .iter()
        .map(|p| CrpsPointRow {
            lead_hours: p.lead_hours,
            lat: p.lat,
            lon: p.lon,
            count: p.count,
            mean_crps: p.mean_crps,
        })
        .collect();
    (summary, pit, points)
}

/// Input data of a run.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub ensemble: EnsembleDataset,
    pub observations: ObservationDataset,
    pub mask: RegionMask,
}

/// Loads the ensemble, observations and mask named by `config`.
pub fn load_inputs(config: &RunConfig) -> Result<RunInputs, ReportError> {
    let variable = config.variable();
    let ens_path = config.resolve(&config.ensemble);
    let obs_path = config.resolve(&config.observations);
    let schema = |p: &Path| -> Result<Schema, ReportError> {
        Ok(Schema {
            format: config.input_format(p)?,
            variable,
            grid: None,
        })
    };
    let ensemble = load_ensemble(&ens_path, &schema(&ens_path)?)
        .map_err(|e| ReportError::Data(format!("{}: {e}", ens_path.display())))?;
    let observations = load_observations(
        &obs_path,
        &schema(&obs_path)?.with_grid(ensemble.grid().clone()),
    )
    .map_err(|e| ReportError::Data(format!("{}: {e}", obs_path.display())))?;
    let mask = match &config.mask {
        Some(m) => {
            let p = config.resolve(m);
            load_mask(&p, ensemble.grid())
                .map_err(|e| ReportError::Data(format!("{}: {e}", p.display())))?
        }
        None => RegionMask::all(ensemble.grid()),
    };
    Ok(RunInputs {
        ensemble,
        observations,
        mask,
    })
}

fn weighting(config: &RunConfig) -> Weighting {
    if config.lat_weighting {
        Weighting::CosineLatitude
    } else {
        Weighting::Uniform
    }
}

/// Computes decision results (and diagnostics when enabled) on loaded data.
pub fn evaluate_inputs(
    config: &RunConfig,
    inputs: &RunInputs,
    decisions: bool,
    diagnostics: bool,
) -> Result<EvaluationReport, ReportError> {
    let combos = config.task_combos()?;
    let view = match &config.lead_hours {
        Some(leads) => align_leads(&inputs.ensemble, &inputs.observations, &inputs.mask, leads)?,
        None => align(&inputs.ensemble, &inputs.observations, &inputs.mask)?,
    };
    let mut results = Vec::new();
    if decisions {
        for task in combos {
            let cost_fn = task.cost_function()?;
            let transform = task.transform();
            let slug = combo_slug(&task);
            let records = evaluate(&view, &cost_fn, Some(transform.as_ref()))
                .map_err(|e| ReportError::Data(format!("{slug}: {e}")))?;
            let aggregates = aggregate(&records, GroupBy::Lead, weighting(config))?;
            let points = aggregate(&records, GroupBy::LeadAndPoint, Weighting::Uniform)?;
            results.push(ComboResult {
                task,
                slug,
                aggregates,
                points,
                records,
            });
        }
    }
    let diagnostics = if diagnostics {
        Some(summarize(&view, &config.diagnostics_config())?)
    } else {
        None
    };
    Ok(EvaluationReport {
        combos: results,
        diagnostics,
        lead_hours: view.leads().to_vec(),
        members: view.members(),
        cases_per_combo: view.len(),
        variable: view.variable(),
    })
}

/// Validates, loads and evaluates without writing anything.
pub fn evaluate_config(config: &RunConfig) -> Result<EvaluationReport, ReportError> {
    config.validate()?;
    with_threads(config.threads, || {
        let inputs = load_inputs(config)?;
        evaluate_inputs(config, &inputs, true, config.diagnostics)
    })
}

/// Tracks files written into a report directory so a failed run leaves
/// nothing behind.
pub(crate) struct ReportWriter {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    format: OutputFormat,
}

impl ReportWriter {
    pub(crate) fn new(dir: &Path, format: OutputFormat) -> Result<Self, ReportError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| internal(dir, e))?;
        Ok(ReportWriter {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            format,
        })
    }

    /// Registers `name` for rollback and returns its full path.
    pub(crate) fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub(crate) fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<(), ReportError> {
        let name = format!("{stem}.{}", self.format.extension());
        let path = self.file(&name);
        match self.format {
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_path(&path).map_err(|e| internal(&path, e))?;
                for r in rows {
                    w.serialize(r).map_err(|e| internal(&path, e))?;
                }
                w.flush().map_err(|e| internal(&path, e))
            }
            OutputFormat::Json => {
                let text = serde_json::to_string_pretty(rows).map_err(|e| internal(&path, e))?;
                fs::write(&path, text + "\n").map_err(|e| internal(&path, e))
            }
        }
    }

    pub(crate) fn records(&mut self, slug: &str, records: &[DecisionRecord]) -> Result<(), ReportError> {
        let path = self.file(&format!("records_{slug}.csv"));
        let file = fs::File::create(&path).map_err(|e| internal(&path, e))?;
        write_records_csv(records, io::BufWriter::new(file)).map_err(|e| internal(&path, e))
    }

    pub(crate) fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ReportError> {
        let path = self.file(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| internal(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| internal(&path, e))
    }

    pub(crate) fn file_names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name()?.to_str().map(String::from))
            .collect()
    }

    /// Removes every file written so far.
    pub(crate) fn discard(self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Runs `body` against a fresh writer and rolls back on failure.
pub(crate) fn write_all(
    dir: &Path,
    format: OutputFormat,
    body: impl FnOnce(&mut ReportWriter) -> Result<(), ReportError>,
) -> Result<Vec<String>, ReportError> {
    let mut w = ReportWriter::new(dir, format)?;
    match body(&mut w) {
        Ok(()) => Ok(w.file_names()),
        Err(e) => {
            w.discard();
            Err(e)
        }
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Writes `report` into the config's output directory.
pub fn write_report(
    config: &RunConfig,
    report: &EvaluationReport,
    command: &str,
) -> Result<PathBuf, ReportError> {
    let dir = config.out_dir();
    write_all(&dir, config.output_format, |w| {
        if !report.combos.is_empty() {
            w.table("aggregates", &report.aggregate_rows())?;
            w.table("points", &report.point_rows())?;
            if config.write_records {
                for c in &report.combos {
                    w.records(&c.slug, &c.records)?;
                }
            }
        }
        if let Some(d) = &report.diagnostics {
            let (summary, pit, points) = diagnostics_rows(d);
            w.table("diagnostics", &summary)?;
            w.table("pit_histogram", &pit)?;
            w.table("crps_points", &points)?;
        }
        let mut files = w.file_names();
        files.push(METADATA_FILE.to_string());
        let meta = Metadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at: now(),
            config_hash: config.config_hash(),
            comparison_fingerprint: config.comparison_fingerprint(),
            variable: report.variable,
            members: report.members,
            cases_per_combo: report.cases_per_combo,
            lead_hours: report.lead_hours.clone(),
            combos: report.combos.iter().map(|c| c.slug.clone()).collect(),
            files,
            config: config.canonical_json(),
        };
        w.json(METADATA_FILE, &meta)
    })?;
    Ok(dir)
}

/// `evaluate`: decisions for every task combo, plus diagnostics when
/// enabled.
pub fn run_evaluate(config: &RunConfig) -> Result<EvaluationReport, ReportError> {
    let report = evaluate_config(config)?;
    write_report(config, &report, "evaluate")?;
    Ok(report)
}

/// `diagnostics`: CRPS, SSR and PIT only.
pub fn run_diagnostics(config: &RunConfig) -> Result<DiagnosticsSummary, ReportError> {
    config.validate()?;
    let report = with_threads(config.threads, || {
        let inputs = load_inputs(config)?;
        evaluate_inputs(config, &inputs, false, true)
    })?;
    write_report(config, &report, "diagnostics")?;
    Ok(report.diagnostics.expect("diagnostics requested"))
}

/// Reads a table written by a report, whichever format it was written in.
pub fn read_table<T: DeserializeOwned>(dir: &Path, stem: &str) -> Result<Option<Vec<T>>, ReportError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    if csv_path.is_file() {
        let mut r = csv::Reader::from_path(&csv_path).map_err(|e| data_err(&csv_path, e))?;
        let rows = r
            .deserialize()
            .collect::<Result<Vec<T>, _>>()
            .map_err(|e| data_err(&csv_path, e))?;
        Ok(Some(rows))
    } else if json_path.is_file() {
        let text = fs::read_to_string(&json_path).map_err(|e| data_err(&json_path, e))?;
        let rows = serde_json::from_str(&text).map_err(|e| data_err(&json_path, e))?;
        Ok(Some(rows))
    } else {
        Ok(None)
    }
}

pub fn read_metadata(dir: &Path) -> Result<Metadata, ReportError> {
    let path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| ReportError::Data(format!("{} is not a report: {e}", dir.display())))?;
    serde_json::from_str(&text).map_err(|e| data_err(&path, e))
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Data(format!("{}: {e}", path.display()))
}
