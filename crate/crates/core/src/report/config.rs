//! Run configuration files.
//!
//! A config is a flat TOML table. Sweep keys (`theta`, `cost_ratio`, `u_pen`,
//! `lead_hours`) accept a scalar or a list; lists are cross-producted into
//! task combinations. Relative paths resolve against the config file's
//! directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;
use crate::diagnostics::{CrpsEstimator, DiagnosticsConfig};
use crate::grid_store::{DataFormat, Variable};
use crate::tasks::{
    FrostTaskParams, HeatTaskParams, Task, TaskKind, WindTaskParams, WindTransformParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format `{other}` (csv|json)")),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    one_or_many(d).map(Some)
}

fn yes() -> bool {
    true
}

fn default_standby() -> f64 {
    WindTaskParams::DEFAULT_STANDBY_COST
}

fn default_pit_bins() -> usize {
    crate::diagnostics::DEFAULT_PIT_BINS
}

fn default_out() -> PathBuf {
    PathBuf::from("report")
}

fn default_hub_height() -> f64 {
    WindTransformParams::default().hub_height_m
}

fn default_alpha() -> f64 {
    WindTransformParams::default().alpha
}

fn default_v_in() -> f64 {
    WindTransformParams::default().v_in
}

fn default_v_rated() -> f64 {
    WindTransformParams::default().v_rated
}

fn default_v_off() -> f64 {
    WindTransformParams::default().v_off
}

/// Settings of one `evaluate` or `diagnostics` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ensemble: PathBuf,
    pub observations: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    /// Overrides the format implied by the file extensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_format: Option<DataFormat>,
    /// Defaults to the task's variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<Variable>,

    pub task: TaskKind,
    /// °C
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub cost_ratio: Vec<f64>,
    #[serde(default, deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub u_pen: Vec<f64>,
    #[serde(default = "default_standby")]
    pub standby_cost: f64,
    #[serde(default = "default_hub_height")]
    pub hub_height_m: f64,
    #[serde(default = "default_alpha")]
    pub shear_alpha: f64,
    #[serde(default = "default_v_in")]
    pub v_in: f64,
    #[serde(default = "default_v_rated")]
    pub v_rated: f64,
    #[serde(default = "default_v_off")]
    pub v_off: f64,

    /// All ensemble lead times when absent.
    #[serde(
        default,
        deserialize_with = "opt_one_or_many",
        skip_serializing_if = "Option::is_none"
    )]
    pub lead_hours: Option<Vec<u32>>,

    #[serde(default = "yes")]
    pub diagnostics: bool,
    #[serde(default)]
    pub crps_estimator: CrpsEstimator,
    #[serde(default = "yes")]
    pub ssr_correction: bool,
    #[serde(default = "default_pit_bins")]
    pub pit_bins: usize,
    /// Weight grid points by cos(latitude) in lead-time aggregates.
    #[serde(default)]
    pub lat_weighting: bool,
    #[serde(default)]
    pub seed: u64,

    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Also write one row per decision.
    #[serde(default)]
    pub write_records: bool,
    /// Worker threads, 0 for all cores. Does not change results.
    #[serde(default)]
    pub threads: usize,

    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> ReportError {
    ReportError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ReportError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml_str(&text, &base)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn variable(&self) -> Variable {
        self.variable.unwrap_or(self.task.variable())
    }

    pub fn input_format(&self, path: &Path) -> Result<DataFormat, ReportError> {
        match self.input_format {
            Some(f) => Ok(f),
            None => DataFormat::from_path(path).ok_or_else(|| {
                config_err(format!(
                    "cannot tell the format of {} (use .csv/.dcl or set input_format)",
                    path.display()
                ))
            }),
        }
    }

    pub fn transform_params(&self) -> WindTransformParams {
        WindTransformParams {
            hub_height_m: self.hub_height_m,
            alpha: self.shear_alpha,
            v_in: self.v_in,
            v_rated: self.v_rated,
            v_off: self.v_off,
        }
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            estimator: self.crps_estimator,
            pit_bins: self.pit_bins,
            ssr_correction: self.ssr_correction,
            seed: self.seed,
        }
    }

    /// Every task parameterization of the sweep: θ outer, c inner.
    pub fn task_combos(&self) -> Result<Vec<Task>, ReportError> {
        let unused = |key: &str, v: &[f64]| {
            if v.is_empty() {
                Ok(())
            } else {
                Err(config_err(format!("`{key}` does not apply to the {} task", self.task)))
            }
        };
        let needed = |key: &str, v: &[f64]| {
            if v.is_empty() {
                Err(config_err(format!("the {} task needs `{key}`", self.task)))
            } else {
                Ok(())
            }
        };
        let mut combos = Vec::new();
        match self.task {
            TaskKind::Frost | TaskKind::Heat => {
                needed("theta", &self.theta)?;
                needed("cost_ratio", &self.cost_ratio)?;
                unused("u_pen", &self.u_pen)?;
                for &theta in &self.theta {
                    for &cost_ratio in &self.cost_ratio {
                        combos.push(match self.task {
                            TaskKind::Frost => Task::Frost(FrostTaskParams { theta, cost_ratio }),
                            _ => Task::Heat(HeatTaskParams { theta, cost_ratio }),
                        });
                    }
                }
            }
            TaskKind::Wind => {
                needed("u_pen", &self.u_pen)?;
                unused("theta", &self.theta)?;
                unused("cost_ratio", &self.cost_ratio)?;
                for &u_pen in &self.u_pen {
                    combos.push(Task::Wind {
                        task: WindTaskParams {
                            u_pen,
                            standby_cost: self.standby_cost,
                        },
                        transform: self.transform_params(),
                    });
                }
            }
        }
        for task in &combos {
            task.cost_function()
                .map_err(|e| config_err(format!("{}: {e}", combo_slug(task))))?;
        }
        let mut slugs: Vec<_> = combos.iter().map(combo_slug).collect();
        slugs.sort();
        if slugs.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("sweep lists contain duplicate values"));
        }
        Ok(combos)
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<(), ReportError> {
        self.task_combos()?;
        if self.variable() != self.task.variable() {
            return Err(config_err(format!(
                "the {} task reads {}, not {}",
                self.task,
                self.task.variable(),
                self.variable()
            )));
        }
        if let Some(leads) = &self.lead_hours {
            if leads.is_empty() {
                return Err(config_err("`lead_hours` selects no lead times"));
            }
        }
        if self.pit_bins == 0 {
            return Err(config_err("`pit_bins` must be at least 1"));
        }
        let mut inputs = vec![("ensemble", &self.ensemble), ("observations", &self.observations)];
        if let Some(m) = &self.mask {
            inputs.push(("mask", m));
        }
        for (key, p) in inputs {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(config_err(format!("{key} file {} does not exist", full.display())));
            }
            if key != "mask" {
                self.input_format(&full)?;
            }
        }
        Ok(())
    }

    fn canonical(&self, drop: &[&str]) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            for key in drop {
                map.remove(*key);
            }
        }
        v
    }

    /// Settings that shape results, as canonical JSON. Output location and
    /// thread count are left out.
    pub fn canonical_json(&self) -> serde_json::Value {
        self.canonical(&["out", "threads"])
    }

    /// SHA-256 of [`canonical_json`](Self::canonical_json); independent of
    /// key order in the file.
    pub fn config_hash(&self) -> String {
        sha256_hex(&self.canonical_json().to_string())
    }

    /// Settings two reports must share to be compared: everything except
    /// input data, output options and the PIT seed.
    pub fn comparison_json(&self) -> serde_json::Value {
        self.canonical(&[
            "out",
            "threads",
            "ensemble",
            "observations",
            "mask",
            "input_format",
            "output_format",
            "write_records",
            "seed",
        ])
    }

    pub fn comparison_fingerprint(&self) -> String {
        sha256_hex(&self.comparison_json().to_string())
    }
}

pub(crate) fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Short stable name of a task parameterization, e.g. `frost_theta0_c0.5`.
pub fn combo_slug(task: &Task) -> String {
    match task {
        Task::Frost(p) => format!("frost_theta{}_c{}", p.theta, p.cost_ratio),
        Task::Heat(p) => format!("heat_theta{}_c{}", p.theta, p.cost_ratio),
        Task::Wind { task, .. } => format!("wind_u{}", task.u_pen),
    }
}

/// (theta, cost_ratio, u_pen) columns of a combo.
pub fn combo_columns(task: &Task) -> (Option<f64>, Option<f64>, Option<f64>) {
    match task {
        Task::Frost(p) => (Some(p.theta), Some(p.cost_ratio), None),
        Task::Heat(p) => (Some(p.theta), Some(p.cost_ratio), None),
        Task::Wind { task, .. } => (None, None, Some(task.u_pen)),
    }
}
