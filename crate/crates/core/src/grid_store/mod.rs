//! Gridded ensemble forecasts, observations and region masks.
//!
//! Internal conventions: latitudes descend (north to south), longitudes live in
//! `[0, 360)` and increase eastward modulo 360, so a grid may straddle the prime
//! meridian. Temperatures are stored in Kelvin and wind speeds in m/s.

mod align;
mod binary;
mod csv_io;
mod mask;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align, align_leads, AlignedView, Case};
pub use binary::{
    read_ensemble_binary, read_observations_binary, write_ensemble_binary,
    write_observations_binary,
};
pub use csv_io::{
    parse_timestamp, read_ensemble_csv, read_observations_csv, write_ensemble_csv,
    write_observations_csv, format_timestamp,
};
pub use mask::{load_mask, write_mask_csv};

/// Tolerance used when matching a coordinate against a grid coordinate.
pub const COORD_TOLERANCE: f64 = 1e-6;
/// Tolerance on grid spacing.
pub const SPACING_TOLERANCE: f64 = 1e-9;
/// Longest supported lead time, in hours.
pub const MAX_LEAD_HOURS: u32 = 360;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mask point ({lat}, {lon}) is not on the grid")]
    Alignment { lat: f64, lon: f64 },
    #[error("mask selects no grid points")]
    EmptyMask,
    #[error("missing observations for {} (init, lead) pairs, first: {}", .missing.len(), .missing.first().map(|m| m.to_string()).unwrap_or_default())]
    Coverage { missing: Vec<MissingObservation> },
}

impl GridError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        GridError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// An (init, lead) pair whose valid time has no observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingObservation {
    pub init_time: DateTime<Utc>,
    pub lead_hours: u32,
    pub valid_time: DateTime<Utc>,
}

impl fmt::Display for MissingObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "init {} + {}h (valid {})",
            format_timestamp(&self.init_time),
            self.lead_hours,
            format_timestamp(&self.valid_time)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// 2 m temperature, Kelvin.
    #[serde(rename = "temperature_2m")]
    Temperature2m,
    /// 10 m wind speed, m/s.
    #[serde(rename = "wind_speed_10m")]
    WindSpeed10m,
}

impl Variable {
    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Temperature2m => "temperature_2m",
            Variable::WindSpeed10m => "wind_speed_10m",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Variable::Temperature2m => 0,
            Variable::WindSpeed10m => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Variable::Temperature2m),
            1 => Some(Variable::WindSpeed10m),
            _ => None,
        }
    }

    fn check_value(self, value: f64) -> Result<(), GridError> {
        if !value.is_finite() {
            return Err(GridError::Validation(format!("non-finite value {value}")));
        }
        if self == Variable::WindSpeed10m && value < 0.0 {
            return Err(GridError::Validation(format!(
                "negative wind speed {value} m/s"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temperature_2m" => Ok(Variable::Temperature2m),
            "wind_speed_10m" => Ok(Variable::WindSpeed10m),
            other => Err(format!("unknown variable `{other}`")),
        }
    }
}

/// On-disk layout of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Binary,
}

impl DataFormat {
    /// `.csv` is CSV, `.dcl`/`.bin` are binary.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(DataFormat::Csv),
            "dcl" | "bin" => Some(DataFormat::Binary),
            _ => None,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "binary" => Ok(DataFormat::Binary),
            other => Err(format!("unknown data format `{other}`")),
        }
    }
}

/// What a loader expects to find in a file.
#[derive(Debug, Clone)]
pub struct Schema {
    pub format: DataFormat,
    pub variable: Variable,
    /// When set, the file's coordinates must match this grid exactly.
    pub grid: Option<GridSpec>,
}

impl Schema {
    pub fn csv(variable: Variable) -> Self {
        Schema {
            format: DataFormat::Csv,
            variable,
            grid: None,
        }
    }

    pub fn binary(variable: Variable) -> Self {
        Schema {
            format: DataFormat::Binary,
            variable,
            grid: None,
        }
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = Some(grid);
        self
    }
}

pub fn normalize_lon(lon: f64) -> f64 {
    let l = lon.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if l >= 360.0 {
        0.0
    } else {
        l
    }
}

fn circular_step(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(360.0)
}

/// Regular latitude/longitude grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lats: Vec<f64>,
    lons: Vec<f64>,
    resolution_deg: f64,
}

impl GridSpec {
    /// Builds a grid from coordinates in any order; latitudes are sorted
    /// descending and longitudes normalized and ordered eastward.
    pub fn new(lats: Vec<f64>, lons: Vec<f64>, resolution_deg: f64) -> Result<Self, GridError> {
        if !(resolution_deg.is_finite() && resolution_deg > 0.0) {
            return Err(GridError::Validation(format!(
                "grid resolution must be positive, got {resolution_deg}"
            )));
        }
        if lats.is_empty() || lons.is_empty() {
            return Err(GridError::Validation("grid has an empty axis".into()));
        }
        let mut lats = lats;
        for &lat in &lats {
            if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
                return Err(GridError::Validation(format!(
                    "latitude {lat} outside [-90, 90]"
                )));
            }
        }
        lats.sort_by(|a, b| b.total_cmp(a));
        for w in lats.windows(2) {
            let step = w[0] - w[1];
            if (step - resolution_deg).abs() > SPACING_TOLERANCE {
                return Err(GridError::Validation(format!(
                    "latitude spacing {step} between {} and {} differs from resolution {resolution_deg}",
                    w[0], w[1]
                )));
            }
        }

        let mut lons: Vec<f64> = lons
            .into_iter()
            .map(|l| {
                if l.is_finite() {
                    Ok(normalize_lon(l))
                } else {
                    Err(GridError::Validation(format!("non-finite longitude {l}")))
                }
            })
            .collect::<Result<_, _>>()?;
        lons.sort_by(f64::total_cmp);
        if lons.windows(2).any(|w| w[1] - w[0] <= SPACING_TOLERANCE) {
            return Err(GridError::Validation("duplicate longitude".into()));
        }
        if lons.len() > 1 {
            // Start the eastward sequence right after the widest gap so grids
            // crossing the prime meridian keep uniform spacing.
            let n = lons.len();
            let widest = (0..n)
                .max_by(|&i, &j| {
                    circular_step(lons[i], lons[(i + 1) % n])
                        .total_cmp(&circular_step(lons[j], lons[(j + 1) % n]))
                })
                .unwrap_or(n - 1);
            lons.rotate_left((widest + 1) % n);
            for w in lons.windows(2) {
                let step = circular_step(w[0], w[1]);
                if (step - resolution_deg).abs() > SPACING_TOLERANCE {
                    return Err(GridError::Validation(format!(
                        "longitude spacing {step} between {} and {} differs from resolution {resolution_deg}",
                        w[0], w[1]
                    )));
                }
            }
        }
        Ok(GridSpec {
            lats,
            lons,
            resolution_deg,
        })
    }

    /// Inclusive regular grid between two corners.
    pub fn regular(
        lat_start: f64,
        lat_end: f64,
        lon_start: f64,
        lon_end: f64,
        resolution_deg: f64,
    ) -> Result<Self, GridError> {
        let axis = |a: f64, b: f64| -> Result<Vec<f64>, GridError> {
            let span = (b - a).abs();
            let steps = (span / resolution_deg).round();
            if (steps * resolution_deg - span).abs() > SPACING_TOLERANCE {
                return Err(GridError::Validation(format!(
                    "span {a}..{b} is not a multiple of {resolution_deg}"
                )));
            }
            let sign = if b >= a { 1.0 } else { -1.0 };
            Ok((0..=steps as usize)
                .map(|k| a + sign * k as f64 * resolution_deg)
                .collect())
        };
        if !(resolution_deg > 0.0) {
            return Err(GridError::Validation(format!(
                "grid resolution must be positive, got {resolution_deg}"
            )));
        }
        GridSpec::new(
            axis(lat_start, lat_end)?,
            axis(lon_start, lon_end)?,
            resolution_deg,
        )
    }

    /// Infers a grid from the distinct coordinates found in a file.
    pub fn infer(lats: &[f64], lons: &[f64]) -> Result<Self, GridError> {
        let mut la = dedup(lats.to_vec());
        la.sort_by(|a, b| b.total_cmp(a));
        let lo = dedup(lons.iter().map(|&l| normalize_lon(l)).collect());
        let resolution = if la.len() > 1 {
            la[0] - la[1]
        } else if lo.len() > 1 {
            // `lo` is sorted; the smallest step is the spacing
            lo.windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
        } else {
            return Err(GridError::Validation(
                "cannot infer grid resolution from a single grid point; declare the grid".into(),
            ));
        };
        GridSpec::new(la, lo, resolution)
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    pub fn resolution_deg(&self) -> f64 {
        self.resolution_deg
    }

    pub fn n_lat(&self) -> usize {
        self.lats.len()
    }

    pub fn n_lon(&self) -> usize {
        self.lons.len()
    }

    pub fn n_points(&self) -> usize {
        self.lats.len() * self.lons.len()
    }

    pub fn lat_index(&self, lat: f64) -> Option<usize> {
        self.lats
            .iter()
            .position(|&g| (g - lat).abs() <= COORD_TOLERANCE)
    }

    pub fn lon_index(&self, lon: f64) -> Option<usize> {
        let lon = normalize_lon(lon);
        self.lons.iter().position(|&g| {
            let d = (g - lon).abs();
            d <= COORD_TOLERANCE || (360.0 - d) <= COORD_TOLERANCE
        })
    }

    /// Same coordinates within [`COORD_TOLERANCE`].
    pub fn same_as(&self, other: &GridSpec) -> bool {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| (x - y).abs() <= COORD_TOLERANCE)
        };
        close(&self.lats, &other.lats)
            && close(&self.lons, &other.lons)
            && (self.resolution_deg - other.resolution_deg).abs() <= SPACING_TOLERANCE
    }
}

fn dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= SPACING_TOLERANCE);
    v
}

fn check_leads(leads: &[u32]) -> Result<(), GridError> {
    if leads.is_empty() {
        return Err(GridError::Validation("no lead times".into()));
    }
    for &l in leads {
        if l % 24 != 0 || l > MAX_LEAD_HOURS {
            return Err(GridError::Validation(format!(
                "lead time {l}h must be a multiple of 24 up to {MAX_LEAD_HOURS}"
            )));
        }
    }
    if leads.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GridError::Validation(
            "lead times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn check_times(times: &[DateTime<Utc>], what: &str) -> Result<(), GridError> {
    if times.is_empty() {
        return Err(GridError::Validation(format!("no {what}")));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GridError::Validation(format!(
            "{what} must be strictly increasing"
        )));
    }
    Ok(())
}

/// Ensemble forecasts indexed by (init, lead, lat, lon, member), member fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDataset {
    variable: Variable,
    init_times: Vec<DateTime<Utc>>,
    lead_hours: Vec<u32>,
    grid: GridSpec,
    members: usize,
    values: Vec<f64>,
}

impl EnsembleDataset {
    pub fn new(
        variable: Variable,
        init_times: Vec<DateTime<Utc>>,
        lead_hours: Vec<u32>,
        grid: GridSpec,
        members: usize,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        check_times(&init_times, "init times")?;
        check_leads(&lead_hours)?;
        if members == 0 {
            return Err(GridError::Validation("ensemble has no members".into()));
        }
        let expected = init_times.len() * lead_hours.len() * grid.n_points() * members;
        if values.len() != expected {
            return Err(GridError::Validation(format!(
                "value block has {} entries, expected {expected}",
                values.len()
            )));
        }
        for &v in &values {
            variable.check_value(v)?;
        }
        Ok(EnsembleDataset {
            variable,
            init_times,
            lead_hours,
            grid,
            members,
            values,
        })
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn init_times(&self) -> &[DateTime<Utc>] {
        &self.init_times
    }

    pub fn lead_hours(&self) -> &[u32] {
        &self.lead_hours
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (init, lead, lat, lon, member)
    pub fn shape(&self) -> [usize; 5] {
        [
            self.init_times.len(),
            self.lead_hours.len(),
            self.grid.n_lat(),
            self.grid.n_lon(),
            self.members,
        ]
    }

    fn offset(&self, init: usize, lead: usize, lat: usize, lon: usize) -> usize {
        (((init * self.lead_hours.len() + lead) * self.grid.n_lat() + lat) * self.grid.n_lon()
            + lon)
            * self.members
    }

    /// All members at one (init, lead, lat, lon) index.
    pub fn members_at(&self, init: usize, lead: usize, lat: usize, lon: usize) -> &[f64] {
        let o = self.offset(init, lead, lat, lon);
        &self.values[o..o + self.members]
    }

    pub fn lead_index(&self, lead_hours: u32) -> Option<usize> {
        self.lead_hours.iter().position(|&l| l == lead_hours)
    }
}

/// Observations indexed by (valid time, lat, lon).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationDataset {
    variable: Variable,
    valid_times: Vec<DateTime<Utc>>,
    grid: GridSpec,
    values: Vec<f64>,
}

impl ObservationDataset {
    pub fn new(
        variable: Variable,
        valid_times: Vec<DateTime<Utc>>,
        grid: GridSpec,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        check_times(&valid_times, "valid times")?;
        let expected = valid_times.len() * grid.n_points();
        if values.len() != expected {
            return Err(GridError::Validation(format!(
                "value block has {} entries, expected {expected}",
                values.len()
            )));
        }
        for &v in &values {
            variable.check_value(v)?;
        }
        Ok(ObservationDataset {
            variable,
            valid_times,
            grid,
            values,
        })
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn valid_times(&self) -> &[DateTime<Utc>] {
        &self.valid_times
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// (time, lat, lon)
    pub fn shape(&self) -> [usize; 3] {
        [self.valid_times.len(), self.grid.n_lat(), self.grid.n_lon()]
    }

    pub fn value(&self, time: usize, lat: usize, lon: usize) -> f64 {
        self.values[(time * self.grid.n_lat() + lat) * self.grid.n_lon() + lon]
    }

    pub fn time_index(&self, t: &DateTime<Utc>) -> Option<usize> {
        self.valid_times.binary_search(t).ok()
    }
}

/// Subset of grid points taking part in an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    grid: GridSpec,
    included: Vec<bool>,
    name: String,
}

impl RegionMask {
    /// Every point of the grid.
    pub fn all(grid: &GridSpec) -> Self {
        RegionMask {
            grid: grid.clone(),
            included: vec![true; grid.n_points()],
            name: "all".into(),
        }
    }

    /// Mask from (lat, lon) points, which must all lie on the grid.
    pub fn from_points(
        grid: &GridSpec,
        points: &[(f64, f64)],
        name: impl Into<String>,
    ) -> Result<Self, GridError> {
        let mut included = vec![false; grid.n_points()];
        for &(lat, lon) in points {
            let (Some(i), Some(j)) = (grid.lat_index(lat), grid.lon_index(lon)) else {
                return Err(GridError::Alignment { lat, lon });
            };
            included[i * grid.n_lon() + j] = true;
        }
        RegionMask::from_flags(grid, included, name)
    }

    /// Mask from a lat-major boolean grid.
    pub fn from_flags(
        grid: &GridSpec,
        included: Vec<bool>,
        name: impl Into<String>,
    ) -> Result<Self, GridError> {
        if included.len() != grid.n_points() {
            return Err(GridError::Validation(format!(
                "mask has {} flags for {} grid points",
                included.len(),
                grid.n_points()
            )));
        }
        if !included.iter().any(|&b| b) {
            return Err(GridError::EmptyMask);
        }
        Ok(RegionMask {
            grid: grid.clone(),
            included,
            name: name.into(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_included(&self, lat: usize, lon: usize) -> bool {
        self.included[lat * self.grid.n_lon() + lon]
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    /// Included (lat index, lon index) pairs in grid order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_lon = self.grid.n_lon();
        self.included
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n_lon, k % n_lon))
    }
}

/// Loads an ensemble file in the format named by `schema`.
pub fn load_ensemble(path: &Path, schema: &Schema) -> Result<EnsembleDataset, GridError> {
    let ds = match schema.format {
        DataFormat::Csv => read_ensemble_csv(path, schema.variable, schema.grid.as_ref())?,
        DataFormat::Binary => {
            let ds = read_ensemble_binary(path)?;
            if ds.variable() != schema.variable {
                return Err(GridError::Validation(format!(
                    "file holds {}, expected {}",
                    ds.variable(),
                    schema.variable
                )));
            }
            if let Some(g) = &schema.grid {
                if !g.same_as(ds.grid()) {
                    return Err(GridError::Validation(
                        "file grid does not match the declared grid".into(),
                    ));
                }
            }
            ds
        }
    };
    Ok(ds)
}

/// Loads an observation file in the format named by `schema`.
pub fn load_observations(path: &Path, schema: &Schema) -> Result<ObservationDataset, GridError> {
    let ds = match schema.format {
        DataFormat::Csv => read_observations_csv(path, schema.variable, schema.grid.as_ref())?,
        DataFormat::Binary => {
            let ds = read_observations_binary(path)?;
            if ds.variable() != schema.variable {
                return Err(GridError::Validation(format!(
                    "file holds {}, expected {}",
                    ds.variable(),
                    schema.variable
                )));
            }
            if let Some(g) = &schema.grid {
                if !g.same_as(ds.grid()) {
                    return Err(GridError::Validation(
                        "file grid does not match the declared grid".into(),
                    ));
                }
            }
            ds
        }
    };
    Ok(ds)
}
