//! Synthetic weather with a known predictive law, and forecasters with
//! controllable miscalibration.
//!
//! For each valid day and grid point the latent mean follows a Gaussian
//! martingale over lead times: the longest lead sees the seasonal mean plus
//! an anomaly, and every shorter lead refines it with an independent
//! innovation of variance `σ_l² − σ_{l'}²`. The outcome adds a last
//! innovation with the shortest-lead variance. The outcome given the latent
//! mean at any lead is therefore `Normal(μ_l, σ_l²)`, which is exactly what
//! the ideal forecaster samples.
//!
//! Wind speed draws the outcome from the normal truncated at zero. Temperatures
//! are generated in °C and stored in Kelvin.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, Utc};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::decision::{CostCurve, CostFunction, DecisionError};
use crate::grid_store::{
    format_timestamp, parse_timestamp, EnsembleDataset, GridError, GridSpec, ObservationDataset,
    Variable, MAX_LEAD_HOURS,
};
use crate::seeding;
use crate::tasks::KELVIN_OFFSET;

const TAG_LATENT: u64 = 0x4c41_5445;
const TAG_MEMBERS: u64 = 0x4d45_4d42;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic parameter: {0}")]
    Param(String),
    #[error("oracle needs piecewise-linear or constant costs")]
    UnsupportedCostShape,
    #[error("no latent parameters for {0}")]
    NoLatent(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

fn param(msg: impl Into<String>) -> SyntheticError {
    SyntheticError::Param(msg.into())
}

/// Seasonal climatology: `baseline + amplitude·cos(2π(doy − peak_day)/365.25)
/// + lat_gradient·(lat − mean grid lat)`, in °C or m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seasonal {
    pub baseline: f64,
    pub amplitude: f64,
    pub peak_day: f64,
    pub lat_gradient: f64,
}

impl Seasonal {
    pub fn mean(&self, day_of_year: u32, lat_offset: f64) -> f64 {
        let phase = 2.0 * PI * (day_of_year as f64 - self.peak_day) / 365.25;
        self.baseline + self.amplitude * phase.cos() + self.lat_gradient * lat_offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDgp {
    pub grid: GridSpec,
    pub variable: Variable,
    /// First forecast initialization (midnight UTC).
    pub start: DateTime<Utc>,
    pub seasonal: Seasonal,
    /// Standard deviation of the day-to-day anomaly around climatology.
    pub anomaly_sd: f64,
    /// Predictive standard deviation at lead zero.
    pub sigma0: f64,
    /// Added predictive standard deviation per lead day.
    pub sigma_growth: f64,
    pub seed: u64,
}

fn default_start() -> DateTime<Utc> {
    parse_timestamp("2021-01-01").expect("static date")
}

impl SyntheticDgp {
    /// Mid-latitude 2 m temperature: mild winters around freezing, warm
    /// summers.
    pub fn temperature(grid: GridSpec, seed: u64) -> Self {
        SyntheticDgp {
            grid,
            variable: Variable::Temperature2m,
            start: default_start(),
            seasonal: Seasonal {
                baseline: 10.0,
                amplitude: 10.0,
                peak_day: 200.0,
                lat_gradient: -0.6,
            },
            anomaly_sd: 4.0,
            sigma0: 1.0,
            sigma_growth: 0.3,
            seed,
        }
    }

    /// 10 m wind speed around 7 m/s.
    pub fn wind(grid: GridSpec, seed: u64) -> Self {
        SyntheticDgp {
            grid,
            variable: Variable::WindSpeed10m,
            start: default_start(),
            seasonal: Seasonal {
                baseline: 7.0,
                amplitude: 1.5,
                peak_day: 15.0,
                lat_gradient: 0.1,
            },
            anomaly_sd: 2.0,
            sigma0: 1.0,
            sigma_growth: 0.15,
            seed,
        }
    }

    pub fn with_sigma(mut self, sigma0: f64, growth: f64) -> Result<Self, SyntheticError> {
        self.sigma0 = sigma0;
        self.sigma_growth = growth;
        self.validate()?;
        Ok(self)
    }

    pub fn with_start(mut self, start: DateTime<Utc>) -> Self {
        self.start = start;
        self
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(param(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if !(self.sigma_growth >= 0.0 && self.sigma_growth.is_finite()) {
            return Err(param(format!(
                "sigma growth must be non-negative, got {}",
                self.sigma_growth
            )));
        }
        if !(self.anomaly_sd >= 0.0 && self.anomaly_sd.is_finite()) {
            return Err(param(format!(
                "anomaly sd must be non-negative, got {}",
                self.anomaly_sd
            )));
        }
        let s = &self.seasonal;
        if ![s.baseline, s.amplitude, s.peak_day, s.lat_gradient]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(param("seasonal parameters must be finite"));
        }
        Ok(())
    }

    /// Predictive standard deviation at a lead time.
    pub fn sigma(&self, lead_hours: u32) -> f64 {
        self.sigma0 + self.sigma_growth * lead_hours as f64 / 24.0
    }

    fn truncated(&self) -> bool {
        self.variable == Variable::WindSpeed10m
    }

    /// Offset from generation units to stored units.
    fn storage_offset(&self) -> f64 {
        match self.variable {
            Variable::Temperature2m => KELVIN_OFFSET,
            Variable::WindSpeed10m => 0.0,
        }
    }
}

/// Law of one outcome: `Normal(mu, sigma²)`, truncated below at `lower` when
/// set. `sigma = 0` is a point mass at `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub mu: f64,
    pub sigma: f64,
    pub lower: Option<f64>,
}

impl LatentParams {
    pub fn normal(mu: f64, sigma: f64) -> Self {
        LatentParams {
            mu,
            sigma,
            lower: None,
        }
    }

    pub fn truncated_normal(mu: f64, sigma: f64, lower: f64) -> Self {
        LatentParams {
            mu,
            sigma,
            lower: Some(lower),
        }
    }

    /// Same law in units shifted by `offset` (e.g. `−273.15` for K → °C).
    pub fn shifted(self, offset: f64) -> Self {
        LatentParams {
            mu: self.mu + offset,
            sigma: self.sigma,
            lower: self.lower.map(|l| l + offset),
        }
    }

    /// Inverse CDF at `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if self.sigma == 0.0 {
            return self.mu;
        }
        let n = std_normal();
        let u = match self.lower {
            Some(l) => {
                let a = n.cdf((l - self.mu) / self.sigma);
                a + u * (1.0 - a)
            }
            None => u,
        };
        let y = self.mu + self.sigma * n.inverse_cdf(u);
        match self.lower {
            Some(l) => y.max(l),
            None => y,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Uniform in the open interval (0, 1).
fn open01(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Latent predictive laws of every (valid day, lead, point), in stored units.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentField {
    variable: Variable,
    grid: GridSpec,
    init_times: Vec<DateTime<Utc>>,
    valid_times: Vec<DateTime<Utc>>,
    lead_hours: Vec<u32>,
    sigma: Vec<f64>,
    /// (valid, lead, lat, lon)
    mu: Vec<f64>,
    seed: u64,
}

/// Output of [`generate`].
#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub observations: ObservationDataset,
    pub latent: LatentField,
}

fn check_leads(leads: &[u32]) -> Result<(), SyntheticError> {
    if leads.is_empty() {
        return Err(param("no lead times"));
    }
    if leads.iter().any(|&l| l % 24 != 0 || l > MAX_LEAD_HOURS) {
        return Err(param(format!(
            "lead times must be whole days up to {MAX_LEAD_HOURS}h, got {leads:?}"
        )));
    }
    if leads.windows(2).any(|w| w[0] >= w[1]) {
        return Err(param("lead times must be strictly increasing"));
    }
    Ok(())
}

/// Draws observations for `n_days` forecast initializations at `leads`.
///
/// Initializations are `start + k` days for `k < n_days`; observations cover
/// every valid time those forecasts reach, so any forecaster built from the
/// returned latent field aligns with them.
pub fn generate(
    dgp: &SyntheticDgp,
    n_days: usize,
    leads: &[u32],
) -> Result<SyntheticRun, SyntheticError> {
    dgp.validate()?;
    check_leads(leads)?;
    if n_days == 0 {
        return Err(param("n_days must be at least 1"));
    }
    let min_lead = leads[0];
    let span = ((leads[leads.len() - 1] - min_lead) / 24) as usize;
    let init_times: Vec<_> = (0..n_days)
        .map(|k| dgp.start + Duration::days(k as i64))
        .collect();
    let valid_times: Vec<_> = (0..n_days + span)
        .map(|j| dgp.start + Duration::hours(i64::from(min_lead)) + Duration::days(j as i64))
        .collect();
    let sigma: Vec<f64> = leads.iter().map(|&l| dgp.sigma(l)).collect();

    let grid = &dgp.grid;
    let (n_lat, n_lon, n_lead) = (grid.n_lat(), grid.n_lon(), leads.len());
    let mean_lat = grid.lats().iter().sum::<f64>() / n_lat as f64;
    let offset = dgp.storage_offset();
    let normal = std_normal();

    // (valid, point) cells are independent streams; collect keeps order.
    let cells: Vec<(Vec<f64>, f64)> = (0..valid_times.len() * grid.n_points())
        .into_par_iter()
        .map(|cell| {
            let j = cell / grid.n_points();
            let (la, lo) = ((cell % grid.n_points()) / n_lon, cell % n_lon);
            let mut rng = seeding::stream(dgp.seed, &[TAG_LATENT, j as u64, la as u64, lo as u64]);
            let mut z = || normal.inverse_cdf(open01(&mut rng));
            let doy = valid_times[j].ordinal();
            let clim = dgp.seasonal.mean(doy, grid.lats()[la] - mean_lat);
            let mut mu = vec![0.0; n_lead];
            mu[n_lead - 1] = clim + dgp.anomaly_sd * z();
            for l in (0..n_lead - 1).rev() {
                let step = (sigma[l + 1].powi(2) - sigma[l].powi(2)).max(0.0).sqrt();
                mu[l] = mu[l + 1] + step * z();
            }
            let u = open01(&mut rng);
            let law = if dgp.truncated() {
                LatentParams::truncated_normal(mu[0], sigma[0], 0.0)
            } else {
                LatentParams::normal(mu[0], sigma[0])
            };
            let y = law.quantile(u);
            for m in &mut mu {
                *m += offset;
            }
            (mu, y + offset)
        })
        .collect();

    let mut mu = vec![0.0; valid_times.len() * n_lead * grid.n_points()];
    let mut obs = Vec::with_capacity(cells.len());
    for (cell, (m, y)) in cells.into_iter().enumerate() {
        let j = cell / grid.n_points();
        let p = cell % grid.n_points();
        for (l, v) in m.into_iter().enumerate() {
            mu[(j * n_lead + l) * grid.n_points() + p] = v;
        }
        obs.push(y);
    }
    let observations =
        ObservationDataset::new(dgp.variable, valid_times.clone(), grid.clone(), obs)?;
    Ok(SyntheticRun {
        observations,
        latent: LatentField {
            variable: dgp.variable,
            grid: grid.clone(),
            init_times,
            valid_times,
            lead_hours: leads.to_vec(),
            sigma,
            mu,
            seed: dgp.seed,
        },
    })
}

impl LatentField {
    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn init_times(&self) -> &[DateTime<Utc>] {
        &self.init_times
    }

    pub fn lead_hours(&self) -> &[u32] {
        &self.lead_hours
    }

    /// Offset from stored units to task units (K → °C for temperature).
    pub fn task_offset(&self) -> f64 {
        match self.variable {
            Variable::Temperature2m => -KELVIN_OFFSET,
            Variable::WindSpeed10m => 0.0,
        }
    }

    fn law(&self, valid: usize, lead: usize, point: usize) -> LatentParams {
        let mu = self.mu[(valid * self.lead_hours.len() + lead) * self.grid.n_points() + point];
        let sigma = self.sigma[lead];
        match self.variable {
            Variable::WindSpeed10m => LatentParams::truncated_normal(mu, sigma, 0.0),
            Variable::Temperature2m => LatentParams::normal(mu, sigma),
        }
    }

    fn valid_index(&self, init: usize, lead: usize) -> usize {
        init + ((self.lead_hours[lead] - self.lead_hours[0]) / 24) as usize
    }

    /// Predictive law of the outcome for a forecast case, in stored units.
    pub fn params_for(
        &self,
        init_time: &DateTime<Utc>,
        lead_hours: u32,
        lat: f64,
        lon: f64,
    ) -> Result<LatentParams, SyntheticError> {
        let missing = || {
            SyntheticError::NoLatent(format!(
                "{} +{lead_hours}h at ({lat}, {lon})",
                format_timestamp(init_time)
            ))
        };
        let init = self.init_times.binary_search(init_time).map_err(|_| missing())?;
        let lead = self
            .lead_hours
            .iter()
            .position(|&l| l == lead_hours)
            .ok_or_else(missing)?;
        let la = self.grid.lat_index(lat).ok_or_else(missing)?;
        let lo = self.grid.lon_index(lon).ok_or_else(missing)?;
        Ok(self.law(self.valid_index(init, lead), lead, la * self.grid.n_lon() + lo))
    }

    /// Ensemble from `spec` for every initialization and lead.
    ///
    /// Members draw from streams keyed by case and member count, not by
    /// forecaster kind, so different kinds share random numbers.
    pub fn forecast(&self, spec: &ForecasterSpec) -> Result<EnsembleDataset, SyntheticError> {
        spec.validate()?;
        let n_points = self.grid.n_points();
        let n_lead = self.lead_hours.len();
        let m = spec.members;
        let normal = std_normal();
        let blocks: Vec<Vec<f64>> = (0..self.init_times.len() * n_lead * n_points)
            .into_par_iter()
            .map(|cell| {
                let init = cell / (n_lead * n_points);
                let lead = (cell / n_points) % n_lead;
                let point = cell % n_points;
                let law = self.law(self.valid_index(init, lead), lead, point);
                let mut rng = seeding::stream(
                    self.seed,
                    &[TAG_MEMBERS, m as u64, init as u64, lead as u64, point as u64],
                );
                (0..m)
                    .map(|_| spec.kind.member(&law, open01(&mut rng), &normal))
                    .collect()
            })
            .collect();
        let values = blocks.concat();
        Ok(EnsembleDataset::new(
            self.variable,
            self.init_times.clone(),
            self.lead_hours.clone(),
            self.grid.clone(),
            m,
            values,
        )?)
    }

    /// Writes `valid_time,lead_hours,lat,lon,mu,sigma,lower` rows (stored
    /// units). `lower` is empty for untruncated laws.
    pub fn write_csv(&self, path: &Path) -> Result<(), SyntheticError> {
        let io = |e: csv::Error| GridError::io(path, std::io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["valid_time", "lead_hours", "lat", "lon", "mu", "sigma", "lower"])
            .map_err(io)?;
        for (j, t) in self.valid_times.iter().enumerate() {
            let ts = format_timestamp(t);
            for (l, lead) in self.lead_hours.iter().enumerate() {
                for (la, lat) in self.grid.lats().iter().enumerate() {
                    for (lo, lon) in self.grid.lons().iter().enumerate() {
                        let p = self.law(j, l, la * self.grid.n_lon() + lo);
                        w.write_record([
                            ts.clone(),
                            lead.to_string(),
                            lat.to_string(),
                            lon.to_string(),
                            p.mu.to_string(),
                            p.sigma.to_string(),
                            p.lower.map(|v| v.to_string()).unwrap_or_default(),
                        ])
                        .map_err(io)?;
                    }
                }
            }
        }
        w.flush().map_err(|e| GridError::io(path, e))?;
        Ok(())
    }
}

/// Latent sidecar rows keyed by valid time, as written by
/// [`LatentField::write_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub valid_time: DateTime<Utc>,
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub params: LatentParams,
}

pub fn read_latent_csv(path: &Path) -> Result<Vec<LatentRow>, SyntheticError> {
    let file = File::open(path).map_err(|e| GridError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let schema = |e: String| SyntheticError::Grid(GridError::Schema(e));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64, SyntheticError> {
            field(i)
                .parse()
                .map_err(|_| schema(format!("bad number `{}`", field(i))))
        };
        let lower = match field(6) {
            "" => None,
            _ => Some(num(6)?),
        };
        rows.push(LatentRow {
            valid_time: parse_timestamp(field(0)).map_err(schema)?,
            lead_hours: field(1)
                .parse()
                .map_err(|_| schema(format!("bad lead `{}`", field(1))))?,
            lat: num(2)?,
            lon: num(3)?,
            params: LatentParams {
                mu: num(4)?,
                sigma: num(5)?,
                lower,
            },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForecasterKind {
    Ideal,
    /// Mean shifted by `b`.
    Biased { b: f64 },
    /// Spread scaled by `s`.
    Dispersed { s: f64 },
    /// Lower tail stretched: below the mean, deviations use `σ + shift`.
    ShiftedTail { shift: f64 },
}

impl ForecasterKind {
    fn validate(&self) -> Result<(), SyntheticError> {
        match *self {
            ForecasterKind::Ideal => Ok(()),
            ForecasterKind::Biased { b } if b.is_finite() => Ok(()),
            ForecasterKind::Dispersed { s } if s > 0.0 && s.is_finite() => Ok(()),
            ForecasterKind::ShiftedTail { shift } if shift >= 0.0 && shift.is_finite() => Ok(()),
            other => Err(param(format!("invalid forecaster {other}"))),
        }
    }

    /// One member from uniform `u` given the true law.
    fn member(&self, law: &LatentParams, u: f64, normal: &Normal) -> f64 {
        match *self {
            ForecasterKind::Ideal => law.quantile(u),
            ForecasterKind::Biased { b } => LatentParams {
                mu: law.mu + b,
                ..*law
            }
            .quantile(u),
            ForecasterKind::Dispersed { s } => LatentParams {
                sigma: law.sigma * s,
                ..*law
            }
            .quantile(u),
            ForecasterKind::ShiftedTail { shift } => {
                let z = normal.inverse_cdf(u);
                let scale = if z < 0.0 { law.sigma + shift } else { law.sigma };
                let y = law.mu + scale * z;
                match law.lower {
                    Some(l) => y.max(l),
                    None => y,
                }
            }
        }
    }

    /// File-name friendly label, e.g. `biased_2`.
    pub fn slug(&self) -> String {
        self.to_string().replace([':', '.'], "_").replace('-', "_")
    }
}

impl fmt::Display for ForecasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecasterKind::Ideal => f.write_str("ideal"),
            ForecasterKind::Biased { b } => write!(f, "biased:{b}"),
            ForecasterKind::Dispersed { s } => write!(f, "dispersed:{s}"),
            ForecasterKind::ShiftedTail { shift } => write!(f, "shifted-tail:{shift}"),
        }
    }
}

impl FromStr for ForecasterKind {
    type Err = String;

    /// `ideal`, `biased:<b>`, `dispersed:<s>` or `shifted-tail:<shift>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s, None),
        };
        let value = || -> Result<f64, String> {
            let a = arg.ok_or_else(|| format!("forecaster `{name}` needs a value, e.g. `{name}:1`"))?;
            a.parse().map_err(|_| format!("bad forecaster value `{a}`"))
        };
        let kind = match name {
            "ideal" if arg.is_none() => ForecasterKind::Ideal,
            "biased" => ForecasterKind::Biased { b: value()? },
            "dispersed" => ForecasterKind::Dispersed { s: value()? },
            "shifted-tail" | "shifted_tail" => ForecasterKind::ShiftedTail { shift: value()? },
            _ => return Err(format!("unknown forecaster `{s}`")),
        };
        kind.validate().map_err(|e| e.to_string())?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub kind: ForecasterKind,
    pub members: usize,
}

impl ForecasterSpec {
    pub fn new(kind: ForecasterKind, members: usize) -> Self {
        ForecasterSpec { kind, members }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.members < 2 {
            return Err(param(format!(
                "a forecaster needs at least 2 members, got {}",
                self.members
            )));
        }
        self.kind.validate()
    }
}

/// Generates the truth and returns the ensemble of `spec` for it.
pub fn forecast(
    dgp: &SyntheticDgp,
    spec: &ForecasterSpec,
    n_days: usize,
    leads: &[u32],
) -> Result<EnsembleDataset, SyntheticError> {
    generate(dgp, n_days, leads)?.latent.forecast(spec)
}

/// Partial moments `∫_α^β zᵏ φ(z) dz` for `k = 0, 1, 2`.
fn partial_moments(alpha: f64, beta: f64, n: &Normal) -> [f64; 3] {
    // z·φ(z) → 0 at ±∞
    let zphi = |z: f64| if z.is_finite() { z * n.pdf(z) } else { 0.0 };
    let phi = |z: f64| if z.is_finite() { n.pdf(z) } else { 0.0 };
    let m0 = n.cdf(beta) - n.cdf(alpha);
    let m1 = phi(alpha) - phi(beta);
    let m2 = m0 + zphi(alpha) - zphi(beta);
    [m0, m1, m2]
}

/// `E[c(Y)]` and `E[c(Y)²]` of one cost curve under `law`.
fn curve_moments(law: &LatentParams, curve: &CostCurve) -> Result<(f64, f64), SyntheticError> {
    let knots = match curve {
        CostCurve::Constant(k) => return Ok((*k, k * k)),
        CostCurve::PiecewiseLinear(p) => p.knots(),
        CostCurve::Custom(_) => return Err(SyntheticError::UnsupportedCostShape),
    };
    if law.sigma == 0.0 {
        let c = curve.eval(law.mu);
        return Ok((c, c * c));
    }
    // Segments (lo, hi, x_ref, c_ref, slope): c(y) = c_ref + slope·(y − x_ref).
    let mut segs = Vec::with_capacity(knots.len() + 1);
    let (x0, c0) = knots[0];
    segs.push((f64::NEG_INFINITY, x0, x0, c0, 0.0));
    for w in knots.windows(2) {
        let ((xa, ca), (xb, cb)) = (w[0], w[1]);
        segs.push((xa, xb, xa, ca, (cb - ca) / (xb - xa)));
    }
    let (xn, cn) = knots[knots.len() - 1];
    segs.push((xn, f64::INFINITY, xn, cn, 0.0));

    let n = std_normal();
    let floor = law.lower.unwrap_or(f64::NEG_INFINITY);
    let mass = 1.0 - n.cdf((floor - law.mu) / law.sigma);
    let (mut e1, mut e2) = (0.0, 0.0);
    for (lo, hi, x_ref, c_ref, slope) in segs {
        let (lo, hi) = (lo.max(floor), hi);
        if !(hi > lo) {
            continue;
        }
        // In z: c = a + b·z
        let a = c_ref + slope * (law.mu - x_ref);
        let b = slope * law.sigma;
        let [m0, m1, m2] = partial_moments((lo - law.mu) / law.sigma, (hi - law.mu) / law.sigma, &n);
        e1 += a * m0 + b * m1;
        e2 += a * a * m0 + 2.0 * a * b * m1 + b * b * m2;
    }
    Ok((e1 / mass, e2 / mass))
}

/// Exact `E[cost(action, Y)]` for `Y ~ law`.
pub fn oracle_expected_cost(
    law: &LatentParams,
    cost_fn: &CostFunction,
    action: usize,
) -> Result<f64, SyntheticError> {
    Ok(curve_moments(law, cost_fn.curve(action)?)?.0)
}

/// Exact `Var[cost(action, Y)]` for `Y ~ law`.
pub fn oracle_cost_variance(
    law: &LatentParams,
    cost_fn: &CostFunction,
    action: usize,
) -> Result<f64, SyntheticError> {
    let (e1, e2) = curve_moments(law, cost_fn.curve(action)?)?;
    Ok((e2 - e1 * e1).max(0.0))
}
