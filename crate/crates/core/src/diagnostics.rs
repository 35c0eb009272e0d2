//! Forecast-level calibration diagnostics: CRPS, randomized PIT histograms
//! and the spread-skill ratio.
//!
//! These work on raw variable units (Kelvin, m/s) and ignore any task
//! transform.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::grid_store::AlignedView;
use crate::seeding;

pub const DEFAULT_PIT_BINS: usize = 20;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("{estimator} needs at least {required} members, got {members}")]
    DegenerateEnsemble {
        estimator: &'static str,
        members: usize,
        required: usize,
    },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("ensemble mean has zero error; spread-skill ratio undefined")]
    ZeroSkill,
    #[error("no cases to summarize")]
    NoCases,
    #[error("PIT histogram needs at least one bin")]
    NoBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrpsEstimator {
    /// Unbiased for the CRPS of the distribution the members are drawn from.
    #[default]
    Fair,
    /// CRPS of the empirical member distribution.
    Nrg,
}

impl CrpsEstimator {
    pub fn as_str(self) -> &'static str {
        match self {
            CrpsEstimator::Fair => "fair",
            CrpsEstimator::Nrg => "nrg",
        }
    }

    fn min_members(self) -> usize {
        match self {
            CrpsEstimator::Fair => 2,
            CrpsEstimator::Nrg => 1,
        }
    }
}

impl fmt::Display for CrpsEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrpsEstimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fair" => Ok(CrpsEstimator::Fair),
            "nrg" | "energy" => Ok(CrpsEstimator::Nrg),
            other => Err(format!("unknown CRPS estimator `{other}` (fair|nrg)")),
        }
    }
}

fn check_finite(values: &[f64], y: f64) -> Result<(), DiagnosticsError> {
    if !y.is_finite() {
        return Err(DiagnosticsError::NonFinite(y));
    }
    match values.iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(DiagnosticsError::NonFinite(v)),
        None => Ok(()),
    }
}

/// Ensemble CRPS against one observation.
///
/// The pair term uses the sorted identity
/// `Σᵢⱼ |xᵢ − xⱼ| = 2 Σᵢ (2i − M − 1) x₍ᵢ₎`, so the cost is `O(M log M)`.
pub fn crps_ensemble(
    members: &[f64],
    observation: f64,
    estimator: CrpsEstimator,
) -> Result<f64, DiagnosticsError> {
    let m = members.len();
    if m < estimator.min_members() {
        return Err(DiagnosticsError::DegenerateEnsemble {
            estimator: estimator.as_str(),
            members: m,
            required: estimator.min_members(),
        });
    }
    check_finite(members, observation)?;
    let mut x = members.to_vec();
    x.sort_by(f64::total_cmp);

    let abs_err: f64 = x.iter().map(|v| (v - observation).abs()).sum::<f64>() / m as f64;
    let pair_sum: f64 = 2.0
        * x.iter()
            .enumerate()
            .map(|(i, v)| (2.0 * (i + 1) as f64 - m as f64 - 1.0) * v)
            .sum::<f64>();
    let mf = m as f64;
    let pair = match estimator {
        CrpsEstimator::Nrg => pair_sum / (2.0 * mf * mf),
        CrpsEstimator::Fair => pair_sum / (2.0 * mf * (mf - 1.0)),
    };
    // Non-negative by the triangle inequality; clamp rounding noise.
    Ok((abs_err - pair).max(0.0))
}

/// Randomized PIT: `(#below + U·(1 + #equal)) / (M + 1)`.
pub fn pit_value<R: Rng + ?Sized>(
    members: &[f64],
    observation: f64,
    rng: &mut R,
) -> Result<f64, DiagnosticsError> {
    if members.is_empty() {
        return Err(DiagnosticsError::DegenerateEnsemble {
            estimator: "PIT",
            members: 0,
            required: 1,
        });
    }
    check_finite(members, observation)?;
    let below = members.iter().filter(|&&v| v < observation).count();
    let equal = members.iter().filter(|&&v| v == observation).count();
    let u: f64 = rng.random();
    Ok((below as f64 + u * (1 + equal) as f64) / (members.len() + 1) as f64)
}

/// [`pit_value`] with a generator seeded from `(case_index, seed)`.
pub fn pit_value_seeded(
    members: &[f64],
    observation: f64,
    case_index: u64,
    seed: u64,
) -> Result<f64, DiagnosticsError> {
    let mut rng = seeding::stream(seed, &[case_index]);
    pit_value(members, observation, &mut rng)
}

/// Equal-width histogram of PIT values on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitHistogram {
    counts: Vec<u64>,
}

impl PitHistogram {
    pub fn new(bins: usize) -> Result<Self, DiagnosticsError> {
        if bins == 0 {
            return Err(DiagnosticsError::NoBins);
        }
        Ok(PitHistogram {
            counts: vec![0; bins],
        })
    }

    pub fn from_values(values: &[f64], bins: usize) -> Result<Self, DiagnosticsError> {
        let mut h = Self::new(bins)?;
        for &v in values {
            h.add(v);
        }
        Ok(h)
    }

    /// Adds one value; values are clamped to `[0, 1]` and 1 lands in the
    /// last bin.
    pub fn add(&mut self, pit: f64) {
        let b = self.counts.len();
        let idx = ((pit.clamp(0.0, 1.0) * b as f64) as usize).min(b - 1);
        self.counts[idx] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn chi_square(&self) -> f64 {
        let expected = self.total() as f64 / self.bins() as f64;
        if expected == 0.0 {
            return 0.0;
        }
        self.counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum()
    }

    /// p-value of the χ² uniformity test with `bins − 1` degrees of freedom.
    pub fn uniformity_p_value(&self) -> f64 {
        if self.bins() < 2 || self.total() == 0 {
            return 1.0;
        }
        let dist = ChiSquared::new((self.bins() - 1) as f64).expect("positive dof");
        1.0 - dist.cdf(self.chi_square())
    }
}

/// Running sums for the spread-skill ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SsrAccumulator {
    variance: f64,
    corrected_variance: f64,
    squared_error: f64,
    cases: usize,
}

/// (unbiased variance, squared error of the mean) for one case.
fn spread_and_error(members: &[f64], observation: f64) -> Result<(f64, f64), DiagnosticsError> {
    let m = members.len();
    if m < 2 {
        return Err(DiagnosticsError::DegenerateEnsemble {
            estimator: "spread-skill ratio",
            members: m,
            required: 2,
        });
    }
    check_finite(members, observation)?;
    let mut x = members.to_vec();
    x.sort_by(f64::total_cmp);
    let mean = x.iter().sum::<f64>() / m as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    Ok((var, (mean - observation) * (mean - observation)))
}

impl SsrAccumulator {
    pub fn add(&mut self, members: &[f64], observation: f64) -> Result<(), DiagnosticsError> {
        let (var, err) = spread_and_error(members, observation)?;
        self.push(var, err, members.len());
        Ok(())
    }

    fn push(&mut self, variance: f64, squared_error: f64, members: usize) {
        let m = members as f64;
        self.variance += variance;
        self.corrected_variance += variance * (m + 1.0) / m;
        self.squared_error += squared_error;
        self.cases += 1;
    }

    pub fn cases(&self) -> usize {
        self.cases
    }

    /// `sqrt(mean variance) / RMSE(mean)`, optionally with the finite
    /// ensemble factor `sqrt((M + 1) / M)`.
    pub fn ratio(&self, correction: bool) -> Result<f64, DiagnosticsError> {
        if self.cases == 0 {
            return Err(DiagnosticsError::NoCases);
        }
        if self.squared_error == 0.0 {
            return Err(DiagnosticsError::ZeroSkill);
        }
        let spread = if correction {
            self.corrected_variance
        } else {
            self.variance
        };
        Ok((spread / self.squared_error).sqrt())
    }
}

/// Spread-skill ratio over `(members, observation)` cases.
pub fn spread_skill_ratio<'a, I>(cases: I, correction: bool) -> Result<f64, DiagnosticsError>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut acc = SsrAccumulator::default();
    for (members, y) in cases {
        acc.add(members, y)?;
    }
    acc.ratio(correction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub estimator: CrpsEstimator,
    pub pit_bins: usize,
    pub ssr_correction: bool,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            estimator: CrpsEstimator::Fair,
            pit_bins: DEFAULT_PIT_BINS,
            ssr_correction: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadDiagnostics {
    pub lead_hours: u32,
    pub count: usize,
    pub mean_crps: f64,
    pub ssr: f64,
    pub pit: PitHistogram,
}

/// Mean CRPS at one grid point and lead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCrps {
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub count: usize,
    pub mean_crps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub leads: Vec<LeadDiagnostics>,
    pub points: Vec<PointCrps>,
}

struct CaseStats {
    lead_hours: u32,
    lat: f64,
    lon: f64,
    crps: f64,
    pit: f64,
    variance: f64,
    squared_error: f64,
    members: usize,
}

/// CRPS, PIT and SSR per lead time over every case of `view`, plus per-point
/// mean CRPS.
///
/// Each case draws its PIT randomization from `(case index, seed)`, and sums
/// run in view order, so the worker count does not change the result.
pub fn summarize(
    view: &AlignedView<'_>,
    config: &DiagnosticsConfig,
) -> Result<DiagnosticsSummary, DiagnosticsError> {
    if view.is_empty() {
        return Err(DiagnosticsError::NoCases);
    }
    if config.pit_bins == 0 {
        return Err(DiagnosticsError::NoBins);
    }
    let stats: Vec<Result<CaseStats, DiagnosticsError>> = (0..view.len())
        .into_par_iter()
        .map(|i| {
            let c = view.get(i);
            let crps = crps_ensemble(c.members, c.observed, config.estimator)?;
            let pit = pit_value_seeded(c.members, c.observed, i as u64, config.seed)?;
            let (variance, squared_error) = spread_and_error(c.members, c.observed)?;
            Ok(CaseStats {
                lead_hours: c.lead_hours,
                lat: c.lat,
                lon: c.lon,
                crps,
                pit,
                variance,
                squared_error,
                members: c.members.len(),
            })
        })
        .collect();
    let stats: Vec<CaseStats> = stats.into_iter().collect::<Result<_, _>>()?;

    let mut leads = Vec::with_capacity(view.leads().len());
    for &lead in view.leads() {
        let mut crps = 0.0;
        let mut ssr = SsrAccumulator::default();
        let mut pit = PitHistogram::new(config.pit_bins)?;
        for s in stats.iter().filter(|s| s.lead_hours == lead) {
            crps += s.crps;
            ssr.push(s.variance, s.squared_error, s.members);
            pit.add(s.pit);
        }
        let count = ssr.cases();
        leads.push(LeadDiagnostics {
            lead_hours: lead,
            count,
            mean_crps: crps / count as f64,
            ssr: ssr.ratio(config.ssr_correction)?,
            pit,
        });
    }

    let mut order: Vec<&CaseStats> = stats.iter().collect();
    order.sort_by(|a, b| {
        a.lead_hours
            .cmp(&b.lead_hours)
            .then(b.lat.total_cmp(&a.lat))
            .then(a.lon.total_cmp(&b.lon))
    });
    let mut points: Vec<PointCrps> = Vec::new();
    for s in order {
        match points.last_mut() {
            Some(p)
                if p.lead_hours == s.lead_hours
                    && p.lat.total_cmp(&s.lat) == Ordering::Equal
                    && p.lon.total_cmp(&s.lon) == Ordering::Equal =>
            {
                p.count += 1;
                p.mean_crps += s.crps;
            }
            _ => points.push(PointCrps {
                lead_hours: s.lead_hours,
                lat: s.lat,
                lon: s.lon,
                count: 1,
                mean_crps: s.crps,
            }),
        }
    }
    for p in &mut points {
        p.mean_crps /= p.count as f64;
    }
    Ok(DiagnosticsSummary { leads, points })
}
