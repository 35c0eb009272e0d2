//! Side-by-side comparison of two report directories.
//!
//! `delta = reference − candidate` and relative improvement
//! `delta / reference`; positive values favour the candidate. Relative
//! improvement is left empty when the reference value is 0.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    read_metadata, read_table, write_all, AggregateRow, CrpsPointRow, DiagnosticsRow,
    OutputFormat, PointRow, ReportError,
};
use crate::decision::relative_improvement_value;
use crate::tasks::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub combo: String,
    pub task: TaskKind,
    pub theta: Option<f64>,
    pub cost_ratio: Option<f64>,
    pub u_pen: Option<f64>,
    pub lead_hours: u32,
    pub metric: String,
    pub reference: f64,
    pub candidate: f64,
    pub delta: f64,
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointComparisonRow {
    pub combo: String,
    pub lead_hours: u32,
    pub lat: f64,
    pub lon: f64,
    pub metric: String,
    pub reference: f64,
    pub candidate: f64,
    pub delta: f64,
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsComparisonRow {
    pub lead_hours: u32,
    pub metric: String,
    pub reference: f64,
    pub candidate: f64,
    pub delta: f64,
    pub relative_improvement: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComparisonReport {
    pub aggregates: Vec<ComparisonRow>,
    pub points: Vec<PointComparisonRow>,
    pub diagnostics: Vec<DiagnosticsComparisonRow>,
}

/// (delta, relative improvement)
fn improvement(reference: f64, candidate: f64) -> (f64, Option<f64>) {
    (
        reference - candidate,
        relative_improvement_value(candidate, reference).ok(),
    )
}

fn mismatch(what: &str) -> ReportError {
    ReportError::ConfigMismatch(what.to_string())
}

/// Keyed lookup that fails unless both sides hold the same keys.
fn pair_up<K: Ord + Clone, T>(
    reference: Vec<T>,
    candidate: Vec<T>,
    key: impl Fn(&T) -> K,
    what: &str,
) -> Result<Vec<(T, T)>, ReportError> {
    if reference.len() != candidate.len() {
        return Err(mismatch(&format!("{what} tables differ in size")));
    }
    let mut cand: BTreeMap<K, T> = candidate.into_iter().map(|r| (key(&r), r)).collect();
    reference
        .into_iter()
        .map(|r| {
            let c = cand
                .remove(&key(&r))
                .ok_or_else(|| mismatch(&format!("{what} rows do not line up")))?;
            Ok((r, c))
        })
        .collect()
}

fn point_key(lat: f64, lon: f64) -> (i64, i64) {
    // Grid coordinates agree far below 1e-6 degrees.
    ((lat * 1e6).round() as i64, (lon * 1e6).round() as i64)
}

fn differing_keys(a: &serde_json::Value, b: &serde_json::Value) -> Vec<String> {
    let (Some(a), Some(b)) = (a.as_object(), b.as_object()) else {
        return Vec::new();
    };
    let mut keys: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

/// Compares `candidate` against `reference` without writing anything.
pub fn compare_dirs(reference: &Path, candidate: &Path) -> Result<ComparisonReport, ReportError> {
    let ref_meta = read_metadata(reference)?;
    let cand_meta = read_metadata(candidate)?;
    if ref_meta.comparison_fingerprint != cand_meta.comparison_fingerprint {
        let ignore = [
            "ensemble",
            "observations",
            "mask",
            "input_format",
            "output_format",
            "write_records",
            "seed",
        ];
        let keys: Vec<String> = differing_keys(&ref_meta.config, &cand_meta.config)
            .into_iter()
            .filter(|k| !ignore.contains(&k.as_str()))
            .collect();
        return Err(mismatch(&format!("settings differ: {}", keys.join(", "))));
    }
    if ref_meta.lead_hours != cand_meta.lead_hours {
        return Err(mismatch("lead times differ"));
    }

    let mut out = ComparisonReport::default();
    let aggs = (
        read_table::<AggregateRow>(reference, "aggregates")?,
        read_table::<AggregateRow>(candidate, "aggregates")?,
    );
    if let (Some(r), Some(c)) = aggs {
        for (r, c) in pair_up(r, c, |a| (a.combo.clone(), a.lead_hours), "aggregate")? {
            for (metric, rv, cv) in [
                ("cost_gap", r.mean_cost_gap, c.mean_cost_gap),
                ("observed_cost", r.mean_observed_cost, c.mean_observed_cost),
            ] {
                let (delta, rel) = improvement(rv, cv);
                out.aggregates.push(ComparisonRow {
                    combo: r.combo.clone(),
                    task: r.task,
                    theta: r.theta,
                    cost_ratio: r.cost_ratio,
                    u_pen: r.u_pen,
                    lead_hours: r.lead_hours,
                    metric: metric.into(),
                    reference: rv,
                    candidate: cv,
                    delta,
                    relative_improvement: rel,
                });
            }
        }
    }

    let points = (
        read_table::<PointRow>(reference, "points")?,
        read_table::<PointRow>(candidate, "points")?,
    );
    if let (Some(r), Some(c)) = points {
        let key = |p: &PointRow| (p.combo.clone(), p.lead_hours, point_key(p.lat, p.lon));
        for (r, c) in pair_up(r, c, key, "grid point")? {
            for (metric, rv, cv) in [
                ("cost_gap", r.mean_cost_gap, c.mean_cost_gap),
                ("observed_cost", r.mean_observed_cost, c.mean_observed_cost),
            ] {
                let (delta, rel) = improvement(rv, cv);
                out.points.push(PointComparisonRow {
                    combo: r.combo.clone(),
                    lead_hours: r.lead_hours,
                    lat: r.lat,
                    lon: r.lon,
                    metric: metric.into(),
                    reference: rv,
                    candidate: cv,
                    delta,
                    relative_improvement: rel,
                });
            }
        }
    }

    let diags = (
        read_table::<DiagnosticsRow>(reference, "diagnostics")?,
        read_table::<DiagnosticsRow>(candidate, "diagnostics")?,
    );
    if let (Some(r), Some(c)) = diags {
        for (r, c) in pair_up(r, c, |d| d.lead_hours, "diagnostics")? {
            // SSR is scored by its distance from 1.
            for (metric, rv, cv) in [
                ("mean_crps", r.mean_crps, c.mean_crps),
                ("ssr_deviation", (r.ssr - 1.0).abs(), (c.ssr - 1.0).abs()),
            ] {
                let (delta, rel) = improvement(rv, cv);
                out.diagnostics.push(DiagnosticsComparisonRow {
                    lead_hours: r.lead_hours,
                    metric: metric.into(),
                    reference: rv,
                    candidate: cv,
                    delta,
                    relative_improvement: rel,
                });
            }
        }
    }
    // CRPS maps share the points table under combo `crps`.
    let crps = (
        read_table::<CrpsPointRow>(reference, "crps_points")?,
        read_table::<CrpsPointRow>(candidate, "crps_points")?,
    );
    if let (Some(r), Some(c)) = crps {
        let key = |p: &CrpsPointRow| (p.lead_hours, point_key(p.lat, p.lon));
        for (r, c) in pair_up(r, c, key, "CRPS point")? {
            let (delta, rel) = improvement(r.mean_crps, c.mean_crps);
            out.points.push(PointComparisonRow {
                combo: "crps".into(),
                lead_hours: r.lead_hours,
                lat: r.lat,
                lon: r.lon,
                metric: "mean_crps".into(),
                reference: r.mean_crps,
                candidate: c.mean_crps,
                delta,
                relative_improvement: rel,
            });
        }
    }
    if out.aggregates.is_empty() && out.diagnostics.is_empty() {
        return Err(ReportError::Data("reports hold nothing to compare".into()));
    }
    Ok(out)
}

/// `compare`: writes `comparison`, `comparison_points` and, when both
/// reports have diagnostics, `comparison_diagnostics` tables to `out`.
pub fn run_compare(
    reference: &Path,
    candidate: &Path,
    out: &Path,
    format: OutputFormat,
) -> Result<ComparisonReport, ReportError> {
    let report = compare_dirs(reference, candidate)?;
    write_all(out, format, |w| {
        if !report.aggregates.is_empty() {
            w.table("comparison", &report.aggregates)?;
        }
        if !report.points.is_empty() {
            w.table("comparison_points", &report.points)?;
        }
        if !report.diagnostics.is_empty() {
            w.table("comparison_diagnostics", &report.diagnostics)?;
        }
        Ok(())
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_convention() {
        let (d, r) = improvement(1.0, 0.9);
        assert!((d - 0.1).abs() < 1e-15);
        assert!((r.unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(improvement(0.0, 0.0), (0.0, None));
        assert_eq!(improvement(0.5, 0.5), (0.0, Some(0.0)));
    }

    #[test]
    fn pairing_requires_same_keys() {
        let a = vec![(1, 0.5), (2, 0.7)];
        let b = vec![(2, 0.6), (1, 0.4)];
        let p = pair_up(a.clone(), b, |r| r.0, "x").unwrap();
        assert_eq!(p[0], ((1, 0.5), (1, 0.4)));
        assert!(pair_up(a, vec![(1, 0.5), (3, 0.1)], |r| r.0, "x").is_err());
    }

    #[test]
    fn differing_key_names() {
        let a = serde_json::json!({"theta": [0.0], "task": "frost"});
        let b = serde_json::json!({"theta": [1.0], "task": "frost", "u_pen": [2.0]});
        assert_eq!(differing_keys(&a, &b), vec!["theta", "u_pen"]);
    }
}
