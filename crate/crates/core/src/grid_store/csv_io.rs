//! Long-form CSV interchange.
//!
//! Ensembles: `init_time,lead_hours,lat,lon,member,value`.
//! Observations: `valid_time,lat,lon,value`.
//! Timestamps are ISO-8601 in UTC; lines starting with `#` are skipped.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

use super::{EnsembleDataset, GridError, GridSpec, ObservationDataset, Variable};

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc());
    }
    Err(format!("unparseable timestamp `{s}`"))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

struct Columns {
    names: Vec<&'static str>,
    index: Vec<usize>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord, names: &[&'static str]) -> Result<Self, GridError> {
        let mut index = Vec::with_capacity(names.len());
        for &name in names {
            let i = headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| GridError::Schema(format!("missing column `{name}`")))?;
            index.push(i);
        }
        Ok(Columns {
            names: names.to_vec(),
            index,
        })
    }

    fn field<'r>(&self, rec: &'r csv::StringRecord, k: usize, line: u64) -> Result<&'r str, GridError> {
        rec.get(self.index[k]).map(str::trim).ok_or_else(|| {
            GridError::Schema(format!("line {line}: missing field `{}`", self.names[k]))
        })
    }

    fn parse<T: std::str::FromStr>(
        &self,
        rec: &csv::StringRecord,
        k: usize,
        line: u64,
    ) -> Result<T, GridError> {
        let raw = self.field(rec, k, line)?;
        raw.parse().map_err(|_| {
            GridError::Schema(format!(
                "line {line}: cannot parse `{raw}` in column `{}`",
                self.names[k]
            ))
        })
    }

    fn time(&self, rec: &csv::StringRecord, k: usize, line: u64) -> Result<DateTime<Utc>, GridError> {
        parse_timestamp(self.field(rec, k, line)?)
            .map_err(|e| GridError::Schema(format!("line {line}: {e}")))
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>, GridError> {
    let file = File::open(path).map_err(|e| GridError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> GridError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => GridError::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        GridError::Schema(e.to_string())
    }
}

fn sorted_unique<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = items.collect();
    v.sort();
    v.dedup();
    v
}

fn resolve_grid(
    lats: &[f64],
    lons: &[f64],
    declared: Option<&GridSpec>,
) -> Result<GridSpec, GridError> {
    match declared {
        Some(g) => {
            for &lat in lats {
                if g.lat_index(lat).is_none() {
                    return Err(GridError::Validation(format!(
                        "latitude {lat} is not on the declared grid"
                    )));
                }
            }
            for &lon in lons {
                if g.lon_index(lon).is_none() {
                    return Err(GridError::Validation(format!(
                        "longitude {lon} is not on the declared grid"
                    )));
                }
            }
            Ok(g.clone())
        }
        None => GridSpec::infer(lats, lons),
    }
}

fn point_index(grid: &GridSpec, lat: f64, lon: f64) -> Result<(usize, usize), GridError> {
    match (grid.lat_index(lat), grid.lon_index(lon)) {
        (Some(i), Some(j)) => Ok((i, j)),
        _ => Err(GridError::Validation(format!(
            "point ({lat}, {lon}) is not on the grid"
        ))),
    }
}

/// Dense fill with duplicate and completeness checks.
struct DenseFill {
    values: Vec<f64>,
    seen: Vec<bool>,
}

impl DenseFill {
    fn new(len: usize) -> Self {
        DenseFill {
            values: vec![0.0; len],
            seen: vec![false; len],
        }
    }

    fn put(&mut self, k: usize, v: f64, describe: impl FnOnce() -> String) -> Result<(), GridError> {
        if std::mem::replace(&mut self.seen[k], true) {
            return Err(GridError::Schema(format!("duplicate row for {}", describe())));
        }
        self.values[k] = v;
        Ok(())
    }

    fn finish(self, describe: impl Fn(usize) -> String) -> Result<Vec<f64>, GridError> {
        if let Some(k) = self.seen.iter().position(|&s| !s) {
            let missing = self.seen.iter().filter(|&&s| !s).count();
            return Err(GridError::Validation(format!(
                "incomplete dataset: {missing} missing values, first at {}",
                describe(k)
            )));
        }
        Ok(self.values)
    }
}

pub fn read_ensemble_csv(
    path: &Path,
    variable: Variable,
    grid: Option<&GridSpec>,
) -> Result<EnsembleDataset, GridError> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols = Columns::locate(
        &headers,
        &["init_time", "lead_hours", "lat", "lon", "member", "value"],
    )?;

    struct Row {
        init: DateTime<Utc>,
        lead: u32,
        lat: f64,
        lon: f64,
        member: usize,
        value: f64,
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(n as u64 + 2, |p| p.line());
        rows.push(Row {
            init: cols.time(&rec, 0, line)?,
            lead: cols.parse(&rec, 1, line)?,
            lat: cols.parse(&rec, 2, line)?,
            lon: cols.parse(&rec, 3, line)?,
            member: cols.parse(&rec, 4, line)?,
            value: cols.parse(&rec, 5, line)?,
        });
    }
    if rows.is_empty() {
        return Err(GridError::Schema("file has no data rows".into()));
    }
    for r in &rows {
        variable.check_value(r.value)?;
    }

    let inits = sorted_unique(rows.iter().map(|r| r.init));
    let leads = sorted_unique(rows.iter().map(|r| r.lead));
    let lats: Vec<f64> = rows.iter().map(|r| r.lat).collect();
    let lons: Vec<f64> = rows.iter().map(|r| r.lon).collect();
    let grid = resolve_grid(&lats, &lons, grid)?;
    let members = rows.iter().map(|r| r.member).max().unwrap_or(0) + 1;

    let (n_lead, n_lat, n_lon) = (leads.len(), grid.n_lat(), grid.n_lon());
    let mut fill = DenseFill::new(inits.len() * n_lead * n_lat * n_lon * members);
    for r in &rows {
        let i = inits.binary_search(&r.init).expect("collected above");
        let l = leads.binary_search(&r.lead).expect("collected above");
        let (a, b) = point_index(&grid, r.lat, r.lon)?;
        let k = (((i * n_lead + l) * n_lat + a) * n_lon + b) * members + r.member;
        fill.put(k, r.value, || {
            format!(
                "init {}, lead {}h, ({}, {}), member {}",
                format_timestamp(&r.init),
                r.lead,
                r.lat,
                r.lon,
                r.member
            )
        })?;
    }
    let values = fill.finish(|k| {
        let m = k % members;
        let rest = k / members;
        let b = rest % n_lon;
        let a = (rest / n_lon) % n_lat;
        let l = (rest / n_lon / n_lat) % n_lead;
        let i = rest / n_lon / n_lat / n_lead;
        format!(
            "init {}, lead {}h, ({}, {}), member {m}",
            format_timestamp(&inits[i]),
            leads[l],
            grid.lats()[a],
            grid.lons()[b]
        )
    })?;
    EnsembleDataset::new(variable, inits, leads, grid, members, values)
}

pub fn read_observations_csv(
    path: &Path,
    variable: Variable,
    grid: Option<&GridSpec>,
) -> Result<ObservationDataset, GridError> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols = Columns::locate(&headers, &["valid_time", "lat", "lon", "value"])?;

    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(n as u64 + 2, |p| p.line());
        let t = cols.time(&rec, 0, line)?;
        let lat: f64 = cols.parse(&rec, 1, line)?;
        let lon: f64 = cols.parse(&rec, 2, line)?;
        let value: f64 = cols.parse(&rec, 3, line)?;
        rows.push((t, lat, lon, value));
    }
    if rows.is_empty() {
        return Err(GridError::Schema("file has no data rows".into()));
    }
    for r in &rows {
        variable.check_value(r.3)?;
    }
    let times = sorted_unique(rows.iter().map(|r| r.0));
    let lats: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let lons: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let grid = resolve_grid(&lats, &lons, grid)?;
    let (n_lat, n_lon) = (grid.n_lat(), grid.n_lon());

    let mut fill = DenseFill::new(times.len() * n_lat * n_lon);
    for &(t, lat, lon, v) in &rows {
        let i = times.binary_search(&t).expect("collected above");
        let (a, b) = point_index(&grid, lat, lon)?;
        fill.put((i * n_lat + a) * n_lon + b, v, || {
            format!("valid {}, ({lat}, {lon})", format_timestamp(&t))
        })?;
    }
    let values = fill.finish(|k| {
        let b = k % n_lon;
        let a = (k / n_lon) % n_lat;
        let i = k / n_lon / n_lat;
        format!(
            "valid {}, ({}, {})",
            format_timestamp(&times[i]),
            grid.lats()[a],
            grid.lons()[b]
        )
    })?;
    ObservationDataset::new(variable, times, grid, values)
}

fn create(path: &Path) -> Result<csv::Writer<File>, GridError> {
    let file = File::create(path).map_err(|e| GridError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn flush(path: &Path, w: csv::Writer<File>) -> Result<(), GridError> {
    let mut file = w
        .into_inner()
        .map_err(|e| GridError::io(path, std::io::Error::other(e.to_string())))?;
    file.flush().map_err(|e| GridError::io(path, e))
}

pub fn write_ensemble_csv(ds: &EnsembleDataset, path: &Path) -> Result<(), GridError> {
    let mut w = create(path)?;
    let err = |e: csv::Error| csv_err(path, e);
    w.write_record(["init_time", "lead_hours", "lat", "lon", "member", "value"])
        .map_err(err)?;
    let grid = ds.grid();
    for (i, t) in ds.init_times().iter().enumerate() {
        let ts = format_timestamp(t);
        for (l, lead) in ds.lead_hours().iter().enumerate() {
            let lead = lead.to_string();
            for (a, lat) in grid.lats().iter().enumerate() {
                let lat = lat.to_string();
                for (b, lon) in grid.lons().iter().enumerate() {
                    let lon = lon.to_string();
                    for (m, v) in ds.members_at(i, l, a, b).iter().enumerate() {
                        w.write_record([
                            ts.as_str(),
                            &lead,
                            &lat,
                            &lon,
                            &m.to_string(),
                            &v.to_string(),
                        ])
                        .map_err(err)?;
                    }
                }
            }
        }
    }
    flush(path, w)
}

pub fn write_observations_csv(ds: &ObservationDataset, path: &Path) -> Result<(), GridError> {
    let mut w = create(path)?;
    let err = |e: csv::Error| csv_err(path, e);
    w.write_record(["valid_time", "lat", "lon", "value"])
        .map_err(err)?;
    let grid = ds.grid();
    for (i, t) in ds.valid_times().iter().enumerate() {
        let ts = format_timestamp(t);
        for (a, lat) in grid.lats().iter().enumerate() {
            for (b, lon) in grid.lons().iter().enumerate() {
                w.write_record([
                    ts.as_str(),
                    &lat.to_string(),
                    &lon.to_string(),
                    &ds.value(i, a, b).to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    flush(path, w)
}
