//! Compact little-endian binary layout.
//!
//! ```text
//! magic      b"DCL1"
//! kind       u32   0 = ensemble, 1 = observations
//! variable   u32   0 = temperature_2m, 1 = wind_speed_10m
//! dims       4×u32 (init|valid time, lead, lat, lon)
//! members    u32
//! resolution f64
//! coords     f64 × dims[0]  times, unix seconds
//!            f64 × dims[1]  lead hours (observations: a single 0)
//!            f64 × dims[2]  latitudes
//!            f64 × dims[3]  longitudes
//! values     f32, row-major (time, lead, lat, lon, member)
//! ```

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};

use super::{EnsembleDataset, GridError, GridSpec, ObservationDataset, Variable};

const MAGIC: &[u8; 4] = b"DCL1";
const KIND_ENSEMBLE: u32 = 0;
const KIND_OBSERVATIONS: u32 = 1;

struct Header {
    kind: u32,
    variable: Variable,
    dims: [usize; 4],
    members: usize,
    times: Vec<DateTime<Utc>>,
    leads: Vec<f64>,
    grid: GridSpec,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GridError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| GridError::Schema("binary file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, GridError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, GridError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32, GridError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn read_header(c: &mut Cursor<'_>) -> Result<Header, GridError> {
    if c.take(4)? != MAGIC {
        return Err(GridError::Schema("bad magic, expected DCL1".into()));
    }
    let kind = c.u32()?;
    let variable = Variable::from_code(c.u32()?)
        .ok_or_else(|| GridError::Schema("unknown variable code".into()))?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = c.u32()? as usize;
    }
    let members = c.u32()? as usize;
    let resolution = c.f64()?;
    let mut times = Vec::with_capacity(dims[0]);
    for _ in 0..dims[0] {
        let secs = c.f64()?;
        let t = DateTime::from_timestamp(secs as i64, 0)
            .filter(|_| secs.fract() == 0.0)
            .ok_or_else(|| GridError::Schema(format!("bad timestamp {secs}")))?;
        times.push(t);
    }
    let leads = (0..dims[1]).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
    let lats = (0..dims[2]).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
    let lons = (0..dims[3]).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
    let grid = GridSpec::new(lats.clone(), lons.clone(), resolution)?;
    if grid.lats() != lats.as_slice() || grid.lons() != lons.as_slice() {
        return Err(GridError::Schema(
            "binary coordinates are not in canonical order".into(),
        ));
    }
    Ok(Header {
        kind,
        variable,
        dims,
        members,
        times,
        leads,
        grid,
    })
}

fn read_values(c: &mut Cursor<'_>, n: usize) -> Result<Vec<f64>, GridError> {
    let v = (0..n)
        .map(|_| c.f32().map(f64::from))
        .collect::<Result<Vec<_>, _>>()?;
    if c.pos != c.buf.len() {
        return Err(GridError::Schema("trailing bytes after value block".into()));
    }
    Ok(v)
}

pub fn read_ensemble_binary(path: &Path) -> Result<EnsembleDataset, GridError> {
    let buf = fs::read(path).map_err(|e| GridError::io(path, e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let h = read_header(&mut c)?;
    if h.kind != KIND_ENSEMBLE {
        return Err(GridError::Schema("file does not hold an ensemble".into()));
    }
    let leads = h
        .leads
        .iter()
        .map(|&l| {
            if l >= 0.0 && l.fract() == 0.0 && l <= u32::MAX as f64 {
                Ok(l as u32)
            } else {
                Err(GridError::Schema(format!("bad lead time {l}")))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = h.dims.iter().product::<usize>() * h.members;
    let values = read_values(&mut c, n)?;
    EnsembleDataset::new(h.variable, h.times, leads, h.grid, h.members, values)
}

pub fn read_observations_binary(path: &Path) -> Result<ObservationDataset, GridError> {
    let buf = fs::read(path).map_err(|e| GridError::io(path, e))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    let h = read_header(&mut c)?;
    if h.kind != KIND_OBSERVATIONS || h.dims[1] != 1 || h.members != 1 {
        return Err(GridError::Schema("file does not hold observations".into()));
    }
    let n = h.dims.iter().product::<usize>();
    let values = read_values(&mut c, n)?;
    ObservationDataset::new(h.variable, h.times, h.grid, values)
}

fn header_bytes(
    kind: u32,
    variable: Variable,
    times: &[DateTime<Utc>],
    leads: &[f64],
    grid: &GridSpec,
    members: usize,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&variable.code().to_le_bytes());
    for d in [times.len(), leads.len(), grid.n_lat(), grid.n_lon(), members] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.resolution_deg().to_le_bytes());
    for t in times {
        out.extend_from_slice(&(t.timestamp() as f64).to_le_bytes());
    }
    for &v in leads.iter().chain(grid.lats()).chain(grid.lons()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Values are narrowed to f32.
pub fn write_ensemble_binary(ds: &EnsembleDataset, path: &Path) -> Result<(), GridError> {
    let leads: Vec<f64> = ds.lead_hours().iter().map(|&l| f64::from(l)).collect();
    let mut out = header_bytes(
        KIND_ENSEMBLE,
        ds.variable(),
        ds.init_times(),
        &leads,
        ds.grid(),
        ds.members(),
    );
    out.reserve(ds.values().len() * 4);
    for &v in ds.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| GridError::io(path, e))
}

/// Values are narrowed to f32.
pub fn write_observations_binary(ds: &ObservationDataset, path: &Path) -> Result<(), GridError> {
    let mut out = header_bytes(
        KIND_OBSERVATIONS,
        ds.variable(),
        ds.valid_times(),
        &[0.0],
        ds.grid(),
        1,
    );
    out.reserve(ds.values().len() * 4);
    for &v in ds.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| GridError::io(path, e))
}
