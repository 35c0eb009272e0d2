//! Region masks from CSV.
//!
//! A mask file has columns `lat,lon` listing included points. An optional
//! third column `included` (`1`/`0`, `true`/`false`) turns the file into a
//! boolean grid where only flagged rows count.

use std::fs::File;
use std::path::Path;

use super::{GridError, GridSpec, RegionMask};

fn parse_flag(raw: &str, line: u64) -> Result<bool, GridError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(GridError::Schema(format!(
            "line {line}: bad `included` flag `{other}`"
        ))),
    }
}

/// Loads a mask aligned to `grid`. Points off the grid are an error.
pub fn load_mask(path: &Path, grid: &GridSpec) -> Result<RegionMask, GridError> {
    let file = File::open(path).map_err(|e| GridError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| GridError::Schema(e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let lat_col = find("lat").ok_or_else(|| GridError::Schema("missing column `lat`".into()))?;
    let lon_col = find("lon").ok_or_else(|| GridError::Schema("missing column `lon`".into()))?;
    let flag_col = find("included");

    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| GridError::Schema(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |col: usize, name: &str| -> Result<f64, GridError> {
            let raw = rec.get(col).unwrap_or("");
            raw.parse().map_err(|_| {
                GridError::Schema(format!("line {line}: cannot parse `{raw}` as {name}"))
            })
        };
        let (lat, lon) = (num(lat_col, "lat")?, num(lon_col, "lon")?);
        let keep = match flag_col {
            Some(c) => parse_flag(rec.get(c).unwrap_or(""), line)?,
            None => true,
        };
        if keep {
            points.push((lat, lon));
        } else if grid.lat_index(lat).is_none() || grid.lon_index(lon).is_none() {
            return Err(GridError::Alignment { lat, lon });
        }
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mask")
        .to_string();
    RegionMask::from_points(grid, &points, name)
}

pub fn write_mask_csv(mask: &RegionMask, path: &Path) -> Result<(), GridError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| GridError::Schema(e.to_string()))?;
    let io = |e: csv::Error| GridError::io(path, std::io::Error::other(e.to_string()));
    w.write_record(["lat", "lon"]).map_err(io)?;
    let g = mask.grid();
    for (a, b) in mask.points() {
        w.write_record([g.lats()[a].to_string(), g.lons()[b].to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| GridError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn grid() -> GridSpec {
        GridSpec::regular(54.0, 48.0, 0.0, 6.0, 1.5).unwrap()
    }

    fn mask_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_points() {
        let f = mask_file("lat,lon\n54,0\n51,3\n48,6\n");
        let m = load_mask(f.path(), &grid()).unwrap();
        assert_eq!(m.count(), 3);
        assert!(m.is_included(0, 0));
        assert!(m.is_included(2, 2));
    }

    #[test]
    fn off_grid_point() {
        let f = mask_file("lat,lon\n51.1,3\n");
        assert!(matches!(
            load_mask(f.path(), &grid()),
            Err(GridError::Alignment { lat, .. }) if lat == 51.1
        ));
    }

    #[test]
    fn empty_list() {
        let f = mask_file("lat,lon\n");
        assert!(matches!(load_mask(f.path(), &grid()), Err(GridError::EmptyMask)));
    }

    #[test]
    fn boolean_grid_form() {
        let f = mask_file("lat,lon,included\n54,0,1\n54,1.5,0\n52.5,0,true\n");
        let m = load_mask(f.path(), &grid()).unwrap();
        assert_eq!(m.count(), 2);
        assert!(!m.is_included(0, 1));
    }

    #[test]
    fn write_then_load() {
        let g = grid();
        let m = RegionMask::from_points(&g, &[(52.5, 4.5), (49.5, 1.5)], "m").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_mask_csv(&m, &p).unwrap();
        let back = load_mask(&p, &g).unwrap();
        assert_eq!(back.points().collect::<Vec<_>>(), m.points().collect::<Vec<_>>());
    }
}
