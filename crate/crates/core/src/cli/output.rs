//! Summary and field files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, PolarGrid};

pub const SCHEMA_VERSION: u32 = 1;
pub const FIELDS_HEADER: [&str; 4] = ["r", "theta", "component", "value"];

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'a str,
    version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `body` as pretty JSON tagged with `schema` and [`SCHEMA_VERSION`].
pub fn write_json<T: Serialize>(path: &Path, schema: &str, body: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let env = Envelope {
        schema,
        version: SCHEMA_VERSION,
        body,
    };
    serde_json::to_writer_pretty(&mut w, &env).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Rows `r,theta,component,value`, component-major, then ring, then angle.
pub fn write_fields(path: &Path, state: &State) -> Result<()> {
    let grid = state.grid();
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(FIELDS_HEADER).map_err(csv_error)?;
    for (j, u) in state.components().iter().enumerate() {
        for i in 0..grid.n_r() {
            let r = format!("{:.16e}", grid.radii()[i]);
            for m in 0..grid.n_theta() {
                let rec = [
                    r.clone(),
                    format!("{:.16e}", grid.theta(m)),
                    j.to_string(),
                    format!("{:.16e}", u.at(i, m)),
                ];
                w.write_record(&rec).map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Reads a field file, inferring the grid from its distinct radii and angles.
pub fn read_fields(path: &Path) -> Result<State> {
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(FIELDS_HEADER) {
        return Err(bad(format!("expected header {}", FIELDS_HEADER.join(","))));
    }
    let mut rows: Vec<(f64, f64, usize, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let num = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", rows.len() + 1)))
        };
        let comp = rec[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| bad(format!("row {}: {e}", rows.len() + 1)))?;
        rows.push((num(0)?, num(1)?, comp, num(3)?));
    }
    let radii = sorted_unique(rows.iter().map(|r| r.0));
    let angles = sorted_unique(rows.iter().map(|r| r.1));
    let n_comp = rows.iter().map(|r| r.2 + 1).max().unwrap_or(0);
    let (n_r, n_theta) = (radii.len(), angles.len());
    if n_r < 2 || n_theta < 2 || rows.len() != n_r * n_theta * n_comp {
        return Err(bad(format!(
            "{} rows do not form a full polar grid",
            rows.len()
        )));
    }
    let dr = (radii[n_r - 1] - radii[0]) / (n_r - 1) as f64;
    let mut r_inner = radii[0] - 0.5 * dr;
    if r_inner.abs() < 1e-9 * dr {
        r_inner = 0.0;
    }
    let spec = GridSpec {
        r_inner,
        r_outer: radii[n_r - 1] + 0.5 * dr,
        n_r,
        n_theta,
        alignment_order: 1,
    };
    let grid: Arc<PolarGrid> = PolarGrid::shared(spec)?;
    let index = |x: f64, axis: &[f64]| {
        axis.binary_search_by(|a| a.total_cmp(&x))
            .expect("value from axis")
    };
    let mut values: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, t, c, v) in rows {
        let slot = grid.index(index(r, &radii), index(t, &angles));
        values
            .entry(c)
            .or_insert_with(|| vec![f64::NAN; grid.len()])[slot] = v;
    }
    if values.values().flatten().any(|v| v.is_nan()) {
        return Err(bad("duplicate or missing grid points".into()));
    }
    let comps = values
        .into_values()
        .map(|v| Field::from_values(&grid, v))
        .collect::<Result<Vec<_>>>()?;
    State::new(comps)
}
