//! Observation and path files: CSV with header `t,x_1,…,x_m[,y_1,…]`.

use crate::error::{Error, Result};
use crate::output::format_f64;
use slowfast_core::sim::SimPath;
use slowfast_core::ObservationSeries;
use std::io::{Read, Write};

/// Relative tolerance on the spacing of the time column.
const GRID_TOLERANCE: f64 = 1e-9;

/// Reads the `t` and `x_*` columns; other columns are ignored. Times must
/// be `0, T/n, …, T`.
pub fn read_observations<R: Read>(reader: R) -> Result<ObservationSeries> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let t_col = header.iter().position(|h| h == "t").ok_or_else(|| Error::config("observation file has no 't' column"))?;
    let x_cols: Vec<usize> = (1..)
        .map_while(|i| header.iter().position(|h| h == format!("x_{i}")))
        .collect();
    if x_cols.is_empty() {
        return Err(Error::config("observation file has no 'x_1' column"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::config(format!("row {}: bad number in column {}", line + 1, &header[i])))
        };
        times.push(field(t_col)?);
        for &c in &x_cols {
            values.push(field(c)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::config("need at least two observation rows"));
    }
    let n = times.len() - 1;
    let horizon = times[n];
    if times[0] != 0.0 {
        return Err(Error::config(format!("first time must be 0, got {}", times[0])));
    }
    for (k, &t) in times.iter().enumerate() {
        let want = horizon * k as f64 / n as f64;
        if (t - want).abs() > GRID_TOLERANCE * horizon.abs().max(1.0) {
            return Err(Error::config(format!("times are not uniform: row {k} has t = {t}, expected {want}")));
        }
    }
    Ok(ObservationSeries::new(horizon, x_cols.len(), values)?)
}

pub fn write_observations<W: Write>(writer: W, obs: &ObservationSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=obs.dim()).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for k in 0..=obs.n() {
        let mut row = vec![format_f64(obs.time(k))];
        row.extend(obs.at(k).iter().map(|v| format_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// The path at every `stride`-th fine step, optionally with the fast columns.
pub fn write_path<W: Write>(writer: W, path: &SimPath, stride: usize, include_fast: bool) -> Result<()> {
    if stride == 0 || path.steps % stride != 0 {
        return Err(Error::config(format!("stride {stride} does not divide {} steps", path.steps)));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.slow_dim).map(|i| format!("x_{i}")));
    if include_fast {
        header.extend((1..=path.fast_dim).map(|i| format!("y_{i}")));
    }
    w.write_record(&header)?;
    for i in (0..=path.steps).step_by(stride) {
        let mut row = vec![format_f64(path.time(i))];
        row.extend(path.slow_at(i).iter().map(|v| format_f64(*v)));
        if include_fast {
            row.extend(path.fast_at(i).iter().map(|v| format_f64(*v)));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}
