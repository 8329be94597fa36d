//! Series CSV I/O, standardisation, and the AR(1) design.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::filter::Observation;

/// One record of a univariate series; an empty value field encodes a
/// missing output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub index: f64,
    pub value: Option<f64>,
}

/// Parse a two-column `index,value` CSV with a header row. Indices must be
/// strictly increasing; an empty value field is a missing output.
pub fn read_series_csv(path: &Path) -> Result<Vec<SeriesRecord>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(None, format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(_header))) => {}
        Some((_, Err(e))) => return Err(Error::data(Some(1), format!("unreadable header: {e}"))),
        None => return Err(Error::data(Some(1), "missing header row")),
    }
    let mut out = Vec::new();
    let mut prev_index: Option<f64> = None;
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::data(Some(line_no), format!("unreadable line: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let idx_str = parts.next().unwrap_or("").trim();
        let val_str = parts.next().unwrap_or("").trim();
        let index: f64 = idx_str
            .parse()
            .map_err(|_| Error::data(Some(line_no), format!("bad index `{idx_str}`")))?;
        if !index.is_finite() {
            return Err(Error::data(Some(line_no), format!("non-finite index {index}")));
        }
        if let Some(prev) = prev_index {
            if index <= prev {
                return Err(Error::data(
                    Some(line_no),
                    format!("non-monotone index {index} after {prev}"),
                ));
            }
        }
        prev_index = Some(index);
        let value = if val_str.is_empty() {
            None
        } else {
            let v: f64 = val_str
                .parse()
                .map_err(|_| Error::data(Some(line_no), format!("bad value `{val_str}`")))?;
            if !v.is_finite() {
                return Err(Error::data(Some(line_no), format!("non-finite value {v}")));
            }
            Some(v)
        };
        out.push(SeriesRecord { index, value });
    }
    Ok(out)
}

/// Write a series as `index,value` CSV. Floats use the shortest lossless
/// decimal form with a `.` decimal point, independent of locale.
pub fn write_series_csv(path: &Path, records: &[SeriesRecord]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "t,y")?;
    for r in records {
        match r.value {
            Some(v) => writeln!(file, "{},{}", r.index, v)?,
            None => writeln!(file, "{},", r.index)?,
        }
    }
    Ok(())
}

/// Z-score the present values in place; returns `(mean, sd)` so outputs can
/// be mapped back. Errors when the series is constant.
pub fn standardize(records: &mut [SeriesRecord]) -> Result<(f64, f64)> {
    let present: Vec<f64> = records.iter().filter_map(|r| r.value).collect();
    if present.len() < 2 {
        return Err(Error::data(None, "standardize needs at least 2 present values"));
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::data(None, "constant series cannot be standardized"));
    }
    let sd = var.sqrt();
    for r in records.iter_mut() {
        if let Some(v) = r.value.as_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok((mean, sd))
}

/// One row of the AR(1) design: previous value as the lag feature, current
/// value as the target. Either side may be missing; the driver substitutes
/// its running predictive mean for a missing lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Step {
    pub index: f64,
    pub lag: Option<f64>,
    pub target: Option<f64>,
}

/// Build the AR(1) design; the first record is consumed as the seed lag and
/// must be present.
pub fn ar1_design(records: &[SeriesRecord]) -> Result<Vec<Ar1Step>> {
    if records.len() < 2 {
        return Err(Error::data(
            None,
            format!("AR(1) design needs at least 2 records, got {}", records.len()),
        ));
    }
    if records[0].value.is_none() {
        return Err(Error::data(None, "leading value is missing; no seed lag"));
    }
    Ok(records
        .windows(2)
        .map(|w| Ar1Step {
            index: w[1].index,
            lag: w[0].value,
            target: w[1].value,
        })
        .collect())
}

/// AR(1) design as ready observations (`x = [1, y_{t-1}]`), for fully
/// present series.
pub fn ar1_observations(records: &[SeriesRecord]) -> Result<Vec<Observation>> {
    ar1_design(records)?
        .into_iter()
        .map(|s| match (s.lag, s.target) {
            (Some(lag), target) => {
                Observation::new(DVector::from_vec(vec![1.0, lag]), target)
            }
            (None, _) => Err(Error::data(
                None,
                "ar1_observations requires all lags present; use the streaming driver",
            )),
        })
        .collect()
}
