//! CSV and JSON files read and written by the command line tool.
//!
//! Numbers are written with 17 significant digits so that values survive a
//! round trip bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::inference::PosteriorSummary;
use crate::periodogram::MovingPeriodogramSet;
use crate::signal::TimeSeries;
use crate::{Error, Result};

/// Format with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Read the first column of a CSV file as a series. A first row whose first
/// field is not a number is taken as a header; empty lines are skipped.
/// Rows are numbered from 1 as lines in the file.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut reader = csv_reader(path)?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        let Some(field) = record.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(Error::Data {
                    row,
                    message: format!("value {v} is not finite"),
                })
            }
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Data {
                    row,
                    message: format!("'{field}' is not a number"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Data {
            row: 0,
            message: format!("{} contains no observations", path.display()),
        });
    }
    TimeSeries::new(values)
}

/// Single-column CSV with header `x`.
pub fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    write_series_to(&mut w, values).map_err(|e| Error::io(path, e))
}

pub fn write_series_to<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "x")?;
    for v in values {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    w.flush()
}

/// Columns `t, u, lambda_index, lambda, MI` with `u = t / T` on the internal
/// time axis.
pub fn write_periodograms(path: &Path, set: &MovingPeriodogramSet) -> Result<()> {
    let mut w = create(path)?;
    let big_t = set.len() as f64;
    (|| {
        writeln!(w, "t,u,lambda_index,lambda,MI")?;
        for t in 1..=set.len() {
            writeln!(
                w,
                "{t},{},{},{},{}",
                fmt_f64(t as f64 / big_t),
                set.frequency_index(t),
                fmt_f64(set.frequency(t)),
                fmt_f64(set.ordinate(t))
            )?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub const SURFACE_HEADER: &str = "u,lambda,mean,median,q05,q95";

/// One line of a surface CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub u: f64,
    pub lambda: f64,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

/// Long-format surface CSV, time-major. `u` is the original-axis rescaled
/// time.
pub fn write_surface(path: &Path, s: &PosteriorSummary) -> Result<()> {
    let rows = s.time_grid.iter().enumerate().flat_map(|(i, &u)| {
        s.freq_grid.iter().enumerate().map(move |(j, &lambda)| {
            let k = s.index(i, j);
            SurfaceRow {
                u,
                lambda,
                mean: s.mean[k],
                median: s.median[k],
                q05: s.q05[k],
                q95: s.q95[k],
            }
        })
    });
    write_surface_rows(path, rows)
}

pub fn write_surface_rows(path: &Path, rows: impl IntoIterator<Item = SurfaceRow>) -> Result<()> {
    let mut w = create(path)?;
    (|| {
        writeln!(w, "{SURFACE_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(r.u),
                fmt_f64(r.lambda),
                fmt_f64(r.mean),
                fmt_f64(r.median),
                fmt_f64(r.q05),
                fmt_f64(r.q95)
            )?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn read_surface(path: &Path) -> Result<Vec<SurfaceRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let want: Vec<&str> = SURFACE_HEADER.split(',').collect();
    let idx: Vec<usize> = want
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| Error::Data {
                row: 1,
                message: format!("missing column '{name}'"),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let mut vals = [0.0; 6];
        for (slot, &c) in vals.iter_mut().zip(&idx) {
            let field = record.get(c).unwrap_or("");
            *slot = field.parse().map_err(|_| Error::Data {
                row,
                message: format!("'{field}' is not a number"),
            })?;
        }
        rows.push(SurfaceRow {
            u: vals[0],
            lambda: vals[1],
            mean: vals[2],
            median: vals[3],
            q05: vals[4],
            q95: vals[5],
        });
    }
    Ok(rows)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::linspace;

    #[test]
    fn series_with_header_and_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "x,extra\n1.5,9\n\n-2e-3,0\n3\n").unwrap();
        assert_eq!(read_series(&p).unwrap().values(), &[1.5, -2e-3, 3.0]);

        std::fs::write(&p, "0.25\n0.5\n").unwrap();
        assert_eq!(read_series(&p).unwrap().values(), &[0.25, 0.5]);
    }

    #[test]
    fn bad_rows_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "x\n1\n2\nNaN\n").unwrap();
        match read_series(&p).unwrap_err() {
            Error::Data { row, .. } => assert_eq!(row, 4),
            e => panic!("{e}"),
        }
        std::fs::write(&p, "x\n1\nabc\n").unwrap();
        assert!(matches!(read_series(&p), Err(Error::Data { row: 3, .. })));
        std::fs::write(&p, "x\n").unwrap();
        assert!(read_series(&p).is_err());
        assert!(matches!(
            read_series(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn series_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let v = vec![0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE];
        write_series(&p, &v).unwrap();
        assert_eq!(read_series(&p).unwrap().values(), v.as_slice());
    }

    #[test]
    fn surface_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let g = linspace(3);
        let n = 9;
        let s = PosteriorSummary {
            time_grid: g.clone(),
            freq_grid: g,
            mean: (0..n).map(|i| 1.0 + i as f64 / 7.0).collect(),
            median: (0..n).map(|i| 1.0 + i as f64 / 11.0).collect(),
            q05: vec![0.5; n],
            q95: vec![9.0; n],
            k1_pmf: vec![],
            k2_pmf: vec![],
            bayes_factor_01: 0.0,
        };
        write_surface(&p, &s).unwrap();
        let rows = read_surface(&p).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[5].u, 0.5);
        assert_eq!(rows[5].lambda, 1.0);
        assert_eq!(rows[5].mean, s.mean[5]);
        assert_eq!(rows[5].median, s.median[5]);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("u,lambda,mean,median,q05,q95\n"));
    }
}
