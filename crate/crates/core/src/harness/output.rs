//! CSV and JSON writers for experiment results.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{CdfSeries, ResultRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One line per drop: `sweep_point,drop,sum_rate_bps,status`.
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep_point", "drop", "sum_rate_bps", "status"])?;
    for row in rows {
        for d in &row.drops {
            w.write_record([
                row.sweep_point.as_str(),
                &d.drop.to_string(),
                &d.sum_rate_bps.to_string(),
                &d.status,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf_csv<W: Write>(series: &[CdfSeries], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "rank", "sum_rate_bps", "cdf"])?;
    for s in series {
        for (i, (x, p)) in s.samples.iter().zip(&s.levels).enumerate() {
            w.write_record([s.label.as_str(), &(i + 1).to_string(), &x.to_string(), &p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    f(file)
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    write_file(path, |file| {
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value)
            .map_err(|source| Error::Json { path: path.to_owned(), source })?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|source| Error::Io { path: path.to_owned(), source })
    })
}

pub fn emit_results(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => write_file(path, |file| {
            write_rows_csv(rows, file).map_err(|source| Error::Csv { path: path.to_owned(), source })
        }),
        Format::Json => write_json(rows, path),
    }
}

pub fn emit_cdf(series: &[CdfSeries], format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => write_file(path, |file| {
            write_cdf_csv(series, file).map_err(|source| Error::Csv { path: path.to_owned(), source })
        }),
        Format::Json => write_json(series, path),
    }
}

pub fn read_results_json(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_owned(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downlink::Scheme;
    use crate::harness::experiment::{DropResult, Mode};

    fn row() -> ResultRow {
        ResultRow {
            sweep_point: "bia/hybrid/K=2/w0=30".into(),
            scheme: Scheme::Bia,
            mode: Mode::Hybrid,
            users: 2,
            waist_um: 30.0,
            drops: vec![
                DropResult { drop: 0, sum_rate_bps: 1.5e8, status: "ok".into() },
                DropResult { drop: 1, sum_rate_bps: 0.1 + 0.2, status: "unserved=1".into() },
            ],
            mean_bps: 7.5e7,
            std_error_bps: 1.0,
            status: "1/2 drops flagged".into(),
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        let mut buf = Vec::new();
        write_rows_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sweep_point,drop,sum_rate_bps,status\n");
    }

    #[test]
    fn csv_field_count_constant() {
        let mut buf = Vec::new();
        write_rows_csv(&[row(), row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.json");
        emit_results(&[row()], Format::Json, &path).unwrap();
        assert_eq!(read_results_json(&path).unwrap(), vec![row()]);
    }

    #[test]
    fn io_errors_carry_path() {
        let path = Path::new("/nonexistent-dir/out.csv");
        match emit_results(&[], Format::Csv, path) {
            Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("/nonexistent-dir/out.csv")),
            other => panic!("{other:?}"),
        }
    }
}
