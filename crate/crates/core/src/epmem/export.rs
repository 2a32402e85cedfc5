//! Trajectory export as CSV or NDJSON `(t, pose)` rows.

use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Ndjson,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndjson" | "json" => Ok(Format::Ndjson),
            "csv" => Ok(Format::Csv),
            other => Err(Error::validation(format!("unknown format {other:?} (expected ndjson or csv)"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    px: f64,
    py: f64,
    pz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRow {
    t: f64,
    pose: Pose,
}

pub fn write_trajectory<W: Write>(samples: &[(f64, Pose)], format: Format, w: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            out.write_record(CSV_HEADER).map_err(csv_err)?;
            for (t, pose) in samples {
                let [px, py, pz, qw, qx, qy, qz] = pose.to_array();
                out.serialize(CsvRow { t: *t, px, py, pz, qw, qx, qy, qz }).map_err(csv_err)?;
            }
            out.flush()?;
        }
        Format::Ndjson => {
            let mut w = w;
            for (t, pose) in samples {
                serde_json::to_writer(&mut w, &JsonRow { t: *t, pose: *pose })?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(format: Format, r: R) -> Result<Vec<(f64, Pose)>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(r);
            let header = rd.headers().map_err(csv_err)?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(Error::validation(format!("unexpected CSV header {header:?}")));
            }
            for row in rd.deserialize::<CsvRow>() {
                let row = row.map_err(csv_err)?;
                let pose = Pose::from_array([row.px, row.py, row.pz, row.qw, row.qx, row.qy, row.qz])?;
                out.push((row.t, pose));
            }
        }
        Format::Ndjson => {
            for (n, line) in BufReader::new(r).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: "trajectory".into(),
                    line: n + 1,
                    column: e.column(),
                    message: e.to_string(),
                })?;
                out.push((row.t, row.pose));
            }
        }
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::Io(io);
        }
        unreachable!("checked io error");
    }
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: "csv".into(),
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vec3;

    fn samples() -> Vec<(f64, Pose)> {
        (0..5)
            .map(|k| {
                let t = k as f64 / 90.0;
                let p = Pose::new(Vec3::new(0.1 * t, 1.0 / 3.0, 0.72 + t * t), [0.5f64.sqrt(), 0.0, 0.5f64.sqrt(), 0.0]).unwrap();
                (t, p)
            })
            .collect()
    }

    #[test]
    fn csv_has_header_plus_one_row_per_sample() {
        let mut buf = Vec::new();
        write_trajectory(&samples(), Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t,px,py,pz,qw,qx,qy,qz\n"));
    }

    #[test]
    fn round_trips_bit_exactly() {
        for fmt in [Format::Csv, Format::Ndjson] {
            let mut buf = Vec::new();
            write_trajectory(&samples(), fmt, &mut buf).unwrap();
            let back = read_trajectory(fmt, buf.as_slice()).unwrap();
            assert_eq!(back.len(), 5);
            for ((t0, p0), (t1, p1)) in samples().iter().zip(&back) {
                assert_eq!(t0.to_bits(), t1.to_bits());
                for (a, b) in p0.to_array().iter().zip(p1.to_array()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
