//! Error-stream, profile and study files.
//!
//! Reals are written with 17 significant digits (zero as `0`), which is
//! lossless for `f64` and byte-stable across runs.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timoshenko_core::basis::{BasisEvaluator, SpectralCoefficients};
use timoshenko_core::reporting::{ConvergenceStudy, ErrorRecord, Monitors};
use timoshenko_core::timestepper::ExactSolution;

use crate::error::AppError;

pub const ERROR_COLUMNS: [&str; 11] = [
    "k", "t", "E1", "E2", "dE1", "dE2", "q", "mon_du", "mon_dv", "mon_Au", "mon_Lv",
];

pub const PROFILE_COLUMNS: [&str; 5] = ["x", "u_exact", "u_num", "v_exact", "v_num"];

pub const STUDY_COLUMNS: [&str; 6] = [
    "axis",
    "grid",
    "max_error",
    "max_derivative_error",
    "order",
    "derivative_order",
];

/// Points of the profile grid, endpoints included.
pub const PROFILE_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub fn errors_file_name(label: &str, steps: usize, modes: usize, format: Format) -> String {
    format!("{label}_{steps}_{modes}_errors.{}", format.extension())
}

pub fn profile_file_name(label: &str, steps: usize, modes: usize, format: Format) -> String {
    format!("{label}_{steps}_{modes}_profile.{}", format.extension())
}

pub fn trajectory_file_name(label: &str, steps: usize, modes: usize) -> String {
    format!("{label}_{steps}_{modes}_trajectory.csv")
}

pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        "0".to_owned()
    } else {
        format!("{x:.16e}")
    }
}

fn format_optional(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

fn parse_real(field: &str, column: &str) -> Result<f64, String> {
    field
        .parse()
        .map_err(|_| format!("column {column}: cannot parse {field:?}"))
}

fn parse_optional(field: &str, column: &str) -> Result<Option<f64>, String> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_real(field, column).map(Some)
    }
}

fn nonempty<T>(rows: &[T]) -> io::Result<()> {
    if rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no records to write"));
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// One row per record, columns [`ERROR_COLUMNS`].
pub fn write_errors_csv<W: Write>(records: &[ErrorRecord], out: W) -> io::Result<()> {
    nonempty(records)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ERROR_COLUMNS).map_err(csv_error)?;
    for r in records {
        let m = &r.monitors;
        w.write_record([
            r.k.to_string(),
            format_real(r.t),
            format_real(r.e1),
            format_real(r.e2),
            format_optional(r.de1),
            format_optional(r.de2),
            format_real(m.q),
            format_real(m.du),
            format_real(m.dv),
            format_real(m.au),
            format_real(m.lv),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), String> {
    let header = reader.headers().map_err(|e| e.to_string())?;
    if !header.iter().eq(expected.iter().copied()) {
        return Err(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        ));
    }
    Ok(())
}

pub fn parse_errors_csv<R: Read>(input: R) -> Result<Vec<ErrorRecord>, String> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &ERROR_COLUMNS)?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let real = |i: usize| parse_real(f(i), ERROR_COLUMNS[i]);
        records.push(ErrorRecord {
            k: f(0)
                .parse()
                .map_err(|_| format!("column k: cannot parse {:?}", f(0)))?,
            t: real(1)?,
            e1: real(2)?,
            e2: real(3)?,
            de1: parse_optional(f(4), "dE1")?,
            de2: parse_optional(f(5), "dE2")?,
            monitors: Monitors {
                q: real(6)?,
                du: real(7)?,
                dv: real(8)?,
                au: real(9)?,
                lv: real(10)?,
            },
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RecordRow {
    k: usize,
    t: f64,
    #[serde(rename = "E1")]
    e1: f64,
    #[serde(rename = "E2")]
    e2: f64,
    #[serde(rename = "dE1")]
    de1: Option<f64>,
    #[serde(rename = "dE2")]
    de2: Option<f64>,
    q: f64,
    mon_du: f64,
    mon_dv: f64,
    #[serde(rename = "mon_Au")]
    mon_au: f64,
    #[serde(rename = "mon_Lv")]
    mon_lv: f64,
}

impl From<&ErrorRecord> for RecordRow {
    fn from(r: &ErrorRecord) -> Self {
        Self {
            k: r.k,
            t: r.t,
            e1: r.e1,
            e2: r.e2,
            de1: r.de1,
            de2: r.de2,
            q: r.monitors.q,
            mon_du: r.monitors.du,
            mon_dv: r.monitors.dv,
            mon_au: r.monitors.au,
            mon_lv: r.monitors.lv,
        }
    }
}

impl From<RecordRow> for ErrorRecord {
    fn from(r: RecordRow) -> Self {
        Self {
            k: r.k,
            t: r.t,
            e1: r.e1,
            e2: r.e2,
            de1: r.de1,
            de2: r.de2,
            monitors: Monitors {
                q: r.q,
                du: r.mon_du,
                dv: r.mon_dv,
                au: r.mon_au,
                lv: r.mon_lv,
            },
        }
    }
}

/// A JSON array of objects keyed like the CSV columns; absent values are
/// `null`.
pub fn write_errors_json<W: Write>(records: &[ErrorRecord], mut out: W) -> io::Result<()> {
    nonempty(records)?;
    let rows: Vec<RecordRow> = records.iter().map(RecordRow::from).collect();
    serde_json::to_writer_pretty(&mut out, &rows)?;
    out.write_all(b"\n")?;
    out.flush()
}

pub fn parse_errors_json<R: Read>(input: R) -> Result<Vec<ErrorRecord>, String> {
    let rows: Vec<RecordRow> = serde_json::from_reader(input).map_err(|e| e.to_string())?;
    Ok(rows.into_iter().map(ErrorRecord::from).collect())
}

pub fn write_errors<W: Write>(records: &[ErrorRecord], format: Format, out: W) -> io::Result<()> {
    match format {
        Format::Csv => write_errors_csv(records, out),
        Format::Json => write_errors_json(records, out),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub x: f64,
    pub u_exact: f64,
    pub u_num: f64,
    pub v_exact: f64,
    pub v_num: f64,
}

/// Exact and numerical fields at time `t` on [`PROFILE_POINTS`] uniform
/// points of `[0, l]`.
pub fn profile_rows<P: ExactSolution + ?Sized>(
    problem: &P,
    u: &SpectralCoefficients,
    v: &SpectralCoefficients,
    t: f64,
) -> timoshenko_core::Result<Vec<ProfileRow>> {
    let length = u.length();
    let mut eval = BasisEvaluator::new(u.modes(), length)?;
    let mut phi = vec![0.0; u.modes()];
    let dot = |c: &[f64], phi: &[f64]| c.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
    let last = (PROFILE_POINTS - 1) as f64;
    (0..PROFILE_POINTS)
        .map(|i| {
            let x = if i + 1 == PROFILE_POINTS {
                length
            } else {
                length * i as f64 / last
            };
            eval.phi(x, &mut phi)?;
            let [eu, ev] = problem.exact(x, t);
            Ok(ProfileRow {
                x,
                u_exact: eu.value,
                u_num: dot(u.values(), &phi),
                v_exact: ev.value,
                v_num: dot(v.values(), &phi),
            })
        })
        .collect()
}

pub fn write_profile<W: Write>(rows: &[ProfileRow], format: Format, mut out: W) -> io::Result<()> {
    nonempty(rows)?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(PROFILE_COLUMNS).map_err(csv_error)?;
            for r in rows {
                w.write_record([r.x, r.u_exact, r.u_num, r.v_exact, r.v_num].map(format_real))
                    .map_err(csv_error)?;
            }
            w.flush()
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
            out.flush()
        }
    }
}

pub fn parse_profile_csv<R: Read>(input: R) -> Result<Vec<ProfileRow>, String> {
    let mut reader = csv::Reader::from_reader(input);
    check_header(&mut reader, &PROFILE_COLUMNS)?;
    reader
        .records()
        .map(|row| {
            let row = row.map_err(|e| e.to_string())?;
            let f = |i: usize| parse_real(row.get(i).unwrap_or(""), PROFILE_COLUMNS[i]);
            Ok(ProfileRow {
                x: f(0)?,
                u_exact: f(1)?,
                u_num: f(2)?,
                v_exact: f(3)?,
                v_num: f(4)?,
            })
        })
        .collect()
}

/// Coefficient layers, one row per `k`: `k,t,u_1..u_N,v_1..v_N`.
pub fn write_trajectory<W: Write>(
    layers: &[(SpectralCoefficients, SpectralCoefficients)],
    tau: f64,
    out: W,
) -> io::Result<()> {
    nonempty(layers)?;
    let modes = layers[0].0.modes();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_owned(), "t".to_owned()];
    header.extend((1..=modes).map(|m| format!("u_{m}")));
    header.extend((1..=modes).map(|m| format!("v_{m}")));
    w.write_record(&header).map_err(csv_error)?;
    for (k, (u, v)) in layers.iter().enumerate() {
        let mut row = vec![k.to_string(), format_real(k as f64 * tau)];
        row.extend(u.values().iter().chain(v.values()).map(|c| format_real(*c)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()
}

/// One row per run of a study; `derivative` is the matching study of the
/// derivative errors, if any. Orders belong to the row that ends the pair.
pub fn write_study<W: Write>(
    study: &ConvergenceStudy,
    derivative: Option<&ConvergenceStudy>,
    out: W,
) -> io::Result<()> {
    let axis = match study.axis {
        timoshenko_core::reporting::StudyAxis::Temporal => "temporal",
        timoshenko_core::reporting::StudyAxis::Spatial => "spatial",
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_COLUMNS).map_err(csv_error)?;
    for (i, (g, e)) in study.grid.iter().zip(&study.errors).enumerate() {
        let order = i.checked_sub(1).map(|j| study.orders[j]);
        let d = derivative.map(|d| d.errors[i]);
        let d_order = derivative.and_then(|d| i.checked_sub(1).map(|j| d.orders[j]));
        w.write_record([
            axis.to_owned(),
            g.to_string(),
            format_real(*e),
            format_optional(d),
            format_optional(order),
            format_optional(d_order),
        ])
        .map_err(csv_error)?;
    }
    w.flush()
}

/// Creates `dir/name` and hands a buffered writer to `body`.
pub fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<PathBuf, AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| AppError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(&path, e))?;
    Ok(path)
}
