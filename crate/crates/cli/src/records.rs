//! CSV interchange: one header line, floats with 9 significant digits.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use habdf_core::BoundingBox;
use serde::{Deserialize, Deserializer};

use crate::error::{CliError, Result};

/// Rounds to 9 significant digits and prints the shortest text that reads
/// back as the rounded value. Missing values are written as empty fields.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    // Zero of either sign prints as "0".
    if rounded == 0.0 {
        return "0".into();
    }
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_f64)
}

/// One detector's box on one frame of a recorded log. Box fields may be
/// empty on invalid rows.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrackRecord {
    pub frame: u64,
    pub detector_id: String,
    #[serde(deserialize_with = "parse_f64")]
    pub u: f64,
    #[serde(deserialize_with = "parse_f64")]
    pub v: f64,
    #[serde(deserialize_with = "parse_f64")]
    pub h: f64,
    #[serde(deserialize_with = "parse_f64")]
    pub w: f64,
    #[serde(deserialize_with = "parse_bool")]
    pub valid: bool,
}

impl TrackRecord {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox {
            u: self.u,
            v: self.v,
            h: self.h,
            w: self.w,
        }
    }
}

fn parse_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(serde::de::Error::custom(format!(
            "expected a boolean, got {other:?}"
        ))),
    }
}

/// Empty fields read as NaN.
fn parse_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    let s = s.trim();
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| serde::de::Error::custom(format!("expected a number, got {s:?}")))
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn row_of(err: &csv::Error, fallback: u64) -> u64 {
    err.position().map_or(fallback, |p| p.line())
}

fn data_error(path: &Path, row: u64, message: impl Into<String>) -> CliError {
    CliError::Data {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn empty_error(path: &Path) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: "no data rows".into(),
    }
}

/// Reads a track log. Rows must have a nonempty `detector_id`, finite values
/// on valid rows and nondecreasing frames per detector.
pub fn read_tracks(path: &Path) -> Result<Vec<TrackRecord>> {
    let mut reader = open_reader(path)?;
    let mut out = Vec::new();
    let mut last_frame: HashMap<String, u64> = HashMap::new();
    for (i, row) in reader.deserialize::<TrackRecord>().enumerate() {
        // Header is line 1.
        let line = i as u64 + 2;
        let rec = row.map_err(|e| {
            let row = row_of(&e, line);
            data_error(path, row, e.to_string())
        })?;
        if rec.detector_id.is_empty() {
            return Err(data_error(path, line, "empty detector_id"));
        }
        if rec.valid {
            if ![rec.u, rec.v, rec.h, rec.w].iter().all(|x| x.is_finite()) {
                return Err(data_error(path, line, "non-finite box on a valid row"));
            }
            if rec.h < 0.0 || rec.w < 0.0 {
                return Err(data_error(path, line, "negative box size"));
            }
        }
        if let Some(&prev) = last_frame.get(&rec.detector_id) {
            if rec.frame < prev {
                return Err(data_error(
                    path,
                    line,
                    format!(
                        "frame {} of detector {} goes back from {prev}",
                        rec.frame, rec.detector_id
                    ),
                ));
            }
        }
        last_frame.insert(rec.detector_id.clone(), rec.frame);
        out.push(rec);
    }
    if out.is_empty() {
        return Err(empty_error(path));
    }
    Ok(out)
}

/// A box-per-frame file: the fused track, a ground-truth file or a track log.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BoxRow {
    pub frame: u64,
    #[serde(default)]
    pub detector_id: Option<String>,
    #[serde(deserialize_with = "parse_f64")]
    pub u: f64,
    #[serde(deserialize_with = "parse_f64")]
    pub v: f64,
    #[serde(deserialize_with = "parse_f64")]
    pub h: f64,
    #[serde(deserialize_with = "parse_f64")]
    pub w: f64,
    #[serde(default, deserialize_with = "parse_opt_bool")]
    pub valid: Option<bool>,
}

fn parse_opt_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<bool>, D::Error> {
    parse_bool(d).map(Some)
}

/// Boxes keyed by approach then frame. Files with a `detector_id` column
/// yield one approach per detector; others are named `default_name`.
pub type BoxSeries = Vec<(String, Vec<(u64, BoundingBox, u64)>)>;

pub fn read_boxes(path: &Path, default_name: &str) -> Result<BoxSeries> {
    let mut reader = open_reader(path)?;
    let mut series: BoxSeries = Vec::new();
    let mut rows = 0usize;
    for (i, row) in reader.deserialize::<BoxRow>().enumerate() {
        let line = i as u64 + 2;
        let rec = row.map_err(|e| {
            let row = row_of(&e, line);
            data_error(path, row, e.to_string())
        })?;
        rows += 1;
        if rec.valid == Some(false) {
            continue;
        }
        let b = BoundingBox {
            u: rec.u,
            v: rec.v,
            h: rec.h,
            w: rec.w,
        };
        b.validate()
            .map_err(|e| data_error(path, line, e.to_string()))?;
        let name = rec.detector_id.unwrap_or_else(|| default_name.to_string());
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => v.push((rec.frame, b, line)),
            None => series.push((name, vec![(rec.frame, b, line)])),
        }
    }
    if rows == 0 {
        return Err(empty_error(path));
    }
    Ok(series)
}

/// Minimal CSV writer that formats every float the same way.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = Self {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(file),
        };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer
            .write_record(&fields)
            .map_err(|source| CliError::Csv {
                path: self.path.clone(),
                source,
            })
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Writes a track log in the same format `read_tracks` accepts.
pub fn write_tracks(path: &Path, records: &[TrackRecord]) -> Result<()> {
    let mut out = CsvOut::create(path, &["frame", "detector_id", "u", "v", "h", "w", "valid"])?;
    for r in records {
        out.row([
            r.frame.to_string(),
            r.detector_id.clone(),
            fmt_f64(r.u),
            fmt_f64(r.v),
            fmt_f64(r.h),
            fmt_f64(r.w),
            if r.valid { "1" } else { "0" }.to_string(),
        ])?;
    }
    out.finish()
}

/// Writes `frame,u,v,h,w` rows.
pub fn write_box_rows(path: &Path, rows: &[(u64, BoundingBox)]) -> Result<()> {
    let mut out = CsvOut::create(path, &["frame", "u", "v", "h", "w"])?;
    for (frame, b) in rows {
        out.row([
            frame.to_string(),
            fmt_f64(b.u),
            fmt_f64(b.v),
            fmt_f64(b.h),
            fmt_f64(b.w),
        ])?;
    }
    out.finish()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Prints a short note on stderr.
pub fn note(msg: std::fmt::Arguments<'_>) {
    let _ = writeln!(std::io::stderr(), "{msg}");
}
