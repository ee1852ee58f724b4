use std::path::{Path, PathBuf};

use habdf_core::{run_sim_experiment, SimRun};

use crate::config::{load_table, RunConfig};
use crate::error::{CliError, Result};
use crate::records::{ensure_dir, fmt_f64, fmt_opt, CsvOut};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const MAX_CELLS: usize = 10_000;

/// One `--grid key=v1,v2,...` axis; `key` is a dotted config path.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

impl std::str::FromStr for GridAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| format!("grid axis {s:?} is not of the form key=v1,v2"))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(format!("bad grid key {key:?}"));
        }
        let values = values
            .split(',')
            .map(|v| parse_value(v.trim()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(format!("grid axis {key} has no values"));
        }
        Ok(Self {
            key: key.to_string(),
            values,
        })
    }
}

fn parse_value(text: &str) -> std::result::Result<toml::Value, String> {
    if text.is_empty() {
        return Err("empty grid value".into());
    }
    if let Ok(i) = text.parse::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    if let Ok(x) = text.parse::<f64>() {
        return Ok(toml::Value::Float(x));
    }
    match text {
        "true" => Ok(toml::Value::Boolean(true)),
        "false" => Ok(toml::Value::Boolean(false)),
        _ => Ok(toml::Value::String(text.trim_matches('"').to_string())),
    }
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Float(x) => fmt_f64(*x),
        other => other.to_string(),
    }
}

/// Numbers given to float keys as integers are widened.
fn coerce(existing: Option<&toml::Value>, key: &str, v: &toml::Value) -> toml::Value {
    const FLOAT_KEYS: [&str; 14] = [
        "xi",
        "confidence",
        "omega0",
        "omega",
        "lambda",
        "gamma",
        "delta",
        "cov_floor",
        "dt",
        "accel_var",
        "meas_var",
        "init_vel_var",
        "natural_freq",
        "damping",
    ];
    let leaf = key.rsplit('.').next().unwrap_or(key);
    match (existing, v) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        (None, toml::Value::Integer(i)) if FLOAT_KEYS.contains(&leaf) => {
            toml::Value::Float(*i as f64)
        }
        _ => v.clone(),
    }
}

fn set_path(
    table: &mut toml::Table,
    key: &str,
    value: &toml::Value,
) -> std::result::Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("grid key {key}: {part} is not a table"))?;
    }
    let leaf = parts[parts.len() - 1];
    let v = coerce(cur.get(leaf), key, value);
    cur.insert(leaf.to_string(), v);
    // `xi` and `dof`/`confidence` are alternatives.
    if parts.len() == 2 && parts[0] == "expert" {
        match leaf {
            "xi" => {
                cur.remove("dof");
                cur.remove("confidence");
            }
            "dof" | "confidence" => {
                cur.remove("xi");
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn cell_count(axes: &[GridAxis]) -> usize {
    axes.iter()
        .map(|a| a.values.len())
        .fold(1usize, usize::saturating_mul)
}

/// Cartesian product in row-major order (last axis fastest).
fn cells(axes: &[GridAxis]) -> Vec<Vec<&toml::Value>> {
    let mut out: Vec<Vec<&toml::Value>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Debug)]
pub struct SweepOutput {
    pub path: PathBuf,
    pub runs: Vec<SimRun>,
}

/// Runs the simulation once per grid cell, every cell with the same seed.
pub fn sweep(
    config_path: &Path,
    axes: &[GridAxis],
    out: &Path,
    seed: Option<u64>,
    force: bool,
) -> Result<SweepOutput> {
    let n = cell_count(axes);
    if n > MAX_CELLS && !force {
        return Err(CliError::Usage(format!(
            "grid has {n} cells, more than {MAX_CELLS}; pass --force to run it anyway"
        )));
    }
    let base = load_table(config_path)?;
    let mut runs = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for (i, cell) in cells(axes).into_iter().enumerate() {
        let mut table = base.clone();
        for (axis, v) in axes.iter().zip(&cell) {
            set_path(&mut table, &axis.key, v).map_err(CliError::Usage)?;
        }
        let config = RunConfig::from_table(table, config_path)?;
        let scenario = config.scenario(seed, config_path)?;
        let run = run_sim_experiment(&scenario)?;
        let mut row = vec![i.to_string()];
        row.extend(cell.iter().map(|v| display_value(v)));
        row.extend(summary_fields(&run));
        rows.push(row);
        runs.push(run);
    }

    ensure_dir(out)?;
    let path = out.join(SWEEP_FILE);
    let mut header = vec!["cell".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    if let Some(run) = runs.first() {
        header.extend(summary_columns(run));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvOut::create(&path, &header)?;
    for row in rows {
        csv.row(row)?;
    }
    csv.finish()?;
    Ok(SweepOutput { path, runs })
}

fn summary_columns(run: &SimRun) -> Vec<String> {
    let mut cols = Vec::new();
    for s in run.summary() {
        cols.push(format!("rmse_{}", s.approach));
        if s.mean_w_m.is_some() {
            let name = s.approach.trim_start_matches("sensor_");
            cols.push(format!("mean_wM_{name}"));
            cols.push(format!("mean_wd_{name}"));
            cols.push(format!("mean_rvv_{name}"));
        }
    }
    cols
}

fn summary_fields(run: &SimRun) -> Vec<String> {
    let mut fields = Vec::new();
    for s in run.summary() {
        fields.push(fmt_f64(s.rmse));
        if s.mean_w_m.is_some() {
            fields.push(fmt_opt(s.mean_w_m));
            fields.push(fmt_opt(s.mean_w_d));
            fields.push(fmt_opt(s.mean_rvv));
        }
    }
    fields
}
