use std::path::{Path, PathBuf};

use habdf_core::{run_sim_experiment, SimRun};

use crate::config::RunConfig;
use crate::error::Result;
use crate::records::{ensure_dir, fmt_f64, fmt_opt, CsvOut};

pub const FRAMES_FILE: &str = "sim_frames.csv";
pub const SUMMARY_FILE: &str = "sim_summary.csv";

#[derive(Debug)]
pub struct SimulateOutput {
    pub frames: PathBuf,
    pub summary: PathBuf,
    pub run: SimRun,
}

pub fn simulate(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<SimulateOutput> {
    let config = RunConfig::load(config_path)?;
    let scenario = config.scenario(seed, config_path)?;
    let run = run_sim_experiment(&scenario)?;
    ensure_dir(out)?;
    let frames = out.join(FRAMES_FILE);
    let summary = out.join(SUMMARY_FILE);
    write_frames(&frames, &run)?;
    write_summary(&summary, &run)?;
    Ok(SimulateOutput {
        frames,
        summary,
        run,
    })
}

pub fn write_frames(path: &Path, run: &SimRun) -> Result<()> {
    let names = &run.sensor_names;
    let mut header = vec!["frame".to_string(), "truth".to_string()];
    for prefix in ["sensor", "expert", "wM", "wd", "rvv"] {
        header.extend(names.iter().map(|n| format!("{prefix}_{n}")));
    }
    header.push("fused".into());
    header.push("fused_var".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::create(path, &header)?;
    for r in &run.records {
        let mut row = vec![r.frame.to_string(), fmt_f64(r.truth)];
        for column in [&r.sensors, &r.experts, &r.w_m, &r.w_d, &r.rvv] {
            row.extend(column.iter().copied().map(fmt_f64));
        }
        row.push(fmt_f64(r.fused));
        row.push(fmt_f64(r.fused_var));
        out.row(row)?;
    }
    out.finish()
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "approach",
    "rmse",
    "mae",
    "max_abs_err",
    "mean_w_m",
    "mean_w_d",
    "mean_rvv",
];

pub fn write_summary(path: &Path, run: &SimRun) -> Result<()> {
    let mut out = CsvOut::create(path, &SUMMARY_HEADER)?;
    for s in run.summary() {
        out.row([
            s.approach,
            fmt_f64(s.rmse),
            fmt_f64(s.mae),
            fmt_f64(s.max_abs_err),
            fmt_opt(s.mean_w_m),
            fmt_opt(s.mean_w_d),
            fmt_opt(s.mean_rvv),
        ])?;
    }
    out.finish()
}
