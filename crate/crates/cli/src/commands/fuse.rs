use std::collections::HashMap;
use std::path::{Path, PathBuf};

use habdf_core::voting::MIN_DETECTORS;
use habdf_core::{make_pipeline, BoundingBox, FusedEstimate};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::{ensure_dir, fmt_f64, fmt_opt, read_tracks, CsvOut, TrackRecord};

pub const FUSED_FILE: &str = "fused.csv";
pub const WEIGHTS_FILE: &str = "fuse_weights.csv";

#[derive(Debug)]
pub struct FuseOutput {
    pub fused: PathBuf,
    pub weights: PathBuf,
    pub detectors: Vec<String>,
    pub frames: Vec<(u64, FusedEstimate)>,
}

/// Per-frame boxes of every detector, `None` where missing or invalid.
#[derive(Debug)]
pub struct TrackTable {
    pub detectors: Vec<String>,
    pub first_frame: u64,
    pub rows: Vec<Vec<Option<BoundingBox>>>,
}

pub fn tabulate(records: &[TrackRecord], path: &Path) -> Result<TrackTable> {
    let mut detectors: Vec<String> = Vec::new();
    for r in records {
        if !detectors.contains(&r.detector_id) {
            detectors.push(r.detector_id.clone());
        }
    }
    if detectors.len() < MIN_DETECTORS {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: format!(
                "found {} detector(s); majority voting needs at least {MIN_DETECTORS} to reach consensus",
                detectors.len()
            ),
        });
    }
    let index: HashMap<&str, usize> = detectors
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let first = records.iter().map(|r| r.frame).min().expect("nonempty log");
    let last = records.iter().map(|r| r.frame).max().expect("nonempty log");
    let span = usize::try_from(last - first + 1).map_err(|_| CliError::Input {
        path: path.to_path_buf(),
        message: "frame range too large".into(),
    })?;
    let mut rows = vec![vec![None; detectors.len()]; span];
    let mut seen = vec![vec![false; detectors.len()]; span];
    for (i, r) in records.iter().enumerate() {
        let (f, d) = ((r.frame - first) as usize, index[r.detector_id.as_str()]);
        if seen[f][d] {
            return Err(CliError::Data {
                path: path.to_path_buf(),
                row: i as u64 + 2,
                message: format!(
                    "second row for detector {} on frame {}",
                    r.detector_id, r.frame
                ),
            });
        }
        seen[f][d] = true;
        if r.valid {
            rows[f][d] = Some(r.bbox());
        }
    }
    Ok(TrackTable {
        detectors,
        first_frame: first,
        rows,
    })
}

pub fn fuse(tracks: &Path, config_path: Option<&Path>, out: &Path) -> Result<FuseOutput> {
    let config = match config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let origin = config_path.unwrap_or(Path::new("<defaults>"));
    let records = read_tracks(tracks)?;
    let table = tabulate(&records, tracks)?;
    let fusion = config.fusion_config(table.detectors.len(), origin)?;
    let mut pipeline = make_pipeline(table.detectors.len(), &config.model, fusion)?;

    let mut frames = Vec::new();
    for (k, row) in table.rows.iter().enumerate() {
        let out = pipeline.step_boxes(row)?;
        if let Some(est) = out.fused {
            frames.push((table.first_frame + k as u64, est));
        }
    }

    ensure_dir(out)?;
    let fused_path = out.join(FUSED_FILE);
    let weights_path = out.join(WEIGHTS_FILE);
    let mut fused = CsvOut::create(
        &fused_path,
        &[
            "frame", "u", "v", "h", "w", "var_u", "var_v", "var_h", "var_w", "coasting",
        ],
    )?;
    let mut weights = CsvOut::create(
        &weights_path,
        &[
            "frame",
            "detector_id",
            "present",
            "md",
            "w_m",
            "w_d",
            "rvv_scale",
        ],
    )?;
    for (frame, est) in &frames {
        let m = &est.state.mean;
        let c = &est.state.cov;
        let mut row = vec![frame.to_string()];
        row.extend((0..4).map(|i| fmt_f64(m[i])));
        row.extend((0..4).map(|i| fmt_f64(c[(i, i)])));
        row.push(u8::from(est.coasting).to_string());
        fused.row(row)?;
        for (id, d) in table.detectors.iter().zip(&est.per_detector) {
            weights.row([
                frame.to_string(),
                id.clone(),
                u8::from(d.present).to_string(),
                fmt_opt(d.md),
                fmt_opt(d.w_m),
                fmt_opt(d.w_d),
                fmt_opt(d.rvv_scale),
            ])?;
        }
    }
    fused.finish()?;
    weights.finish()?;
    Ok(FuseOutput {
        fused: fused_path,
        weights: weights_path,
        detectors: table.detectors,
        frames,
    })
}
