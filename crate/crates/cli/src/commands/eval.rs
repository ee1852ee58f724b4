use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use habdf_core::{summarize, ApproachSummary, BoundingBox, FrameEval};

use crate::error::{CliError, Result};
use crate::records::{ensure_dir, fmt_f64, note, read_boxes, CsvOut};

pub const FRAMES_FILE: &str = "eval_frames.csv";
pub const SUMMARY_FILE: &str = "eval_summary.csv";

#[derive(Debug)]
pub struct ApproachEval {
    pub name: String,
    pub frames: Vec<FrameEval>,
    /// Frames present on only one side of the join.
    pub unmatched: usize,
}

#[derive(Debug)]
pub struct EvalOutput {
    pub frames: PathBuf,
    pub summary: PathBuf,
    pub approaches: Vec<ApproachEval>,
    pub summaries: Vec<ApproachSummary>,
}

fn by_frame(path: &Path, rows: Vec<(u64, BoundingBox, u64)>) -> Result<BTreeMap<u64, BoundingBox>> {
    let mut out = BTreeMap::new();
    for (frame, b, line) in rows {
        if out.insert(frame, b).is_some() {
            return Err(CliError::Data {
                path: path.to_path_buf(),
                row: line,
                message: format!("frame {frame} appears twice"),
            });
        }
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "estimate".to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

/// Scores every estimate file against `gt`. A file with a `detector_id`
/// column contributes one approach per detector.
pub fn eval(estimates: &[PathBuf], gt: &Path, out: &Path) -> Result<EvalOutput> {
    let mut gt_series = read_boxes(gt, "gt")?;
    if gt_series.len() != 1 {
        return Err(CliError::Input {
            path: gt.to_path_buf(),
            message: format!(
                "ground truth holds {} tracks, expected one",
                gt_series.len()
            ),
        });
    }
    let truth = by_frame(gt, gt_series.pop().expect("one series").1)?;

    let mut approaches = Vec::new();
    for path in estimates {
        for (name, rows) in read_boxes(path, &stem(path))? {
            let est = by_frame(path, rows)?;
            let frames: Vec<FrameEval> = est
                .iter()
                .filter_map(|(f, b)| truth.get(f).map(|g| FrameEval::new(*f, b, g)))
                .collect();
            let unmatched = est.len() + truth.len() - 2 * frames.len();
            if unmatched > 0 {
                note(format_args!(
                    "{name}: {unmatched} unmatched frame(s) excluded"
                ));
            }
            if frames.is_empty() {
                return Err(CliError::Input {
                    path: path.clone(),
                    message: format!("{name} shares no frames with the ground truth"),
                });
            }
            approaches.push(ApproachEval {
                name,
                frames,
                unmatched,
            });
        }
    }
    if approaches.is_empty() {
        return Err(CliError::Usage(
            "eval needs at least one estimate file".into(),
        ));
    }
    let summaries = summarize(
        approaches
            .iter()
            .map(|a| (a.name.as_str(), a.frames.as_slice())),
    )?;

    ensure_dir(out)?;
    let frames_path = out.join(FRAMES_FILE);
    let summary_path = out.join(SUMMARY_FILE);
    let mut frames_csv = CsvOut::create(
        &frames_path,
        &["approach", "frame", "jaccard", "dist", "success"],
    )?;
    for a in &approaches {
        for e in &a.frames {
            frames_csv.row([
                a.name.clone(),
                e.frame.to_string(),
                fmt_f64(e.jaccard),
                fmt_f64(e.dist),
                u8::from(e.success).to_string(),
            ])?;
        }
    }
    frames_csv.finish()?;
    let mut summary_csv = CsvOut::create(
        &summary_path,
        &[
            "approach",
            "frames",
            "mean_jaccard",
            "mean_dist",
            "success_rate",
            "unmatched",
        ],
    )?;
    for (s, a) in summaries.iter().zip(&approaches) {
        summary_csv.row([
            s.approach.clone(),
            s.frames.to_string(),
            fmt_f64(s.mean_jaccard),
            fmt_f64(s.mean_dist),
            fmt_f64(s.success_rate),
            a.unmatched.to_string(),
        ])?;
    }
    summary_csv.finish()?;
    Ok(EvalOutput {
        frames: frames_path,
        summary: summary_path,
        approaches,
        summaries,
    })
}

/// Fixed-width table for the terminal.
pub fn render_table(summaries: &[ApproachSummary]) -> String {
    let width = summaries
        .iter()
        .map(|s| s.approach.len())
        .max()
        .unwrap_or(8)
        .max(8);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>8}  {:>9}  {:>7}\n",
        "approach", "frames", "jaccard", "distance", "success"
    );
    for s in summaries {
        out.push_str(&format!(
            "{:<width$}  {:>6}  {:>8.3}  {:>9.2}  {:>6.1}%\n",
            s.approach,
            s.frames,
            s.mean_jaccard,
            s.mean_dist,
            100.0 * s.success_rate
        ));
    }
    out
}
