//! Gaze analytics: fixation detection, AOI attribution, scan paths,
//! heatmaps and per-condition reports.
//!
//! Everything here is a pure function of its inputs; batches of streams or
//! sessions go through [`crate::batch`].

mod aoi;
mod fixation;
mod report;
mod viz;

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aoi::{aoi_ratio, classify_fixation, AoiBucket, AoiLayout, AoiRatioReport, AoiRect, LayoutSet, OFF_AOI};
pub use fixation::{detect_fixations, detect_fixations_batch, Fixation, FixationParams};
pub use report::{
    analyze_session, analyze_sessions, condition_report, preference_group, ConditionReport, ConditionRow, SessionAnalysis, SlotAnalysis,
};
pub use viz::{heatmap, scan_path, HeatmapGrid, ScanNode, ScanPath, DEFAULT_GRID_H, DEFAULT_GRID_W};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GazeError {
    #[error("gaze csv line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// One tracker sample. Coordinates of invalid samples are meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    pub t_ms: i64,
    pub x_px: f64,
    pub y_px: f64,
    pub valid: bool,
}

impl GazePoint {
    pub fn new(t_ms: i64, x_px: f64, y_px: f64) -> Self {
        Self { t_ms, x_px, y_px, valid: true }
    }

    pub fn invalid(t_ms: i64) -> Self {
        Self { t_ms, x_px: f64::NAN, y_px: f64::NAN, valid: false }
    }
}

pub const GAZE_CSV_HEADER: [&str; 4] = ["t_ms", "x_px", "y_px", "valid"];

fn parse_valid(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Parses `t_ms,x_px,y_px,valid` CSV. Timestamps must not decrease; invalid
/// rows may leave the coordinates empty. Errors name the 1-based file line.
pub fn parse_gaze_csv(input: impl Read) -> Result<Vec<GazePoint>, GazeError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(input);
    let header = rdr.headers().map_err(|e| GazeError::Csv { line: 1, message: e.to_string() })?.clone();
    if header.iter().collect::<Vec<_>>() != GAZE_CSV_HEADER {
        return Err(GazeError::Csv { line: 1, message: format!("expected header {}", GAZE_CSV_HEADER.join(",")) });
    }
    let mut out: Vec<GazePoint> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| GazeError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| GazeError::Csv { line, message };
        let t_ms: i64 = rec[0].parse().map_err(|_| bad(format!("bad t_ms {:?}", &rec[0])))?;
        let valid = parse_valid(&rec[3]).ok_or_else(|| bad(format!("bad valid flag {:?}", &rec[3])))?;
        let coord = |s: &str, name: &str| -> Result<f64, GazeError> {
            if !valid && s.is_empty() {
                return Ok(f64::NAN);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() || !valid => Ok(v),
                _ => Err(bad(format!("bad {name} {s:?}"))),
            }
        };
        let x_px = coord(&rec[1], "x_px")?;
        let y_px = coord(&rec[2], "y_px")?;
        if out.last().is_some_and(|p| p.t_ms > t_ms) {
            return Err(bad(format!("t_ms {t_ms} goes backwards")));
        }
        out.push(GazePoint { t_ms, x_px, y_px, valid });
    }
    Ok(out)
}

pub fn write_gaze_csv(points: &[GazePoint]) -> String {
    let mut s = GAZE_CSV_HEADER.join(",");
    s.push('\n');
    for p in points {
        if p.valid {
            s.push_str(&format!("{},{},{},1\n", p.t_ms, p.x_px, p.y_px));
        } else {
            s.push_str(&format!("{},,,0\n", p.t_ms));
        }
    }
    s
}
