//! Scan paths and fixation heatmaps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Fixation, GazeError};

pub const DEFAULT_GRID_W: usize = 64;
pub const DEFAULT_GRID_H: usize = 36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanNode {
    pub order: usize,
    pub x: f64,
    pub y: f64,
    pub start_t_ms: i64,
    pub duration_ms: f64,
}

/// Fixation centroids in temporal order; consecutive nodes are joined by an
/// edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPath {
    pub nodes: Vec<ScanNode>,
}

pub fn scan_path(fixations: &[Fixation]) -> ScanPath {
    ScanPath {
        nodes: fixations
            .iter()
            .enumerate()
            .map(|(i, f)| ScanNode {
                order: i,
                x: f.centroid.x,
                y: f.centroid.y,
                start_t_ms: f.start_t_ms,
                duration_ms: f.duration_ms,
            })
            .collect(),
    }
}

impl ScanPath {
    pub fn edge_count(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// SVG drawing: a polyline through the nodes and one numbered circle per
    /// fixation, radius growing with the square root of its duration.
    pub fn to_svg(&self, screen_w: f64, screen_h: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{screen_w:.0}" height="{screen_h:.0}" viewBox="0 0 {screen_w:.0} {screen_h:.0}">"#
        );
        let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        if self.nodes.len() > 1 {
            let pts: Vec<String> = self.nodes.iter().map(|n| format!("{:.2},{:.2}", n.x, n.y)).collect();
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
                pts.join(" ")
            );
        }
        for n in &self.nodes {
            let r = 4.0 + n.duration_ms.max(0.0).sqrt();
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" fill="#ff7f0e" fill-opacity="0.5" stroke="#d62728"/>"##,
                n.x, n.y
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
                n.x,
                n.y + 4.0,
                n.order + 1
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Row-major grid of accumulated fixation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub width: usize,
    pub height: usize,
    pub cells_ms: Vec<f64>,
}

impl HeatmapGrid {
    pub fn cell(&self, col: usize, row: usize) -> f64 {
        self.cells_ms[row * self.width + col]
    }

    pub fn total_ms(&self) -> f64 {
        self.cells_ms.iter().sum()
    }

    /// `height` lines of `width` comma-separated values, top row first.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.cells_ms.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

fn cell_index(v: f64, extent: f64, cells: usize) -> usize {
    let c = (v / extent * cells as f64).floor();
    if c.is_nan() || c < 0.0 {
        0
    } else {
        (c as usize).min(cells - 1)
    }
}

/// Deposits each fixation's full duration into the cell holding its
/// centroid. Off-screen centroids go to the nearest edge cell so the grid
/// always conserves total fixation time.
pub fn heatmap(
    fixations: &[Fixation],
    grid_w: usize,
    grid_h: usize,
    screen_w: f64,
    screen_h: f64,
) -> Result<HeatmapGrid, GazeError> {
    if grid_w == 0 || grid_h == 0 || !(screen_w > 0.0 && screen_h > 0.0) {
        return Err(GazeError::InvalidParams("grid and screen dimensions must be positive".into()));
    }
    let mut cells = vec![0.0; grid_w * grid_h];
    for f in fixations {
        let col = cell_index(f.centroid.x, screen_w, grid_w);
        let row = cell_index(f.centroid.y, screen_h, grid_h);
        cells[row * grid_w + col] += f.duration_ms;
    }
    Ok(HeatmapGrid { width: grid_w, height: grid_h, cells_ms: cells })
}
