//! Dispersion-threshold (I-DT) fixation detection.

use serde::{Deserialize, Serialize};

use super::{GazeError, GazePoint, Point};
use crate::batch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixationParams {
    pub min_points: usize,
    pub init_dispersion_px: f64,
    pub extend_dispersion_px: f64,
    pub sample_rate_hz: f64,
}

impl Default for FixationParams {
    fn default() -> Self {
        Self { min_points: 9, init_dispersion_px: 50.0, extend_dispersion_px: 80.0, sample_rate_hz: 90.0 }
    }
}

impl FixationParams {
    pub fn validate(&self) -> Result<(), GazeError> {
        if self.min_points < 2 {
            return Err(GazeError::InvalidParams("min_points must be at least 2".into()));
        }
        if !(self.init_dispersion_px > 0.0 && self.extend_dispersion_px >= self.init_dispersion_px) {
            return Err(GazeError::InvalidParams("need extend >= init > 0".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(GazeError::InvalidParams("sample rate must be positive".into()));
        }
        Ok(())
    }

    /// Nominal duration of `n` samples.
    pub fn duration_ms(&self, n: usize) -> f64 {
        1000.0 * n as f64 / self.sample_rate_hz
    }
}

/// A detected fixation. `first_sample..=last_sample` index the input stream
/// (invalid samples included). `duration_ms` comes from the point count at
/// the nominal rate; `span_ms` is the timestamp difference, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub start_t_ms: i64,
    pub end_t_ms: i64,
    pub duration_ms: f64,
    pub span_ms: i64,
    pub centroid: Point,
    pub n_points: usize,
    pub first_sample: usize,
    pub last_sample: usize,
}

/// Runs of consecutive valid samples as `(offset, slice)`.
fn valid_runs(points: &[GazePoint]) -> Vec<(usize, &[GazePoint])> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, p) in points.iter().enumerate() {
        match (p.valid, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, &points[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &points[s..]));
    }
    out
}

/// `|p - S/n| <= r` evaluated as `|n·p - S| <= n·r`, with no division, so
/// integer-valued input is handled exactly.
fn within(p: &GazePoint, sx: f64, sy: f64, n: f64, r: f64) -> bool {
    let dx = n * p.x_px - sx;
    let dy = n * p.y_px - sy;
    let nr = n * r;
    dx * dx + dy * dy <= nr * nr
}

fn detect_in_run(offset: usize, run: &[GazePoint], params: &FixationParams, out: &mut Vec<Fixation>) {
    let m = params.min_points;
    let mut i = 0;
    while i + m <= run.len() {
        let window = &run[i..i + m];
        let (sx, sy) = window.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x_px, b + p.y_px));
        if !window.iter().all(|p| within(p, sx, sy, m as f64, params.init_dispersion_px)) {
            i += 1;
            continue;
        }
        let (mut sx, mut sy, mut j) = (sx, sy, i + m);
        while j < run.len() && within(&run[j], sx, sy, (j - i) as f64, params.extend_dispersion_px) {
            sx += run[j].x_px;
            sy += run[j].y_px;
            j += 1;
        }
        let n = j - i;
        let (first, last) = (&run[i], &run[j - 1]);
        out.push(Fixation {
            start_t_ms: first.t_ms,
            end_t_ms: last.t_ms,
            duration_ms: params.duration_ms(n),
            span_ms: last.t_ms - first.t_ms,
            centroid: Point { x: sx / n as f64, y: sy / n as f64 },
            n_points: n,
            first_sample: offset + i,
            last_sample: offset + j - 1,
        });
        // The rejecting sample may open the next window.
        i = j;
    }
}

/// Detects fixations in a time-ordered stream. Invalid samples split the
/// stream; a window of `min_points` samples opens a fixation when each lies
/// within `init_dispersion_px` of the window centroid, and later samples
/// join while within `extend_dispersion_px` of the running centroid.
pub fn detect_fixations(points: &[GazePoint], params: &FixationParams) -> Vec<Fixation> {
    let mut out = Vec::new();
    for (offset, run) in valid_runs(points) {
        detect_in_run(offset, run, params, &mut out);
    }
    out
}

/// [`detect_fixations`] over many streams, in parallel when enabled.
pub fn detect_fixations_batch(streams: &[Vec<GazePoint>], params: &FixationParams) -> Vec<Vec<Fixation>> {
    batch::map(streams, |s| detect_fixations(s, params))
}
