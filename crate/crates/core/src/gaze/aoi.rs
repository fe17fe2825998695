//! Areas of interest and duration-weighted AOI ratios.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Fixation, GazeError};
use crate::experiment::ReadingCondition;

pub const OFF_AOI: &str = "off_aoi";

const DEFAULT_LAYOUTS: &str = include_str!("../../data/aoi_layouts.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRect {
    pub name: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl AoiRect {
    /// Closed containment in normalized coordinates.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.x0 <= u && u <= self.x1 && self.y0 <= v && v <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiLayout {
    pub condition: ReadingCondition,
    pub aoi: Vec<AoiRect>,
}

impl AoiLayout {
    pub fn validate(&self) -> Result<(), GazeError> {
        let mut names = BTreeSet::new();
        for r in &self.aoi {
            let inside = [r.x0, r.y0, r.x1, r.y1].iter().all(|v| (0.0..=1.0).contains(v));
            if !inside || r.x0 >= r.x1 || r.y0 >= r.y1 {
                return Err(GazeError::InvalidLayout(format!("{}: {} is not a rectangle in the unit square", self.condition, r.name)));
            }
            if r.name.is_empty() || r.name == OFF_AOI || !names.insert(r.name.as_str()) {
                return Err(GazeError::InvalidLayout(format!("{}: bad or duplicate AOI name {:?}", self.condition, r.name)));
            }
        }
        Ok(())
    }

    /// Bucket names in report order: declared AOIs, then `off_aoi`.
    pub fn bucket_names(&self) -> Vec<&str> {
        self.aoi.iter().map(|r| r.name.as_str()).chain([OFF_AOI]).collect()
    }
}

/// Screen size plus one layout per condition, as stored in a layout file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSet {
    pub screen_width_px: f64,
    pub screen_height_px: f64,
    pub layout: Vec<AoiLayout>,
}

impl LayoutSet {
    pub fn from_toml(text: &str) -> Result<Self, GazeError> {
        let set: LayoutSet = toml::from_str(text).map_err(|e| GazeError::InvalidLayout(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, GazeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GazeError::InvalidLayout(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn defaults() -> Self {
        Self::from_toml(DEFAULT_LAYOUTS).expect("bundled layouts are valid")
    }

    pub fn default_toml() -> &'static str {
        DEFAULT_LAYOUTS
    }

    pub fn validate(&self) -> Result<(), GazeError> {
        if !(self.screen_width_px > 0.0 && self.screen_height_px > 0.0) {
            return Err(GazeError::InvalidLayout("screen size must be positive".into()));
        }
        for c in ReadingCondition::ALL {
            match self.layout.iter().filter(|l| l.condition == c).count() {
                1 => {}
                n => return Err(GazeError::InvalidLayout(format!("{n} layouts for {c}, expected 1"))),
            }
        }
        self.layout.iter().try_for_each(AoiLayout::validate)
    }

    pub fn get(&self, condition: ReadingCondition) -> &AoiLayout {
        self.layout.iter().find(|l| l.condition == condition).expect("validated")
    }
}

/// Name of the first declared AOI containing the centroid, or `off_aoi`.
pub fn classify_fixation<'a>(f: &Fixation, layout: &'a AoiLayout, screen_w: f64, screen_h: f64) -> &'a str {
    let (u, v) = (f.centroid.x / screen_w, f.centroid.y / screen_h);
    layout.aoi.iter().find(|r| r.contains(u, v)).map_or(OFF_AOI, |r| r.name.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiBucket {
    pub name: String,
    pub duration_ms: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRatioReport {
    pub condition: ReadingCondition,
    pub buckets: Vec<AoiBucket>,
    pub total_duration_ms: f64,
    /// Set when there was no fixation time; all ratios are then 0.
    pub zero_total: bool,
}

impl AoiRatioReport {
    pub fn ratio(&self, name: &str) -> Option<f64> {
        self.buckets.iter().find(|b| b.name == name).map(|b| b.ratio)
    }
}

pub fn aoi_ratio(fixations: &[Fixation], layout: &AoiLayout, screen_w: f64, screen_h: f64) -> AoiRatioReport {
    let names = layout.bucket_names();
    let mut durations = vec![0.0; names.len()];
    for f in fixations {
        let name = classify_fixation(f, layout, screen_w, screen_h);
        let i = names.iter().position(|n| *n == name).expect("bucket exists");
        durations[i] += f.duration_ms;
    }
    let total: f64 = durations.iter().sum();
    let zero_total = total <= 0.0;
    AoiRatioReport {
        condition: layout.condition,
        buckets: names
            .iter()
            .zip(durations)
            .map(|(n, d)| AoiBucket { name: n.to_string(), duration_ms: d, ratio: if zero_total { 0.0 } else { d / total } })
            .collect(),
        total_duration_ms: total,
        zero_total,
    }
}
