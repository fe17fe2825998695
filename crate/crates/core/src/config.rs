//! Run configuration, read from a TOML file.
//!
//! Every key is optional; missing keys take the defaults below. Provider
//! credentials are never read from here, only from the environment.
//!
//! ```toml
//! [content]
//! story_words = 500
//! story_tolerance = 0.2
//! summary_words = 50
//! summary_tolerance = 0.3
//! retries = 3
//!
//! [images]
//! clip_weight = 2.5
//! token_budget = 77
//! embedding_dims = 512
//! width_px = 1024
//! height_px = 1024
//!
//! [providers]
//! text_model = "gpt-4o"
//! image_model = "dall-e-3"
//! embed_model = "clip-vit-base-patch32"
//! timeout_seconds = 120
//! temperature = 0.8
//!
//! [fixation]
//! min_points = 9
//! init_dispersion_px = 50.0
//! extend_dispersion_px = 80.0
//! sample_rate_hz = 90.0
//!
//! [gaze]
//! grid_w = 64
//! grid_h = 36
//! layout_file = "aoi_layouts.toml"   # relative to the config file
//!
//! [experiment]
//! distraction_problems = 30
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{LengthBand, DEFAULT_RETRIES};
use crate::experiment::DEFAULT_DISTRACTION_PROBLEMS;
use crate::gaze::{FixationParams, DEFAULT_GRID_H, DEFAULT_GRID_W};
use crate::images::{CLIP_S_WEIGHT, DEFAULT_TOKEN_BUDGET};

pub const DEFAULT_EMBEDDING_DIMS: usize = 512;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentConfig {
    pub story_words: u32,
    pub story_tolerance: f64,
    pub summary_words: u32,
    pub summary_tolerance: f64,
    pub retries: usize,
}

impl Default for ContentConfig {
    fn default() -> Self {
        Self {
            story_words: LengthBand::STORY.target,
            story_tolerance: LengthBand::STORY.tolerance,
            summary_words: LengthBand::SUMMARY.target,
            summary_tolerance: LengthBand::SUMMARY.tolerance,
            retries: DEFAULT_RETRIES,
        }
    }
}

impl ContentConfig {
    pub fn story_band(&self) -> LengthBand {
        LengthBand { target: self.story_words, tolerance: self.story_tolerance }
    }

    pub fn summary_band(&self) -> LengthBand {
        LengthBand { target: self.summary_words, tolerance: self.summary_tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagesConfig {
    pub clip_weight: f64,
    pub token_budget: usize,
    pub embedding_dims: usize,
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for ImagesConfig {
    fn default() -> Self {
        Self {
            clip_weight: CLIP_S_WEIGHT,
            token_budget: DEFAULT_TOKEN_BUDGET,
            embedding_dims: DEFAULT_EMBEDDING_DIMS,
            width_px: 1024,
            height_px: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub text_model: String,
    pub image_model: String,
    pub embed_model: String,
    pub timeout_seconds: u64,
    pub temperature: Option<f64>,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        Self {
            text_model: "gpt-4o".into(),
            image_model: "dall-e-3".into(),
            embed_model: "clip-vit-base-patch32".into(),
            timeout_seconds: 120,
            temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GazeConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    pub layout_file: Option<PathBuf>,
}

impl Default for GazeConfig {
    fn default() -> Self {
        Self { grid_w: DEFAULT_GRID_W, grid_h: DEFAULT_GRID_H, layout_file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distraction_problems: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { distraction_problems: DEFAULT_DISTRACTION_PROBLEMS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub content: ContentConfig,
    pub images: ImagesConfig,
    pub providers: ProvidersConfig,
    pub fixation: FixationParams,
    pub gaze: GazeConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file; a relative `gaze.layout_file` is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), message: e.to_string() })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Invalid(m) => ConfigError::Read { path: path.to_path_buf(), message: m },
            other => other,
        })?;
        if let (Some(lf), Some(dir)) = (cfg.gaze.layout_file.as_mut(), path.parent()) {
            if lf.is_relative() {
                *lf = dir.join(&*lf);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        LengthBand::new(self.content.story_words, self.content.story_tolerance)
            .and_then(|_| LengthBand::new(self.content.summary_words, self.content.summary_tolerance))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.images.clip_weight > 0.0 && self.images.clip_weight.is_finite()) {
            return bad("images.clip_weight must be positive".into());
        }
        if self.images.token_budget == 0 || self.images.embedding_dims == 0 {
            return bad("images.token_budget and images.embedding_dims must be positive".into());
        }
        if self.images.width_px == 0 || self.images.height_px == 0 {
            return bad("image size must be positive".into());
        }
        self.fixation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.gaze.grid_w == 0 || self.gaze.grid_h == 0 {
            return bad("gaze grid must be positive".into());
        }
        if self.experiment.distraction_problems == 0 {
            return bad("experiment.distraction_problems must be positive".into());
        }
        Ok(())
    }
}
