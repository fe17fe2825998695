//! Core engine for AI-augmented reading studies.
//!
//! The crate covers three stages of a study:
//!
//! * **Content**: [`content`] builds a story, its metadata, a short text
//!   summary and a ten-question quiz through a [`providers::TextProvider`];
//!   [`images`] renders one image per sentence (each conditioned on the
//!   previous one) and picks five summary images by weighted, clamped cosine
//!   similarity. [`bundle`] persists all of it as a directory of JSON
//!   fragments.
//! * **Experiment**: [`experiment`] enumerates the six counterbalanced group
//!   assignments, drives a per-participant session state machine with server
//!   enforced timers, and keeps an append-only event log that replays into a
//!   [`experiment::SessionLog`].
//! * **Analysis**: [`gaze`] detects fixations with a dispersion-threshold
//!   scan, attributes them to areas of interest, and aggregates scores and
//!   AOI ratios per reading condition.
//!
//! Batch work (embedding many images, analyzing many sessions) goes through
//! [`batch`], which uses rayon when the `parallel` feature is enabled and a
//! plain iterator otherwise.

pub mod batch;
pub mod bundle;
pub mod config;
pub mod content;
pub mod experiment;
pub mod gaze;
pub mod images;
pub mod providers;
pub mod textutil;

pub use bundle::{Bundle, BundleManifest};
pub use content::{PreferenceSpec, Question, QuestionSet, Story, StoryMetadata, Summary};
pub use experiment::{GroupAssignment, ReadingCondition, SessionLog, SessionState};
pub use gaze::{Fixation, FixationParams, GazePoint};
pub use images::{SentenceImage, SummarySelection};
pub use providers::{EmbeddingVector, ImageArtifact};
