//! Per-session analysis and per-condition aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{aoi_ratio, detect_fixations, AoiRatioReport, Fixation, FixationParams, GazePoint, LayoutSet, OFF_AOI};
use crate::batch;
use crate::experiment::{ReadingCondition, SessionLog};

pub const ALL_PARTICIPANTS: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAnalysis {
    pub slot: u8,
    pub condition: ReadingCondition,
    pub story_id: String,
    pub correct_answers: Option<u8>,
    pub fixations: Vec<Fixation>,
    /// `None` when the session has no gaze data for this slot's window.
    pub aoi: Option<AoiRatioReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAnalysis {
    pub session_id: String,
    pub group_number: Option<u8>,
    pub preference_group: String,
    pub slots: Vec<SlotAnalysis>,
}

/// Preferred medium from post-survey Q3/Q4: `text-generation` or
/// `image-generation` when the answers name only one of them, `mixed` when
/// both appear, `unspecified` otherwise.
pub fn preference_group(post_survey: &BTreeMap<String, String>) -> String {
    let answers: Vec<String> =
        ["Q3", "Q4"].iter().filter_map(|k| post_survey.get(*k)).map(|v| v.to_ascii_lowercase()).collect();
    let text = answers.iter().any(|a| a.contains("text-generation"));
    let image = answers.iter().any(|a| a.contains("image-generation"));
    match (text, image) {
        (true, false) => "text-generation",
        (false, true) => "image-generation",
        (true, true) => "mixed",
        (false, false) => "unspecified",
    }
    .to_string()
}

/// Splits gaze by each slot's reading window (`[start, end)` on the server
/// clock), detects fixations and computes AOI ratios with the slot's layout.
pub fn analyze_session(
    log: &SessionLog,
    gaze: Option<&[GazePoint]>,
    layouts: &LayoutSet,
    params: &FixationParams,
) -> SessionAnalysis {
    let slots = log
        .slots
        .iter()
        .map(|s| {
            let window = gaze.zip(s.reading_window_ms).map(|(pts, (start, end))| {
                let (start, end) = (start as i64, end as i64);
                pts.iter().filter(|p| p.t_ms >= start && p.t_ms < end).copied().collect::<Vec<_>>()
            });
            let fixations = window.as_deref().map(|w| detect_fixations(w, params)).unwrap_or_default();
            let aoi = window.map(|_| {
                aoi_ratio(&fixations, layouts.get(s.condition), layouts.screen_width_px, layouts.screen_height_px)
            });
            SlotAnalysis {
                slot: s.slot,
                condition: s.condition,
                story_id: s.story_id.clone(),
                correct_answers: s.correct_answers,
                fixations,
                aoi,
            }
        })
        .collect();
    SessionAnalysis {
        session_id: log.session_id.clone(),
        group_number: log.group_number,
        preference_group: preference_group(&log.post_survey),
        slots,
    }
}

/// [`analyze_session`] over many sessions, in parallel when enabled.
pub fn analyze_sessions(
    inputs: &[(SessionLog, Option<Vec<GazePoint>>)],
    layouts: &LayoutSet,
    params: &FixationParams,
) -> Vec<SessionAnalysis> {
    batch::map(inputs, |(log, gaze)| analyze_session(log, gaze.as_deref(), layouts, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub preference_group: String,
    pub condition: ReadingCondition,
    pub n_scored: usize,
    pub mean_correct: Option<f64>,
    /// Sample standard deviation; 0 for a single score.
    pub sd_correct: Option<f64>,
    pub n_gaze: usize,
    pub mean_aoi_ratio: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (Some(mean), Some(sd))
}

fn row(group: &str, condition: ReadingCondition, slots: &[&SlotAnalysis]) -> ConditionRow {
    let scores: Vec<f64> = slots.iter().filter_map(|s| s.correct_answers).map(f64::from).collect();
    let (mean_correct, sd_correct) = mean_sd(&scores);
    let gaze: Vec<&AoiRatioReport> = slots.iter().filter_map(|s| s.aoi.as_ref()).filter(|a| !a.zero_total).collect();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for a in &gaze {
        for b in &a.buckets {
            *sums.entry(b.name.clone()).or_default() += b.ratio;
        }
    }
    let mean_aoi_ratio = sums.into_iter().map(|(k, v)| (k, v / gaze.len() as f64)).collect();
    ConditionRow {
        preference_group: group.to_string(),
        condition,
        n_scored: scores.len(),
        mean_correct,
        sd_correct,
        n_gaze: gaze.len(),
        mean_aoi_ratio,
    }
}

/// Aggregates scores and AOI ratios per condition, over all participants
/// and then per preference group (groups in name order).
pub fn condition_report(sessions: &[SessionAnalysis]) -> ConditionReport {
    let groups: BTreeSet<&str> = sessions.iter().map(|s| s.preference_group.as_str()).collect();
    let mut rows = Vec::new();
    for group in std::iter::once(ALL_PARTICIPANTS).chain(groups) {
        for c in ReadingCondition::ALL {
            let slots: Vec<&SlotAnalysis> = sessions
                .iter()
                .filter(|s| group == ALL_PARTICIPANTS || s.preference_group == group)
                .flat_map(|s| s.slots.iter())
                .filter(|s| s.condition == c)
                .collect();
            if group == ALL_PARTICIPANTS || !slots.is_empty() {
                rows.push(row(group, c, &slots));
            }
        }
    }
    ConditionReport { rows }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl ConditionReport {
    /// AOI names across all rows, sorted, with `off_aoi` last.
    pub fn aoi_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.mean_aoi_ratio.keys()).collect();
        let mut out: Vec<String> = names.into_iter().filter(|n| *n != OFF_AOI).cloned().collect();
        if self.rows.iter().any(|r| r.mean_aoi_ratio.contains_key(OFF_AOI)) {
            out.push(OFF_AOI.to_string());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let names = self.aoi_names();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> =
            ["preference_group", "condition", "n_scored", "mean_correct", "sd_correct", "n_gaze"].map(String::from).to_vec();
        header.extend(names.iter().map(|n| format!("ratio_{n}")));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.preference_group.clone(),
                r.condition.to_string(),
                r.n_scored.to_string(),
                fmt_opt(r.mean_correct),
                fmt_opt(r.sd_correct),
                r.n_gaze.to_string(),
            ];
            rec.extend(names.iter().map(|n| fmt_opt(r.mean_aoi_ratio.get(n).copied())));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn row(&self, group: &str, condition: ReadingCondition) -> Option<&ConditionRow> {
        self.rows.iter().find(|r| r.preference_group == group && r.condition == condition)
    }
}
