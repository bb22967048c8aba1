//! Mission layer: the structured command model, clarification policy,
//! camera-stage location identification, sensor-module selection, decision
//! rules over gathered evidence, and the plan/execute machinery for all
//! four task classes (identification, state, surveillance, actuation).
//!
//! Decision making is deliberately rule-based: robust-median argmax for
//! adjective queries, threshold rules for state, and m-of-n sustained
//! crossings for surveillance, with thresholds supplied by the scenario.

mod execute;
mod plan;
mod runner;

pub use execute::{ExecutionOptions, MissionLog, LogEvent, execute};
pub use plan::{validate_plan, MissionPlan, PhaseInfo, Step, Waypoint, build_plan, compose_multistep};
pub use runner::{run_trial, CameraStage, TrialRecord};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{arck_means, emit_crops, ClusteringConfig};
use crate::environment::{FieldKind, World};
use crate::geometry::{Point2, Rect};
use crate::perception::{detect, ClutterModel, Detection, OracleParams, PromptKind, SplitModel};
use crate::scenario::{CommandSpec, PolicySpec, TaskKind};

#[derive(Debug, Error, PartialEq)]
pub enum MissionError {
    #[error("cannot resolve vague command: no policy answer for '{0}'")]
    UnresolvableCommand(String),
    #[error("no candidate locations identified")]
    NoCandidates,
    #[error("no module available for modality {0:?}")]
    NoModuleForModality(Option<FieldKind>),
    #[error("evidence inconclusive: all series within the noise band")]
    InconclusiveEvidence,
    #[error("actuation command without payload")]
    MissingPayload,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

/// Comparative the user asked for; `Vague` requires clarification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjective {
    Warmest,
    Coolest,
    Brightest,
    MostHumid,
    Quietest,
    Vague(String),
}

impl Adjective {
    pub fn parse(word: &str) -> Self {
        match word.to_ascii_lowercase().as_str() {
            "warmest" => Adjective::Warmest,
            "coolest" => Adjective::Coolest,
            "brightest" => Adjective::Brightest,
            "most_humid" | "most humid" | "dampest" => Adjective::MostHumid,
            "quietest" => Adjective::Quietest,
            other => Adjective::Vague(other.to_string()),
        }
    }

    pub fn is_vague(&self) -> bool {
        matches!(self, Adjective::Vague(_))
    }

    /// Sensing modality this comparison needs.
    pub fn field_kind(&self) -> Option<FieldKind> {
        match self {
            Adjective::Warmest | Adjective::Coolest => Some(FieldKind::Temperature),
            Adjective::Brightest => Some(FieldKind::Light),
            Adjective::MostHumid => Some(FieldKind::Humidity),
            Adjective::Quietest | Adjective::Vague(_) => None,
        }
    }

    /// True when the best candidate maximizes the reading.
    pub fn wants_max(&self) -> bool {
        matches!(self, Adjective::Warmest | Adjective::Brightest | Adjective::MostHumid)
    }
}

/// A clarified, structured user command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub task_kind: TaskKind,
    /// Object class the camera stage queries for.
    pub target: String,
    pub modality_hint: Option<FieldKind>,
    pub adjective: Option<Adjective>,
    pub payload: Option<String>,
    pub deadline: Option<f64>,
    pub deliver_to: Option<Point2>,
}

impl Command {
    pub fn from_spec(spec: &CommandSpec) -> Self {
        Self {
            task_kind: spec.task_kind,
            target: spec.target.clone(),
            modality_hint: spec.modality_hint,
            adjective: spec.adjective.as_deref().map(Adjective::parse),
            payload: spec.payload.clone(),
            deadline: spec.deadline,
            deliver_to: spec.deliver_to.map(|p| Point2::new(p[0], p[1])),
        }
    }

    /// The field kind this command senses with, if any.
    pub fn sensing_kind(&self) -> Option<FieldKind> {
        self.adjective
            .as_ref()
            .and_then(|a| a.field_kind())
            .or(self.modality_hint)
    }

    pub fn is_plain_object_id(&self) -> bool {
        self.task_kind == TaskKind::Id && self.adjective.is_none()
    }
}

/// Resolves vague adjectives through the scenario's scripted policy table.
/// Returns the clarified command and the prompt count, which starts at 1
/// for the initial command itself.
pub fn clarify(cmd: &Command, policy: &PolicySpec) -> Result<(Command, u32), MissionError> {
    let mut prompts = 1;
    let mut out = cmd.clone();
    if let Some(adj) = &cmd.adjective {
        if let Adjective::Vague(word) = adj {
            let answer = policy
                .vague_answers
                .get(word)
                .ok_or_else(|| MissionError::UnresolvableCommand(word.clone()))?;
            let resolved = Adjective::parse(answer);
            if resolved.is_vague() {
                return Err(MissionError::UnresolvableCommand(answer.clone()));
            }
            out.adjective = Some(resolved);
            prompts += 1;
        }
    }
    if cmd.task_kind == TaskKind::Actuation && cmd.payload.is_none() {
        return Err(MissionError::MissingPayload);
    }
    Ok((out, prompts))
}

/// How the camera stage carves the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraMode {
    /// One crop spanning the whole stitched image.
    WholeScene,
    /// Aspect-ratio-constrained crops.
    ArckCrops,
}

/// One proposed location from the camera stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub location: Point2,
    /// Index of the crop that produced it (0 for whole-scene mode).
    pub crop: usize,
    pub score: f64,
}

/// Everything the camera stage needs besides the world.
pub struct CameraConfig<'a> {
    pub mode: CameraMode,
    pub clustering: &'a ClusteringConfig,
    pub split: &'a SplitModel,
    pub clutter: &'a ClutterModel,
    pub oracle: &'a OracleParams,
    pub merge_radius: f64,
}

/// Runs segment -> cluster -> crops -> detect for `query` at time `t` and
/// returns deduplicated candidate locations (world frame).
pub fn identify_locations<R: Rng>(
    query: &str,
    world: &World,
    t: f64,
    cfg: &CameraConfig,
    seg_rng: &mut R,
    cam_rng: &mut R,
) -> Result<Vec<Candidate>, MissionError> {
    let detections = stage_detections(query, world, t, cfg, seg_rng, cam_rng);
    let mut candidates: Vec<Candidate> = Vec::new();
    for (crop_idx, det) in detections {
        let c = det.center();
        if candidates.iter().any(|k| k.location.distance(&c) <= cfg.merge_radius) {
            continue;
        }
        candidates.push(Candidate { location: c, crop: crop_idx, score: det.score });
    }
    if candidates.is_empty() {
        return Err(MissionError::NoCandidates);
    }
    Ok(candidates)
}

/// Raw per-crop detections for the camera stage (before deduplication).
pub fn stage_detections<R: Rng>(
    query: &str,
    world: &World,
    t: f64,
    cfg: &CameraConfig,
    seg_rng: &mut R,
    cam_rng: &mut R,
) -> Vec<(usize, Detection)> {
    let scene_img = world.transform.rect_world_to_image(&world.floorplan);
    let crops: Vec<Rect> = match cfg.mode {
        CameraMode::WholeScene => vec![scene_img],
        CameraMode::ArckCrops => {
            let masks = crate::perception::segment(world, t, cfg.split, cfg.clutter, seg_rng);
            if masks.is_empty() {
                vec![scene_img]
            } else {
                let assignment = arck_means(&masks, cfg.clustering).expect("non-empty masks");
                emit_crops(&assignment, &scene_img, cfg.clustering)
                    .into_iter()
                    .map(|c| c.rect)
                    .collect()
            }
        }
    };
    let mut out = Vec::new();
    for (i, crop) in crops.iter().enumerate() {
        for det in detect(crop, query, world, t, cfg.oracle, PromptKind::Specific, cam_rng) {
            out.push((i, det));
        }
    }
    out
}

/// Maps sensing modalities (and actuation) to catalog module names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleSelectionTable {
    pub by_field: BTreeMap<FieldKind, String>,
    pub actuator: String,
}

impl ModuleSelectionTable {
    pub fn standard() -> Self {
        let mut by_field = BTreeMap::new();
        by_field.insert(FieldKind::Temperature, "Temp&Moisture".to_string());
        by_field.insert(FieldKind::Humidity, "Temp&Moisture".to_string());
        by_field.insert(FieldKind::Light, "Light Sensor".to_string());
        by_field.insert(FieldKind::Pm, "PM2.5".to_string());
        by_field.insert(FieldKind::Gas, "Alcohol".to_string());
        Self { by_field, actuator: "Actuator".to_string() }
    }

    pub fn with_overrides(mut self, overrides: &BTreeMap<FieldKind, String>) -> Self {
        for (k, v) in overrides {
            self.by_field.insert(*k, v.clone());
        }
        self
    }

    /// The module to equip for a command; `None` means the drone camera.
    pub fn select(&self, cmd: &Command) -> Result<Option<String>, MissionError> {
        if cmd.task_kind == TaskKind::Actuation {
            return Ok(Some(self.actuator.clone()));
        }
        match cmd.sensing_kind() {
            None => Ok(None),
            Some(kind) => self
                .by_field
                .get(&kind)
                .cloned()
                .map(Some)
                .ok_or(MissionError::NoModuleForModality(Some(kind))),
        }
    }
}

/// Evidence gathered at one candidate location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateEvidence {
    pub location: Point2,
    /// Sensor readings taken while hovering there.
    pub series: Vec<f64>,
    /// Close-up camera confirmation, when one was taken.
    pub confirm: Option<bool>,
}

/// The decided answer of a task (or one phase of a compound task).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    Location { at: Point2 },
    Flag { value: bool, at: Option<Point2> },
    Delivered { at: Point2, offset: f64 },
}

impl Answer {
    pub fn location(&self) -> Option<Point2> {
        match self {
            Answer::Location { at } => Some(*at),
            Answer::Flag { at, .. } => *at,
            Answer::Delivered { at, .. } => Some(*at),
        }
    }
}

fn median(series: &[f64]) -> f64 {
    let mut v = series.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// True when some length-`n` window of the series has at least `m` samples
/// beyond the threshold.
fn m_of_n_crossing(series: &[f64], threshold: f64, m: usize, n: usize) -> bool {
    if series.len() < m {
        return false;
    }
    let window = n.max(m).min(series.len());
    series
        .windows(window)
        .any(|w| w.iter().filter(|&&v| v > threshold).count() >= m)
}

/// Applies the task's decision rule to the gathered evidence.
///
/// Identification with an adjective takes the argmax (or argmin) of the
/// per-location medians; plain object identification takes the earliest
/// confirmed close-up; state tasks threshold against the scenario baseline;
/// surveillance needs a sustained m-of-n crossing.
pub fn decide(
    cmd: &Command,
    evidence: &[CandidateEvidence],
    policy: &PolicySpec,
) -> Result<Answer, MissionError> {
    match cmd.task_kind {
        TaskKind::Id => {
            if let Some(adj) = &cmd.adjective {
                let medians: Vec<(usize, f64)> = evidence
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| !e.series.is_empty())
                    .map(|(i, e)| (i, median(&e.series)))
                    .collect();
                if medians.is_empty() {
                    return Err(MissionError::InconclusiveEvidence);
                }
                let lo = medians.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
                let hi = medians.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
                if hi - lo < policy.noise_band {
                    return Err(MissionError::InconclusiveEvidence);
                }
                let best = if adj.wants_max() {
                    medians
                        .iter()
                        .fold((usize::MAX, f64::NEG_INFINITY), |acc, &(i, v)| {
                            if v > acc.1 { (i, v) } else { acc }
                        })
                } else {
                    medians
                        .iter()
                        .fold((usize::MAX, f64::INFINITY), |acc, &(i, v)| {
                            if v < acc.1 { (i, v) } else { acc }
                        })
                };
                Ok(Answer::Location { at: evidence[best.0].location })
            } else {
                // Earliest close-up confirmation wins.
                evidence
                    .iter()
                    .find(|e| e.confirm == Some(true))
                    .map(|e| Answer::Location { at: e.location })
                    .ok_or(MissionError::NoCandidates)
            }
        }
        TaskKind::State => {
            let threshold = policy.baseline_value + policy.state_threshold;
            let hit = evidence
                .iter()
                .find(|e| !e.series.is_empty() && median(&e.series) > threshold);
            Ok(Answer::Flag { value: hit.is_some(), at: hit.map(|e| e.location) })
        }
        TaskKind::Surveillance => {
            let threshold = policy.baseline_value + policy.state_threshold;
            let [m, n] = policy.m_of_n;
            let hit = evidence
                .iter()
                .find(|e| m_of_n_crossing(&e.series, threshold, m, n));
            Ok(Answer::Flag { value: hit.is_some(), at: hit.map(|e| e.location) })
        }
        TaskKind::Actuation => Err(MissionError::InvalidPlan(
            "actuation answers come from execution, not decide()".into(),
        )),
    }
}

/// Joint decision for two-modality sense+sense tasks: rank candidates per
/// modality (best rank 0), sum the ranks, argmin; ties break toward the
/// better rank in the first modality.
pub fn decide_joint(
    cmds: [&Command; 2],
    evidence: [&[CandidateEvidence]; 2],
    policy: &PolicySpec,
) -> Result<Answer, MissionError> {
    let _ = policy;
    let n = evidence[0].len();
    if n == 0 || evidence[1].len() != n {
        return Err(MissionError::InconclusiveEvidence);
    }
    let mut ranks = vec![[0usize; 2]; n];
    for (phase, (cmd, ev)) in cmds.iter().zip(evidence.iter()).enumerate() {
        let wants_max = cmd.adjective.as_ref().map(|a| a.wants_max()).unwrap_or(true);
        let mut order: Vec<usize> = (0..n).collect();
        let meds: Vec<f64> = ev.iter().map(|e| median(&e.series)).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (meds[a], meds[b]);
            let cmp = x.partial_cmp(&y).unwrap();
            if wants_max { cmp.reverse() } else { cmp }
        });
        for (rank, &idx) in order.iter().enumerate() {
            ranks[idx][phase] = rank;
        }
    }
    let best = (0..n)
        .min_by_key(|&i| (ranks[i][0] + ranks[i][1], ranks[i][0]))
        .expect("n > 0");
    Ok(Answer::Location { at: evidence[0][best].location })
}
