//! Scenario files: the versioned, human-editable experiment definition
//! (floorplan, fields, objects, events, oracle calibration, drone/station
//! setup, command, decision policy, and per-trial randomization), plus the
//! realization step that turns a scenario and a trial seed into a concrete
//! `World` and its ground truth.
//!
//! Unknown fields are rejected so stale configs fail loudly.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusteringConfig;
use crate::drone::{DroneConfig, ModuleCatalog, SensorModuleSpec};
use crate::environment::{FieldKind, GridData, ScalarField, SceneObject, TimedEvent, World};
use crate::geometry::{FrameTransform, Point2, Rect};
use crate::ground_station::{
    ConnectorKind, GroundStation, PlatformKind, PlatformModel, TouchdownModel,
};
use crate::perception::{ClutterModel, OracleParams, SplitModel};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("scenario parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scenario extension (want .toml or .json): {0}")]
    UnknownExtension(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorplanSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub pixels_per_meter: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    /// Uniform base value.
    pub fill: f64,
    /// Gaussian read noise of sensors on this field.
    #[serde(default)]
    pub noise_sd: f64,
    /// Optional uniform-value keyframes as (time, value).
    #[serde(default)]
    pub keyframes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub class: String,
    pub center: [f64; 2],
    pub size: [f64; 2],
    #[serde(default)]
    pub under_furniture: bool,
    /// Present only in trials where the event fires (a visual cue).
    #[serde(default)]
    pub cue: bool,
    /// Cue becomes visible at the event onset rather than from t = 0.
    #[serde(default)]
    pub appears_at_onset: bool,
    /// The randomized target moves to the trial's chosen spot.
    #[serde(default)]
    pub at_chosen_spot: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub kind: FieldKind,
    pub amplitude: f64,
    pub radius: f64,
    /// Fixed location; omit together with `at_chosen_spot = true`.
    #[serde(default)]
    pub location: Option<[f64; 2]>,
    /// Centered at the trial's chosen spot.
    #[serde(default)]
    pub at_chosen_spot: bool,
    #[serde(default)]
    pub onset: f64,
    #[serde(default)]
    pub decay_tau: Option<f64>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmenterSpec {
    pub split_prob: f64,
    pub max_splits: u32,
    pub clutter_count: u32,
    pub clutter_min_cells: u32,
    pub clutter_max_cells: u32,
}

impl Default for SegmenterSpec {
    fn default() -> Self {
        Self {
            split_prob: 0.35,
            max_splits: 2,
            clutter_count: 12,
            clutter_min_cells: 6,
            clutter_max_cells: 45,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub position: [f64; 2],
    #[serde(default = "default_platform")]
    pub platform: PlatformKind,
    #[serde(default = "default_connector")]
    pub connector: ConnectorKind,
    #[serde(default)]
    pub touchdown: TouchdownModel,
    #[serde(default = "default_swap_time")]
    pub swap_time: f64,
    pub magazine: BTreeMap<String, u32>,
    /// Landing indices (0-based, per trial) forced misaligned.
    #[serde(default)]
    pub forced_misalignment_landings: Vec<u32>,
}

fn default_platform() -> PlatformKind {
    PlatformKind::GroovedFunnel
}

fn default_connector() -> ConnectorKind {
    ConnectorKind::Magnetic
}

fn default_swap_time() -> f64 {
    6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Id,
    State,
    Surveillance,
    Actuation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSpec {
    pub task_kind: TaskKind,
    /// Object class to find / monitor, or payload destination descriptor.
    pub target: String,
    #[serde(default)]
    pub modality_hint: Option<FieldKind>,
    #[serde(default)]
    pub adjective: Option<String>,
    #[serde(default)]
    pub payload: Option<String>,
    #[serde(default)]
    pub deadline: Option<f64>,
    /// Explicit delivery point for actuation commands.
    #[serde(default)]
    pub deliver_to: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySpec {
    /// Scripted answers to clarification prompts for vague adjectives.
    pub vague_answers: BTreeMap<String, String>,
    /// Scripted candidate index chosen when actuation finds several.
    pub actuation_choice: usize,
    pub sense_duration: f64,
    pub sense_rate: f64,
    pub capture_duration: f64,
    /// "on" means the sensed value exceeds baseline by this much.
    pub state_threshold: f64,
    pub baseline_value: f64,
    /// Argmax margin below which the evidence is inconclusive.
    pub noise_band: f64,
    pub m_of_n: [usize; 2],
    /// Candidate dedup radius, meters.
    pub merge_radius: f64,
    /// Scoring radius: an answer within this of truth is correct.
    pub match_radius: f64,
    pub safety_factor: f64,
    /// Camera re-scan spacing for surveillance, seconds.
    pub poll_interval: f64,
    /// Surveillance watch window, seconds.
    pub watch_deadline: f64,
    /// Camera-stage snapshot time for one-shot tasks.
    pub snapshot_time: f64,
    /// Reported (non-flight) model latency per camera stage, seconds.
    pub vlm_latency: f64,
}

impl Default for PolicySpec {
    fn default() -> Self {
        Self {
            vague_answers: BTreeMap::new(),
            actuation_choice: 0,
            sense_duration: 10.0,
            sense_rate: 2.0,
            capture_duration: 2.0,
            state_threshold: 5.0,
            baseline_value: 21.0,
            noise_band: 0.3,
            m_of_n: [3, 5],
            merge_radius: 0.5,
            match_radius: 0.6,
            safety_factor: 1.0,
            poll_interval: 30.0,
            watch_deadline: 120.0,
            snapshot_time: 0.0,
            vlm_latency: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationSpec {
    /// Candidate spots; one is chosen per trial when non-empty.
    pub spots: Vec<[f64; 2]>,
    /// Probability the scenario's event fires in a trial.
    pub event_probability: f64,
    /// Uniform window for the event onset (surveillance).
    pub onset_range: Option<[f64; 2]>,
    /// Object whose realized center is the scoring truth; defaults to the
    /// chosen spot.
    pub truth_object: Option<String>,
}

impl Default for RandomizationSpec {
    fn default() -> Self {
        Self { spots: Vec::new(), event_probability: 1.0, onset_range: None, truth_object: None }
    }
}

/// The full experiment definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub floorplan: FloorplanSpec,
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub oracle: OracleParams,
    #[serde(default)]
    pub segmenter: SegmenterSpec,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub drone: DroneConfig,
    pub station: StationSpec,
    #[serde(default)]
    pub command: Option<CommandSpec>,
    /// Two-phase compound task; mutually exclusive with `command`.
    #[serde(default)]
    pub compound: Option<Vec<CommandSpec>>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub randomization: RandomizationSpec,
    /// Module catalog override; defaults to the stock catalog.
    #[serde(default)]
    pub modules: Option<Vec<SensorModuleSpec>>,
    /// Per-modality module selection override, e.g. `gas = "Alcohol"`.
    #[serde(default)]
    pub module_selection: BTreeMap<FieldKind, String>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)?,
            Some("json") => serde_json::from_str(&text)?,
            other => return Err(ScenarioError::UnknownExtension(format!("{other:?}"))),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn floorplan_rect(&self) -> Rect {
        Rect {
            min: Point2::new(self.floorplan.min[0], self.floorplan.min[1]),
            max: Point2::new(self.floorplan.max[0], self.floorplan.max[1]),
        }
    }

    pub fn catalog(&self) -> ModuleCatalog {
        match &self.modules {
            Some(modules) => {
                let mut c = ModuleCatalog::standard();
                c.modules = modules.clone();
                c
            }
            None => ModuleCatalog::standard(),
        }
    }

    pub fn noise_sd(&self, kind: FieldKind) -> f64 {
        self.fields.iter().find(|f| f.kind == kind).map_or(0.0, |f| f.noise_sd)
    }

    /// The command list: one for simple scenarios, two for compound ones.
    pub fn commands(&self) -> Vec<&CommandSpec> {
        match (&self.command, &self.compound) {
            (Some(c), None) => vec![c],
            (None, Some(list)) => list.iter().collect(),
            _ => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} unsupported (this build reads {})",
                self.schema_version, SCHEMA_VERSION
            ));
        }
        let fp = self.floorplan_rect();
        if !(fp.max.x > fp.min.x && fp.max.y > fp.min.y) {
            return fail("floorplan must have positive extent".into());
        }
        if !(self.floorplan.pixels_per_meter > 0.0) {
            return fail("pixels_per_meter must be positive".into());
        }
        if self.fields.is_empty() {
            return fail("at least one field is required".into());
        }
        for f in &self.fields {
            if f.width < 2 || f.height < 2 {
                return fail(format!("field {:?}: grid must be at least 2x2", f.kind));
            }
            let span_x = (f.width - 1) as f64 * f.cell_size;
            let span_y = (f.height - 1) as f64 * f.cell_size;
            if span_x + 1e-9 < fp.width() || span_y + 1e-9 < fp.height() {
                return fail(format!(
                    "field {:?}: grid span {:.2}x{:.2} m does not cover the {:.2}x{:.2} m floorplan",
                    f.kind,
                    span_x,
                    span_y,
                    fp.width(),
                    fp.height()
                ));
            }
        }
        for o in &self.objects {
            if !(o.size[0] > 0.0 && o.size[1] > 0.0) {
                return fail(format!("object {}: size must be positive", o.id));
            }
            let r = rect_from_center(o.center, o.size);
            if !o.at_chosen_spot && !fp.contains_rect(&r) {
                return fail(format!("object {} lies outside the floorplan", o.id));
            }
        }
        for s in &self.randomization.spots {
            if !fp.contains_point(&Point2::new(s[0], s[1])) {
                return fail(format!("spot [{}, {}] lies outside the floorplan", s[0], s[1]));
            }
        }
        for e in &self.events {
            if e.radius <= 0.0 {
                return fail("event radius must be positive".into());
            }
            if e.location.is_none() && !e.at_chosen_spot {
                return fail("event needs a location or at_chosen_spot".into());
            }
            if e.at_chosen_spot && self.randomization.spots.is_empty() {
                return fail("at_chosen_spot event requires randomization spots".into());
            }
        }
        if self.objects.iter().any(|o| o.at_chosen_spot) && self.randomization.spots.is_empty() {
            return fail("at_chosen_spot object requires randomization spots".into());
        }
        self.oracle.validate().map_err(ScenarioError::Invalid)?;
        self.clustering
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.randomization.event_probability) {
            return fail("event_probability must lie in [0, 1]".into());
        }
        match (&self.command, &self.compound) {
            (Some(_), Some(_)) => return fail("define either command or compound, not both".into()),
            (None, None) => return fail("a command (or compound) is required".into()),
            (None, Some(list)) if list.len() != 2 => {
                return fail("compound scenarios take exactly two phases".into())
            }
            _ => {}
        }
        for cmd in self.commands() {
            if cmd.task_kind == TaskKind::Actuation && cmd.payload.is_none() {
                return fail("actuation commands must carry a payload".into());
            }
        }
        let catalog = self.catalog();
        for name in self.station.magazine.keys() {
            if catalog.get(name).is_none() {
                return fail(format!("magazine module '{name}' is not in the catalog"));
            }
        }
        if let Some(tid) = &self.randomization.truth_object {
            if !self.objects.iter().any(|o| &o.id == tid) {
                return fail(format!("truth_object '{tid}' is not a scenario object"));
            }
        }
        let st = Point2::new(self.station.position[0], self.station.position[1]);
        if !fp.contains_point(&st) {
            return fail("station position lies outside the floorplan".into());
        }
        Ok(())
    }

    pub fn build_station(&self) -> GroundStation {
        let mut station = GroundStation::new(
            Point2::new(self.station.position[0], self.station.position[1]),
            PlatformModel::of_kind(self.station.platform),
            self.station.connector,
            self.station.touchdown,
            self.station.swap_time,
            self.station.magazine.clone(),
        );
        station.forced_misalignments = self.station.forced_misalignment_landings.clone();
        station
    }

    pub fn split_model(&self, seed: u64) -> SplitModel {
        SplitModel {
            split_prob: self.segmenter.split_prob,
            max_splits: self.segmenter.max_splits,
            seed,
        }
    }

    pub fn clutter_model(&self) -> ClutterModel {
        ClutterModel {
            count: self.segmenter.clutter_count,
            min_cells: self.segmenter.clutter_min_cells,
            max_cells: self.segmenter.clutter_max_cells,
        }
    }
}

fn rect_from_center(center: [f64; 2], size: [f64; 2]) -> Rect {
    Rect {
        min: Point2::new(center[0] - size[0] / 2.0, center[1] - size[1] / 2.0),
        max: Point2::new(center[0] + size[0] / 2.0, center[1] + size[1] / 2.0),
    }
}

/// Ground truth of one realized trial, used only for scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthInfo {
    /// Whether the sought condition exists in this trial (always true for
    /// plain identification tasks).
    pub positive: bool,
    /// Where the correct answer lies, when the trial is positive.
    pub location: Option<Point2>,
    pub onset: Option<f64>,
    pub spot_index: Option<usize>,
}

/// A realized trial: the concrete world and its ground truth.
#[derive(Debug, Clone)]
pub struct RealizedTrial {
    pub world: World,
    pub truth: TruthInfo,
}

/// Instantiates the scenario's randomization for one trial. All draws come
/// from the world stream of `(master_seed, trial)`, so every pipeline sees
/// the identical world at a given trial index.
pub fn realize(scenario: &Scenario, master_seed: u64, trial: u64) -> RealizedTrial {
    let mut world_rng = rng::trial_rng(master_seed, trial, rng::Stream::World);
    let fp = scenario.floorplan_rect();

    // Fixed draw order keeps the stream stable across scenario edits.
    let event_on = world_rng.random::<f64>() < scenario.randomization.event_probability;
    let spot_index = if scenario.randomization.spots.is_empty() {
        None
    } else {
        Some(world_rng.random_range(0..scenario.randomization.spots.len()))
    };
    let onset = match scenario.randomization.onset_range {
        Some([lo, hi]) if hi > lo => Some(world_rng.random_range(lo..hi)),
        Some([lo, _]) => Some(lo),
        None => None,
    };

    let chosen_spot = spot_index.map(|i| {
        let s = scenario.randomization.spots[i];
        Point2::new(s[0], s[1])
    });

    let mut objects = Vec::new();
    for spec in &scenario.objects {
        if spec.cue && !event_on {
            continue;
        }
        let center = if spec.at_chosen_spot {
            chosen_spot.expect("validated: spots exist")
        } else {
            Point2::new(spec.center[0], spec.center[1])
        };
        let mut footprint = rect_from_center([center.x, center.y], spec.size);
        // Keep randomized placements inside the floorplan.
        if let Some(clipped) = footprint.intersection(&fp) {
            footprint = clipped;
        }
        objects.push(SceneObject {
            id: spec.id.clone(),
            class: spec.class.clone(),
            footprint,
            under_furniture: spec.under_furniture,
            active_from: if spec.cue && spec.appears_at_onset { onset } else { None },
        });
    }

    let mut events = Vec::new();
    if event_on {
        for spec in &scenario.events {
            let location = if spec.at_chosen_spot {
                chosen_spot.expect("validated: spots exist")
            } else {
                let l = spec.location.expect("validated: location present");
                Point2::new(l[0], l[1])
            };
            events.push(TimedEvent {
                onset: onset.unwrap_or(spec.onset),
                location,
                kind: spec.kind,
                amplitude: spec.amplitude,
                radius: spec.radius,
                decay_tau: spec.decay_tau,
                description: spec.description.clone(),
            });
        }
    }

    let mut fields = BTreeMap::new();
    for f in &scenario.fields {
        let mut field = ScalarField::uniform(
            f.kind,
            fp.min,
            f.width,
            f.height,
            f.cell_size,
            f.fill,
        );
        field.keyframes = f
            .keyframes
            .iter()
            .map(|&(t, v)| (t, GridData::uniform(f.width, f.height, v)))
            .collect();
        fields.insert(f.kind, field);
    }

    let transform = FrameTransform::new(
        scenario.floorplan.pixels_per_meter,
        Point2::new(
            -fp.min.x * scenario.floorplan.pixels_per_meter,
            -fp.min.y * scenario.floorplan.pixels_per_meter,
        ),
    )
    .expect("validated: positive scale");

    let truth_location = match &scenario.randomization.truth_object {
        Some(tid) => objects.iter().find(|o| &o.id == tid).map(|o| o.center()),
        None => chosen_spot,
    };

    RealizedTrial {
        world: World { floorplan: fp, transform, fields, objects, events },
        truth: TruthInfo {
            positive: event_on,
            location: truth_location,
            onset,
            spot_index,
        },
    }
}
