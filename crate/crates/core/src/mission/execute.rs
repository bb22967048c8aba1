//! Step-by-step plan execution against the drone and ground-station state
//! machines, with line-oriented JSON logging and full time/battery
//! accounting.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::drone::{self, DroneConfig, DroneState, ModuleCatalog};
use crate::environment::{FieldKind, World};
use crate::geometry::Point2;
use crate::ground_station::{GroundStation, LandingOutcome, SwapOutcome, SwapRequest};
use crate::perception::{close_up_confirm, OracleParams};
use crate::scenario::PolicySpec;

use super::plan::{MissionPlan, Step, Waypoint};
use super::{decide, Answer, CandidateEvidence, MissionError};

/// Seconds spent opening the actuation module's hatch at the drop point.
const DELIVER_TIME: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    MisalignedLanding,
    SwapFailed,
    BatteryExhausted,
    Unreachable,
    NoCandidates,
    Inconclusive,
    MissingPayload,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    StepStart { t: f64, phase: usize, step: String },
    StepEnd { t: f64, battery_s: f64 },
    Landing { t: f64, aligned: bool, offset: f64, yaw_error: f64 },
    Swap { t: f64, ok: bool },
    Decision { t: f64, phase: usize, answer: Option<Answer> },
    Failure { t: f64, mode: FailureMode },
}

/// Structured mission log; rendered as JSON Lines.
#[derive(Debug, Default, Clone, Serialize)]
pub struct MissionLog {
    pub events: Vec<LogEvent>,
}

impl MissionLog {
    pub fn push(&mut self, e: LogEvent) {
        self.events.push(e);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExecutionOptions {
    /// Swap in a fresh battery at every aligned landing. Disabled by the
    /// executions-per-battery accounting run.
    pub recharge_on_land: bool,
}

impl Default for ExecutionOptions {
    fn default() -> Self {
        Self { recharge_on_land: true }
    }
}

/// Everything execution reads but does not own.
pub struct ExecEnv<'a> {
    pub world: &'a World,
    pub catalog: &'a ModuleCatalog,
    pub policy: &'a PolicySpec,
    pub drone_cfg: &'a DroneConfig,
    pub oracle: &'a OracleParams,
    /// Per-kind sensor read noise.
    pub noise: &'a BTreeMap<FieldKind, f64>,
}

/// Raw execution result, before scoring against ground truth.
#[derive(Debug, Clone, Default)]
pub struct ExecOutcome {
    /// Decided answer per phase (None when the phase never concluded).
    pub answers: Vec<Option<Answer>>,
    pub evidence: Vec<Vec<CandidateEvidence>>,
    pub flight_seconds: f64,
    pub ground_seconds: f64,
    pub wall_time: f64,
    pub sorties: u32,
    pub failure: Option<FailureMode>,
    pub delivery_offsets: Vec<f64>,
    pub end_time: f64,
}

struct Executor<'a, R: Rng> {
    env: &'a ExecEnv<'a>,
    drone: &'a mut DroneState,
    station: &'a mut GroundStation,
    rng: &'a mut R,
    options: ExecutionOptions,
    t: f64,
    out: ExecOutcome,
    log: &'a mut MissionLog,
}

impl<'a, R: Rng> Executor<'a, R> {
    fn resolve(&self, wp: &Waypoint) -> Result<Point2, FailureMode> {
        match wp {
            Waypoint::At { point } => Ok(*point),
            Waypoint::PhaseAnswer { phase } => self
                .out
                .answers
                .get(*phase)
                .and_then(|a| a.as_ref())
                .and_then(|a| a.location())
                .ok_or(FailureMode::Inconclusive),
        }
    }

    fn fly_to(&mut self, target: Point2) -> Result<(), FailureMode> {
        let traj = drone::navigate_to(self.drone, target, self.env.drone_cfg, self.t, self.rng)
            .map_err(|e| match e {
                drone::DroneError::BatteryExhausted => FailureMode::BatteryExhausted,
                _ => FailureMode::Unreachable,
            })?;
        self.t += traj.duration;
        self.out.flight_seconds += traj.duration;
        Ok(())
    }

    fn hover(&mut self, seconds: f64) -> Result<(), FailureMode> {
        drone::hover(self.drone, seconds).map_err(|_| FailureMode::BatteryExhausted)?;
        self.t += seconds;
        self.out.flight_seconds += seconds;
        Ok(())
    }

    fn land(&mut self) -> Result<(), FailureMode> {
        self.fly_to(self.station.position)?;
        let before = self.drone.battery_remaining;
        let outcome = self.station.land(self.drone, self.rng);
        self.out.flight_seconds += before - self.drone.battery_remaining;
        match outcome {
            LandingOutcome::Aligned { landing_time, sample } => {
                self.t += landing_time;
                self.out.ground_seconds += landing_time;
                self.log.push(LogEvent::Landing {
                    t: self.t,
                    aligned: true,
                    offset: sample.offset,
                    yaw_error: sample.yaw_error,
                });
                if self.options.recharge_on_land {
                    self.drone.recharge(self.env.catalog);
                }
                Ok(())
            }
            LandingOutcome::Misaligned { sample } => {
                self.t += self.station.platform.landing_time_mean;
                self.log.push(LogEvent::Landing {
                    t: self.t,
                    aligned: false,
                    offset: sample.offset,
                    yaw_error: sample.yaw_error,
                });
                Err(FailureMode::MisalignedLanding)
            }
        }
    }

    fn swap(&mut self, request: &SwapRequest) -> Result<(), FailureMode> {
        match self.station.swap_module(self.drone, request, self.env.catalog) {
            Ok(SwapOutcome::Swapped { swap_time }) => {
                self.t += swap_time;
                self.out.ground_seconds += swap_time;
                self.log.push(LogEvent::Swap { t: self.t, ok: true });
                Ok(())
            }
            Ok(SwapOutcome::ConnectorFailure) | Err(_) => {
                self.log.push(LogEvent::Swap { t: self.t, ok: false });
                Err(FailureMode::SwapFailed)
            }
        }
    }
}

/// Executes a plan end to end. Battery exhaustion, misaligned landings, and
/// failed swaps abort the run and mark it needs-human; everything else
/// flows into per-phase evidence and decisions.
pub fn execute<R: Rng>(
    plan: &MissionPlan,
    env: &ExecEnv,
    drone: &mut DroneState,
    station: &mut GroundStation,
    t0: f64,
    rng: &mut R,
    options: ExecutionOptions,
    log: &mut MissionLog,
) -> ExecOutcome {
    let mut ex = Executor {
        env,
        drone,
        station,
        rng,
        options,
        t: t0,
        out: ExecOutcome::default(),
        log,
    };
    ex.out.answers = vec![None; plan.phases.len()];
    ex.out.evidence = vec![Vec::new(); plan.phases.len()];

    let mut skip_phase_rest = false;
    let mut failed = None;

    'steps: for (i, step) in plan.steps.iter().enumerate() {
        let phase_idx = plan.phase_of_step(i);
        let phase = &plan.phases[phase_idx];
        let is_phase_tail = i + 1 == phase.step_range.1;

        // After an early confirmation, fast-forward to the phase's landing.
        if skip_phase_rest && !is_phase_tail {
            continue;
        }

        ex.log.push(LogEvent::StepStart {
            t: ex.t,
            phase: phase_idx,
            step: step_name(step),
        });
        let result: Result<(), FailureMode> = match step {
            Step::EquipModule { module, payload } => {
                if module.is_none() && payload.is_none() {
                    Ok(())
                } else {
                    let request = SwapRequest {
                        detach: ex.drone.attached_name().map(str::to_string),
                        attach: module.clone(),
                        payload: payload.clone(),
                    };
                    ex.swap(&request)
                }
            }
            Step::SwapModule { request } => ex.swap(request),
            Step::Takeoff => {
                ex.drone.airborne = true;
                ex.drone.true_pose.altitude = ex.env.drone_cfg.cruise_altitude;
                ex.station.release();
                ex.out.sorties += 1;
                ex.hover(ex.env.drone_cfg.takeoff_time)
            }
            Step::FlyTo { to } => ex.resolve(to).and_then(|p| ex.fly_to(p)),
            Step::SenseAt { at, kind, duration } => ex.resolve(at).and_then(|p| {
                let noise = ex.env.noise.get(kind).copied().unwrap_or(0.0);
                let rate = ex.env.policy.sense_rate;
                match drone::sense_at(
                    ex.drone, *kind, *duration, rate, ex.env.world, ex.t, noise, ex.rng,
                ) {
                    Ok(readings) => {
                        ex.t += duration;
                        ex.out.flight_seconds += duration;
                        ex.out.evidence[phase_idx].push(CandidateEvidence {
                            location: p,
                            series: readings.iter().map(|r| r.value).collect(),
                            confirm: None,
                        });
                        Ok(())
                    }
                    Err(drone::DroneError::BatteryExhausted) => Err(FailureMode::BatteryExhausted),
                    Err(_) => Err(FailureMode::Inconclusive),
                }
            }),
            Step::CaptureAt { at } => ex.resolve(at).and_then(|p| {
                ex.hover(ex.env.policy.capture_duration)?;
                let seen = close_up_confirm(
                    ex.drone.true_pose.position,
                    &phase.cmd.target,
                    ex.env.world,
                    ex.t,
                    ex.env.oracle,
                    ex.rng,
                );
                let confirmed = seen.is_some();
                ex.out.evidence[phase_idx].push(CandidateEvidence {
                    location: p,
                    series: Vec::new(),
                    confirm: Some(confirmed),
                });
                if confirmed && phase.cmd.is_plain_object_id() {
                    skip_phase_rest = true;
                }
                Ok(())
            }),
            Step::Deliver { at } => ex.resolve(at).and_then(|target| {
                match ex.drone.payload.take() {
                    None => Err(FailureMode::MissingPayload),
                    Some(_) => {
                        ex.hover(DELIVER_TIME)?;
                        let drop_at = ex.drone.true_pose.position;
                        let offset = drop_at.distance(&target);
                        ex.out.delivery_offsets.push(offset);
                        ex.out.answers[phase_idx] =
                            Some(Answer::Delivered { at: drop_at, offset });
                        Ok(())
                    }
                }
            }),
            Step::ReturnAndLand => {
                let r = ex.land();
                skip_phase_rest = false;
                r
            }
        };
        ex.log.push(LogEvent::StepEnd { t: ex.t, battery_s: ex.drone.battery_remaining });

        if let Err(mode) = result {
            ex.log.push(LogEvent::Failure { t: ex.t, mode });
            failed = Some(mode);
            break 'steps;
        }

        if is_phase_tail && phase.cmd.task_kind != crate::scenario::TaskKind::Actuation {
            let decision = decide(&phase.cmd, &ex.out.evidence[phase_idx], ex.env.policy);
            let answer = match decision {
                Ok(a) => Some(a),
                Err(MissionError::InconclusiveEvidence) | Err(MissionError::NoCandidates) => None,
                Err(_) => None,
            };
            ex.log.push(LogEvent::Decision { t: ex.t, phase: phase_idx, answer: answer.clone() });
            ex.out.answers[phase_idx] = answer;
        }
    }

    ex.out.failure = failed;
    if failed.is_some() {
        // A needs-human run yields no usable answers.
        for a in ex.out.answers.iter_mut() {
            *a = None;
        }
    }
    ex.out.end_time = ex.t;
    ex.out.wall_time = ex.t - t0;
    ex.out
}

fn step_name(step: &Step) -> String {
    match step {
        Step::EquipModule { module, .. } => {
            format!("equip:{}", module.as_deref().unwrap_or("drone_cam"))
        }
        Step::Takeoff => "takeoff".into(),
        Step::FlyTo { .. } => "fly_to".into(),
        Step::SenseAt { kind, .. } => format!("sense:{kind:?}"),
        Step::CaptureAt { .. } => "capture".into(),
        Step::ReturnAndLand => "return_and_land".into(),
        Step::SwapModule { .. } => "swap".into(),
        Step::Deliver { .. } => "deliver".into(),
    }
}
