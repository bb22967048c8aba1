//! Per-trial task driver: realizes the world, clarifies the command, runs
//! the camera stage, optionally flies the drone, and scores the outcome
//! against ground truth.
//!
//! All pipelines of a given (master seed, trial) share the identical world
//! and camera-stage random streams, so camera-level results are exactly
//! paired across pipelines; only the drone stage differs.

use serde::Serialize;

use crate::drone::DroneState;
use crate::geometry::Point2;
use crate::rng::{trial_rng, Stream};
use crate::scenario::{realize, PolicySpec, Scenario, TaskKind, TruthInfo};

use super::execute::{execute, ExecEnv, ExecOutcome, ExecutionOptions, FailureMode, MissionLog};
use super::plan::{build_plan, compose_multistep, MissionPlan, PlanContext, Waypoint};
use super::{
    clarify, decide_joint, identify_locations, Answer, CameraConfig, CameraMode, Candidate,
    CandidateEvidence, Command, MissionError, ModuleSelectionTable,
};

/// Camera-stage result shared by every pipeline variant.
#[derive(Debug, Clone, Serialize)]
pub struct CameraStage {
    /// Deduplicated candidates per poll (one poll for one-shot tasks).
    pub polls: Vec<(f64, Vec<Candidate>)>,
    pub crop_stage_hit: bool,
}

/// The measured result of one trial, scored against ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub scenario: String,
    pub trial: u64,
    pub answer: Option<Answer>,
    pub evidence: Vec<CandidateEvidence>,
    pub prompts_used: u32,
    /// Drone sorties flown.
    pub executions: u32,
    pub wall_time: f64,
    pub flight_seconds: f64,
    pub ground_seconds: f64,
    pub success_vs_truth: bool,
    pub failure: Option<FailureMode>,
    /// The camera stage proposed a location matching the truth (the
    /// pipeline-recall channel; identical across pipelines per trial).
    pub crop_stage_hit: bool,
    /// Locations the pipeline finally reports to the user.
    pub reported_locations: Vec<Point2>,
    /// For state/surveillance: the pipeline's yes/no answer.
    pub answered_positive: Option<bool>,
    pub truth_positive: bool,
    pub truth_location: Option<Point2>,
    pub world_hash: u64,
    pub phase_success: Vec<bool>,
    pub delivery_offsets: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub outcome: TaskOutcome,
    pub log: MissionLog,
}

/// Pipeline behavior switchboard.
#[derive(Debug, Clone, Copy)]
pub struct PipelineBehavior {
    pub mode: CameraMode,
    pub use_drone: bool,
}

fn within(a: Point2, b: Option<Point2>, radius: f64) -> bool {
    b.map_or(false, |b| a.distance(&b) <= radius)
}

fn hit_any(candidates: &[Candidate], truth: Option<Point2>, radius: f64) -> bool {
    candidates.iter().any(|c| within(c.location, truth, radius))
}

/// Runs the camera stage: a single snapshot for one-shot tasks, or a poll
/// series over the watch window for surveillance.
#[allow(clippy::too_many_arguments)]
fn run_camera_stage(
    scenario: &Scenario,
    cmd: &Command,
    world: &crate::environment::World,
    truth: &TruthInfo,
    mode: CameraMode,
    master_seed: u64,
    trial: u64,
) -> CameraStage {
    let policy = &scenario.policy;
    let split = scenario.split_model(crate::rng::trial_seed(master_seed, trial, Stream::Segmenter));
    let clutter = scenario.clutter_model();
    let cfg = CameraConfig {
        mode,
        clustering: &scenario.clustering,
        split: &split,
        clutter: &clutter,
        oracle: &scenario.oracle,
        merge_radius: policy.merge_radius,
    };
    let mut seg_rng = trial_rng(master_seed, trial, Stream::Segmenter);
    let mut cam_rng = trial_rng(master_seed, trial, Stream::Camera);

    let poll_times: Vec<f64> = if cmd.task_kind == TaskKind::Surveillance {
        let deadline = cmd.deadline.unwrap_or(policy.watch_deadline);
        let mut ts = Vec::new();
        let mut t = 0.0;
        while t <= deadline + 1e-9 {
            ts.push(t);
            t += policy.poll_interval;
        }
        ts
    } else {
        vec![policy.snapshot_time]
    };

    let mut polls = Vec::with_capacity(poll_times.len());
    let mut hit = false;
    for t in poll_times {
        let cands = match identify_locations(&cmd.target, world, t, &cfg, &mut seg_rng, &mut cam_rng)
        {
            Ok(c) => c,
            Err(MissionError::NoCandidates) => Vec::new(),
            Err(_) => Vec::new(),
        };
        if truth.positive && hit_any(&cands, truth.location, policy.match_radius) {
            hit = true;
        }
        polls.push((t, cands));
    }
    CameraStage { polls, crop_stage_hit: hit }
}

fn dedup_locations(polls: &[(f64, Vec<Candidate>)], merge_radius: f64) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::new();
    for (_, cands) in polls {
        for c in cands {
            if !out.iter().any(|p| p.distance(&c.location) <= merge_radius) {
                out.push(c.location);
            }
        }
    }
    out
}

/// Camera-only pipelines answer straight from the candidate set.
fn camera_only_outcome(
    scenario: &Scenario,
    cmd: &Command,
    stage: &CameraStage,
    truth: &TruthInfo,
    prompts: u32,
    world_hash: u64,
    trial: u64,
) -> TaskOutcome {
    let policy = &scenario.policy;
    let reported = dedup_locations(&stage.polls, policy.merge_radius);
    let answered_positive = match cmd.task_kind {
        TaskKind::State | TaskKind::Surveillance => Some(!reported.is_empty()),
        _ => None,
    };
    let answer = match cmd.task_kind {
        TaskKind::Id => {
            // Highest detection score wins; the camera cannot rank by the
            // requested physical quantity.
            let best = stage.polls.iter().flat_map(|(_, c)| c.iter()).max_by(|a, b| {
                a.score.partial_cmp(&b.score).unwrap()
            });
            best.map(|c| Answer::Location { at: c.location })
        }
        TaskKind::State | TaskKind::Surveillance => Some(Answer::Flag {
            value: !reported.is_empty(),
            at: reported.first().copied(),
        }),
        TaskKind::Actuation => None,
    };
    let success = score_success(cmd, truth, &reported, answered_positive, policy);
    let vlm_time = policy.vlm_latency * stage.polls.len() as f64;
    TaskOutcome {
        scenario: scenario.name.clone(),
        trial,
        answer,
        evidence: Vec::new(),
        prompts_used: prompts,
        executions: 0,
        wall_time: vlm_time,
        flight_seconds: 0.0,
        ground_seconds: 0.0,
        success_vs_truth: success,
        failure: None,
        crop_stage_hit: stage.crop_stage_hit,
        reported_locations: reported,
        answered_positive,
        truth_positive: truth.positive,
        truth_location: truth.location,
        world_hash,
        phase_success: vec![success],
        delivery_offsets: Vec::new(),
    }
}

/// Exact-identification success rule: positives need the truth reported and
/// nothing else; negatives need silence.
fn score_success(
    cmd: &Command,
    truth: &TruthInfo,
    reported: &[Point2],
    answered_positive: Option<bool>,
    policy: &PolicySpec,
) -> bool {
    match cmd.task_kind {
        TaskKind::Id => {
            reported.len() == 1 && within(reported[0], truth.location, policy.match_radius)
        }
        TaskKind::State | TaskKind::Surveillance => answered_positive == Some(truth.positive),
        TaskKind::Actuation => false,
    }
}

/// Runs one trial of a simple (single-command) scenario under the given
/// pipeline behavior.
pub fn run_trial(
    scenario: &Scenario,
    behavior: PipelineBehavior,
    master_seed: u64,
    trial: u64,
) -> TrialRecord {
    let realized = realize(scenario, master_seed, trial);
    let world = &realized.world;
    let truth = &realized.truth;
    let world_hash = world.world_hash();
    let mut log = MissionLog::default();

    if scenario.compound.is_some() {
        return run_compound_trial(scenario, behavior, master_seed, trial, realized, log);
    }

    let spec = scenario.command.as_ref().expect("validated: command present");
    let raw = Command::from_spec(spec);
    let policy = &scenario.policy;
    let (cmd, mut prompts) = match clarify(&raw, policy) {
        Ok(x) => x,
        Err(_) => {
            let outcome = TaskOutcome {
                scenario: scenario.name.clone(),
                trial,
                answer: None,
                evidence: Vec::new(),
                prompts_used: 1,
                executions: 0,
                wall_time: 0.0,
                flight_seconds: 0.0,
                ground_seconds: 0.0,
                success_vs_truth: false,
                failure: None,
                crop_stage_hit: false,
                reported_locations: Vec::new(),
                answered_positive: None,
                truth_positive: truth.positive,
                truth_location: truth.location,
                world_hash,
                phase_success: vec![false],
                delivery_offsets: Vec::new(),
            };
            return TrialRecord { outcome, log };
        }
    };

    let stage = run_camera_stage(scenario, &cmd, world, truth, behavior.mode, master_seed, trial);

    if !behavior.use_drone {
        let outcome =
            camera_only_outcome(scenario, &cmd, &stage, truth, prompts, world_hash, trial);
        return TrialRecord { outcome, log };
    }

    // Full pipeline: drone verification/sensing on top of the camera stage.
    let catalog = scenario.catalog();
    let table = ModuleSelectionTable::standard().with_overrides(&scenario.module_selection);
    let station_pos = Point2::new(scenario.station.position[0], scenario.station.position[1]);
    let plan_ctx = PlanContext {
        table: &table,
        catalog: &catalog,
        policy,
        drone: &scenario.drone,
        station: station_pos,
    };
    let noise: std::collections::BTreeMap<_, _> =
        scenario.fields.iter().map(|f| (f.kind, f.noise_sd)).collect();
    let env = ExecEnv {
        world,
        catalog: &catalog,
        policy,
        drone_cfg: &scenario.drone,
        oracle: &scenario.oracle,
        noise: &noise,
    };
    let mut drone_rng = trial_rng(master_seed, trial, Stream::Drone);
    let mut drone = DroneState::at_station(station_pos, &scenario.drone, &catalog);
    let mut station = scenario.build_station();

    if cmd.task_kind == TaskKind::Actuation {
        // Several candidate locations force one clarification prompt.
        let cands = stage.polls.first().map(|(_, c)| c.clone()).unwrap_or_default();
        let target = if cmd.deliver_to.is_some() {
            cmd.deliver_to.map(Waypoint::fixed)
        } else if cands.len() > 1 {
            prompts += 1;
            let idx = policy.actuation_choice.min(cands.len() - 1);
            Some(Waypoint::fixed(cands[idx].location))
        } else {
            cands.first().map(|c| Waypoint::fixed(c.location))
        };
        let outcome = match target {
            Some(t) => {
                let plan = build_plan(&cmd, &cands, Some(t), &plan_ctx);
                match plan {
                    Ok(plan) => {
                        let exec = execute(
                            &plan,
                            &env,
                            &mut drone,
                            &mut station,
                            0.0,
                            &mut drone_rng,
                            ExecutionOptions::default(),
                            &mut log,
                        );
                        assemble_drone_outcome(
                            scenario, &cmd, &stage, truth, prompts, world_hash, trial, exec,
                        )
                    }
                    Err(_) => {
                        camera_only_outcome(scenario, &cmd, &stage, truth, prompts, world_hash, trial)
                    }
                }
            }
            None => camera_only_outcome(scenario, &cmd, &stage, truth, prompts, world_hash, trial),
        };
        return TrialRecord { outcome, log };
    }

    if cmd.task_kind == TaskKind::Surveillance {
        let outcome = run_surveillance_drone(
            scenario, &cmd, &stage, truth, prompts, world_hash, trial, &plan_ctx, &env,
            &mut drone, &mut station, &mut drone_rng, &mut log,
        );
        return TrialRecord { outcome, log };
    }

    // One-shot tasks: visit the snapshot candidates.
    let cands = stage.polls.first().map(|(_, c)| c.clone()).unwrap_or_default();
    if cands.is_empty() {
        let mut outcome =
            camera_only_outcome(scenario, &cmd, &stage, truth, prompts, world_hash, trial);
        outcome.answer = match cmd.task_kind {
            TaskKind::State => Some(Answer::Flag { value: false, at: None }),
            _ => None,
        };
        outcome.answered_positive = matches!(cmd.task_kind, TaskKind::State).then_some(false);
        outcome.reported_locations = Vec::new();
        outcome.success_vs_truth =
            score_success(&cmd, truth, &[], outcome.answered_positive, policy);
        outcome.phase_success = vec![outcome.success_vs_truth];
        return TrialRecord { outcome, log };
    }
    let outcome = match build_plan(&cmd, &cands, None, &plan_ctx) {
        Ok(plan) => {
            let exec = execute(
                &plan,
                &env,
                &mut drone,
                &mut station,
                0.0,
                &mut drone_rng,
                ExecutionOptions::default(),
                &mut log,
            );
            assemble_drone_outcome(scenario, &cmd, &stage, truth, prompts, world_hash, trial, exec)
        }
        Err(_) => camera_only_outcome(scenario, &cmd, &stage, truth, prompts, world_hash, trial),
    };
    TrialRecord { outcome, log }
}

/// Folds an execution result into the scored trial record.
#[allow(clippy::too_many_arguments)]
fn assemble_drone_outcome(
    scenario: &Scenario,
    cmd: &Command,
    stage: &CameraStage,
    truth: &TruthInfo,
    prompts: u32,
    world_hash: u64,
    trial: u64,
    exec: ExecOutcome,
) -> TaskOutcome {
    let policy = &scenario.policy;
    let answer = exec.answers.first().cloned().flatten();
    let reported: Vec<Point2> = match &answer {
        Some(Answer::Location { at }) => vec![*at],
        Some(Answer::Flag { value: true, at }) => at.iter().copied().collect(),
        Some(Answer::Delivered { at, .. }) => vec![*at],
        _ => Vec::new(),
    };
    let answered_positive = match cmd.task_kind {
        TaskKind::State | TaskKind::Surveillance => match &answer {
            Some(Answer::Flag { value, .. }) => Some(*value),
            _ => Some(false),
        },
        _ => None,
    };
    let success = match cmd.task_kind {
        TaskKind::Actuation => {
            exec.failure.is_none()
                && exec
                    .delivery_offsets
                    .first()
                    .map_or(false, |&off| off <= policy.match_radius)
        }
        _ => exec.failure.is_none() && score_success(cmd, truth, &reported, answered_positive, policy),
    };
    TaskOutcome {
        scenario: scenario.name.clone(),
        trial,
        answer,
        evidence: exec.evidence.into_iter().flatten().collect(),
        prompts_used: prompts,
        executions: exec.sorties,
        wall_time: exec.wall_time + policy.vlm_latency * stage.polls.len() as f64,
        flight_seconds: exec.flight_seconds,
        ground_seconds: exec.ground_seconds,
        success_vs_truth: success,
        failure: exec.failure,
        crop_stage_hit: stage.crop_stage_hit,
        reported_locations: reported,
        answered_positive,
        truth_positive: truth.positive,
        truth_location: truth.location,
        world_hash,
        phase_success: vec![success],
        delivery_offsets: exec.delivery_offsets,
    }
}

/// Surveillance with the drone: every camera alarm triggers a verification
/// sortie; the first sensor-confirmed alarm answers the task.
#[allow(clippy::too_many_arguments)]
fn run_surveillance_drone(
    scenario: &Scenario,
    cmd: &Command,
    stage: &CameraStage,
    truth: &TruthInfo,
    prompts: u32,
    world_hash: u64,
    trial: u64,
    plan_ctx: &PlanContext,
    env: &ExecEnv,
    drone: &mut DroneState,
    station: &mut crate::ground_station::GroundStation,
    drone_rng: &mut rand_chacha::ChaCha8Rng,
    log: &mut MissionLog,
) -> TaskOutcome {
    let policy = &scenario.policy;
    let mut evidence: Vec<CandidateEvidence> = Vec::new();
    let mut confirmed: Option<Point2> = None;
    let mut sorties = 0;
    let mut flight = 0.0;
    let mut ground = 0.0;
    let mut wall = policy.vlm_latency * stage.polls.len() as f64;
    let mut failure = None;
    let mut clock = 0.0;

    for (t_alarm, cands) in stage.polls.iter().filter(|(_, c)| !c.is_empty()) {
        clock = clock.max(*t_alarm);
        let plan = match build_plan(cmd, cands, None, plan_ctx) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let exec = execute(
            &plan,
            env,
            drone,
            station,
            clock,
            drone_rng,
            ExecutionOptions::default(),
            log,
        );
        clock = exec.end_time;
        sorties += exec.sorties;
        flight += exec.flight_seconds;
        ground += exec.ground_seconds;
        wall += exec.wall_time;
        evidence.extend(exec.evidence.into_iter().flatten());
        if let Some(mode) = exec.failure {
            failure = Some(mode);
            break;
        }
        if let Some(Some(Answer::Flag { value: true, at })) = exec.answers.first() {
            confirmed = at.or(cands.first().map(|c| c.location));
            break;
        }
    }

    let answered_positive = Some(confirmed.is_some() && failure.is_none());
    let reported: Vec<Point2> = confirmed.into_iter().collect();
    let success = failure.is_none()
        && score_success(cmd, truth, &reported, answered_positive, policy);
    TaskOutcome {
        scenario: scenario.name.clone(),
        trial,
        answer: Some(Answer::Flag { value: confirmed.is_some(), at: confirmed }),
        evidence,
        prompts_used: prompts,
        executions: sorties,
        wall_time: wall,
        flight_seconds: flight,
        ground_seconds: ground,
        success_vs_truth: success,
        failure,
        crop_stage_hit: stage.crop_stage_hit,
        reported_locations: reported,
        answered_positive,
        truth_positive: truth.positive,
        truth_location: truth.location,
        world_hash,
        phase_success: vec![success],
        delivery_offsets: Vec::new(),
    }
}

/// Runs a two-phase compound trial (drone pipeline only; camera-only
/// behaviors fall back to the first phase's camera stage).
fn run_compound_trial(
    scenario: &Scenario,
    behavior: PipelineBehavior,
    master_seed: u64,
    trial: u64,
    realized: crate::scenario::RealizedTrial,
    mut log: MissionLog,
) -> TrialRecord {
    let world = &realized.world;
    let truth = &realized.truth;
    let world_hash = world.world_hash();
    let policy = &scenario.policy;
    let specs = scenario.compound.as_ref().expect("compound present");

    let mut prompts_total = 0;
    let mut cmds = Vec::new();
    for spec in specs {
        match clarify(&Command::from_spec(spec), policy) {
            Ok((c, p)) => {
                prompts_total += p;
                cmds.push(c);
            }
            Err(_) => {
                let outcome = TaskOutcome {
                    scenario: scenario.name.clone(),
                    trial,
                    answer: None,
                    evidence: Vec::new(),
                    prompts_used: prompts_total + 1,
                    executions: 0,
                    wall_time: 0.0,
                    flight_seconds: 0.0,
                    ground_seconds: 0.0,
                    success_vs_truth: false,
                    failure: None,
                    crop_stage_hit: false,
                    reported_locations: Vec::new(),
                    answered_positive: None,
                    truth_positive: truth.positive,
                    truth_location: truth.location,
                    world_hash,
                    phase_success: vec![false; specs.len()],
                    delivery_offsets: Vec::new(),
                };
                return TrialRecord { outcome, log };
            }
        }
    }

    // Camera stage: sensing phases share the phase-1 candidate list.
    let needs_camera = cmds.iter().any(|c| c.task_kind != TaskKind::Actuation)
        || cmds.iter().any(|c| c.deliver_to.is_none() && c.task_kind == TaskKind::Actuation);
    let camera_cmd = cmds
        .iter()
        .find(|c| c.task_kind != TaskKind::Actuation)
        .unwrap_or(&cmds[0]);
    let stage = if needs_camera {
        run_camera_stage(scenario, camera_cmd, world, truth, behavior.mode, master_seed, trial)
    } else {
        CameraStage { polls: vec![(0.0, Vec::new())], crop_stage_hit: false }
    };
    let cands = stage.polls.first().map(|(_, c)| c.clone()).unwrap_or_default();

    if !behavior.use_drone {
        let outcome =
            camera_only_outcome(scenario, camera_cmd, &stage, truth, prompts_total, world_hash, trial);
        return TrialRecord { outcome, log };
    }

    let catalog = scenario.catalog();
    let table = ModuleSelectionTable::standard().with_overrides(&scenario.module_selection);
    let station_pos = Point2::new(scenario.station.position[0], scenario.station.position[1]);
    let plan_ctx = PlanContext {
        table: &table,
        catalog: &catalog,
        policy,
        drone: &scenario.drone,
        station: station_pos,
    };

    let mut phases = Vec::new();
    for (i, cmd) in cmds.iter().enumerate() {
        let phase = match cmd.task_kind {
            TaskKind::Actuation => {
                let prior_sense = cmds[..i].iter().any(|c| c.task_kind != TaskKind::Actuation);
                if cmd.deliver_to.is_some() {
                    (cmd.clone(), Vec::new(), None)
                } else if prior_sense {
                    (cmd.clone(), Vec::new(), Some(Waypoint::PhaseAnswer { phase: i - 1 }))
                } else {
                    if cands.len() > 1 {
                        prompts_total += 1;
                    }
                    let idx = policy.actuation_choice.min(cands.len().saturating_sub(1));
                    let target = cands.get(idx).map(|c| Waypoint::fixed(c.location));
                    (cmd.clone(), cands.clone(), target)
                }
            }
            _ => (cmd.clone(), cands.clone(), None),
        };
        phases.push(phase);
    }

    let noise: std::collections::BTreeMap<_, _> =
        scenario.fields.iter().map(|f| (f.kind, f.noise_sd)).collect();
    let env = ExecEnv {
        world,
        catalog: &catalog,
        policy,
        drone_cfg: &scenario.drone,
        oracle: &scenario.oracle,
        noise: &noise,
    };
    let mut drone_rng = trial_rng(master_seed, trial, Stream::Drone);
    let mut drone = DroneState::at_station(station_pos, &scenario.drone, &catalog);
    let mut station = scenario.build_station();

    let plan = match compose_multistep(phases, &plan_ctx) {
        Ok(p) => p,
        Err(_) => {
            let outcome = camera_only_outcome(
                scenario, camera_cmd, &stage, truth, prompts_total, world_hash, trial,
            );
            return TrialRecord { outcome, log };
        }
    };
    let exec = execute(
        &plan,
        &env,
        &mut drone,
        &mut station,
        0.0,
        &mut drone_rng,
        ExecutionOptions::default(),
        &mut log,
    );

    // Joint decision for sense+sense compounds.
    let both_sense = cmds.len() == 2
        && cmds.iter().all(|c| {
            c.task_kind != TaskKind::Actuation && c.adjective.is_some()
        });
    let joint_answer = if both_sense && exec.failure.is_none() {
        decide_joint(
            [&cmds[0], &cmds[1]],
            [&exec.evidence[0], &exec.evidence[1]],
            policy,
        )
        .ok()
    } else {
        None
    };

    let mut phase_success = Vec::with_capacity(cmds.len());
    for (i, cmd) in cmds.iter().enumerate() {
        let ok = match (cmd.task_kind, exec.answers.get(i).cloned().flatten()) {
            (TaskKind::Actuation, Some(Answer::Delivered { offset, .. })) => {
                offset <= policy.match_radius
            }
            (TaskKind::Id, Some(Answer::Location { at })) => {
                within(at, truth.location, policy.match_radius)
            }
            (TaskKind::State | TaskKind::Surveillance, Some(Answer::Flag { value, .. })) => {
                value == truth.positive
            }
            _ => false,
        };
        phase_success.push(ok);
    }

    let final_answer = joint_answer.clone().or_else(|| exec.answers.last().cloned().flatten());
    let reported: Vec<Point2> = final_answer.as_ref().and_then(|a| a.location()).into_iter().collect();
    let success = exec.failure.is_none() && phase_success.iter().all(|&b| b) && {
        match &joint_answer {
            Some(a) => within(a.location().unwrap(), truth.location, policy.match_radius)
                || truth.location.is_none(),
            None => true,
        }
    };

    let outcome = TaskOutcome {
        scenario: scenario.name.clone(),
        trial,
        answer: final_answer,
        evidence: exec.evidence.into_iter().flatten().collect(),
        prompts_used: prompts_total,
        executions: exec.sorties,
        wall_time: exec.wall_time + policy.vlm_latency * stage.polls.len() as f64,
        flight_seconds: exec.flight_seconds,
        ground_seconds: exec.ground_seconds,
        success_vs_truth: success,
        failure: exec.failure,
        crop_stage_hit: stage.crop_stage_hit,
        reported_locations: reported,
        answered_positive: None,
        truth_positive: truth.positive,
        truth_location: truth.location,
        world_hash,
        phase_success,
        delivery_offsets: exec.delivery_offsets,
    };
    TrialRecord { outcome, log }
}

/// Repeats the scenario's task on one battery charge (no recharge between
/// executions) and counts completed executions before exhaustion.
pub struct AccountingResult {
    pub executions: u32,
    pub total_flight_seconds: f64,
    pub budget: f64,
    pub overrun: bool,
}

pub fn executions_per_battery(
    scenario: &Scenario,
    master_seed: u64,
    max_reps: u32,
) -> AccountingResult {
    let catalog = scenario.catalog();
    let table = ModuleSelectionTable::standard().with_overrides(&scenario.module_selection);
    let policy = &scenario.policy;
    let station_pos = Point2::new(scenario.station.position[0], scenario.station.position[1]);
    let plan_ctx = PlanContext {
        table: &table,
        catalog: &catalog,
        policy,
        drone: &scenario.drone,
        station: station_pos,
    };
    let spec = match &scenario.command {
        Some(s) => s,
        None => {
            return AccountingResult {
                executions: 0,
                total_flight_seconds: 0.0,
                budget: 0.0,
                overrun: false,
            }
        }
    };
    let raw = Command::from_spec(spec);
    let (cmd, _) = match clarify(&raw, policy) {
        Ok(x) => x,
        Err(_) => {
            return AccountingResult {
                executions: 0,
                total_flight_seconds: 0.0,
                budget: 0.0,
                overrun: false,
            }
        }
    };
    let module = table.select(&cmd).ok().flatten();
    let budget = catalog.flight_budget(module.as_deref()).unwrap_or(0.0);

    let mut drone = DroneState::at_station(station_pos, &scenario.drone, &catalog);
    let mut station = scenario.build_station();
    let mut executions = 0;
    let mut total_flight = 0.0;
    let mut clock = 0.0;

    for rep in 0..max_reps {
        let realized = realize(scenario, master_seed, rep as u64);
        let stage = run_camera_stage(
            scenario,
            &cmd,
            &realized.world,
            &realized.truth,
            CameraMode::ArckCrops,
            master_seed,
            rep as u64,
        );
        // Surveillance accounting measures the standard verification sortie
        // at the truth location; other tasks visit their real candidates.
        let cands: Vec<Candidate> = match cmd.task_kind {
            TaskKind::Surveillance => vec![Candidate {
                location: realized.truth.location.unwrap_or(station_pos),
                crop: 0,
                score: 1.0,
            }],
            _ => {
                let c = stage.polls.first().map(|(_, c)| c.clone()).unwrap_or_default();
                if c.is_empty() {
                    continue;
                }
                c
            }
        };
        let plan = match build_plan(&cmd, &cands, None, &plan_ctx) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let noise: std::collections::BTreeMap<_, _> =
            scenario.fields.iter().map(|f| (f.kind, f.noise_sd)).collect();
        let env = ExecEnv {
            world: &realized.world,
            catalog: &catalog,
            policy,
            drone_cfg: &scenario.drone,
            oracle: &scenario.oracle,
            noise: &noise,
        };
        let mut log = MissionLog::default();
        let mut drone_rng = trial_rng(master_seed, 1_000_000 + rep as u64, Stream::Drone);
        let before = total_flight;
        let exec = execute(
            &plan,
            &env,
            &mut drone,
            &mut station,
            clock,
            &mut drone_rng,
            ExecutionOptions { recharge_on_land: false },
            &mut log,
        );
        clock = exec.end_time;
        total_flight += exec.flight_seconds;
        match exec.failure {
            Some(FailureMode::BatteryExhausted) => {
                total_flight = before; // the aborted execution does not count
                break;
            }
            Some(_) | None => {
                if exec.failure.is_none() {
                    executions += 1;
                } else {
                    break;
                }
            }
        }
    }
    AccountingResult {
        executions,
        total_flight_seconds: total_flight,
        budget,
        overrun: total_flight > budget + 1e-6,
    }
}
