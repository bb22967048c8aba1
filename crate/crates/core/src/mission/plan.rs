//! Mission plans: ordered executable steps, nearest-neighbor candidate
//! routing, flight-budget-aware sortie splitting, and multi-phase
//! composition with return-and-swap joints.

use serde::{Deserialize, Serialize};

use crate::drone::{DroneConfig, ModuleCatalog};
use crate::environment::FieldKind;
use crate::geometry::Point2;
use crate::ground_station::SwapRequest;
use crate::scenario::{PolicySpec, TaskKind};

use super::{Candidate, Command, MissionError, ModuleSelectionTable};

/// A plan target, either fixed or resolved from an earlier phase's answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waypoint {
    At { point: Point2 },
    /// The decided location of phase `phase`.
    PhaseAnswer { phase: usize },
}

impl Waypoint {
    pub fn fixed(p: Point2) -> Self {
        Waypoint::At { point: p }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    /// Initial module attach at the station (with optional payload).
    EquipModule { module: Option<String>, payload: Option<String> },
    Takeoff,
    FlyTo { to: Waypoint },
    SenseAt { at: Waypoint, kind: FieldKind, duration: f64 },
    CaptureAt { at: Waypoint },
    ReturnAndLand,
    SwapModule { request: SwapRequest },
    Deliver { at: Waypoint },
}

/// One phase of a (possibly compound) plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseInfo {
    pub cmd: Command,
    pub module: Option<String>,
    /// Step index range `[start, end)` of this phase.
    pub step_range: (usize, usize),
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissionPlan {
    pub steps: Vec<Step>,
    pub candidate_locations: Vec<Candidate>,
    pub phases: Vec<PhaseInfo>,
}

impl MissionPlan {
    pub fn phase_of_step(&self, idx: usize) -> usize {
        self.phases
            .iter()
            .position(|p| idx >= p.step_range.0 && idx < p.step_range.1)
            .unwrap_or(0)
    }
}

pub struct PlanContext<'a> {
    pub table: &'a ModuleSelectionTable,
    pub catalog: &'a ModuleCatalog,
    pub policy: &'a PolicySpec,
    pub drone: &'a DroneConfig,
    pub station: Point2,
}

fn nearest_neighbor_order(station: Point2, candidates: &[Candidate]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut order = Vec::with_capacity(candidates.len());
    let mut here = station;
    while !remaining.is_empty() {
        let (pos, &idx) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                candidates[a]
                    .location
                    .distance(&here)
                    .partial_cmp(&candidates[b].location.distance(&here))
                    .unwrap()
            })
            .unwrap();
        order.push(idx);
        here = candidates[idx].location;
        remaining.remove(pos);
    }
    order
}

/// Builds a single-phase plan: equip the selected module, visit candidates
/// in nearest-neighbor order, act at each, return and land. Legs that would
/// overrun the module's flight budget split the visit into extra sorties.
///
/// `target_override` replaces camera candidates as the destination for
/// actuation phases fed by an earlier phase's decision.
pub fn build_plan(
    cmd: &Command,
    candidates: &[Candidate],
    target_override: Option<Waypoint>,
    ctx: &PlanContext,
) -> Result<MissionPlan, MissionError> {
    let module = ctx.table.select(cmd)?;
    if let Some(name) = &module {
        if ctx.catalog.get(name).is_none() {
            return Err(MissionError::NoModuleForModality(cmd.sensing_kind()));
        }
    }
    let budget = ctx
        .catalog
        .flight_budget(module.as_deref())
        .map_err(|_| MissionError::NoModuleForModality(cmd.sensing_kind()))?;
    let payload = if cmd.task_kind == TaskKind::Actuation { cmd.payload.clone() } else { None };

    let mut steps = vec![
        Step::EquipModule { module: module.clone(), payload },
        Step::Takeoff,
    ];

    if cmd.task_kind == TaskKind::Actuation {
        let target = target_override
            .or_else(|| cmd.deliver_to.map(Waypoint::fixed))
            .or_else(|| candidates.first().map(|c| Waypoint::fixed(c.location)))
            .ok_or(MissionError::NoCandidates)?;
        steps.push(Step::FlyTo { to: target });
        steps.push(Step::Deliver { at: target });
        steps.push(Step::ReturnAndLand);
        let end = steps.len();
        return Ok(MissionPlan {
            steps,
            candidate_locations: candidates.to_vec(),
            phases: vec![PhaseInfo {
                cmd: cmd.clone(),
                module,
                step_range: (0, end),
                candidates: candidates.to_vec(),
            }],
        });
    }

    if candidates.is_empty() {
        return Err(MissionError::NoCandidates);
    }
    let kind = cmd.sensing_kind();
    let action_time = match (cmd.task_kind, &kind) {
        (TaskKind::Id, None) => ctx.policy.capture_duration,
        _ => ctx.policy.sense_duration,
    };
    let speed = ctx.drone.speed.max(1e-9);
    let usable = budget * ctx.policy.safety_factor;

    let mut here = ctx.station;
    let mut sortie_time = ctx.drone.takeoff_time;
    for idx in nearest_neighbor_order(ctx.station, candidates) {
        let c = candidates[idx];
        let leg = here.distance(&c.location) / speed;
        let back_home = c.location.distance(&ctx.station) / speed;
        let landing = 8.0;
        if sortie_time + leg + action_time + back_home + landing > usable
            && sortie_time > ctx.drone.takeoff_time
        {
            steps.push(Step::ReturnAndLand);
            steps.push(Step::Takeoff);
            here = ctx.station;
            sortie_time = ctx.drone.takeoff_time;
            let leg = here.distance(&c.location) / speed;
            sortie_time += leg;
        } else {
            sortie_time += leg;
        }
        let wp = Waypoint::fixed(c.location);
        steps.push(Step::FlyTo { to: wp });
        match (cmd.task_kind, kind) {
            (TaskKind::Id, None) => steps.push(Step::CaptureAt { at: wp }),
            (_, Some(k)) => {
                steps.push(Step::SenseAt { at: wp, kind: k, duration: ctx.policy.sense_duration })
            }
            (TaskKind::State | TaskKind::Surveillance, None) => {
                return Err(MissionError::NoModuleForModality(None))
            }
            _ => {}
        }
        sortie_time += action_time;
        here = c.location;
    }
    steps.push(Step::ReturnAndLand);
    let end = steps.len();
    Ok(MissionPlan {
        steps,
        candidate_locations: candidates.to_vec(),
        phases: vec![PhaseInfo {
            cmd: cmd.clone(),
            module,
            step_range: (0, end),
            candidates: candidates.to_vec(),
        }],
    })
}

/// Concatenates phase plans into one compound plan. Each boundary becomes a
/// return-and-land (tail of the earlier phase) followed by exactly one
/// module swap heading the next phase; sense -> actuate phases receive the
/// earlier phase's decided location through a [`Waypoint::PhaseAnswer`].
pub fn compose_multistep(
    phases: Vec<(Command, Vec<Candidate>, Option<Waypoint>)>,
    ctx: &PlanContext,
) -> Result<MissionPlan, MissionError> {
    let mut steps: Vec<Step> = Vec::new();
    let mut infos: Vec<PhaseInfo> = Vec::new();
    let mut all_candidates: Vec<Candidate> = Vec::new();
    let mut prev_module: Option<String> = None;

    for (i, (cmd, candidates, target)) in phases.into_iter().enumerate() {
        let sub = build_plan(&cmd, &candidates, target, ctx)?;
        let start = steps.len();
        for (j, step) in sub.steps.into_iter().enumerate() {
            if i > 0 && j == 0 {
                // Replace the phase's EquipModule with a swap joint.
                let Step::EquipModule { module, payload } = step else {
                    return Err(MissionError::InvalidPlan("phase must start with equip".into()));
                };
                let attach = module.clone().ok_or(MissionError::InvalidPlan(
                    "later phases must attach a module".into(),
                ))?;
                steps.push(Step::SwapModule {
                    request: SwapRequest {
                        detach: prev_module.clone(),
                        attach: Some(attach),
                        payload,
                    },
                });
            } else {
                steps.push(step);
            }
        }
        let end = steps.len();
        all_candidates.extend(sub.phases[0].candidates.iter().copied());
        prev_module = sub.phases[0].module.clone();
        infos.push(PhaseInfo {
            cmd: sub.phases[0].cmd.clone(),
            module: sub.phases[0].module.clone(),
            step_range: (start, end),
            candidates: sub.phases[0].candidates.clone(),
        });
    }
    let plan = MissionPlan { steps, candidate_locations: all_candidates, phases: infos };
    validate_plan(&plan, ctx.catalog)?;
    Ok(plan)
}

/// Static plan checks: module/modality agreement for every sensing step,
/// payload before delivery, airborne/grounded step ordering, and exactly
/// one return-and-land plus one swap at every phase boundary.
pub fn validate_plan(plan: &MissionPlan, catalog: &ModuleCatalog) -> Result<(), MissionError> {
    let fail = |msg: String| Err(MissionError::InvalidPlan(msg));
    let mut attached: Option<String> = None;
    let mut has_payload = false;
    let mut airborne = false;
    for (i, step) in plan.steps.iter().enumerate() {
        match step {
            Step::EquipModule { module, payload } => {
                if airborne {
                    return fail(format!("step {i}: equip while airborne"));
                }
                attached = module.clone();
                has_payload = payload.is_some();
            }
            Step::SwapModule { request } => {
                if airborne {
                    return fail(format!("step {i}: swap while airborne"));
                }
                if request.attach.is_none() && request.detach.is_none() {
                    return fail(format!("step {i}: empty swap request"));
                }
                if let Some(a) = &request.attach {
                    attached = Some(a.clone());
                }
                has_payload = request.payload.is_some()
                    || (has_payload && request.attach.is_none() && request.detach.is_none());
            }
            Step::Takeoff => {
                if airborne {
                    return fail(format!("step {i}: takeoff while airborne"));
                }
                airborne = true;
            }
            Step::ReturnAndLand => {
                if !airborne {
                    return fail(format!("step {i}: landing while grounded"));
                }
                airborne = false;
            }
            Step::FlyTo { .. } | Step::CaptureAt { .. } => {
                if !airborne {
                    return fail(format!("step {i}: flight step while grounded"));
                }
            }
            Step::SenseAt { kind, .. } => {
                if !airborne {
                    return fail(format!("step {i}: sensing while grounded"));
                }
                match &attached {
                    None => return fail(format!("step {i}: sensing with no module")),
                    Some(name) => {
                        let ok = catalog
                            .get(name)
                            .map(|m| m.modality.senses(*kind))
                            .unwrap_or(false);
                        if !ok {
                            return fail(format!(
                                "step {i}: module '{name}' cannot sense {kind:?}"
                            ));
                        }
                    }
                }
            }
            Step::Deliver { .. } => {
                if !airborne {
                    return fail(format!("step {i}: delivery while grounded"));
                }
                if !has_payload {
                    return fail(format!("step {i}: delivery without a loaded payload"));
                }
                has_payload = false;
            }
        }
    }
    if airborne {
        return fail("plan ends airborne".into());
    }
    // Boundary shape: ... ReturnAndLand | SwapModule Takeoff ...
    for pair in plan.phases.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let tail = &plan.steps[prev.step_range.1 - 1];
        if !matches!(tail, Step::ReturnAndLand) {
            return fail("phase must end with a landing".into());
        }
        let boundary = &plan.steps[next.step_range.0..next.step_range.1.min(next.step_range.0 + 2)];
        let swaps = boundary.iter().filter(|s| matches!(s, Step::SwapModule { .. })).count();
        if swaps != 1 || !matches!(boundary.first(), Some(Step::SwapModule { .. })) {
            return fail("phase boundary needs exactly one module swap".into());
        }
        let lands_in_boundary = boundary.iter().filter(|s| matches!(s, Step::ReturnAndLand)).count();
        if lands_in_boundary != 0 {
            return fail("phase boundary has a stray landing".into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::PolicySpec;

    fn ctx<'a>(
        table: &'a ModuleSelectionTable,
        catalog: &'a ModuleCatalog,
        policy: &'a PolicySpec,
        drone: &'a DroneConfig,
    ) -> PlanContext<'a> {
        PlanContext { table, catalog, policy, drone, station: Point2::new(0.5, 0.5) }
    }

    fn cand(x: f64, y: f64) -> Candidate {
        Candidate { location: Point2::new(x, y), crop: 0, score: 0.9 }
    }

    fn sit_cmd() -> Command {
        Command {
            task_kind: TaskKind::Id,
            target: "seat".into(),
            modality_hint: None,
            adjective: Some(super::super::Adjective::Warmest),
            payload: None,
            deadline: None,
            deliver_to: None,
        }
    }

    #[test]
    fn sensing_plan_visits_candidates_nearest_first() {
        let table = ModuleSelectionTable::standard();
        let catalog = ModuleCatalog::standard();
        let policy = PolicySpec::default();
        let drone = DroneConfig::default();
        let ctx = ctx(&table, &catalog, &policy, &drone);
        let candidates = vec![cand(6.0, 5.0), cand(1.5, 1.0), cand(3.0, 2.0)];
        let plan = build_plan(&sit_cmd(), &candidates, None, &ctx).unwrap();
        validate_plan(&plan, &catalog).unwrap();
        let visits: Vec<Point2> = plan
            .steps
            .iter()
            .filter_map(|s| match s {
                Step::FlyTo { to: Waypoint::At { point } } => Some(*point),
                _ => None,
            })
            .collect();
        assert_eq!(visits, vec![
            Point2::new(1.5, 1.0),
            Point2::new(3.0, 2.0),
            Point2::new(6.0, 5.0),
        ]);
        assert!(matches!(plan.steps[0], Step::EquipModule { ref module, .. } if module.as_deref() == Some("Temp&Moisture")));
        assert!(matches!(plan.steps.last(), Some(Step::ReturnAndLand)));
    }

    #[test]
    fn overlong_visit_list_splits_into_sorties() {
        let table = ModuleSelectionTable::standard();
        let catalog = ModuleCatalog::standard();
        let mut policy = PolicySpec::default();
        policy.sense_duration = 60.0; // three sensings exceed one 223 s budget
        let drone = DroneConfig::default();
        let ctx = ctx(&table, &catalog, &policy, &drone);
        let candidates = vec![cand(5.0, 4.0), cand(6.0, 5.0), cand(7.0, 6.0)];
        let plan = build_plan(&sit_cmd(), &candidates, None, &ctx).unwrap();
        validate_plan(&plan, &catalog).unwrap();
        let landings = plan.steps.iter().filter(|s| matches!(s, Step::ReturnAndLand)).count();
        assert!(landings >= 2, "expected a sortie split, got steps {:?}", plan.steps);
    }

    #[test]
    fn actuation_plan_delivers_to_explicit_target() {
        let table = ModuleSelectionTable::standard();
        let catalog = ModuleCatalog::standard();
        let policy = PolicySpec::default();
        let drone = DroneConfig::default();
        let ctx = ctx(&table, &catalog, &policy, &drone);
        let cmd = Command {
            task_kind: TaskKind::Actuation,
            target: "person".into(),
            modality_hint: None,
            adjective: None,
            payload: Some("vitamins".into()),
            deadline: None,
            deliver_to: Some(Point2::new(4.0, 3.0)),
        };
        let plan = build_plan(&cmd, &[], None, &ctx).unwrap();
        validate_plan(&plan, &catalog).unwrap();
        assert!(plan.steps.iter().any(|s| matches!(s, Step::Deliver { .. })));
    }

    #[test]
    fn compound_plan_has_one_swap_per_boundary() {
        let table = ModuleSelectionTable::standard();
        let catalog = ModuleCatalog::standard();
        let policy = PolicySpec::default();
        let drone = DroneConfig::default();
        let ctx = ctx(&table, &catalog, &policy, &drone);
        let sense = sit_cmd();
        let actuate = Command {
            task_kind: TaskKind::Actuation,
            target: "floor".into(),
            modality_hint: None,
            adjective: None,
            payload: Some("poison".into()),
            deadline: None,
            deliver_to: None,
        };
        let plan = compose_multistep(
            vec![
                (sense, vec![cand(3.0, 2.0), cand(6.0, 5.0)], None),
                (actuate, vec![], Some(Waypoint::PhaseAnswer { phase: 0 })),
            ],
            &ctx,
        )
        .unwrap();
        validate_plan(&plan, &catalog).unwrap();
        assert_eq!(plan.phases.len(), 2);
        let swaps = plan.steps.iter().filter(|s| matches!(s, Step::SwapModule { .. })).count();
        assert_eq!(swaps, 1);
        // The swap carries the actuation payload.
        let Step::SwapModule { request } = plan
            .steps
            .iter()
            .find(|s| matches!(s, Step::SwapModule { .. }))
            .unwrap()
        else {
            unreachable!()
        };
        assert_eq!(request.payload.as_deref(), Some("poison"));
        assert_eq!(request.attach.as_deref(), Some("Actuator"));
        assert_eq!(request.detach.as_deref(), Some("Temp&Moisture"));
    }

    #[test]
    fn validate_rejects_mismatched_sensing_module() {
        let catalog = ModuleCatalog::standard();
        let plan = MissionPlan {
            steps: vec![
                Step::EquipModule { module: Some("PM2.5".into()), payload: None },
                Step::Takeoff,
                Step::SenseAt {
                    at: Waypoint::fixed(Point2::new(1.0, 1.0)),
                    kind: FieldKind::Temperature,
                    duration: 5.0,
                },
                Step::ReturnAndLand,
            ],
            candidate_locations: vec![],
            phases: vec![],
        };
        let err = validate_plan(&plan, &catalog).unwrap_err();
        assert!(matches!(err, MissionError::InvalidPlan(_)));
    }

    #[test]
    fn validate_rejects_delivery_without_payload() {
        let catalog = ModuleCatalog::standard();
        let plan = MissionPlan {
            steps: vec![
                Step::EquipModule { module: Some("Actuator".into()), payload: None },
                Step::Takeoff,
                Step::Deliver { at: Waypoint::fixed(Point2::new(1.0, 1.0)) },
                Step::ReturnAndLand,
            ],
            candidate_locations: vec![],
            phases: vec![],
        };
        assert!(validate_plan(&plan, &catalog).is_err());
    }
}
