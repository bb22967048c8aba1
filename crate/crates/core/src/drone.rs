//! Drone kinematics, noisy localization, the swappable-module catalog with
//! per-module flight budgets, and in-flight sensing.
//!
//! The battery is tracked in seconds of remaining flight at the current
//! draw. Attaching a heavier module rescales the remaining seconds by the
//! ratio of module budgets, preserving the charge fraction; the budget
//! table already folds mass and power into fly time.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvironmentError, FieldKind, World};
use crate::geometry::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum DroneError {
    #[error("battery exhausted")]
    BatteryExhausted,
    #[error("waypoint unreachable within {timeout:.1} s")]
    Unreachable { timeout: f64 },
    #[error("no module attached")]
    NoModuleAttached,
    #[error("attached module '{module}' does not sense {kind:?}")]
    ModalityMismatch { module: String, kind: FieldKind },
    #[error("unknown module '{0}'")]
    UnknownModule(String),
    #[error("drone is not airborne")]
    NotAirborne,
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
}

/// What a module can do once attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    /// Field sensing; ambient kinds the module reads.
    Fields(Vec<FieldKind>),
    Camera,
    Actuator,
}

impl Modality {
    pub fn senses(&self, kind: FieldKind) -> bool {
        matches!(self, Modality::Fields(kinds) if kinds.contains(&kind))
    }
}

/// One swappable module: mass, power, flight budget, cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModuleSpec {
    pub name: String,
    pub modality: Modality,
    pub module_mass_g: f64,
    pub module_power_w: f64,
    /// Flight budget with this module attached, seconds.
    pub fly_time_s: f64,
    pub cost_usd: f64,
}

/// The shipped module catalog plus the bare-drone budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuleCatalog {
    pub modules: Vec<SensorModuleSpec>,
    /// Flight budget with no module attached, seconds.
    pub drone_only_fly_time_s: f64,
    pub drone_mass_g: f64,
    pub drone_power_w: f64,
    pub drone_cost_usd: f64,
}

impl ModuleCatalog {
    /// The stock catalog of supported modules.
    pub fn standard() -> Self {
        let f = |kinds: &[FieldKind]| Modality::Fields(kinds.to_vec());
        Self {
            modules: vec![
                SensorModuleSpec {
                    name: "PM2.5".into(),
                    modality: f(&[FieldKind::Pm]),
                    module_mass_g: 67.2,
                    module_power_w: 0.29,
                    fly_time_s: 196.0, // 3m16s
                    cost_usd: 40.0,
                },
                SensorModuleSpec {
                    name: "Temp&Moisture".into(),
                    modality: f(&[FieldKind::Temperature, FieldKind::Humidity]),
                    module_mass_g: 27.6,
                    module_power_w: 3.3e-6,
                    fly_time_s: 223.0, // 3m43s
                    cost_usd: 12.0,
                },
                SensorModuleSpec {
                    name: "Light Sensor".into(),
                    modality: f(&[FieldKind::Light]),
                    module_mass_g: 28.1,
                    module_power_w: 0.010,
                    fly_time_s: 223.0, // 3m43s
                    cost_usd: 10.0,
                },
                SensorModuleSpec {
                    name: "CO2".into(),
                    modality: f(&[FieldKind::Gas]),
                    module_mass_g: 28.1,
                    module_power_w: 0.086,
                    fly_time_s: 222.0, // 3m42s
                    cost_usd: 16.0,
                },
                SensorModuleSpec {
                    name: "Alcohol".into(),
                    modality: f(&[FieldKind::Gas]),
                    module_mass_g: 31.5,
                    module_power_w: 0.75,
                    fly_time_s: 219.0, // 3m39s
                    cost_usd: 8.0,
                },
                SensorModuleSpec {
                    name: "Actuator".into(),
                    modality: Modality::Actuator,
                    module_mass_g: 50.1,
                    module_power_w: 1.22,
                    fly_time_s: 188.0, // 3m08s
                    cost_usd: 7.0,
                },
            ],
            drone_only_fly_time_s: 227.0, // 3m47s
            drone_mass_g: 344.7,
            drone_power_w: 195.4,
            drone_cost_usd: 344.0,
        }
    }

    pub fn get(&self, name: &str) -> Option<&SensorModuleSpec> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Flight budget for a module by name; `None` means the bare drone.
    pub fn flight_budget(&self, module: Option<&str>) -> Result<f64, DroneError> {
        match module {
            None => Ok(self.drone_only_fly_time_s),
            Some(name) => self
                .get(name)
                .map(|m| m.fly_time_s)
                .ok_or_else(|| DroneError::UnknownModule(name.to_string())),
        }
    }

    /// First catalog module that senses `kind`.
    pub fn module_for_field(&self, kind: FieldKind) -> Option<&SensorModuleSpec> {
        self.modules.iter().find(|m| m.modality.senses(kind))
    }
}

/// Position, altitude, heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point2,
    pub altitude: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn grounded(position: Point2) -> Self {
        Self { position, altitude: 0.0, yaw: 0.0 }
    }
}

/// Per-fix localization noise; fixes are independent (no drift term).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationModel {
    pub xy_noise_sd: f64,
    pub z_noise_sd: f64,
    pub update_rate: f64,
}

impl Default for LocalizationModel {
    fn default() -> Self {
        // sigma chosen so the Rayleigh median sigma*sqrt(2 ln 2) is 3.29 cm.
        Self { xy_noise_sd: 0.0329 / 1.1774, z_noise_sd: 0.01, update_rate: 20.0 }
    }
}

/// Kinematic and timing constants for the simulated drone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneConfig {
    pub speed: f64,
    pub arrival_radius: f64,
    pub dt: f64,
    pub cruise_altitude: f64,
    /// Airborne seconds charged for takeoff.
    pub takeoff_time: f64,
    /// Leg timeout = max(this floor, factor * straight-line time).
    pub leg_timeout_floor: f64,
    pub leg_timeout_factor: f64,
    pub localization: LocalizationModel,
}

impl Default for DroneConfig {
    fn default() -> Self {
        Self {
            speed: 0.5,
            arrival_radius: 0.10,
            dt: 0.05,
            cruise_altitude: 1.0,
            takeoff_time: 2.0,
            leg_timeout_floor: 20.0,
            leg_timeout_factor: 4.0,
            localization: LocalizationModel::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DroneState {
    pub true_pose: Pose,
    pub est_pose: Pose,
    pub speed: f64,
    /// Seconds of flight remaining at the current draw.
    pub battery_remaining: f64,
    pub attached: Option<SensorModuleSpec>,
    pub airborne: bool,
    /// Item carried by an attached actuation module.
    pub payload: Option<String>,
}

impl DroneState {
    /// A fully charged drone resting at `position` with no module.
    pub fn at_station(position: Point2, cfg: &DroneConfig, catalog: &ModuleCatalog) -> Self {
        Self {
            true_pose: Pose::grounded(position),
            est_pose: Pose::grounded(position),
            speed: cfg.speed,
            battery_remaining: catalog.drone_only_fly_time_s,
            attached: None,
            airborne: false,
            payload: None,
        }
    }

    pub fn attached_name(&self) -> Option<&str> {
        self.attached.as_ref().map(|m| m.name.as_str())
    }

    /// Current flight budget cap given the attached module.
    pub fn budget(&self, catalog: &ModuleCatalog) -> f64 {
        self.attached
            .as_ref()
            .map(|m| m.fly_time_s)
            .unwrap_or(catalog.drone_only_fly_time_s)
    }

    /// Replaces the attached module, rescaling remaining seconds so the
    /// charge fraction is preserved across the draw change.
    pub fn set_module(&mut self, module: Option<SensorModuleSpec>, catalog: &ModuleCatalog) {
        let old_budget = self.budget(catalog);
        let frac = (self.battery_remaining / old_budget).clamp(0.0, 1.0);
        self.attached = module;
        let new_budget = self.budget(catalog);
        self.battery_remaining = frac * new_budget;
    }

    /// Full recharge at the station.
    pub fn recharge(&mut self, catalog: &ModuleCatalog) {
        self.battery_remaining = self.budget(catalog);
    }

    fn drain(&mut self, seconds: f64) -> Result<(), DroneError> {
        if self.battery_remaining < seconds {
            self.battery_remaining = 0.0;
            return Err(DroneError::BatteryExhausted);
        }
        self.battery_remaining -= seconds;
        Ok(())
    }
}

/// One localization fix: truth plus isotropic Gaussian noise, i.i.d. per
/// call. Yaw passes through unchanged.
pub fn localize<R: Rng>(true_pose: &Pose, model: &LocalizationModel, rng: &mut R) -> Pose {
    if model.xy_noise_sd <= 0.0 && model.z_noise_sd <= 0.0 {
        return *true_pose;
    }
    let nxy = Normal::new(0.0, model.xy_noise_sd.max(1e-300)).unwrap();
    let nz = Normal::new(0.0, model.z_noise_sd.max(1e-300)).unwrap();
    let dx = if model.xy_noise_sd > 0.0 { nxy.sample(rng) } else { 0.0 };
    let dy = if model.xy_noise_sd > 0.0 { nxy.sample(rng) } else { 0.0 };
    let dz = if model.z_noise_sd > 0.0 { nz.sample(rng) } else { 0.0 };
    Pose {
        position: Point2::new(true_pose.position.x + dx, true_pose.position.y + dy),
        altitude: true_pose.altitude + dz,
        yaw: true_pose.yaw,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub true_pos: Point2,
    pub est_pos: Point2,
    pub battery_s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub duration: f64,
}

/// Writes a trajectory as CSV: `t,true_x,true_y,est_x,est_y,battery_s`.
pub fn write_trajectory_csv<W: std::io::Write>(
    trajectory: &Trajectory,
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "true_x", "true_y", "est_x", "est_y", "battery_s"])?;
    for s in &trajectory.samples {
        w.write_record([
            format!("{:.3}", s.t),
            format!("{:.6}", s.true_pos.x),
            format!("{:.6}", s.true_pos.y),
            format!("{:.6}", s.est_pos.x),
            format!("{:.6}", s.est_pos.y),
            format!("{:.3}", s.battery_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Closed-loop flight to `waypoint`: each tick re-localizes and steps at
/// cruise speed toward the waypoint as seen through the estimate. Arrival
/// is declared when the estimate enters the arrival radius. `t0` is mission
/// time at leg start; samples are stamped with it.
pub fn navigate_to<R: Rng>(
    drone: &mut DroneState,
    waypoint: Point2,
    cfg: &DroneConfig,
    t0: f64,
    rng: &mut R,
) -> Result<Trajectory, DroneError> {
    if !drone.airborne {
        return Err(DroneError::NotAirborne);
    }
    if drone.battery_remaining <= 0.0 {
        return Err(DroneError::BatteryExhausted);
    }
    let initial_dist = drone.true_pose.position.distance(&waypoint);
    let timeout = cfg
        .leg_timeout_floor
        .max(cfg.leg_timeout_factor * initial_dist / cfg.speed.max(1e-9));
    let mut traj = Trajectory::default();
    let mut t = 0.0;
    loop {
        drone.est_pose = localize(&drone.true_pose, &cfg.localization, rng);
        traj.samples.push(TrajectorySample {
            t: t0 + t,
            true_pos: drone.true_pose.position,
            est_pos: drone.est_pose.position,
            battery_s: drone.battery_remaining,
        });
        if drone.est_pose.position.distance(&waypoint) <= cfg.arrival_radius {
            traj.duration = t;
            return Ok(traj);
        }
        if t >= timeout {
            return Err(DroneError::Unreachable { timeout });
        }
        drone.drain(cfg.dt)?;
        let est = drone.est_pose.position;
        let d = est.distance(&waypoint).max(1e-12);
        let step = (cfg.speed * cfg.dt).min(d);
        let dir = Point2::new((waypoint.x - est.x) / d, (waypoint.y - est.y) / d);
        drone.true_pose.position = Point2::new(
            drone.true_pose.position.x + dir.x * step,
            drone.true_pose.position.y + dir.y * step,
        );
        t += cfg.dt;
    }
}

/// Holds position for `duration` seconds, draining the battery.
pub fn hover(drone: &mut DroneState, duration: f64) -> Result<(), DroneError> {
    if !drone.airborne {
        return Err(DroneError::NotAirborne);
    }
    drone.drain(duration)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Reading {
    pub t: f64,
    pub value: f64,
    pub est_pos: Point2,
}

/// Hovers at the current position sampling the environment at `rate` Hz for
/// `duration` seconds through the attached module.
#[allow(clippy::too_many_arguments)]
pub fn sense_at<R: Rng>(
    drone: &mut DroneState,
    kind: FieldKind,
    duration: f64,
    rate: f64,
    world: &World,
    t0: f64,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Vec<Reading>, DroneError> {
    let module = drone.attached.as_ref().ok_or(DroneError::NoModuleAttached)?;
    if !module.modality.senses(kind) {
        return Err(DroneError::ModalityMismatch { module: module.name.clone(), kind });
    }
    if !drone.airborne {
        return Err(DroneError::NotAirborne);
    }
    let n = (duration * rate).round() as usize;
    let mut readings = Vec::with_capacity(n);
    for i in 1..=n {
        let t = t0 + i as f64 / rate;
        let value = world.sample_field(drone.true_pose.position, kind, t, noise_sd, rng)?;
        readings.push(Reading { t, value, est_pos: drone.est_pose.position });
    }
    drone.drain(duration)?;
    Ok(readings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ScalarField;
    use crate::geometry::{FrameTransform, Rect};
    use rand_chacha::ChaCha8Rng;
    use rand_chacha::rand_core::SeedableRng;
    use std::collections::BTreeMap;

    fn test_world() -> World {
        let mut fields = BTreeMap::new();
        fields.insert(
            FieldKind::Temperature,
            ScalarField::uniform(FieldKind::Temperature, Point2::new(0.0, 0.0), 21, 17, 0.5, 21.0),
        );
        World {
            floorplan: Rect::from_coords(0.0, 0.0, 10.0, 8.0).unwrap(),
            transform: FrameTransform::new(100.0, Point2::new(0.0, 0.0)).unwrap(),
            fields,
            objects: Vec::new(),
            events: Vec::new(),
        }
    }

    fn airborne_drone(cfg: &DroneConfig, catalog: &ModuleCatalog) -> DroneState {
        let mut d = DroneState::at_station(Point2::new(1.0, 1.0), cfg, catalog);
        d.airborne = true;
        d.true_pose.altitude = cfg.cruise_altitude;
        d
    }

    #[test]
    fn flight_budgets_match_catalog() {
        let c = ModuleCatalog::standard();
        assert_eq!(c.flight_budget(None).unwrap(), 227.0);
        assert_eq!(c.flight_budget(Some("PM2.5")).unwrap(), 196.0);
        assert_eq!(c.flight_budget(Some("Actuator")).unwrap(), 188.0);
        assert_eq!(
            c.flight_budget(Some("Jetpack")).unwrap_err(),
            DroneError::UnknownModule("Jetpack".into())
        );
    }

    #[test]
    fn temp_module_senses_both_temperature_and_humidity() {
        let c = ModuleCatalog::standard();
        let m = c.get("Temp&Moisture").unwrap();
        assert!(m.modality.senses(FieldKind::Temperature));
        assert!(m.modality.senses(FieldKind::Humidity));
        assert!(!m.modality.senses(FieldKind::Pm));
    }

    #[test]
    fn localize_without_noise_is_identity() {
        let model = LocalizationModel { xy_noise_sd: 0.0, z_noise_sd: 0.0, update_rate: 20.0 };
        let pose = Pose { position: Point2::new(3.0, 4.0), altitude: 1.0, yaw: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(localize(&pose, &model, &mut rng), pose);
    }

    #[test]
    fn localization_median_error_near_calibration_target() {
        let model = LocalizationModel::default();
        let pose = Pose { position: Point2::new(5.0, 4.0), altitude: 1.0, yaw: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut errors: Vec<f64> = (0..30_000)
            .map(|_| localize(&pose, &model, &mut rng).position.distance(&pose.position))
            .collect();
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = errors[errors.len() / 2];
        assert!(
            (median - 0.0329).abs() / 0.0329 < 0.05,
            "median error {median} should be near 3.29 cm"
        );
    }

    #[test]
    fn navigate_to_current_position_costs_nothing() {
        let cfg = DroneConfig { localization: LocalizationModel { xy_noise_sd: 0.0, z_noise_sd: 0.0, update_rate: 20.0 }, ..DroneConfig::default() };
        let catalog = ModuleCatalog::standard();
        let mut d = airborne_drone(&cfg, &catalog);
        let before = d.battery_remaining;
        let traj = navigate_to(&mut d, Point2::new(1.0, 1.0), &cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(traj.duration, 0.0);
        assert_eq!(d.battery_remaining, before);
    }

    #[test]
    fn two_meter_leg_takes_four_seconds_without_noise() {
        let cfg = DroneConfig {
            localization: LocalizationModel { xy_noise_sd: 0.0, z_noise_sd: 0.0, update_rate: 20.0 },
            ..DroneConfig::default()
        };
        let catalog = ModuleCatalog::standard();
        let mut d = airborne_drone(&cfg, &catalog);
        let traj =
            navigate_to(&mut d, Point2::new(3.0, 1.0), &cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
        // Stops when within the 0.1 m arrival radius: (2.0 - 0.1)/0.5 = 3.8 s.
        assert!((traj.duration - 3.8).abs() <= cfg.dt + 1e-9, "duration {}", traj.duration);
    }

    #[test]
    fn battery_is_monotone_and_exhaustion_is_raised() {
        let cfg = DroneConfig::default();
        let catalog = ModuleCatalog::standard();
        let mut d = airborne_drone(&cfg, &catalog);
        d.battery_remaining = 1.0; // far too little for a 6 m leg
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err = navigate_to(&mut d, Point2::new(7.0, 1.0), &cfg, 0.0, &mut rng).unwrap_err();
        assert_eq!(err, DroneError::BatteryExhausted);
        assert_eq!(d.battery_remaining, 0.0);
    }

    #[test]
    fn trajectory_battery_column_is_non_increasing() {
        let cfg = DroneConfig::default();
        let catalog = ModuleCatalog::standard();
        let mut d = airborne_drone(&cfg, &catalog);
        let traj =
            navigate_to(&mut d, Point2::new(4.0, 3.0), &cfg, 0.0, &mut ChaCha8Rng::seed_from_u64(3))
                .unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].battery_s <= w[0].battery_s + 1e-12);
        }
    }

    #[test]
    fn sense_requires_matching_modality() {
        let cfg = DroneConfig::default();
        let catalog = ModuleCatalog::standard();
        let world = test_world();
        let mut d = airborne_drone(&cfg, &catalog);
        let mut rng = ChaCha8Rng::seed_from_u64(4);

        let err = sense_at(&mut d, FieldKind::Temperature, 5.0, 2.0, &world, 0.0, 0.0, &mut rng)
            .unwrap_err();
        assert_eq!(err, DroneError::NoModuleAttached);

        d.set_module(Some(catalog.get("PM2.5").unwrap().clone()), &catalog);
        let err = sense_at(&mut d, FieldKind::Temperature, 5.0, 2.0, &world, 0.0, 0.0, &mut rng)
            .unwrap_err();
        assert!(matches!(err, DroneError::ModalityMismatch { .. }));

        d.set_module(Some(catalog.get("Temp&Moisture").unwrap().clone()), &catalog);
        let readings =
            sense_at(&mut d, FieldKind::Temperature, 5.0, 2.0, &world, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(readings.len(), 10);
        assert!(readings.iter().all(|r| (r.value - 21.0).abs() < 1e-12));
    }

    #[test]
    fn module_swap_preserves_charge_fraction() {
        let cfg = DroneConfig::default();
        let catalog = ModuleCatalog::standard();
        let mut d = DroneState::at_station(Point2::new(0.5, 0.5), &cfg, &catalog);
        d.battery_remaining = 227.0 / 2.0; // half charge, bare drone
        d.set_module(Some(catalog.get("Actuator").unwrap().clone()), &catalog);
        assert!((d.battery_remaining - 94.0).abs() < 1e-9); // half of 188
    }

    #[test]
    fn trajectory_csv_has_expected_shape() {
        let traj = Trajectory {
            samples: vec![TrajectorySample {
                t: 0.0,
                true_pos: Point2::new(1.0, 2.0),
                est_pos: Point2::new(1.01, 2.02),
                battery_s: 225.0,
            }],
            duration: 0.0,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,true_x,true_y,est_x,est_y,battery_s\n"));
        assert!(text.contains("225.000"));
    }
}
