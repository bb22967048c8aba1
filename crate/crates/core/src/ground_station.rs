//! Ground-station state machine: landing-platform alignment models (flat,
//! funnel, grooved funnel), the magnetic-connector module swap, and payload
//! loading for the actuation module.
//!
//! Touchdown error comes from ground-effect instability and is modeled as a
//! Rayleigh offset plus Gaussian yaw error. A landing is aligned when both
//! fall inside the platform's tolerances; the funnel geometry then
//! mechanically recenters the drone over the swap bay.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drone::{DroneState, Modality, ModuleCatalog};
use crate::geometry::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum StationError {
    #[error("drone is not landed and aligned on the platform")]
    NotAligned,
    #[error("module '{0}' is not available in the station magazine")]
    ModuleUnavailable(String),
    #[error("module '{0}' is not the actuation module")]
    NotActuator(String),
    #[error("module '{0}' already has a payload loaded")]
    AlreadyLoaded(String),
    #[error("unknown module '{0}'")]
    UnknownModule(String),
    #[error("swap request must name a module to attach or detach")]
    EmptySwapRequest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlatformKind {
    Flat,
    Funnel,
    GroovedFunnel,
}

/// Landing platform geometry expressed as alignment tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformModel {
    pub kind: PlatformKind,
    /// Largest touchdown offset the platform can recenter, meters.
    pub max_offset_tolerance: f64,
    /// Largest yaw error the platform can recenter, degrees.
    pub max_yaw_tolerance: f64,
    pub landing_time_mean: f64,
}

impl PlatformModel {
    pub fn flat() -> Self {
        Self {
            kind: PlatformKind::Flat,
            max_offset_tolerance: 0.01,
            max_yaw_tolerance: 5.0,
            landing_time_mean: 7.8,
        }
    }

    pub fn funnel() -> Self {
        Self {
            kind: PlatformKind::Funnel,
            max_offset_tolerance: 0.04,
            max_yaw_tolerance: 25.0,
            landing_time_mean: 7.8,
        }
    }

    pub fn grooved_funnel() -> Self {
        Self {
            kind: PlatformKind::GroovedFunnel,
            max_offset_tolerance: 0.06,
            max_yaw_tolerance: 40.0,
            landing_time_mean: 7.8,
        }
    }

    pub fn of_kind(kind: PlatformKind) -> Self {
        match kind {
            PlatformKind::Flat => Self::flat(),
            PlatformKind::Funnel => Self::funnel(),
            PlatformKind::GroovedFunnel => Self::grooved_funnel(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectorKind {
    Magnetic,
    Mechanical,
}

/// Ground-effect touchdown error distribution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TouchdownModel {
    /// Rayleigh scale of the radial offset, meters.
    pub offset_sigma: f64,
    /// Gaussian sd of the yaw error, degrees.
    pub yaw_sd: f64,
}

impl Default for TouchdownModel {
    fn default() -> Self {
        Self { offset_sigma: 0.012, yaw_sd: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchdownSample {
    pub offset: f64,
    pub yaw_error: f64,
}

/// Draws one touchdown: Rayleigh offset, absolute Gaussian yaw error.
pub fn sample_touchdown<R: Rng>(model: &TouchdownModel, rng: &mut R) -> TouchdownSample {
    let u: f64 = rng.random::<f64>().max(1e-300);
    let offset = model.offset_sigma * (-2.0 * u.ln()).sqrt();
    let yaw = if model.yaw_sd > 0.0 {
        Normal::new(0.0, model.yaw_sd).unwrap().sample(rng).abs()
    } else {
        0.0
    };
    TouchdownSample { offset, yaw_error: yaw }
}

/// Whether the platform can mechanically recover this touchdown.
pub fn alignment_ok(sample: &TouchdownSample, platform: &PlatformModel) -> bool {
    sample.offset <= platform.max_offset_tolerance
        && sample.yaw_error <= platform.max_yaw_tolerance
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LandingOutcome {
    /// Settled into the funnel; ground time spent landing.
    Aligned { landing_time: f64, sample: TouchdownSample },
    /// Down, but outside the platform's recovery envelope. The mission is
    /// marked needs-human.
    Misaligned { sample: TouchdownSample },
}

impl LandingOutcome {
    pub fn is_aligned(&self) -> bool {
        matches!(self, LandingOutcome::Aligned { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRequest {
    pub detach: Option<String>,
    pub attach: Option<String>,
    /// Item to load into an actuation module being attached.
    pub payload: Option<String>,
}

impl SwapRequest {
    pub fn attach(name: &str) -> Self {
        Self { detach: None, attach: Some(name.to_string()), payload: None }
    }

    pub fn swap(detach: Option<&str>, attach: &str) -> Self {
        Self {
            detach: detach.map(str::to_string),
            attach: Some(attach.to_string()),
            payload: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SwapOutcome {
    Swapped { swap_time: f64 },
    /// The gripper could not free or seat the module (mechanical connector).
    ConnectorFailure,
}

/// The station: platform, connector, module magazine, and swap mechanics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStation {
    pub position: Point2,
    pub platform: PlatformModel,
    pub connector: ConnectorKind,
    pub touchdown: TouchdownModel,
    pub swap_time: f64,
    /// Module name -> count available.
    pub magazine: BTreeMap<String, u32>,
    /// Payloads loaded into magazine actuation modules, by module name.
    pub pending_payloads: BTreeMap<String, String>,
    /// Landing indices (0-based) forced misaligned, for failure injection.
    pub forced_misalignments: Vec<u32>,
    landings_so_far: u32,
    /// Drone currently seated and aligned over the swap bay.
    drone_aligned: bool,
}

impl GroundStation {
    pub fn new(
        position: Point2,
        platform: PlatformModel,
        connector: ConnectorKind,
        touchdown: TouchdownModel,
        swap_time: f64,
        magazine: BTreeMap<String, u32>,
    ) -> Self {
        Self {
            position,
            platform,
            connector,
            touchdown,
            swap_time,
            magazine,
            pending_payloads: BTreeMap::new(),
            forced_misalignments: Vec::new(),
            landings_so_far: 0,
            // The mission starts with the drone seated on the platform.
            drone_aligned: true,
        }
    }

    pub fn drone_aligned(&self) -> bool {
        self.drone_aligned
    }

    /// Lands the approaching drone. On an aligned touchdown the funnel
    /// recenters the drone over the bay; otherwise the drone is down but
    /// out of reach of the gripper.
    pub fn land<R: Rng>(&mut self, drone: &mut DroneState, rng: &mut R) -> LandingOutcome {
        let mut sample = sample_touchdown(&self.touchdown, rng);
        if self.forced_misalignments.contains(&self.landings_so_far) {
            sample.offset = self.platform.max_offset_tolerance * 3.0;
        }
        self.landings_so_far += 1;
        // Descent is flight time.
        let descent = self.platform.landing_time_mean.min(drone.battery_remaining);
        drone.battery_remaining -= descent;
        drone.airborne = false;
        drone.true_pose.altitude = 0.0;
        if alignment_ok(&sample, &self.platform) {
            drone.true_pose.position = self.position;
            drone.est_pose = drone.true_pose;
            self.drone_aligned = true;
            LandingOutcome::Aligned { landing_time: self.platform.landing_time_mean, sample }
        } else {
            drone.true_pose.position =
                Point2::new(self.position.x + sample.offset, self.position.y);
            self.drone_aligned = false;
            LandingOutcome::Misaligned { sample }
        }
    }

    /// Marks the drone as lifted off the platform.
    pub fn release(&mut self) {
        self.drone_aligned = false;
    }

    /// Loads an item into a magazine actuation module.
    pub fn load_payload(
        &mut self,
        module_name: &str,
        item: &str,
        catalog: &ModuleCatalog,
    ) -> Result<(), StationError> {
        let spec = catalog
            .get(module_name)
            .ok_or_else(|| StationError::UnknownModule(module_name.to_string()))?;
        if spec.modality != Modality::Actuator {
            return Err(StationError::NotActuator(module_name.to_string()));
        }
        if self.pending_payloads.contains_key(module_name) {
            return Err(StationError::AlreadyLoaded(module_name.to_string()));
        }
        self.pending_payloads.insert(module_name.to_string(), item.to_string());
        Ok(())
    }

    /// Executes a module swap on a landed, aligned drone. With the magnetic
    /// connector the swap is deterministic given alignment; the mechanical
    /// connector always jams.
    pub fn swap_module(
        &mut self,
        drone: &mut DroneState,
        req: &SwapRequest,
        catalog: &ModuleCatalog,
    ) -> Result<SwapOutcome, StationError> {
        if req.detach.is_none() && req.attach.is_none() {
            return Err(StationError::EmptySwapRequest);
        }
        if drone.airborne || !self.drone_aligned {
            return Err(StationError::NotAligned);
        }
        // Validate availability before mutating anything.
        if let Some(attach) = &req.attach {
            if catalog.get(attach).is_none() {
                return Err(StationError::UnknownModule(attach.clone()));
            }
            if self.magazine.get(attach).copied().unwrap_or(0) == 0 {
                return Err(StationError::ModuleUnavailable(attach.clone()));
            }
        }
        if self.connector == ConnectorKind::Mechanical {
            return Ok(SwapOutcome::ConnectorFailure);
        }
        if let Some(detach) = &req.detach {
            if drone.attached_name() == Some(detach.as_str()) {
                drone.set_module(None, catalog);
                drone.payload = None;
                *self.magazine.entry(detach.clone()).or_insert(0) += 1;
            }
        }
        if let Some(attach) = &req.attach {
            *self.magazine.get_mut(attach).unwrap() -= 1;
            let spec = catalog.get(attach).unwrap().clone();
            drone.set_module(Some(spec), catalog);
            drone.payload = match &req.payload {
                Some(item) => Some(item.clone()),
                None => self.pending_payloads.remove(attach),
            };
        }
        Ok(SwapOutcome::Swapped { swap_time: self.swap_time })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drone::{DroneConfig, DroneState};
    use rand_chacha::ChaCha8Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn station(connector: ConnectorKind) -> GroundStation {
        let mut magazine = BTreeMap::new();
        magazine.insert("Temp&Moisture".to_string(), 1);
        magazine.insert("Actuator".to_string(), 2);
        GroundStation::new(
            Point2::new(0.5, 0.5),
            PlatformModel::grooved_funnel(),
            connector,
            TouchdownModel::default(),
            6.0,
            magazine,
        )
    }

    fn landed_drone(st: &GroundStation) -> DroneState {
        DroneState::at_station(st.position, &DroneConfig::default(), &ModuleCatalog::standard())
    }

    #[test]
    fn perfect_touchdown_aligns_on_every_platform() {
        let sample = TouchdownSample { offset: 0.0, yaw_error: 0.0 };
        for p in [PlatformModel::flat(), PlatformModel::funnel(), PlatformModel::grooved_funnel()] {
            assert!(alignment_ok(&sample, &p));
        }
    }

    #[test]
    fn excessive_offset_is_misaligned() {
        let p = PlatformModel::funnel();
        let sample = TouchdownSample { offset: p.max_offset_tolerance + 0.001, yaw_error: 0.0 };
        assert!(!alignment_ok(&sample, &p));
    }

    #[test]
    fn grooved_funnel_dominates_funnel_on_shared_samples() {
        let funnel = PlatformModel::funnel();
        let grooved = PlatformModel::grooved_funnel();
        let model = TouchdownModel { offset_sigma: 0.03, yaw_sd: 18.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut funnel_ok = 0u32;
        let mut grooved_ok = 0u32;
        for _ in 0..10_000 {
            let s = sample_touchdown(&model, &mut rng);
            funnel_ok += alignment_ok(&s, &funnel) as u32;
            grooved_ok += alignment_ok(&s, &grooved) as u32;
        }
        assert!(grooved_ok >= funnel_ok);
        assert!(funnel_ok > 0, "distribution should produce some aligned landings");
    }

    #[test]
    fn widening_tolerances_never_hurts() {
        let model = TouchdownModel { offset_sigma: 0.02, yaw_sd: 15.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let samples: Vec<TouchdownSample> =
            (0..5_000).map(|_| sample_touchdown(&model, &mut rng)).collect();
        let mut last = 0usize;
        for scale in [1.0, 1.5, 2.0, 3.0] {
            let p = PlatformModel {
                kind: PlatformKind::Funnel,
                max_offset_tolerance: 0.02 * scale,
                max_yaw_tolerance: 10.0 * scale,
                landing_time_mean: 7.8,
            };
            let ok = samples.iter().filter(|s| alignment_ok(s, &p)).count();
            assert!(ok >= last);
            last = ok;
        }
    }

    #[test]
    fn magnetic_swap_succeeds_when_aligned_and_stocked() {
        let mut st = station(ConnectorKind::Magnetic);
        let mut d = landed_drone(&st);
        let catalog = ModuleCatalog::standard();
        let out = st
            .swap_module(&mut d, &SwapRequest::attach("Temp&Moisture"), &catalog)
            .unwrap();
        assert_eq!(out, SwapOutcome::Swapped { swap_time: 6.0 });
        assert_eq!(d.attached_name(), Some("Temp&Moisture"));
        assert_eq!(st.magazine["Temp&Moisture"], 0);
    }

    #[test]
    fn mechanical_connector_always_jams() {
        let mut st = station(ConnectorKind::Mechanical);
        let mut d = landed_drone(&st);
        let catalog = ModuleCatalog::standard();
        for _ in 0..10 {
            let out = st
                .swap_module(&mut d, &SwapRequest::attach("Actuator"), &catalog)
                .unwrap();
            assert_eq!(out, SwapOutcome::ConnectorFailure);
        }
        assert_eq!(d.attached_name(), None);
    }

    #[test]
    fn swap_requires_alignment_and_stock() {
        let catalog = ModuleCatalog::standard();
        let mut st = station(ConnectorKind::Magnetic);
        let mut d = landed_drone(&st);
        st.release();
        assert_eq!(
            st.swap_module(&mut d, &SwapRequest::attach("Actuator"), &catalog).unwrap_err(),
            StationError::NotAligned
        );

        let mut st = station(ConnectorKind::Magnetic);
        let mut d = landed_drone(&st);
        assert_eq!(
            st.swap_module(&mut d, &SwapRequest::attach("PM2.5"), &catalog).unwrap_err(),
            StationError::ModuleUnavailable("PM2.5".into())
        );
        assert_eq!(
            st.swap_module(
                &mut d,
                &SwapRequest { detach: None, attach: None, payload: None },
                &catalog
            )
            .unwrap_err(),
            StationError::EmptySwapRequest
        );
    }

    #[test]
    fn swap_success_lattice() {
        // success <=> aligned AND magnetic AND available
        let catalog = ModuleCatalog::standard();
        for aligned in [false, true] {
            for connector in [ConnectorKind::Magnetic, ConnectorKind::Mechanical] {
                for available in [false, true] {
                    let mut st = station(connector);
                    if !available {
                        st.magazine.insert("Actuator".into(), 0);
                    }
                    if !aligned {
                        st.release();
                    }
                    let mut d = landed_drone(&st);
                    let res = st.swap_module(&mut d, &SwapRequest::attach("Actuator"), &catalog);
                    let succeeded = matches!(res, Ok(SwapOutcome::Swapped { .. }));
                    let expect = aligned && connector == ConnectorKind::Magnetic && available;
                    assert_eq!(succeeded, expect, "aligned={aligned} {connector:?} available={available}");
                }
            }
        }
    }

    #[test]
    fn payload_loading_rules() {
        let mut st = station(ConnectorKind::Magnetic);
        let catalog = ModuleCatalog::standard();
        st.load_payload("Actuator", "vitamins", &catalog).unwrap();
        assert_eq!(
            st.load_payload("Actuator", "snack", &catalog).unwrap_err(),
            StationError::AlreadyLoaded("Actuator".into())
        );
        assert_eq!(
            st.load_payload("PM2.5", "snack", &catalog).unwrap_err(),
            StationError::NotActuator("PM2.5".into())
        );
        // The payload rides along when the module is attached.
        let mut d = landed_drone(&st);
        st.swap_module(&mut d, &SwapRequest::attach("Actuator"), &catalog).unwrap();
        assert_eq!(d.payload.as_deref(), Some("vitamins"));
    }

    #[test]
    fn forced_misalignment_injection() {
        let mut st = station(ConnectorKind::Magnetic);
        st.touchdown = TouchdownModel { offset_sigma: 1e-6, yaw_sd: 0.0 };
        st.forced_misalignments = vec![1];
        let catalog = ModuleCatalog::standard();
        let cfg = DroneConfig::default();
        let mut d = DroneState::at_station(st.position, &cfg, &catalog);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        d.airborne = true;
        assert!(st.land(&mut d, &mut rng).is_aligned());
        d.airborne = true;
        assert!(!st.land(&mut d, &mut rng).is_aligned());
        d.airborne = true;
        assert!(st.land(&mut d, &mut rng).is_aligned());
    }
}
