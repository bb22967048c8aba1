//! Simulation library for a camera-guided, reconfigurable sensing/actuation
//! drone assistant operating in a single-room indoor world.
//!
//! The pipeline under study: a ceiling camera view is segmented into masks,
//! the masks are grouped into aspect-ratio-constrained crops, a stochastic
//! detection oracle proposes candidate locations, and a simulated drone with
//! swappable sensor/actuator modules flies out to confirm, measure, or
//! deliver. Three pipeline variants (whole-image camera, camera with
//! constrained crops, and the full drone-augmented system) are compared
//! under a paired-trial evaluation harness.
//!
//! Module map:
//!
//! - [`geometry`] — points, masks, rectangles, minimum-area enclosing
//!   rectangles, image/world transforms
//! - [`clustering`] — k-means, agglomerative clustering, and the
//!   aspect-ratio-constrained merge procedure plus crop emission
//! - [`perception`] — mock segmenter and size-ratio detection oracle
//! - [`environment`] — scalar fields, timed events, scene objects, the
//!   dense static-sensor baseline
//! - [`scenario`] — versioned TOML scenario schema and trial realization
//! - [`drone`] — kinematics, noisy localization, per-module flight budgets
//! - [`ground_station`] — landing alignment, module swap, payload loading
//! - [`mission`] — command clarification, planning, decision rules,
//!   end-to-end execution
//! - [`evaluation`] — trial runner, metrics, reports
//! - [`rng`] — seed derivation for reproducible stream splitting

pub mod clustering;
pub mod drone;
pub mod environment;
pub mod evaluation;
pub mod geometry;
pub mod ground_station;
pub mod mission;
pub mod perception;
pub mod rng;
pub mod scenario;
