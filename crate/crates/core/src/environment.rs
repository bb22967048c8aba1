//! The simulated 2-D indoor world: a rectangular floorplan, scalar sensor
//! fields over time, scene objects, timed events, and the dense
//! static-sensor-grid baseline.
//!
//! Fields are node grids sampled by bilinear interpolation; events add
//! radial Gaussian bumps after their onset (optionally decaying); noise is
//! zero-mean Gaussian added per read. Everything here is functional: a
//! `World` is immutable per query and safe to share across threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FrameTransform, Point2, Rect};

#[derive(Debug, Error, PartialEq)]
pub enum EnvironmentError {
    #[error("point ({x}, {y}) is outside the floorplan")]
    OutOfBounds { x: f64, y: f64 },
    #[error("no field of kind {0:?} in this world")]
    NoSuchField(FieldKind),
    #[error("invalid field grid: {0}")]
    InvalidGrid(String),
}

/// Sensing modality of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Temperature,
    Humidity,
    Light,
    Pm,
    Gas,
}

impl FieldKind {
    pub fn unit(self) -> &'static str {
        match self {
            FieldKind::Temperature => "degC",
            FieldKind::Humidity => "%",
            FieldKind::Light => "lux",
            FieldKind::Pm => "ug/m3",
            FieldKind::Gas => "ppm",
        }
    }

    pub const ALL: [FieldKind; 5] = [
        FieldKind::Temperature,
        FieldKind::Humidity,
        FieldKind::Light,
        FieldKind::Pm,
        FieldKind::Gas,
    ];
}

/// Row-major node grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GridData {
    pub fn uniform(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, values: vec![value; width * height] }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }
}

/// One scalar field: a node grid anchored at `origin`, nodes spaced
/// `cell_size` meters apart, with optional time keyframes interpolated
/// linearly (constant beyond the first/last keyframe).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub kind: FieldKind,
    pub cell_size: f64,
    pub origin: Point2,
    pub base: GridData,
    /// (time, grid) keyframes sorted by time; empty means static.
    pub keyframes: Vec<(f64, GridData)>,
}

impl ScalarField {
    pub fn uniform(kind: FieldKind, origin: Point2, width: usize, height: usize, cell_size: f64, value: f64) -> Self {
        Self { kind, cell_size, origin, base: GridData::uniform(width, height, value), keyframes: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), EnvironmentError> {
        let g = &self.base;
        if g.width < 2 || g.height < 2 {
            return Err(EnvironmentError::InvalidGrid("grid must be at least 2x2 nodes".into()));
        }
        if g.values.len() != g.width * g.height {
            return Err(EnvironmentError::InvalidGrid(format!(
                "expected {} values, got {}",
                g.width * g.height,
                g.values.len()
            )));
        }
        if !(self.cell_size > 0.0) {
            return Err(EnvironmentError::InvalidGrid("cell_size must be positive".into()));
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(EnvironmentError::InvalidGrid("grid values must be finite".into()));
        }
        if self.kind == FieldKind::Humidity
            && g.values.iter().any(|&v| !(0.0..=100.0).contains(&v))
        {
            return Err(EnvironmentError::InvalidGrid("humidity must lie in [0, 100]".into()));
        }
        for (_, kf) in &self.keyframes {
            if kf.width != g.width || kf.height != g.height {
                return Err(EnvironmentError::InvalidGrid("keyframe shape mismatch".into()));
            }
        }
        Ok(())
    }

    /// World-frame extent covered by the node grid.
    pub fn extent(&self) -> Rect {
        Rect {
            min: self.origin,
            max: Point2::new(
                self.origin.x + (self.base.width - 1) as f64 * self.cell_size,
                self.origin.y + (self.base.height - 1) as f64 * self.cell_size,
            ),
        }
    }

    fn node_value(&self, x: usize, y: usize, t: f64) -> f64 {
        if self.keyframes.is_empty() {
            return self.base.at(x, y);
        }
        let first = &self.keyframes[0];
        if t <= first.0 {
            return first.1.at(x, y);
        }
        for w in self.keyframes.windows(2) {
            let (t0, ref g0) = w[0];
            let (t1, ref g1) = w[1];
            if t <= t1 {
                let f = (t - t0) / (t1 - t0);
                return g0.at(x, y) * (1.0 - f) + g1.at(x, y) * f;
            }
        }
        self.keyframes.last().unwrap().1.at(x, y)
    }

    /// Bilinear interpolation at `p`; exact at the nodes.
    pub fn bilinear(&self, p: Point2, t: f64) -> Result<f64, EnvironmentError> {
        let ext = self.extent();
        if !ext.contains_point(&p) {
            return Err(EnvironmentError::OutOfBounds { x: p.x, y: p.y });
        }
        let fx = (p.x - self.origin.x) / self.cell_size;
        let fy = (p.y - self.origin.y) / self.cell_size;
        let ix = (fx.floor() as usize).min(self.base.width - 2);
        let iy = (fy.floor() as usize).min(self.base.height - 2);
        let ax = fx - ix as f64;
        let ay = fy - iy as f64;
        let v00 = self.node_value(ix, iy, t);
        let v10 = self.node_value(ix + 1, iy, t);
        let v01 = self.node_value(ix, iy + 1, t);
        let v11 = self.node_value(ix + 1, iy + 1, t);
        Ok(bilerp(v00, v10, v01, v11, ax, ay))
    }
}

/// A localized field disturbance switching on at `onset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub onset: f64,
    pub location: Point2,
    pub kind: FieldKind,
    pub amplitude: f64,
    /// Gaussian radius (sigma) of the bump, meters.
    pub radius: f64,
    /// Exponential decay time constant after onset; None = no decay.
    pub decay_tau: Option<f64>,
    pub description: String,
}

impl TimedEvent {
    /// Field delta contributed at point `p`, time `t`.
    pub fn delta(&self, kind: FieldKind, p: Point2, t: f64) -> f64 {
        if kind != self.kind || t < self.onset {
            return 0.0;
        }
        let d2 = p.distance_sq(&self.location);
        let spatial = (-d2 / (2.0 * self.radius * self.radius)).exp();
        let temporal = match self.decay_tau {
            Some(tau) if tau > 0.0 => (-(t - self.onset) / tau).exp(),
            _ => 1.0,
        };
        self.amplitude * spatial * temporal
    }
}

/// Superposed delta of all events for one field kind.
pub fn events_delta(events: &[TimedEvent], kind: FieldKind, p: Point2, t: f64) -> f64 {
    events.iter().map(|e| e.delta(kind, p, t)).sum()
}

/// Bakes event bumps into node grids, returning a static snapshot of every
/// field at time `t`. Before an event's onset the field is unchanged.
pub fn apply_events(
    fields: &BTreeMap<FieldKind, ScalarField>,
    events: &[TimedEvent],
    t: f64,
) -> BTreeMap<FieldKind, ScalarField> {
    fields
        .iter()
        .map(|(&kind, field)| {
            let mut snapshot = GridData::uniform(field.base.width, field.base.height, 0.0);
            for y in 0..field.base.height {
                for x in 0..field.base.width {
                    let pos = Point2::new(
                        field.origin.x + x as f64 * field.cell_size,
                        field.origin.y + y as f64 * field.cell_size,
                    );
                    let v = field.node_value(x, y, t) + events_delta(events, kind, pos, t);
                    snapshot.set(x, y, clamp_for_kind(kind, v));
                }
            }
            (
                kind,
                ScalarField {
                    kind,
                    cell_size: field.cell_size,
                    origin: field.origin,
                    base: snapshot,
                    keyframes: Vec::new(),
                },
            )
        })
        .collect()
}

/// Incremental bilinear form: exact on constant inputs, so flat fields keep
/// exact ties for the argmax tie-break rule.
fn bilerp(v00: f64, v10: f64, v01: f64, v11: f64, ax: f64, ay: f64) -> f64 {
    v00 + ax * (v10 - v00) + ay * (v01 - v00) + ax * ay * (v00 + v11 - v10 - v01)
}

fn clamp_for_kind(kind: FieldKind, v: f64) -> f64 {
    match kind {
        FieldKind::Humidity => v.clamp(0.0, 100.0),
        FieldKind::Light | FieldKind::Pm | FieldKind::Gas => v.max(0.0),
        FieldKind::Temperature => v,
    }
}

/// A physical object in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub class: String,
    /// World-frame footprint.
    pub footprint: Rect,
    /// Hidden from every camera view (ceiling and drone close-up).
    pub under_furniture: bool,
    /// Present in camera views only from this time on; None = always.
    pub active_from: Option<f64>,
}

impl SceneObject {
    pub fn center(&self) -> Point2 {
        self.footprint.center()
    }

    pub fn visible_at(&self, t: f64) -> bool {
        !self.under_furniture && self.active_from.map_or(true, |t0| t >= t0)
    }
}

/// One realized trial world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub floorplan: Rect,
    pub transform: FrameTransform,
    pub fields: BTreeMap<FieldKind, ScalarField>,
    pub objects: Vec<SceneObject>,
    pub events: Vec<TimedEvent>,
}

impl World {
    /// Noiseless ground-truth field value: interpolated base plus event bumps.
    pub fn field_value(&self, p: Point2, kind: FieldKind, t: f64) -> Result<f64, EnvironmentError> {
        if !self.floorplan.contains_point(&p) {
            return Err(EnvironmentError::OutOfBounds { x: p.x, y: p.y });
        }
        let field = self.fields.get(&kind).ok_or(EnvironmentError::NoSuchField(kind))?;
        let base = field.bilinear(p, t)?;
        Ok(clamp_for_kind(kind, base + events_delta(&self.events, kind, p, t)))
    }

    /// One sensor read: ground truth plus zero-mean Gaussian noise.
    pub fn sample_field<R: Rng>(
        &self,
        p: Point2,
        kind: FieldKind,
        t: f64,
        noise_sd: f64,
        rng: &mut R,
    ) -> Result<f64, EnvironmentError> {
        let truth = self.field_value(p, kind, t)?;
        if noise_sd <= 0.0 {
            return Ok(truth);
        }
        let noise = Normal::new(0.0, noise_sd).unwrap().sample(rng);
        Ok(clamp_for_kind(kind, truth + noise))
    }

    pub fn objects_of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a SceneObject> {
        self.objects.iter().filter(move |o| o.class == class)
    }

    /// Stable content hash used to verify paired trials see identical worlds.
    pub fn world_hash(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("world serializes");
        fnv1a(&bytes)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    hash
}

/// A static sensor deployment on a regular grid (the dense baseline).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorGrid {
    /// Strictly increasing sensor column positions, meters.
    pub xs: Vec<f64>,
    /// Strictly increasing sensor row positions, meters.
    pub ys: Vec<f64>,
}

impl SensorGrid {
    pub fn three_by_three(span: &Rect, margin: f64) -> Self {
        let xs = vec![
            span.min.x + margin,
            (span.min.x + span.max.x) / 2.0,
            span.max.x - margin,
        ];
        let ys = vec![
            span.min.y + margin,
            (span.min.y + span.max.y) / 2.0,
            span.max.y - margin,
        ];
        Self { xs, ys }
    }
}

/// Result of the dense-grid estimate: the argmax of the sensor-interpolated
/// map and the map itself (on a `resolution`-spaced raster over the sensor
/// envelope).
#[derive(Debug, Clone)]
pub struct DenseGridEstimate {
    pub argmax: Point2,
    pub map: Vec<(Point2, f64)>,
}

/// Reads the field at each static sensor (with noise), interpolates
/// bilinearly between sensors, and returns the interpolated map's argmax.
/// Ties break toward the lowest raster cell index (row-major).
pub fn dense_grid_estimate<R: Rng>(
    world: &World,
    kind: FieldKind,
    sensors: &SensorGrid,
    t: f64,
    noise_sd: f64,
    resolution: f64,
    rng: &mut R,
) -> Result<DenseGridEstimate, EnvironmentError> {
    let (nx, ny) = (sensors.xs.len(), sensors.ys.len());
    assert!(nx >= 2 && ny >= 2, "sensor grid needs at least 2x2 sensors");
    // Row-major reads keep the rng stream order stable.
    let mut readings = vec![0.0; nx * ny];
    for (j, &y) in sensors.ys.iter().enumerate() {
        for (i, &x) in sensors.xs.iter().enumerate() {
            readings[j * nx + i] = world.sample_field(Point2::new(x, y), kind, t, noise_sd, rng)?;
        }
    }

    let interp = |p: Point2| -> f64 {
        let i = segment_index(&sensors.xs, p.x);
        let j = segment_index(&sensors.ys, p.y);
        let ax = (p.x - sensors.xs[i]) / (sensors.xs[i + 1] - sensors.xs[i]);
        let ay = (p.y - sensors.ys[j]) / (sensors.ys[j + 1] - sensors.ys[j]);
        let v00 = readings[j * nx + i];
        let v10 = readings[j * nx + i + 1];
        let v01 = readings[(j + 1) * nx + i];
        let v11 = readings[(j + 1) * nx + i + 1];
        bilerp(v00, v10, v01, v11, ax, ay)
    };

    let x0 = sensors.xs[0];
    let x1 = *sensors.xs.last().unwrap();
    let y0 = sensors.ys[0];
    let y1 = *sensors.ys.last().unwrap();
    let steps_x = ((x1 - x0) / resolution).round() as usize + 1;
    let steps_y = ((y1 - y0) / resolution).round() as usize + 1;

    let mut map = Vec::with_capacity(steps_x * steps_y);
    let mut best_v = f64::NEG_INFINITY;
    let mut best_p = Point2::new(x0, y0);
    for j in 0..steps_y {
        for i in 0..steps_x {
            let p = Point2::new(
                (x0 + i as f64 * resolution).min(x1),
                (y0 + j as f64 * resolution).min(y1),
            );
            let v = interp(p);
            map.push((p, v));
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
    }
    Ok(DenseGridEstimate { argmax: best_p, map })
}

fn segment_index(knots: &[f64], v: f64) -> usize {
    let mut i = 0;
    while i + 2 < knots.len() && v >= knots[i + 1] {
        i += 1;
    }
    i
}
