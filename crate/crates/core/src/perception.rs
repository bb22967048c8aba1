//! Stand-ins for the vision stack: a mock segmenter that over-splits
//! ground-truth objects into pixel masks, and a stochastic detection oracle
//! whose hit probability rises with the object-to-crop size ratio.
//!
//! The oracle's true-positive channel follows a logistic curve in the size
//! ratio; false positives arrive as a per-crop Poisson process. Detections
//! carry a ground-truth tag used exclusively by the scoring code — mission
//! logic never reads it.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::environment::World;
use crate::geometry::{Mask, MaskId, Point2, Rect};

/// Detection oracle parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Size ratio at which the logistic sits at its midpoint.
    pub r_half: f64,
    /// Logistic steepness in ratio units.
    pub slope: f64,
    /// Plateau hit probability as the ratio grows.
    pub p_max: f64,
    /// Hit probability floor as the ratio approaches zero.
    pub p_floor: f64,
    /// Expected spurious detections per crop per query.
    pub fp_rate_per_crop: f64,
    /// Multiplier on `p_max` when the query prompt names the exact object.
    pub prompt_specificity_boost: f64,
    /// Side length of the drone camera's close-up footprint, meters.
    pub close_up_size: f64,
    /// False-positive rate multiplier for close-up views.
    pub close_up_discount: f64,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            r_half: 0.02,
            slope: 120.0,
            p_max: 0.9,
            p_floor: 0.02,
            fp_rate_per_crop: 0.3,
            prompt_specificity_boost: 1.0,
            close_up_size: 1.0,
            close_up_discount: 0.1,
            seed: 0,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 <= self.p_floor && self.p_floor <= self.p_max && self.p_max <= 1.0) {
            return Err(format!(
                "require 0 <= p_floor <= p_max <= 1, got {} and {}",
                self.p_floor, self.p_max
            ));
        }
        if self.fp_rate_per_crop < 0.0 {
            return Err("fp_rate_per_crop must be non-negative".into());
        }
        if !(self.close_up_size > 0.0) {
            return Err("close_up_size must be positive".into());
        }
        Ok(())
    }

    fn p_max_for(&self, prompt: PromptKind) -> f64 {
        match prompt {
            PromptKind::General => self.p_max,
            PromptKind::Specific => (self.p_max * self.prompt_specificity_boost).min(1.0),
        }
    }
}

/// Prompt phrasing handed to the oracle; specific prompts name the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    General,
    Specific,
}

/// Hit probability for one object instance given its area ratio to the crop.
/// Monotone non-decreasing in `ratio`.
pub fn detection_probability(params: &OracleParams, ratio: f64, prompt: PromptKind) -> f64 {
    let p_max = params.p_max_for(prompt);
    let sigma = 1.0 / (1.0 + (-params.slope * (ratio - params.r_half)).exp());
    (params.p_floor + (p_max - params.p_floor) * sigma).clamp(0.0, 1.0)
}

/// Whether a detection corresponds to a real object. Scoring only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthTag {
    TruePositive,
    FalsePositive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    /// World-frame box, inside the floorplan.
    pub bbox: Rect,
    pub label: String,
    pub score: f64,
    pub truth: TruthTag,
}

impl Detection {
    pub fn center(&self) -> Point2 {
        self.bbox.center()
    }
}

/// Over-splitting behavior of the mock segmenter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitModel {
    /// Probability that an object's footprint is split into multiple masks.
    pub split_prob: f64,
    /// Maximum masks one object may split into.
    pub max_splits: u32,
    pub seed: u64,
}

impl Default for SplitModel {
    fn default() -> Self {
        Self { split_prob: 0.35, max_splits: 2, seed: 0 }
    }
}

/// Background (non-object) masks added to each segmented scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClutterModel {
    pub count: u32,
    /// Inclusive range of clutter rectangle side lengths, in cells.
    pub min_cells: u32,
    pub max_cells: u32,
}

impl Default for ClutterModel {
    fn default() -> Self {
        Self { count: 12, min_cells: 4, max_cells: 40 }
    }
}

fn rasterize(footprint: &Rect, world: &World) -> Vec<(i32, i32)> {
    let img = world.transform.rect_world_to_image(footprint);
    let x0 = img.min.x.floor() as i32;
    let y0 = img.min.y.floor() as i32;
    let x1 = (img.max.x.ceil() as i32).max(x0 + 1);
    let y1 = (img.max.y.ceil() as i32).max(y0 + 1);
    let mut cells = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize);
    for y in y0..y1 {
        for x in x0..x1 {
            cells.push((x, y));
        }
    }
    cells
}

/// Segments the scene at time `t`: every visible object yields one mask, or
/// several disjoint masks partitioning its footprint when the split model
/// fires; clutter masks are appended afterwards. Deterministic per seed.
pub fn segment<R: Rng>(
    world: &World,
    t: f64,
    split: &SplitModel,
    clutter: &ClutterModel,
    rng: &mut R,
) -> Vec<Mask> {
    let mut masks = Vec::new();
    let mut next_id = 0u32;
    for obj in world.objects.iter().filter(|o| o.visible_at(t)) {
        let cells = rasterize(&obj.footprint, world);
        let n = cells.len();
        let do_split =
            n >= 2 && split.max_splits >= 2 && rng.random::<f64>() < split.split_prob;
        if do_split {
            let max_parts = (split.max_splits as usize).min(n);
            let parts = if max_parts == 2 { 2 } else { rng.random_range(2..=max_parts) };
            // Cut the sorted cell run at distinct interior positions.
            let mut cuts: Vec<usize> = Vec::with_capacity(parts - 1);
            while cuts.len() < parts - 1 {
                let c = rng.random_range(1..n);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            let mut sorted = cells;
            sorted.sort_unstable();
            let mut start = 0usize;
            for &cut in cuts.iter().chain(std::iter::once(&n)) {
                let part = sorted[start..cut].to_vec();
                start = cut;
                masks.push(
                    Mask::new(MaskId(next_id), part, Some(obj.id.clone())).expect("non-empty part"),
                );
                next_id += 1;
            }
        } else {
            masks.push(Mask::new(MaskId(next_id), cells, Some(obj.id.clone())).expect("non-empty"));
            next_id += 1;
        }
    }
    // Background clutter, fully inside the scene image.
    let scene = world.transform.rect_world_to_image(&world.floorplan);
    let scene_w = scene.width() as i32;
    let scene_h = scene.height() as i32;
    for _ in 0..clutter.count {
        let w = rng.random_range(clutter.min_cells..=clutter.max_cells) as i32;
        let h = rng.random_range(clutter.min_cells..=clutter.max_cells) as i32;
        let w = w.min(scene_w.max(1));
        let h = h.min(scene_h.max(1));
        let x0 = scene.min.x as i32 + rng.random_range(0..=(scene_w - w).max(0));
        let y0 = scene.min.y as i32 + rng.random_range(0..=(scene_h - h).max(0));
        let mut cells = Vec::with_capacity((w * h) as usize);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                cells.push((x, y));
            }
        }
        masks.push(Mask::new(MaskId(next_id), cells, None).expect("non-empty clutter"));
        next_id += 1;
    }
    masks
}

/// Runs the detection oracle for `query` over one crop (image frame).
///
/// Each visible instance of the class intersecting the crop is reported
/// with probability given by [`detection_probability`] at its size ratio;
/// Poisson-distributed false positives are placed uniformly inside the crop.
pub fn detect<R: Rng>(
    crop_img: &Rect,
    query: &str,
    world: &World,
    t: f64,
    params: &OracleParams,
    prompt: PromptKind,
    rng: &mut R,
) -> Vec<Detection> {
    debug_assert!(crop_img.area() > 0.0);
    let ppm = world.transform.pixels_per_meter;
    let crop_area_px = crop_img.area();
    let mut out = Vec::new();
    for obj in world.objects.iter().filter(|o| o.class == query) {
        if !obj.visible_at(t) {
            continue;
        }
        let obj_img = world.transform.rect_world_to_image(&obj.footprint);
        if !obj_img.intersects(crop_img) {
            continue;
        }
        let obj_area_px = obj.footprint.area() * ppm * ppm;
        let ratio = (obj_area_px / crop_area_px).min(1.0);
        let p = detection_probability(params, ratio, prompt);
        if rng.random::<f64>() < p {
            out.push(Detection {
                bbox: obj.footprint,
                label: query.to_string(),
                score: p,
                truth: TruthTag::TruePositive,
            });
        }
    }
    out.extend(sample_false_positives(
        crop_img,
        query,
        world,
        params.fp_rate_per_crop,
        rng,
    ));
    out
}

fn sample_false_positives<R: Rng>(
    crop_img: &Rect,
    query: &str,
    world: &World,
    rate: f64,
    rng: &mut R,
) -> Vec<Detection> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(rate).expect("positive rate").sample(rng) as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let px = rng.random_range(crop_img.min.x..crop_img.max.x);
        let py = rng.random_range(crop_img.min.y..crop_img.max.y);
        let center = world.transform.image_to_world(Point2::new(px, py));
        let half = 0.08;
        let raw = Rect {
            min: Point2::new(center.x - half, center.y - half),
            max: Point2::new(center.x + half, center.y + half),
        };
        let bbox = raw.intersection(&world.floorplan).unwrap_or_else(|| {
            // Pathological corner overlap; pin a minimal box at the corner.
            let cx = center.x.clamp(world.floorplan.min.x, world.floorplan.max.x - 0.01);
            let cy = center.y.clamp(world.floorplan.min.y, world.floorplan.max.y - 0.01);
            Rect { min: Point2::new(cx, cy), max: Point2::new(cx + 0.01, cy + 0.01) }
        });
        let score = rng.random_range(0.3..0.9);
        out.push(Detection { bbox, label: query.to_string(), score, truth: TruthTag::FalsePositive });
    }
    out
}

/// Close-up check with the drone camera hovering at `location`.
///
/// The ratio is computed against the small close-up footprint, so a present
/// object is detected at close to the plateau probability, while false
/// positives occur at `fp_rate_per_crop * close_up_discount`.
pub fn close_up_confirm<R: Rng>(
    location: Point2,
    query: &str,
    world: &World,
    t: f64,
    params: &OracleParams,
    rng: &mut R,
) -> Option<Detection> {
    let half = params.close_up_size / 2.0;
    let view = Rect {
        min: Point2::new(location.x - half, location.y - half),
        max: Point2::new(location.x + half, location.y + half),
    };
    let view_area = view.area();
    for obj in world.objects.iter().filter(|o| o.class == query) {
        if !obj.visible_at(t) || !obj.footprint.intersects(&view) {
            continue;
        }
        let ratio = (obj.footprint.area() / view_area).min(1.0);
        let p = detection_probability(params, ratio, PromptKind::Specific);
        if rng.random::<f64>() < p {
            return Some(Detection {
                bbox: obj.footprint,
                label: query.to_string(),
                score: p,
                truth: TruthTag::TruePositive,
            });
        }
    }
    let rate = params.fp_rate_per_crop * params.close_up_discount;
    if rate > 0.0 {
        let n = Poisson::new(rate).expect("positive rate").sample(rng) as usize;
        if n >= 1 {
            let cx = rng.random_range(view.min.x..view.max.x);
            let cy = rng.random_range(view.min.y..view.max.y);
            let center = Point2::new(
                cx.clamp(world.floorplan.min.x, world.floorplan.max.x),
                cy.clamp(world.floorplan.min.y, world.floorplan.max.y),
            );
            let raw = Rect {
                min: Point2::new(center.x - 0.05, center.y - 0.05),
                max: Point2::new(center.x + 0.05, center.y + 0.05),
            };
            let bbox = raw.intersection(&world.floorplan).unwrap_or(raw);
            return Some(Detection {
                bbox,
                label: query.to_string(),
                score: 0.8,
                truth: TruthTag::FalsePositive,
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{SceneObject, World};
    use crate::geometry::FrameTransform;
    use rand_chacha::ChaCha8Rng;
    use rand_chacha::rand_core::SeedableRng;
    use std::collections::BTreeMap;

    fn world_with(objects: Vec<SceneObject>) -> World {
        World {
            floorplan: Rect::from_coords(0.0, 0.0, 10.0, 8.0).unwrap(),
            transform: FrameTransform::new(100.0, Point2::new(0.0, 0.0)).unwrap(),
            fields: BTreeMap::new(),
            objects,
            events: Vec::new(),
        }
    }

    fn obj(id: &str, class: &str, x: f64, y: f64, w: f64, h: f64) -> SceneObject {
        SceneObject {
            id: id.into(),
            class: class.into(),
            footprint: Rect::from_coords(x, y, x + w, y + h).unwrap(),
            under_furniture: false,
            active_from: None,
        }
    }

    #[test]
    fn probability_curve_is_monotone_and_bounded() {
        let p = OracleParams::default();
        let mut last = -1.0;
        for i in 0..400 {
            let r = i as f64 * 0.001;
            let v = detection_probability(&p, r, PromptKind::Specific);
            assert!(v >= last - 1e-12, "curve must be non-decreasing");
            assert!((0.0..=1.0).contains(&v));
            last = v;
        }
        let near_zero = detection_probability(&p, 0.0, PromptKind::Specific);
        assert!(near_zero < p.p_floor + 0.09, "p(0) should sit near the floor");
        let plateau = detection_probability(&p, 1.0, PromptKind::Specific);
        assert!(plateau > 0.9 * p.p_max, "p(1) should sit near the plateau");
    }

    #[test]
    fn specific_prompt_boost_raises_plateau() {
        let params = OracleParams {
            prompt_specificity_boost: 1.2,
            ..OracleParams::default()
        };
        let general = detection_probability(&params, 0.5, PromptKind::General);
        let specific = detection_probability(&params, 0.5, PromptKind::Specific);
        assert!(specific > general);
    }

    #[test]
    fn no_splits_means_one_mask_per_object() {
        let w = world_with(vec![
            obj("a", "phone", 1.0, 1.0, 0.2, 0.1),
            obj("b", "mug", 4.0, 3.0, 0.1, 0.1),
        ]);
        let split = SplitModel { split_prob: 0.0, max_splits: 2, seed: 0 };
        let clutter = ClutterModel { count: 0, ..ClutterModel::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let masks = segment(&w, 0.0, &split, &clutter, &mut rng);
        assert_eq!(masks.len(), 2);
        assert_eq!(masks[0].source_object.as_deref(), Some("a"));
    }

    #[test]
    fn forced_splits_partition_the_footprint() {
        let w = world_with(vec![obj("a", "rug", 1.0, 1.0, 0.5, 0.3)]);
        let split = SplitModel { split_prob: 1.0, max_splits: 2, seed: 0 };
        let clutter = ClutterModel { count: 0, ..ClutterModel::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let masks = segment(&w, 0.0, &split, &clutter, &mut rng);
        assert_eq!(masks.len(), 2);
        let mut union: Vec<(i32, i32)> = masks.iter().flat_map(|m| m.cells().to_vec()).collect();
        let total: usize = masks.iter().map(|m| m.cell_count()).sum();
        union.sort_unstable();
        union.dedup();
        assert_eq!(union.len(), total, "split masks must be disjoint");
        let whole = rasterize(&w.objects[0].footprint, &w);
        assert_eq!(union.len(), whole.len(), "split masks must cover the footprint");
    }

    #[test]
    fn segmentation_is_deterministic_per_seed() {
        let w = world_with(vec![obj("a", "rug", 1.0, 1.0, 0.5, 0.3)]);
        let split = SplitModel { split_prob: 0.5, max_splits: 3, seed: 0 };
        let clutter = ClutterModel { count: 5, min_cells: 2, max_cells: 10 };
        let a = segment(&w, 0.0, &split, &clutter, &mut ChaCha8Rng::seed_from_u64(9));
        let b = segment(&w, 0.0, &split, &clutter, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn absent_object_with_zero_fp_rate_yields_nothing() {
        let w = world_with(vec![obj("a", "mug", 4.0, 3.0, 0.1, 0.1)]);
        let params = OracleParams { fp_rate_per_crop: 0.0, ..OracleParams::default() };
        let crop = Rect::from_coords(0.0, 0.0, 1000.0, 800.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dets = detect(&crop, "phone", &w, 0.0, &params, PromptKind::Specific, &mut rng);
        assert!(dets.is_empty());
    }

    #[test]
    fn under_furniture_objects_are_never_detected() {
        let mut hidden = obj("a", "phone", 2.0, 2.0, 0.2, 0.1);
        hidden.under_furniture = true;
        let w = world_with(vec![hidden]);
        let params = OracleParams {
            fp_rate_per_crop: 0.0,
            p_max: 1.0,
            p_floor: 1.0,
            ..OracleParams::default()
        };
        let crop = Rect::from_coords(180.0, 180.0, 260.0, 240.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dets = detect(&crop, "phone", &w, 0.0, &params, PromptKind::Specific, &mut rng);
        assert!(dets.is_empty());
        assert!(close_up_confirm(Point2::new(2.1, 2.05), "phone", &w, 0.0, &params, &mut rng)
            .is_none());
    }

    #[test]
    fn close_up_confirms_present_object_near_plateau() {
        let w = world_with(vec![obj("a", "phone", 2.0, 2.0, 0.2, 0.1)]);
        // Scene-calibrated curve: the 2% close-up ratio sits far past r_half.
        let params = OracleParams {
            fp_rate_per_crop: 0.0,
            r_half: 1e-3,
            slope: 2000.0,
            ..OracleParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 20_000;
        let mut hits = 0;
        for _ in 0..trials {
            if close_up_confirm(Point2::new(2.1, 2.05), "phone", &w, 0.0, &params, &mut rng)
                .is_some()
            {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        assert!(rate >= params.p_max * 0.95, "close-up hit rate {rate} below plateau");
    }

    #[test]
    fn close_up_fp_rate_matches_poisson_mean() {
        let w = world_with(vec![]);
        let params = OracleParams {
            fp_rate_per_crop: 0.5,
            close_up_discount: 0.1,
            ..OracleParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 40_000;
        let mut fps = 0;
        for _ in 0..trials {
            if close_up_confirm(Point2::new(5.0, 4.0), "phone", &w, 0.0, &params, &mut rng)
                .is_some()
            {
                fps += 1;
            }
        }
        let rate = fps as f64 / trials as f64;
        let expect = 1.0 - (-0.05f64).exp(); // P(Poisson(0.05) >= 1)
        assert!(
            (rate - expect).abs() < 0.005,
            "close-up FP rate {rate} should be near {expect}"
        );
    }

    #[test]
    fn empirical_recall_decreases_with_smaller_objects() {
        // Shrinking the object shrinks the ratio and must shrink recall.
        let params = OracleParams { fp_rate_per_crop: 0.0, ..OracleParams::default() };
        let crop = Rect::from_coords(0.0, 0.0, 400.0, 400.0).unwrap();
        let mut rates = Vec::new();
        for (i, side) in [1.2f64, 0.6, 0.3, 0.15].iter().enumerate() {
            let w = world_with(vec![obj("a", "box", 1.0, 1.0, *side, *side)]);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let trials = 10_000;
            let hits = (0..trials)
                .filter(|_| {
                    !detect(&crop, "box", &w, 0.0, &params, PromptKind::Specific, &mut rng)
                        .is_empty()
                })
                .count();
            rates.push(hits as f64 / trials as f64);
        }
        for pair in rates.windows(2) {
            assert!(
                pair[1] <= pair[0] + 0.02,
                "recall should fall with object size: {rates:?}"
            );
        }
    }
}
