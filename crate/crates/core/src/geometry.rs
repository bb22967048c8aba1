//! Planar geometry shared by every other module: points, pixel masks,
//! axis-aligned and rotated rectangles, aspect-ratio padding, and the
//! image/world frame transform.
//!
//! Conventions: pixel cells are unit squares, cell `(x, y)` spanning
//! `[x, x+1] × [y, y+1]`, so a cell's center is `(x+0.5, y+0.5)`. All
//! operations here are pure; types are immutable values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum thickness assigned to degenerate (collinear) point sets so
/// downstream crops always have positive area. One pixel.
pub const EPS_RECT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("operation requires a non-empty input set")]
    EmptyInput,
    #[error("mask footprint must be non-empty")]
    EmptyMask,
    #[error("rectangle must have strictly positive width and height (got {w} x {h})")]
    DegenerateRect { w: f64, h: f64 },
    #[error("frame transform scale must be positive (got {0})")]
    NonPositiveScale(f64),
}

/// A 2-D point. Meters in the world frame, pixels in the image frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        (self.x - other.x).powi(2) + (self.y - other.y).powi(2)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Affine scale-plus-offset mapping between the world frame (meters) and
/// the stitched top-down image frame (pixels).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameTransform {
    /// Pixels per meter; strictly positive.
    pub pixels_per_meter: f64,
    /// Image pixel of the world origin.
    pub origin_offset: Point2,
}

impl FrameTransform {
    pub fn new(pixels_per_meter: f64, origin_offset: Point2) -> Result<Self, GeometryError> {
        if !(pixels_per_meter > 0.0) {
            return Err(GeometryError::NonPositiveScale(pixels_per_meter));
        }
        Ok(Self { pixels_per_meter, origin_offset })
    }

    pub fn world_to_image(&self, p: Point2) -> Point2 {
        Point2::new(
            p.x * self.pixels_per_meter + self.origin_offset.x,
            p.y * self.pixels_per_meter + self.origin_offset.y,
        )
    }

    pub fn image_to_world(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.origin_offset.x) / self.pixels_per_meter,
            (p.y - self.origin_offset.y) / self.pixels_per_meter,
        )
    }

    pub fn rect_world_to_image(&self, r: &Rect) -> Rect {
        Rect { min: self.world_to_image(r.min), max: self.world_to_image(r.max) }
    }

    pub fn rect_image_to_world(&self, r: &Rect) -> Rect {
        Rect { min: self.image_to_world(r.min), max: self.image_to_world(r.max) }
    }
}

/// Identifier of a segmentation mask within one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MaskId(pub u32);

/// One segmented region: a non-empty set of integer pixel cells, optionally
/// linked to the ground-truth object that produced it (scoring only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub id: MaskId,
    /// Sorted, deduplicated cell coordinates.
    cells: Vec<(i32, i32)>,
    pub source_object: Option<String>,
}

impl Mask {
    pub fn new(
        id: MaskId,
        mut cells: Vec<(i32, i32)>,
        source_object: Option<String>,
    ) -> Result<Self, GeometryError> {
        if cells.is_empty() {
            return Err(GeometryError::EmptyMask);
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(Self { id, cells, source_object })
    }

    pub fn cells(&self) -> &[(i32, i32)] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Arithmetic mean of the cell centers. Always inside the mask's aabb.
    pub fn centroid(&self) -> Point2 {
        let n = self.cells.len() as f64;
        let (sx, sy) = self
            .cells
            .iter()
            .fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x as f64 + 0.5, ay + y as f64 + 0.5));
        Point2::new(sx / n, sy / n)
    }

    /// Tight axis-aligned bounding box of the footprint, in pixel units.
    pub fn aabb(&self) -> Rect {
        let mut min_x = i32::MAX;
        let mut min_y = i32::MAX;
        let mut max_x = i32::MIN;
        let mut max_y = i32::MIN;
        for &(x, y) in &self.cells {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        Rect {
            min: Point2::new(min_x as f64, min_y as f64),
            max: Point2::new((max_x + 1) as f64, (max_y + 1) as f64),
        }
    }
}

/// Centroid of a mask (free-function form of [`Mask::centroid`]).
pub fn centroid(mask: &Mask) -> Point2 {
    mask.centroid()
}

/// Axis-aligned rectangle with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Result<Self, GeometryError> {
        let (w, h) = (max.x - min.x, max.y - min.y);
        if !(w > 0.0 && h > 0.0) {
            return Err(GeometryError::DegenerateRect { w, h });
        }
        Ok(Self { min, max })
    }

    pub fn from_coords(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(Point2::new(x0, y0), Point2::new(x1, y1))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    /// Width over height, order preserved: crops feed fixed-orientation
    /// detectors, so 4x2 and 2x4 are different shapes.
    pub fn aspect_ratio(&self) -> f64 {
        self.width() / self.height()
    }

    pub fn contains_point(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.min.x >= self.min.x - 1e-9
            && other.min.y >= self.min.y - 1e-9
            && other.max.x <= self.max.x + 1e-9
            && other.max.y <= self.max.y + 1e-9
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let min = Point2::new(self.min.x.max(other.min.x), self.min.y.max(other.min.y));
        let max = Point2::new(self.max.x.min(other.max.x), self.max.y.min(other.max.y));
        Rect::new(min, max).ok()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.intersection(other).is_some()
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            min: Point2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }
}

/// Aspect ratio of a rectangle (free-function form).
pub fn aspect_ratio(rect: &Rect) -> f64 {
    rect.aspect_ratio()
}

/// Tightest axis-aligned rectangle containing every footprint cell of every
/// mask in the set.
pub fn aabb(masks: &[Mask]) -> Result<Rect, GeometryError> {
    let mut iter = masks.iter();
    let first = iter.next().ok_or(GeometryError::EmptyInput)?;
    Ok(iter.fold(first.aabb(), |acc, m| acc.union(&m.aabb())))
}

/// A rectangle at an arbitrary orientation.
///
/// `angle` is the direction of the `half_w` axis and is normalized into
/// `[0, PI/2)`; `half_h` lies along `angle + PI/2`. Within that angle range
/// the representation is unique, so `half_w >= half_h` cannot always be
/// enforced simultaneously; use [`RotatedRect::long_extent`] and
/// [`RotatedRect::short_extent`] when axis order matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedRect {
    pub center: Point2,
    pub half_w: f64,
    pub half_h: f64,
    pub angle: f64,
}

impl RotatedRect {
    /// Builds a rotated rect, folding the angle into `[0, PI/2)` and
    /// swapping extents as required to keep the geometry unchanged.
    pub fn new(center: Point2, half_w: f64, half_h: f64, angle: f64) -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        let mut a = angle.rem_euclid(PI);
        let (mut hw, mut hh) = (half_w, half_h);
        if a >= FRAC_PI_2 {
            a -= FRAC_PI_2;
            std::mem::swap(&mut hw, &mut hh);
        }
        // Prefer the wide-side-first form where both are representable
        // (square, or exactly axis-aligned pairs folding onto angle 0).
        if a.abs() < 1e-12 && hw < hh && (hw - hh).abs() < 1e-12 {
            std::mem::swap(&mut hw, &mut hh);
        }
        Self { center, half_w: hw, half_h: hh, angle: a }
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_w * self.half_h
    }

    pub fn long_extent(&self) -> f64 {
        2.0 * self.half_w.max(self.half_h)
    }

    pub fn short_extent(&self) -> f64 {
        2.0 * self.half_w.min(self.half_h)
    }

    /// Axis-aligned bounding box of the rotated rectangle.
    pub fn aabb(&self) -> Rect {
        let (s, c) = self.angle.sin_cos();
        let ex = (self.half_w * c).abs() + (self.half_h * s).abs();
        let ey = (self.half_w * s).abs() + (self.half_h * c).abs();
        Rect {
            min: Point2::new(self.center.x - ex, self.center.y - ey),
            max: Point2::new(self.center.x + ex, self.center.y + ey),
        }
    }
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull via Andrew's monotone chain, counter-clockwise, no
/// collinear points retained. Returns fewer than 3 points when the input
/// is degenerate.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * n);
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    if hull.len() < 3 {
        // All input points collinear.
        return vec![pts[0], pts[n - 1]];
    }
    hull
}

/// Minimum-area rectangle enclosing `points`, computed from the convex hull
/// by scanning caliper orientations: the optimal rectangle has one side
/// collinear with a hull edge.
///
/// Degenerate inputs (fewer than 3 distinct points, or all collinear) yield
/// a rectangle of thickness `eps_rect` along the point spread.
pub fn min_area_rotated_rect(points: &[Point2], eps_rect: f64) -> Result<RotatedRect, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Ok(degenerate_rect(&hull, eps_rect));
    }

    let mut best: Option<(f64, Point2, f64, f64, f64)> = None; // (area, center, hw, hh, angle)
    let m = hull.len();
    for i in 0..m {
        let p = hull[i];
        let q = hull[(i + 1) % m];
        let theta = (q.y - p.y).atan2(q.x - p.x);
        let (s, c) = theta.sin_cos();
        let mut umin = f64::INFINITY;
        let mut umax = f64::NEG_INFINITY;
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for h in &hull {
            let u = h.x * c + h.y * s;
            let v = -h.x * s + h.y * c;
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let (du, dv) = (umax - umin, vmax - vmin);
        let area = du * dv;
        if best.map_or(true, |(a, ..)| area < a) {
            let cu = (umin + umax) / 2.0;
            let cv = (vmin + vmax) / 2.0;
            let center = Point2::new(cu * c - cv * s, cu * s + cv * c);
            best = Some((area, center, du / 2.0, dv / 2.0, theta));
        }
    }
    let (_, center, hw, hh, angle) = best.unwrap();
    Ok(RotatedRect::new(center, hw.max(eps_rect / 2.0), hh.max(eps_rect / 2.0), angle))
}

fn degenerate_rect(extremes: &[Point2], eps_rect: f64) -> RotatedRect {
    match extremes {
        [p] => RotatedRect::new(*p, eps_rect / 2.0, eps_rect / 2.0, 0.0),
        [p, q] => {
            let center = Point2::new((p.x + q.x) / 2.0, (p.y + q.y) / 2.0);
            let half_len = (p.distance(q) / 2.0).max(eps_rect / 2.0);
            let angle = (q.y - p.y).atan2(q.x - p.x);
            RotatedRect::new(center, half_len, eps_rect / 2.0, angle)
        }
        _ => unreachable!("degenerate hulls have 1 or 2 points"),
    }
}

/// Result of [`pad_to_aspect`]: the padded rectangle and whether the target
/// aspect window was unreachable inside the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaddedRect {
    pub rect: Rect,
    /// Set when the bounds were too small to reach the aspect window; the
    /// returned rect is then the best achievable inside the bounds.
    pub bounds_limited: bool,
}

/// Smallest rectangle containing `rect` whose aspect ratio lies in
/// `[ar_min, ar_max]`, grown symmetrically about the center and translated
/// (never shrunk) to stay inside `bounds`. When the bounds cannot
/// accommodate the required growth the result is clamped to the bounds
/// extent and flagged.
pub fn pad_to_aspect(rect: &Rect, ar_min: f64, ar_max: f64, bounds: &Rect) -> PaddedRect {
    debug_assert!(ar_min <= ar_max);
    let (w, h) = (rect.width(), rect.height());
    let ar = w / h;
    let (tw, th) = if ar > ar_max {
        (w, w / ar_max)
    } else if ar < ar_min {
        (h * ar_min, h)
    } else {
        (w, h)
    };

    // Clamp target extent to what the bounds can hold, never below the input.
    let cw = tw.min(bounds.width()).max(w);
    let ch = th.min(bounds.height()).max(h);
    let bounds_limited = cw < tw - 1e-12 || ch < th - 1e-12;

    let c = rect.center();
    let mut min_x = c.x - cw / 2.0;
    let mut max_x = c.x + cw / 2.0;
    let mut min_y = c.y - ch / 2.0;
    let mut max_y = c.y + ch / 2.0;

    if min_x < bounds.min.x {
        max_x += bounds.min.x - min_x;
        min_x = bounds.min.x;
    } else if max_x > bounds.max.x {
        min_x -= max_x - bounds.max.x;
        max_x = bounds.max.x;
    }
    if min_y < bounds.min.y {
        max_y += bounds.min.y - min_y;
        min_y = bounds.min.y;
    } else if max_y > bounds.max.y {
        min_y -= max_y - bounds.max.y;
        max_y = bounds.max.y;
    }

    PaddedRect {
        rect: Rect { min: Point2::new(min_x, min_y), max: Point2::new(max_x, max_y) },
        bounds_limited,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mask(id: u32, cells: &[(i32, i32)]) -> Mask {
        Mask::new(MaskId(id), cells.to_vec(), None).unwrap()
    }

    #[test]
    fn centroid_single_cell_is_cell_center() {
        let m = mask(0, &[(3, 7)]);
        assert_eq!(m.centroid(), Point2::new(3.5, 7.5));
    }

    #[test]
    fn centroid_2x2_block() {
        let m = mask(0, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(m.centroid(), Point2::new(1.0, 1.0));
    }

    #[test]
    fn centroid_l_shape() {
        // Hand sum: centers (0.5,0.5),(1.5,0.5),(0.5,1.5) -> (2.5/3, 2.5/3).
        let m = mask(0, &[(0, 0), (1, 0), (0, 1)]);
        let c = m.centroid();
        assert_relative_eq!(c.x, 2.5 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(c.y, 2.5 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn aabb_of_one_2x2_mask() {
        let m = mask(0, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let r = aabb(std::slice::from_ref(&m)).unwrap();
        assert_eq!(r, Rect::from_coords(0.0, 0.0, 2.0, 2.0).unwrap());
    }

    #[test]
    fn aabb_unions_extremes() {
        let a = mask(0, &[(0, 0)]);
        let b = mask(1, &[(9, 4)]);
        let r = aabb(&[a, b]).unwrap();
        assert_eq!(r, Rect::from_coords(0.0, 0.0, 10.0, 5.0).unwrap());
    }

    #[test]
    fn aabb_empty_input_rejected() {
        assert_eq!(aabb(&[]).unwrap_err(), GeometryError::EmptyInput);
    }

    #[test]
    fn aspect_ratio_keeps_orientation() {
        assert_eq!(aspect_ratio(&Rect::from_coords(0.0, 0.0, 4.0, 2.0).unwrap()), 2.0);
        assert_eq!(aspect_ratio(&Rect::from_coords(0.0, 0.0, 3.0, 3.0).unwrap()), 1.0);
        assert_relative_eq!(
            aspect_ratio(&Rect::from_coords(0.0, 0.0, 2.0, 3.0).unwrap()),
            2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn min_area_rect_of_axis_aligned_square() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let rr = min_area_rotated_rect(&pts, EPS_RECT).unwrap();
        assert_relative_eq!(rr.area(), 1.0, epsilon = 1e-9);
        assert!(rr.angle.abs() < 1e-9, "square angle canonicalizes to 0, got {}", rr.angle);
    }

    #[test]
    fn min_area_rect_of_rotated_square() {
        let s = std::f64::consts::FRAC_PI_4;
        let pts: Vec<Point2> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y): &(f64, f64)| {
                Point2::new(x * s.cos() - y * s.sin(), x * s.sin() + y * s.cos())
            })
            .collect();
        let rr = min_area_rotated_rect(&pts, EPS_RECT).unwrap();
        assert_relative_eq!(rr.area(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn min_area_rect_collinear_gets_eps_thickness() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        let rr = min_area_rotated_rect(&pts, EPS_RECT).unwrap();
        assert_relative_eq!(rr.short_extent(), EPS_RECT, epsilon = 1e-12);
        assert_relative_eq!(rr.long_extent(), 8.0f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn min_area_rect_angle_in_range() {
        let pts = [
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 1.0),
            Point2::new(2.0, 4.0),
            Point2::new(-1.0, 2.0),
        ];
        let rr = min_area_rotated_rect(&pts, EPS_RECT).unwrap();
        assert!(rr.angle >= 0.0 && rr.angle < std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn pad_wide_rect_grows_height_to_ar_max() {
        let r = Rect::from_coords(0.0, 0.0, 4.0, 2.0).unwrap();
        let bounds = Rect::from_coords(-100.0, -100.0, 100.0, 100.0).unwrap();
        let p = pad_to_aspect(&r, 0.67, 1.5, &bounds);
        assert!(!p.bounds_limited);
        assert_relative_eq!(p.rect.width(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(p.rect.height(), 4.0 / 1.5, epsilon = 1e-12);
        assert_relative_eq!(p.rect.aspect_ratio(), 1.5, epsilon = 1e-12);
        assert!(p.rect.contains_rect(&r));
    }

    #[test]
    fn pad_in_range_is_noop() {
        let r = Rect::from_coords(0.0, 0.0, 3.0, 3.0).unwrap();
        let bounds = Rect::from_coords(0.0, 0.0, 10.0, 10.0).unwrap();
        let p = pad_to_aspect(&r, 0.67, 1.5, &bounds);
        assert_eq!(p.rect, r);
        assert!(!p.bounds_limited);
    }

    #[test]
    fn pad_translates_away_from_bounds_edge() {
        // 1x10 sliver flush against the top edge of a 20x12 scene: the pad
        // must grow width and slide down to remain inside.
        let bounds = Rect::from_coords(0.0, 0.0, 20.0, 12.0).unwrap();
        let r = Rect::from_coords(0.0, 2.0, 1.0, 12.0).unwrap();
        let p = pad_to_aspect(&r, 0.67, 1.5, &bounds);
        assert!(!p.bounds_limited);
        assert!(bounds.contains_rect(&p.rect));
        assert!(p.rect.contains_rect(&r));
        assert!(p.rect.aspect_ratio() >= 0.67 - 1e-9 && p.rect.aspect_ratio() <= 1.5 + 1e-9);
    }

    #[test]
    fn pad_flags_unsatisfiable_bounds() {
        // Bounds are a thin strip: a tall rect cannot reach ar >= 0.67.
        let bounds = Rect::from_coords(0.0, 0.0, 1.2, 10.0).unwrap();
        let r = Rect::from_coords(0.0, 0.0, 1.0, 10.0).unwrap();
        let p = pad_to_aspect(&r, 0.67, 1.5, &bounds);
        assert!(p.bounds_limited);
        assert!(bounds.contains_rect(&p.rect));
        assert!(p.rect.contains_rect(&r));
    }

    #[test]
    fn transform_round_trip() {
        let t = FrameTransform::new(100.0, Point2::new(12.0, -3.0)).unwrap();
        let p = Point2::new(1.5, 2.0);
        let img = t.world_to_image(p);
        assert_relative_eq!(img.x, 150.0 + 12.0, epsilon = 1e-12);
        assert_relative_eq!(img.y, 200.0 - 3.0, epsilon = 1e-12);
        let back = t.image_to_world(img);
        assert!(back.distance(&p) < 1e-9);
    }

    #[test]
    fn identity_transform_fixed_point() {
        let t = FrameTransform::new(1.0, Point2::new(0.0, 0.0)).unwrap();
        let p = Point2::new(4.2, -7.7);
        assert_eq!(t.world_to_image(p), p);
    }
}
