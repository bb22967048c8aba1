//! Mask-centroid clustering: Lloyd's k-means, agglomerative hierarchical
//! clustering, and the aspect-ratio-constrained agglomerative variant that
//! produces detector-friendly crops.
//!
//! The constrained procedure starts from singleton clusters and repeatedly
//! merges the closest pair (under the configured linkage) whose merged
//! axis-aligned crop keeps its aspect ratio inside `[ar_min, ar_max]`,
//! stopping at the target cluster count or when no feasible merge remains.
//! Blocked merges mean the final count may exceed the target; that excess is
//! reported, never collapsed.
//!
//! All functions are pure and deterministic for fixed inputs and seeds.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pad_to_aspect, Mask, MaskId, Point2, Rect};

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("k = {k} exceeds the number of points n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("clustering requires a non-empty input")]
    EmptyInput,
    #[error("invalid clustering config: {0}")]
    InvalidConfig(String),
}

/// Inter-cluster distance criterion for agglomerative merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Ward,
    Average,
    Single,
}

/// Unconstrained base method benchmarked against the constrained variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseMethod {
    Hierarchical,
    Kmeans,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Target cluster count.
    pub k: usize,
    pub ar_min: f64,
    pub ar_max: f64,
    pub linkage: Linkage,
    pub base: BaseMethod,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k: 5,
            ar_min: 0.67,
            ar_max: 1.5,
            linkage: Linkage::Ward,
            base: BaseMethod::Hierarchical,
            seed: 0,
            max_iters: 100,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        if self.k < 1 {
            return Err(ClusteringError::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.ar_min > 0.0 && self.ar_min <= self.ar_max) {
            return Err(ClusteringError::InvalidConfig(format!(
                "require 0 < ar_min <= ar_max, got [{}, {}]",
                self.ar_min, self.ar_max
            )));
        }
        Ok(())
    }
}

/// Per-cluster status markers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterFlags {
    /// The cluster's natural crop violated the aspect window and was padded.
    pub padded: bool,
    /// The cluster holds a single mask.
    pub singleton: bool,
    /// Scene bounds prevented padding from reaching the aspect window; the
    /// crop's aspect ratio is out of range. Finalized by [`emit_crops`].
    pub constraint_violated: bool,
}

/// Output of the constrained clustering: labels, per-cluster crops, flags.
///
/// Cluster indices are dense `0..m-1`, ordered by each cluster's smallest
/// member mask id. `member_aabbs` are the tight per-cluster boxes;
/// `crops` are aspect-corrected by unbounded symmetric expansion.
/// [`emit_crops`] re-derives crops confined to actual scene bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: BTreeMap<MaskId, usize>,
    pub member_aabbs: Vec<Rect>,
    pub crops: Vec<Rect>,
    pub flags: Vec<ClusterFlags>,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.crops.len()
    }
}

/// A crop emitted for one cluster, confined to scene bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crop {
    pub cluster: usize,
    pub rect: Rect,
    pub padded: bool,
    /// Scene bounds made the aspect window unreachable for this crop.
    pub bounds_limited: bool,
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

/// Lloyd's algorithm with k-means++ initialization. Ties in nearest-center
/// assignment break toward the lowest center index; an emptied cluster is
/// re-seeded at the point farthest from its current center.
pub fn kmeans(
    points: &[Point2],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<usize>, ClusteringError> {
    let n = points.len();
    if n == 0 {
        return Err(ClusteringError::EmptyInput);
    }
    if k > n {
        return Err(ClusteringError::KTooLarge { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(points, k, &mut rng);
    let mut labels = vec![0usize; n];

    for _ in 0..max_iters {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = p.distance_sq(center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        // Recompute means.
        let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
        for (i, p) in points.iter().enumerate() {
            let s = &mut sums[labels[i]];
            s.0 += p.x;
            s.1 += p.y;
            s.2 += 1;
        }
        for (c, s) in sums.iter().enumerate() {
            if s.2 > 0 {
                centers[c] = Point2::new(s.0 / s.2 as f64, s.1 / s.2 as f64);
            } else {
                // Re-seed an emptied center at the worst-fit point.
                let mut far = 0usize;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    let d = p.distance_sq(&centers[labels[i]]);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centers[c] = points[far];
            }
        }
    }
    Ok(labels)
}

fn kmeans_pp_init(points: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut d2 = vec![f64::INFINITY; n];
    while centers.len() < k {
        let last = *centers.last().unwrap();
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(p.distance_sq(&last));
            total += d2[i];
        }
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.push(points[next]);
    }
    centers
}

/// Sum of squared distances from each point to its cluster mean.
pub fn sse(points: &[Point2], labels: &[usize]) -> f64 {
    debug_assert_eq!(points.len(), labels.len());
    let m = labels.iter().copied().max().map_or(0, |x| x + 1);
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); m];
    for (p, &l) in points.iter().zip(labels) {
        sums[l].0 += p.x;
        sums[l].1 += p.y;
        sums[l].2 += 1;
    }
    let means: Vec<Option<Point2>> = sums
        .iter()
        .map(|s| (s.2 > 0).then(|| Point2::new(s.0 / s.2 as f64, s.1 / s.2 as f64)))
        .collect();
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| p.distance_sq(means[l].as_ref().unwrap()))
        .sum()
}

// ---------------------------------------------------------------------------
// Agglomerative merging
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct AggCluster {
    members: Vec<usize>,
    min_member: usize,
    sum: (f64, f64),
    aabb: Option<Rect>,
    alive: bool,
}

impl AggCluster {
    fn size(&self) -> usize {
        self.members.len()
    }

    fn mean(&self) -> Point2 {
        let n = self.size() as f64;
        Point2::new(self.sum.0 / n, self.sum.1 / n)
    }
}

/// Full greedy merge history over a point set. The greedy sequence does not
/// depend on the target cluster count, so one trace serves every `k`:
/// cutting after `n - k` merges yields the k-cluster partition, and the
/// partitions are nested across `k`.
#[derive(Debug, Clone)]
pub struct MergeTrace {
    n: usize,
    /// Pairs of point-index sets merged, in order. Stored as (winner repr
    /// indices) for union-find replay.
    merges: Vec<(usize, usize)>,
}

impl MergeTrace {
    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    /// The smallest reachable cluster count (1 unless merges were blocked).
    pub fn min_clusters(&self) -> usize {
        self.n - self.merges.len()
    }

    /// Labels for the partition with `k` clusters, or the closest reachable
    /// count above `k` when constraints blocked further merging. Labels are
    /// dense and ordered by smallest member index.
    pub fn labels_at(&self, k: usize) -> Vec<usize> {
        let steps = self.n.saturating_sub(k).min(self.merges.len());
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for &(a, b) in &self.merges[..steps] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            // Root at the smaller index so label ordering is stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
        let mut order: BTreeMap<usize, usize> = BTreeMap::new();
        let mut labels = vec![0usize; self.n];
        for i in 0..self.n {
            let r = find(&mut parent, i);
            let next = order.len();
            let id = *order.entry(r).or_insert(next);
            labels[i] = id;
        }
        labels
    }
}

fn linkage_distance(
    a: &AggCluster,
    b: &AggCluster,
    points: &[Point2],
    linkage: Linkage,
) -> f64 {
    match linkage {
        Linkage::Ward => {
            let (na, nb) = (a.size() as f64, b.size() as f64);
            na * nb / (na + nb) * a.mean().distance_sq(&b.mean())
        }
        Linkage::Average => {
            let mut total = 0.0;
            for &i in &a.members {
                for &j in &b.members {
                    total += points[i].distance(&points[j]);
                }
            }
            total / (a.size() * b.size()) as f64
        }
        Linkage::Single => {
            let mut best = f64::INFINITY;
            for &i in &a.members {
                for &j in &b.members {
                    best = best.min(points[i].distance(&points[j]));
                }
            }
            best
        }
    }
}

/// Runs the greedy agglomerative loop to exhaustion, merging the closest
/// feasible pair each step. `feasible` sees the would-be merged aabb (None
/// when no aabbs were supplied). Ties break toward the pair with the
/// smallest (then second-smallest) minimum member index.
fn merge_trace_with(
    points: &[Point2],
    aabbs: Option<&[Rect]>,
    linkage: Linkage,
    mut feasible: impl FnMut(&Rect) -> bool,
) -> MergeTrace {
    let n = points.len();
    let mut clusters: Vec<AggCluster> = (0..n)
        .map(|i| AggCluster {
            members: vec![i],
            min_member: i,
            sum: (points[i].x, points[i].y),
            aabb: aabbs.map(|a| a[i]),
            alive: true,
        })
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    loop {
        let alive: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i].alive).collect();
        if alive.len() <= 1 {
            break;
        }
        let mut best: Option<(f64, usize, usize, usize, usize)> = None; // (d, lo, hi, i, j)
        for (ai, &i) in alive.iter().enumerate() {
            for &j in &alive[ai + 1..] {
                let merged_box = match (&clusters[i].aabb, &clusters[j].aabb) {
                    (Some(x), Some(y)) => Some(x.union(y)),
                    _ => None,
                };
                if let Some(ref b) = merged_box {
                    if !feasible(b) {
                        continue;
                    }
                }
                let d = linkage_distance(&clusters[i], &clusters[j], points, linkage);
                let lo = clusters[i].min_member.min(clusters[j].min_member);
                let hi = clusters[i].min_member.max(clusters[j].min_member);
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, ..)) => {
                        d < bd || (d == bd && (lo, hi) < (blo, bhi))
                    }
                };
                if better {
                    best = Some((d, lo, hi, i, j));
                }
            }
        }
        let Some((_, _, _, i, j)) = best else {
            break; // No feasible merge remains.
        };
        let (winner, loser) = (i.min(j), i.max(j));
        let taken = std::mem::take(&mut clusters[loser].members);
        let loser_sum = clusters[loser].sum;
        let loser_box = clusters[loser].aabb;
        let loser_min = clusters[loser].min_member;
        clusters[loser].alive = false;
        let w = &mut clusters[winner];
        merges.push((w.min_member, loser_min));
        w.members.extend(taken);
        w.sum.0 += loser_sum.0;
        w.sum.1 += loser_sum.1;
        w.min_member = w.min_member.min(loser_min);
        w.aabb = match (w.aabb, loser_box) {
            (Some(x), Some(y)) => Some(x.union(&y)),
            _ => None,
        };
    }
    MergeTrace { n, merges }
}

/// Unconstrained agglomerative merge history for `points`.
pub fn merge_trace(points: &[Point2], linkage: Linkage) -> MergeTrace {
    merge_trace_with(points, None, linkage, |_| true)
}

/// Agglomerative clustering to `k` clusters.
pub fn hierarchical(
    points: &[Point2],
    k: usize,
    linkage: Linkage,
) -> Result<Vec<usize>, ClusteringError> {
    let n = points.len();
    if n == 0 {
        return Err(ClusteringError::EmptyInput);
    }
    if k > n {
        return Err(ClusteringError::KTooLarge { k, n });
    }
    Ok(merge_trace(points, linkage).labels_at(k))
}

/// Constrained merge history over masks: a merge is feasible only while the
/// merged crop's aspect ratio stays inside the config's window.
pub fn arck_merge_trace(masks: &[Mask], cfg: &ClusteringConfig) -> MergeTrace {
    let points: Vec<Point2> = masks.iter().map(|m| m.centroid()).collect();
    let aabbs: Vec<Rect> = masks.iter().map(|m| m.aabb()).collect();
    let (ar_min, ar_max) = (cfg.ar_min, cfg.ar_max);
    merge_trace_with(&points, Some(&aabbs), cfg.linkage, move |merged| {
        let ar = merged.aspect_ratio();
        ar >= ar_min && ar <= ar_max
    })
}

/// Aspect-ratio-constrained clustering of masks.
///
/// The returned assignment may have more than `cfg.k` clusters when the
/// aspect window blocks merges. Singleton clusters whose natural crop
/// violates the window get a symmetrically expanded crop and the `padded`
/// flag.
pub fn arck_means(masks: &[Mask], cfg: &ClusteringConfig) -> Result<ClusterAssignment, ClusteringError> {
    if masks.is_empty() {
        return Err(ClusteringError::EmptyInput);
    }
    cfg.validate()?;
    let trace = arck_merge_trace(masks, cfg);
    let labels = trace.labels_at(cfg.k);
    Ok(assignment_from_labels(masks, &labels, cfg))
}

/// Builds the assignment record (crops, flags) for a given labeling.
pub fn assignment_from_labels(
    masks: &[Mask],
    labels: &[usize],
    cfg: &ClusteringConfig,
) -> ClusterAssignment {
    let m = labels.iter().copied().max().map_or(0, |x| x + 1);
    let mut member_aabbs: Vec<Option<Rect>> = vec![None; m];
    let mut sizes = vec![0usize; m];
    let mut label_map = BTreeMap::new();
    for (mask, &l) in masks.iter().zip(labels) {
        label_map.insert(mask.id, l);
        sizes[l] += 1;
        let b = mask.aabb();
        member_aabbs[l] = Some(match member_aabbs[l] {
            Some(acc) => acc.union(&b),
            None => b,
        });
    }
    let member_aabbs: Vec<Rect> = member_aabbs.into_iter().map(|b| b.unwrap()).collect();
    let mut crops = Vec::with_capacity(m);
    let mut flags = Vec::with_capacity(m);
    for (c, natural) in member_aabbs.iter().enumerate() {
        let ar = natural.aspect_ratio();
        let in_window = ar >= cfg.ar_min && ar <= cfg.ar_max;
        let crop = if in_window { *natural } else { expand_to_aspect(natural, cfg.ar_min, cfg.ar_max) };
        crops.push(crop);
        flags.push(ClusterFlags {
            padded: !in_window,
            singleton: sizes[c] == 1,
            constraint_violated: false,
        });
    }
    ClusterAssignment { labels: label_map, member_aabbs, crops, flags }
}

/// Symmetric expansion into the aspect window, unconstrained by bounds.
fn expand_to_aspect(rect: &Rect, ar_min: f64, ar_max: f64) -> Rect {
    let (w, h) = (rect.width(), rect.height());
    let ar = w / h;
    let (tw, th) = if ar > ar_max {
        (w, w / ar_max)
    } else if ar < ar_min {
        (h * ar_min, h)
    } else {
        (w, h)
    };
    let c = rect.center();
    Rect {
        min: Point2::new(c.x - tw / 2.0, c.y - th / 2.0),
        max: Point2::new(c.x + tw / 2.0, c.y + th / 2.0),
    }
}

/// Final per-cluster crops confined to scene bounds, in cluster order.
/// Each crop contains its cluster's masks; its aspect ratio lies in the
/// window unless `bounds_limited` is set.
pub fn emit_crops(
    assignment: &ClusterAssignment,
    bounds: &Rect,
    cfg: &ClusteringConfig,
) -> Vec<Crop> {
    assignment
        .member_aabbs
        .iter()
        .enumerate()
        .map(|(c, natural)| {
            let clipped = natural.intersection(bounds).unwrap_or(*natural);
            let padded = pad_to_aspect(&clipped, cfg.ar_min, cfg.ar_max, bounds);
            Crop {
                cluster: c,
                rect: padded.rect,
                padded: padded.rect != clipped,
                bounds_limited: padded.bounds_limited,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MaskId;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point2> {
        coords.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    fn block_mask(id: u32, x0: i32, y0: i32, w: i32, h: i32) -> Mask {
        let mut cells = Vec::new();
        for dx in 0..w {
            for dy in 0..h {
                cells.push((x0 + dx, y0 + dy));
            }
        }
        Mask::new(MaskId(id), cells, None).unwrap()
    }

    /// Exhaustive minimum-SSE 2-partition, the oracle for small instances.
    fn best_two_partition_sse(points: &[Point2]) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for split in 1..(1u32 << (n - 1)) {
            let labels: Vec<usize> =
                (0..n).map(|i| ((split >> i) & 1) as usize).collect();
            if labels.iter().all(|&l| l == labels[0]) {
                continue;
            }
            best = best.min(sse(points, &labels));
        }
        best
    }

    #[test]
    fn kmeans_k_equals_n_gives_zero_sse() {
        let p = pts(&[(0.0, 0.0), (1.0, 5.0), (-3.0, 2.0)]);
        let labels = kmeans(&p, 3, 7, 100).unwrap();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
        assert!(sse(&p, &labels) < 1e-12);
    }

    #[test]
    fn kmeans_separates_two_pairs() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        let labels = kmeans(&p, 2, 3, 100).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        let best = best_two_partition_sse(&p);
        assert!((sse(&p, &labels) - best).abs() < 1e-9);
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let p = pts(&[(0.1, 0.4), (2.0, 1.0), (9.5, 3.3), (8.8, 2.9), (0.0, 0.2)]);
        let a = kmeans(&p, 2, 42, 100).unwrap();
        let b = kmeans(&p, 2, 42, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_rejects_k_above_n() {
        let p = pts(&[(0.0, 0.0)]);
        assert_eq!(kmeans(&p, 2, 0, 10).unwrap_err(), ClusteringError::KTooLarge { k: 2, n: 1 });
    }

    #[test]
    fn hierarchical_k_equals_n_gives_singletons() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (5.0, 5.0)]);
        let labels = hierarchical(&p, 3, Linkage::Ward).unwrap();
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn hierarchical_groups_line_points() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (10.0, 0.0)]);
        for linkage in [Linkage::Ward, Linkage::Average, Linkage::Single] {
            let labels = hierarchical(&p, 2, linkage).unwrap();
            assert_eq!(labels[0], labels[1]);
            assert_ne!(labels[0], labels[2]);
        }
    }

    #[test]
    fn hierarchical_ward_matches_exhaustive_on_two_blobs() {
        let p = pts(&[
            (0.0, 0.0),
            (0.4, 0.2),
            (-0.3, 0.5),
            (20.0, 0.0),
            (20.5, 0.4),
            (19.8, -0.2),
        ]);
        let labels = hierarchical(&p, 2, Linkage::Ward).unwrap();
        let best = best_two_partition_sse(&p);
        assert!((sse(&p, &labels) - best).abs() < 1e-9);
    }

    #[test]
    fn sse_examples() {
        let p = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        assert!((sse(&p, &[0, 0]) - 2.0).abs() < 1e-12);
        assert!(sse(&p, &[0, 1]) < 1e-12);
    }

    #[test]
    fn arck_merges_identical_square_masks() {
        let masks: Vec<Mask> = (0..4).map(|i| block_mask(i, 10, 10, 4, 4)).collect();
        let cfg = ClusteringConfig { k: 1, ..Default::default() };
        let asg = arck_means(&masks, &cfg).unwrap();
        assert_eq!(asg.cluster_count(), 1);
    }

    #[test]
    fn arck_pads_aspect_violating_singleton() {
        // A compact 5-mask "table" plus a far-away 1x10 sliver.
        let mut masks: Vec<Mask> = vec![
            block_mask(0, 0, 0, 3, 3),
            block_mask(1, 4, 0, 3, 3),
            block_mask(2, 0, 4, 3, 3),
            block_mask(3, 4, 4, 3, 3),
            block_mask(4, 2, 2, 3, 3),
        ];
        masks.push(block_mask(5, 100, 100, 1, 10));
        let cfg = ClusteringConfig { k: 2, ..Default::default() };
        let asg = arck_means(&masks, &cfg).unwrap();
        assert_eq!(asg.cluster_count(), 2);
        let sliver_cluster = asg.labels[&MaskId(5)];
        assert!(asg.flags[sliver_cluster].singleton);
        assert!(asg.flags[sliver_cluster].padded);
        let ar = asg.crops[sliver_cluster].aspect_ratio();
        assert!(ar >= cfg.ar_min - 1e-9 && ar <= cfg.ar_max + 1e-9);
        let table_cluster = asg.labels[&MaskId(0)];
        for i in 0..5 {
            assert_eq!(asg.labels[&MaskId(i)], table_cluster);
        }
    }

    #[test]
    fn arck_never_merges_past_aspect_window() {
        // Two squat groups whose union box would be 30 wide x 10 tall.
        let masks = vec![block_mask(0, 0, 0, 10, 10), block_mask(1, 20, 0, 10, 10)];
        let cfg = ClusteringConfig { k: 1, ..Default::default() };
        let asg = arck_means(&masks, &cfg).unwrap();
        assert_eq!(asg.cluster_count(), 2, "infeasible merge must leave count above k");
        assert!(asg.flags.iter().all(|f| !f.constraint_violated));
    }

    #[test]
    fn arck_with_open_window_reproduces_hierarchical() {
        let masks: Vec<Mask> = [
            (0, 0), (2, 1), (30, 0), (31, 2), (15, 40), (16, 42), (1, 39),
        ]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| block_mask(i as u32, x, y, 2, 2))
        .collect();
        let cfg = ClusteringConfig {
            k: 3,
            ar_min: f64::MIN_POSITIVE,
            ar_max: f64::INFINITY,
            ..Default::default()
        };
        let asg = arck_means(&masks, &cfg).unwrap();
        let points: Vec<Point2> = masks.iter().map(|m| m.centroid()).collect();
        let expect = hierarchical(&points, 3, Linkage::Ward).unwrap();
        let got: Vec<usize> = masks.iter().map(|m| asg.labels[&m.id]).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn emit_crops_contains_members_and_respects_window() {
        let masks = vec![
            block_mask(0, 2, 2, 4, 4),
            block_mask(1, 8, 2, 4, 4),
            block_mask(2, 40, 30, 1, 12),
        ];
        let cfg = ClusteringConfig { k: 2, ..Default::default() };
        let asg = arck_means(&masks, &cfg).unwrap();
        let bounds = Rect::from_coords(0.0, 0.0, 60.0, 50.0).unwrap();
        let crops = emit_crops(&asg, &bounds, &cfg);
        assert_eq!(crops.len(), asg.cluster_count());
        for (mask, &label) in masks.iter().zip(masks.iter().map(|m| &asg.labels[&m.id])) {
            let crop = crops[label].rect;
            assert!(crop.contains_rect(&mask.aabb()), "mask {:?} outside crop", mask.id);
        }
        for crop in &crops {
            let ar = crop.rect.aspect_ratio();
            assert!(
                crop.bounds_limited || (ar >= cfg.ar_min - 1e-9 && ar <= cfg.ar_max + 1e-9),
                "crop {:?} violates window without flag",
                crop
            );
            assert!(bounds.contains_rect(&crop.rect));
        }
    }

    #[test]
    fn emit_crops_full_scene_cluster_is_scene_bounds() {
        let masks = vec![block_mask(0, 0, 0, 40, 40)];
        let cfg = ClusteringConfig { k: 1, ..Default::default() };
        let asg = arck_means(&masks, &cfg).unwrap();
        let bounds = Rect::from_coords(0.0, 0.0, 40.0, 40.0).unwrap();
        let crops = emit_crops(&asg, &bounds, &cfg);
        assert_eq!(crops.len(), 1);
        assert_eq!(crops[0].rect, bounds);
    }

    #[test]
    fn assignment_serializes_deterministically() {
        let masks = vec![block_mask(0, 0, 0, 3, 3), block_mask(1, 10, 0, 3, 3)];
        let cfg = ClusteringConfig { k: 1, ..Default::default() };
        let a = serde_json::to_vec(&arck_means(&masks, &cfg).unwrap()).unwrap();
        let b = serde_json::to_vec(&arck_means(&masks, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
