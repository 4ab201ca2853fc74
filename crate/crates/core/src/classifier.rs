//! Per-frame keypoint classification: a-priori person filtering, occlusion
//! analysis over bounding-box depth statistics, and feature repopulation.
//!
//! Object detectors give boxes, not masks, so naively dropping every
//! keypoint inside a dynamic object's box also drops background features and
//! can starve the tracker. Feature repopulation keeps a keypoint whose depth
//! puts it well behind the box's nearest surface: it is reclassified as
//! background instead of being filtered.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{
    BoundingBox, Detection, Frame, Keypoint, KeypointStatus, RegionDepthMap, BACKGROUND_CLASS,
    PERSON_CLASS,
};

/// Minimum number of valid depth samples for usable box statistics.
pub const MIN_DEPTH_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Per-class depth threshold (m) separating object from background.
    pub depth_threshold_by_class: BTreeMap<i32, f64>,
    /// Threshold for classes without an explicit entry.
    pub default_depth_threshold: f64,
    /// A box is occluded by something unlabeled when its depth stddev
    /// exceeds this factor times the class depth threshold.
    pub stddev_occlusion_factor: f64,
    /// Boxes overlapping above this IoU participate in occlusion ordering.
    pub occlusion_iou_threshold: f64,
    /// Depth sampling stride in pixels.
    pub stride: usize,
    /// Use the 2nd-percentile depth instead of the raw minimum in the
    /// background test (robust to speckle in real depth maps).
    pub robust_min: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let mut thresholds = BTreeMap::new();
        thresholds.insert(PERSON_CLASS, 0.6);
        thresholds.insert(56, 0.5); // chair
        ClassifierConfig {
            depth_threshold_by_class: thresholds,
            default_depth_threshold: 0.4,
            stddev_occlusion_factor: 1.5,
            occlusion_iou_threshold: 0.2,
            stride: 4,
            robust_min: false,
        }
    }
}

impl ClassifierConfig {
    pub fn depth_threshold(&self, class_id: i32) -> f64 {
        self.depth_threshold_by_class
            .get(&class_id)
            .copied()
            .unwrap_or(self.default_depth_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.default_depth_threshold > 0.0
            && self.stddev_occlusion_factor > 0.0
            && self.occlusion_iou_threshold > 0.0
            && self.occlusion_iou_threshold <= 1.0
            && self.stride >= 1
            && self.depth_threshold_by_class.values().all(|t| *t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("classifier thresholds out of bounds".into()))
        }
    }
}

/// Depth statistics over the valid (depth > 0) stride-grid samples of a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDepthStats {
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
    /// Depth at the box center pixel; 0 when the center has no measurement.
    pub center_depth: f64,
    /// 2nd-percentile depth, used when `robust_min` is enabled.
    pub low_percentile: f64,
    pub valid_samples: usize,
}

fn collect_samples(
    bbox: &BoundingBox,
    exclude: &[BoundingBox],
    depth: &RegionDepthMap,
    stride: usize,
) -> Vec<f64> {
    let stride = stride.max(1) as f64;
    let mut samples = Vec::new();
    let mut v = bbox.y;
    while v <= bbox.bottom() {
        let mut u = bbox.x;
        while u <= bbox.right() {
            if !exclude.iter().any(|r| r.contains(u, v)) {
                let d = depth.depth_at(u, v);
                if d > 0.0 && d.is_finite() {
                    samples.push(d);
                }
            }
            u += stride;
        }
        v += stride;
    }
    samples
}

fn stats_from_samples(samples: &mut [f64], center_depth: f64) -> Result<BoxDepthStats> {
    let n = samples.len();
    if n < MIN_DEPTH_SAMPLES {
        return Err(Error::InsufficientDepth {
            got: n,
            min: MIN_DEPTH_SAMPLES,
        });
    }
    samples.sort_by(|a, b| a.total_cmp(b));
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    };
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    let low_idx = ((n as f64 * 0.02).floor() as usize).min(n - 1);
    Ok(BoxDepthStats {
        median,
        mean,
        min: samples[0],
        max: samples[n - 1],
        stddev: var.sqrt(),
        center_depth,
        low_percentile: samples[low_idx],
        valid_samples: n,
    })
}

/// Depth statistics over the stride grid inside `bbox`.
/// Fails with `InsufficientDepth` when the box must be skipped this frame.
pub fn compute_box_depth_stats(
    bbox: &BoundingBox,
    depth: &RegionDepthMap,
    stride: usize,
) -> Result<BoxDepthStats> {
    let (cu, cv) = bbox.center();
    let mut samples = collect_samples(bbox, &[], depth, stride);
    stats_from_samples(&mut samples, depth.depth_at(cu, cv))
}

fn compute_box_depth_stats_excluding(
    bbox: &BoundingBox,
    exclude: &[BoundingBox],
    depth: &RegionDepthMap,
    stride: usize,
) -> Result<BoxDepthStats> {
    let (cu, cv) = bbox.center();
    let mut samples = collect_samples(bbox, exclude, depth, stride);
    stats_from_samples(&mut samples, depth.depth_at(cu, cv))
}

/// Occlusion analysis result for one detection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OcclusionVerdict {
    pub occluded_by_labeled: bool,
    /// Indices of the detections in front of this one.
    pub occluding_box_indices: Vec<usize>,
    pub occluded_by_unlabeled: bool,
}

/// Overlap rectangles with the in-front boxes, and the statistics of the
/// behind box with those rectangles disregarded.
fn occlusion_adjusted(
    index: usize,
    occluders: &[usize],
    detections: &[Detection],
    depth: &RegionDepthMap,
    stride: usize,
) -> (Vec<BoundingBox>, Option<BoxDepthStats>) {
    let bbox = &detections[index].bbox;
    let rects: Vec<BoundingBox> = occluders
        .iter()
        .filter_map(|&j| bbox.intersection(&detections[j].bbox))
        .collect();
    let stats = compute_box_depth_stats_excluding(bbox, &rects, depth, stride).ok();
    (rects, stats)
}

/// For each detection, decide whether it is occluded by another labeled
/// detection (overlap above the IoU threshold with a smaller median depth in
/// front) or by something unlabeled (depth spread too large for the class,
/// or the box center closer than the median — the center is covered).
///
/// When a box is occluded by labeled objects, the unlabeled tests run on its
/// statistics with the overlap rectangles disregarded; a labeled occluder
/// over the box center does not count as unlabeled occlusion.
pub fn detect_occlusions(
    detections: &[Detection],
    stats: &[Option<BoxDepthStats>],
    depth: &RegionDepthMap,
    cfg: &ClassifierConfig,
) -> Vec<OcclusionVerdict> {
    debug_assert_eq!(detections.len(), stats.len());
    let mut verdicts = Vec::with_capacity(detections.len());
    for i in 0..detections.len() {
        let mut verdict = OcclusionVerdict::default();
        let Some(si) = &stats[i] else {
            verdicts.push(verdict);
            continue;
        };
        for (j, dj) in detections.iter().enumerate() {
            if j == i {
                continue;
            }
            let Some(sj) = &stats[j] else { continue };
            if crate::types::iou(&detections[i].bbox, &dj.bbox) > cfg.occlusion_iou_threshold
                && sj.median < si.median
            {
                verdict.occluding_box_indices.push(j);
            }
        }
        verdict.occluded_by_labeled = !verdict.occluding_box_indices.is_empty();

        let (test_stats, center_excluded) = if verdict.occluded_by_labeled {
            let (rects, adjusted) = occlusion_adjusted(
                i,
                &verdict.occluding_box_indices,
                detections,
                depth,
                cfg.stride,
            );
            let (cu, cv) = detections[i].bbox.center();
            let excluded = rects.iter().any(|r| r.contains(cu, cv));
            (adjusted, excluded)
        } else {
            (Some(*si), false)
        };
        if let Some(s) = test_stats {
            let class_threshold = cfg.depth_threshold(detections[i].class_id);
            let spread_too_high = s.stddev > cfg.stddev_occlusion_factor * class_threshold;
            let center_covered =
                !center_excluded && s.center_depth > 0.0 && s.median > s.center_depth;
            verdict.occluded_by_unlabeled = spread_too_high || center_covered;
        }
        verdicts.push(verdict);
    }
    verdicts
}

/// Output of [`classify_keypoints`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameClassification {
    /// Surviving keypoints with classes and statuses assigned.
    pub keypoints: Vec<Keypoint>,
    pub removed_count: usize,
    /// Per detection: the keypoints attributed to that object (including
    /// filtered ones). These carry the object's class and feed its centroid
    /// measurement.
    pub object_keypoints: Vec<Vec<Keypoint>>,
    /// Per detection: true when the box contributed no usable depth
    /// statistics or was occluded by something unlabeled; such a box yields
    /// no measurement this frame.
    pub box_skipped: Vec<bool>,
    /// Per detection: true when another box claimed a keypoint inside this
    /// box. The visible keypoint subset of a contested box is unreliable, so
    /// it should not feed a centroid measurement.
    pub box_contested: Vec<bool>,
}

/// Which boxes are a-priori dynamic this frame: every person box, plus every
/// movable box whose tracked object the DOC test currently flags as moving.
fn is_dynamic_box(det: &Detection, det_index: usize, moving_boxes: &[usize]) -> bool {
    det.is_person() || moving_boxes.contains(&det_index)
}

enum KeypointFate {
    /// Keypoint not handled by this box (inside a disregarded overlap region).
    Untouched,
    Background,
    ObjectKept(i32),
    ObjectRemoved(i32),
}

/// Classify every keypoint of the frame against the detections.
///
/// `moving_boxes` lists detection indices whose tracked object is currently
/// classified as moving; their keypoints are filtered like person keypoints.
pub fn classify_keypoints(
    frame: &Frame,
    verdicts: &[OcclusionVerdict],
    stats: &[Option<BoxDepthStats>],
    moving_boxes: &[usize],
    cfg: &ClassifierConfig,
) -> FrameClassification {
    debug_assert_eq!(frame.detections.len(), verdicts.len());
    debug_assert_eq!(frame.detections.len(), stats.len());

    let n_boxes = frame.detections.len();
    // Effective stats: for a box occluded by labeled objects, the overlap
    // rectangles are disregarded in both the statistics and the depth test.
    let mut overlap_rects: Vec<Vec<BoundingBox>> = vec![Vec::new(); n_boxes];
    let mut effective_stats: Vec<Option<BoxDepthStats>> = stats.to_vec();
    for i in 0..n_boxes {
        if stats[i].is_none() {
            continue;
        }
        if verdicts[i].occluded_by_labeled {
            let (rects, adjusted) = occlusion_adjusted(
                i,
                &verdicts[i].occluding_box_indices,
                &frame.detections,
                &frame.depth,
                cfg.stride,
            );
            effective_stats[i] = adjusted;
            overlap_rects[i] = rects;
        }
    }

    let box_skipped: Vec<bool> = (0..n_boxes)
        .map(|i| effective_stats[i].is_none() || verdicts[i].occluded_by_unlabeled)
        .collect();

    // Person boxes take precedence over movable boxes; within a group,
    // detection order decides.
    let mut box_order: Vec<usize> = (0..n_boxes).collect();
    box_order.sort_by_key(|&i| (!frame.detections[i].is_person(), i));

    let mut kept: Vec<Keypoint> = Vec::with_capacity(frame.keypoints.len());
    let mut object_keypoints: Vec<Vec<Keypoint>> = vec![Vec::new(); n_boxes];
    let mut box_contested = vec![false; n_boxes];
    let mut removed_count = 0usize;

    'keypoints: for kp in &frame.keypoints {
        let mut decided_by = None;
        for &b in &box_order {
            let det = &frame.detections[b];
            if !det.bbox.contains(kp.u, kp.v) {
                continue;
            }
            let fate = classify_in_box(
                kp,
                det,
                b,
                &effective_stats[b],
                &overlap_rects[b],
                verdicts[b].occluded_by_unlabeled,
                moving_boxes,
                cfg,
            );
            match fate {
                KeypointFate::Untouched => continue,
                KeypointFate::Background => {
                    let mut out = *kp;
                    out.class_id = BACKGROUND_CLASS;
                    out.object_id = None;
                    out.status = KeypointStatus::Static;
                    kept.push(out);
                    decided_by = Some(b);
                }
                KeypointFate::ObjectKept(class_id) => {
                    let mut out = *kp;
                    out.class_id = class_id;
                    out.status = KeypointStatus::Movable;
                    object_keypoints[b].push(out);
                    kept.push(out);
                    decided_by = Some(b);
                }
                KeypointFate::ObjectRemoved(class_id) => {
                    let mut out = *kp;
                    out.class_id = class_id;
                    out.status = KeypointStatus::Dynamic;
                    object_keypoints[b].push(out);
                    removed_count += 1;
                    decided_by = Some(b);
                }
            }
            if decided_by.is_some() {
                break;
            }
        }
        if let Some(decider) = decided_by {
            // any other box containing this keypoint lost it to the decider
            for (index, det) in frame.detections.iter().enumerate() {
                if index != decider && det.bbox.contains(kp.u, kp.v) {
                    box_contested[index] = true;
                }
            }
            continue 'keypoints;
        }
        // outside every box (or every containing box deferred): background
        let mut out = *kp;
        out.class_id = BACKGROUND_CLASS;
        out.object_id = None;
        out.status = KeypointStatus::Static;
        kept.push(out);
    }

    FrameClassification {
        keypoints: kept,
        removed_count,
        object_keypoints,
        box_skipped,
        box_contested,
    }
}

#[allow(clippy::too_many_arguments)]
fn classify_in_box(
    kp: &Keypoint,
    det: &Detection,
    det_index: usize,
    effective: &Option<BoxDepthStats>,
    overlap_rects: &[BoundingBox],
    occluded_by_unlabeled: bool,
    moving_boxes: &[usize],
    cfg: &ClassifierConfig,
) -> KeypointFate {
    let dynamic_box = is_dynamic_box(det, det_index, moving_boxes);

    // Something unlabeled covers the box: none of its keypoints can be
    // trusted, so they are all dropped.
    if occluded_by_unlabeled {
        return KeypointFate::ObjectRemoved(det.class_id);
    }

    // Inside an overlap with an in-front labeled box: disregarded here, the
    // front box claims the keypoint.
    if overlap_rects.iter().any(|r| r.contains(kp.u, kp.v)) {
        return KeypointFate::Untouched;
    }

    let Some(stats) = effective else {
        // No usable depth statistics: no repopulation possible. Dynamic
        // boxes are filtered wholesale, static movable ones keep the class.
        return if dynamic_box {
            KeypointFate::ObjectRemoved(det.class_id)
        } else {
            KeypointFate::ObjectKept(det.class_id)
        };
    };

    if !kp.has_depth() {
        // Cannot depth-test; resolve by box dynamics.
        return if dynamic_box {
            KeypointFate::ObjectRemoved(det.class_id)
        } else {
            KeypointFate::ObjectKept(det.class_id)
        };
    }

    let floor = if cfg.robust_min {
        stats.low_percentile
    } else {
        stats.min
    };
    if kp.depth > floor + cfg.depth_threshold(det.class_id) {
        KeypointFate::Background
    } else if dynamic_box {
        KeypointFate::ObjectRemoved(det.class_id)
    } else {
        KeypointFate::ObjectKept(det.class_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Pose, Timestamp};
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn bbox(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    fn det(b: BoundingBox, class: i32) -> Detection {
        Detection::new(b, class, 0.9).unwrap()
    }

    fn frame_with(
        detections: Vec<Detection>,
        keypoints: Vec<Keypoint>,
        depth: RegionDepthMap,
    ) -> Frame {
        Frame {
            id: 0,
            timestamp: Timestamp::new(0.0).unwrap(),
            camera_pose: Pose::identity(),
            keypoints,
            detections,
            depth,
        }
    }

    #[test]
    fn stats_uniform_plane() {
        let depth = RegionDepthMap::uniform(2.0);
        let stats = compute_box_depth_stats(&bbox(10.0, 10.0, 40.0, 40.0), &depth, 4).unwrap();
        assert_eq!(stats.median, 2.0);
        assert_eq!(stats.mean, 2.0);
        assert_eq!(stats.min, 2.0);
        assert_eq!(stats.max, 2.0);
        assert_eq!(stats.stddev, 0.0);
        assert_eq!(stats.center_depth, 2.0);
    }

    #[test]
    fn stats_two_plane_split() {
        // left half at 1 m, rest at 3 m, stride 1
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(bbox(0.0, 0.0, 19.5, 40.0), 1.0);
        let stats = compute_box_depth_stats(&bbox(0.0, 0.0, 39.0, 39.0), &depth, 1).unwrap();
        assert_eq!(stats.min, 1.0);
        assert_eq!(stats.max, 3.0);
        assert_relative_eq!(stats.mean, 2.0, epsilon = 1e-9);
        // brute force over the same grid
        let mut total = 0.0;
        let mut count = 0;
        for v in 0..=39 {
            for u in 0..=39 {
                total += depth.depth_at(u as f64, v as f64);
                count += 1;
            }
        }
        assert_relative_eq!(stats.mean, total / count as f64, epsilon = 1e-12);
    }

    #[test]
    fn stats_all_invalid_is_insufficient() {
        let depth = RegionDepthMap::uniform(0.0);
        assert!(matches!(
            compute_box_depth_stats(&bbox(0.0, 0.0, 50.0, 50.0), &depth, 4),
            Err(Error::InsufficientDepth { .. })
        ));
    }

    #[test]
    fn occlusion_disjoint_boxes_all_false() {
        let depth = RegionDepthMap::uniform(2.0);
        let detections = vec![
            det(bbox(0.0, 0.0, 50.0, 50.0), 56),
            det(bbox(200.0, 200.0, 50.0, 50.0), 56),
        ];
        let stats: Vec<_> = detections
            .iter()
            .map(|d| compute_box_depth_stats(&d.bbox, &depth, 4).ok())
            .collect();
        let verdicts = detect_occlusions(&detections, &stats, &depth, &ClassifierConfig::default());
        assert!(verdicts.iter().all(|v| !v.occluded_by_labeled));
        assert!(verdicts.iter().all(|v| !v.occluded_by_unlabeled));
    }

    #[test]
    fn occlusion_front_box_shadows_back_box() {
        // A (median 1 m) overlaps B (median 3 m) with IoU above threshold:
        // B is occluded by A, A is clear.
        let mut depth = RegionDepthMap::uniform(3.0);
        let box_a = bbox(0.0, 0.0, 60.0, 80.0);
        let box_b = bbox(30.0, 0.0, 70.0, 80.0);
        depth.paint(box_a, 1.0);
        let detections = vec![det(box_a, 0), det(box_b, 56)];
        let stats: Vec<_> = detections
            .iter()
            .map(|d| compute_box_depth_stats(&d.bbox, &depth, 2).ok())
            .collect();
        let cfg = ClassifierConfig {
            // keep the spread test out of the way; this exercises ordering
            stddev_occlusion_factor: 10.0,
            ..ClassifierConfig::default()
        };
        let verdicts = detect_occlusions(&detections, &stats, &depth, &cfg);
        assert!(crate::types::iou(&box_a, &box_b) > cfg.occlusion_iou_threshold);
        assert!(!verdicts[0].occluded_by_labeled);
        assert!(verdicts[1].occluded_by_labeled);
        assert_eq!(verdicts[1].occluding_box_indices, vec![0]);
    }

    #[test]
    fn occlusion_center_covered_flags_unlabeled() {
        // median 3.0 from the outer area, center pixel at 1.0
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(bbox(40.0, 40.0, 20.0, 20.0), 1.0); // small patch at center
        let b = bbox(0.0, 0.0, 100.0, 100.0);
        let detections = vec![det(b, 56)];
        let stats = vec![compute_box_depth_stats(&b, &depth, 4).ok()];
        let cfg = ClassifierConfig {
            stddev_occlusion_factor: 100.0,
            ..ClassifierConfig::default()
        };
        let verdicts = detect_occlusions(&detections, &stats, &depth, &cfg);
        assert!(verdicts[0].occluded_by_unlabeled);
    }

    /// The canonical repopulation scene: a person at 1 m in front of a wall
    /// at 3 m, the person covering the central 75% of its box.
    fn person_before_wall() -> (Frame, ClassifierConfig) {
        let person_box = bbox(100.0, 100.0, 200.0, 240.0);
        let person_rect = bbox(125.0, 100.0, 150.0, 240.0);
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(person_rect, 1.0);
        let mut keypoints = Vec::new();
        // person keypoints
        for i in 0..10 {
            keypoints.push(Keypoint::new(140.0 + 12.0 * i as f64, 200.0, 1.0));
        }
        // background keypoints inside the box but beside the person
        for i in 0..5 {
            keypoints.push(Keypoint::new(103.0 + 4.0 * i as f64, 120.0, 3.0));
        }
        // background keypoints outside any box
        for i in 0..5 {
            keypoints.push(Keypoint::new(400.0 + 10.0 * i as f64, 50.0, 3.0));
        }
        let frame = frame_with(vec![det(person_box, PERSON_CLASS)], keypoints, depth);
        (frame, ClassifierConfig::default())
    }

    fn classify(frame: &Frame, cfg: &ClassifierConfig) -> FrameClassification {
        let stats: Vec<_> = frame
            .detections
            .iter()
            .map(|d| compute_box_depth_stats(&d.bbox, &frame.depth, cfg.stride).ok())
            .collect();
        let verdicts = detect_occlusions(&frame.detections, &stats, &frame.depth, cfg);
        classify_keypoints(frame, &verdicts, &stats, &[], cfg)
    }

    #[test]
    fn repopulation_keeps_background_removes_person() {
        let (frame, cfg) = person_before_wall();
        let result = classify(&frame, &cfg);
        // all 10 person keypoints removed, all 10 background keypoints kept
        assert_eq!(result.removed_count, 10);
        assert_eq!(result.keypoints.len(), 10);
        assert!(result
            .keypoints
            .iter()
            .all(|kp| kp.class_id == BACKGROUND_CLASS && kp.status == KeypointStatus::Static));
        // the removed ones are attributed to the person box for measurement
        assert_eq!(result.object_keypoints[0].len(), 10);
        assert!(result.object_keypoints[0]
            .iter()
            .all(|kp| kp.class_id == PERSON_CLASS));
    }

    #[test]
    fn keypoint_just_above_min_is_removed() {
        // depth min + 0.1 with threshold 0.6: still the person
        let (mut frame, cfg) = person_before_wall();
        frame.keypoints = vec![Keypoint::new(200.0, 200.0, 1.1)];
        let result = classify(&frame, &cfg);
        assert_eq!(result.removed_count, 1);
        assert!(result.keypoints.is_empty());
    }

    #[test]
    fn keypoint_far_behind_min_is_rescued() {
        let (mut frame, cfg) = person_before_wall();
        frame.keypoints = vec![Keypoint::new(200.0, 200.0, 3.0)];
        let result = classify(&frame, &cfg);
        assert_eq!(result.removed_count, 0);
        assert_eq!(result.keypoints.len(), 1);
        assert_eq!(result.keypoints[0].class_id, BACKGROUND_CLASS);
    }

    #[test]
    fn no_detections_keeps_everything() {
        let keypoints: Vec<Keypoint> = (0..20)
            .map(|i| Keypoint::new(10.0 * i as f64, 100.0, 2.0))
            .collect();
        let frame = frame_with(vec![], keypoints.clone(), RegionDepthMap::uniform(2.0));
        let result = classify(&frame, &ClassifierConfig::default());
        assert_eq!(result.removed_count, 0);
        assert_eq!(result.keypoints.len(), 20);
        assert!(result
            .keypoints
            .iter()
            .all(|kp| kp.status == KeypointStatus::Static));
    }

    #[test]
    fn movable_object_keypoints_receive_class() {
        let chair_box = bbox(100.0, 100.0, 100.0, 100.0);
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(chair_box, 1.5);
        let keypoints = vec![
            Keypoint::new(150.0, 150.0, 1.5), // on the chair
            Keypoint::new(160.0, 150.0, 3.0), // hole in the chair, wall behind
        ];
        let frame = frame_with(vec![det(chair_box, 56)], keypoints, depth);
        let result = classify(&frame, &ClassifierConfig::default());
        assert_eq!(result.removed_count, 0);
        assert_eq!(result.keypoints.len(), 2);
        assert_eq!(result.keypoints[0].class_id, 56);
        assert_eq!(result.keypoints[0].status, KeypointStatus::Movable);
        assert_eq!(result.keypoints[1].class_id, BACKGROUND_CLASS);
    }

    #[test]
    fn moving_movable_box_is_filtered_like_person() {
        let chair_box = bbox(100.0, 100.0, 100.0, 100.0);
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(chair_box, 1.5);
        let keypoints = vec![Keypoint::new(150.0, 150.0, 1.5)];
        let frame = frame_with(vec![det(chair_box, 56)], keypoints, depth);
        let cfg = ClassifierConfig::default();
        let stats: Vec<_> = frame
            .detections
            .iter()
            .map(|d| compute_box_depth_stats(&d.bbox, &frame.depth, cfg.stride).ok())
            .collect();
        let verdicts = detect_occlusions(&frame.detections, &stats, &frame.depth, &cfg);
        let result = classify_keypoints(&frame, &verdicts, &stats, &[0], &cfg);
        assert_eq!(result.removed_count, 1);
        assert!(result.keypoints.is_empty());
        assert_eq!(result.object_keypoints[0].len(), 1);
    }

    #[test]
    fn unlabeled_occluded_box_drops_all_keypoints() {
        // center covered by something closer than the median
        let b = bbox(0.0, 0.0, 100.0, 100.0);
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(bbox(40.0, 40.0, 20.0, 20.0), 1.0);
        let keypoints = vec![
            Keypoint::new(10.0, 10.0, 3.0),
            Keypoint::new(50.0, 50.0, 1.0),
        ];
        let frame = frame_with(vec![det(b, 56)], keypoints, depth);
        let cfg = ClassifierConfig {
            stddev_occlusion_factor: 100.0,
            ..ClassifierConfig::default()
        };
        let result = classify(&frame, &cfg);
        assert_eq!(result.removed_count, 2);
        assert!(result.keypoints.is_empty());
        assert!(result.box_skipped[0]);
    }

    #[test]
    fn labeled_overlap_is_disregarded_for_the_back_box() {
        // person in front overlapping a chair behind; chair keypoints in the
        // overlap go to the person's test, chair keypoints outside stay chair
        let person_box = bbox(0.0, 0.0, 60.0, 100.0);
        let chair_box = bbox(30.0, 0.0, 60.0, 100.0);
        let mut depth = RegionDepthMap::uniform(5.0);
        depth.paint(chair_box, 2.0);
        depth.paint(person_box, 1.0);
        let keypoints = vec![
            Keypoint::new(45.0, 50.0, 1.0), // overlap, person depth
            Keypoint::new(80.0, 50.0, 2.0), // chair only
        ];
        let frame = frame_with(
            vec![det(person_box, PERSON_CLASS), det(chair_box, 56)],
            keypoints,
            depth,
        );
        let cfg = ClassifierConfig {
            stddev_occlusion_factor: 100.0,
            ..ClassifierConfig::default()
        };
        let result = classify(&frame, &cfg);
        assert_eq!(result.removed_count, 1); // the person keypoint
        assert_eq!(result.keypoints.len(), 1);
        assert_eq!(result.keypoints[0].class_id, 56);
    }

    #[test]
    fn classification_is_deterministic() {
        let (frame, cfg) = person_before_wall();
        let a = classify(&frame, &cfg);
        let b = classify(&frame, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn random_frames_preserve_subset_and_outside_box_invariants() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let mut depth = RegionDepthMap::uniform(rng.random_range(2.5..6.0));
            let n_boxes = rng.random_range(0..4usize);
            let mut detections = Vec::new();
            for _ in 0..n_boxes {
                let b = bbox(
                    rng.random_range(0.0..400.0),
                    rng.random_range(0.0..300.0),
                    rng.random_range(40.0..200.0),
                    rng.random_range(40.0..150.0),
                );
                depth.paint(b, rng.random_range(0.5..2.0));
                let class = if rng.random_range(0.0..1.0) < 0.5 { PERSON_CLASS } else { 56 };
                detections.push(det(b, class));
            }
            let keypoints: Vec<Keypoint> = (0..80)
                .map(|_| {
                    let u = rng.random_range(0.0..640.0);
                    let v = rng.random_range(0.0..480.0);
                    let d = depth.depth_at(u, v) * rng.random_range(0.98..1.02);
                    Keypoint::new(u, v, d)
                })
                .collect();
            let frame = frame_with(detections, keypoints, depth);
            let result = classify(&frame, &ClassifierConfig::default());

            // output is a subset of the input
            assert_eq!(
                result.keypoints.len() + result.removed_count,
                frame.keypoints.len()
            );
            // a keypoint outside every box is never removed or reclassified
            for kp in &frame.keypoints {
                if !frame.detections.iter().any(|d| d.bbox.contains(kp.u, kp.v)) {
                    assert!(result.keypoints.iter().any(|out| out.u == kp.u
                        && out.v == kp.v
                        && out.class_id == BACKGROUND_CLASS));
                }
            }
            // every removed keypoint was inside some box
            if result.removed_count > 0 {
                let removed = frame.keypoints.iter().filter(|kp| {
                    !result
                        .keypoints
                        .iter()
                        .any(|out| out.u == kp.u && out.v == kp.v)
                });
                for kp in removed {
                    assert!(frame.detections.iter().any(|d| d.bbox.contains(kp.u, kp.v)));
                }
            }
        }
    }

    #[test]
    fn repopulation_rescues_at_least_naive_survivor_count() {
        // survivors with repopulation >= survivors under naive
        // everything-in-a-person-box filtering, on frames without movable
        // boxes (movable boxes only add survivors)
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..30 {
            let wall = rng.random_range(3.0..6.0);
            let mut depth = RegionDepthMap::uniform(wall);
            let mut detections = Vec::new();
            for _ in 0..rng.random_range(1..3usize) {
                let b = bbox(
                    rng.random_range(0.0..400.0),
                    rng.random_range(0.0..280.0),
                    rng.random_range(60.0..200.0),
                    rng.random_range(80.0..200.0),
                );
                // person fills the central 80% of the box width
                let inset = b.w * 0.1;
                let person_rect = bbox(b.x + inset, b.y, b.w - 2.0 * inset, b.h);
                depth.paint(person_rect, rng.random_range(0.8..1.4));
                detections.push(det(b, PERSON_CLASS));
            }
            let keypoints: Vec<Keypoint> = (0..100)
                .map(|_| {
                    let u = rng.random_range(0.0..640.0);
                    let v = rng.random_range(0.0..480.0);
                    Keypoint::new(u, v, depth.depth_at(u, v))
                })
                .collect();
            let frame = frame_with(detections, keypoints, depth);
            let result = classify(&frame, &ClassifierConfig::default());
            let naive_survivors = frame
                .keypoints
                .iter()
                .filter(|kp| !frame.detections.iter().any(|d| d.bbox.contains(kp.u, kp.v)))
                .count();
            assert!(
                result.keypoints.len() >= naive_survivors,
                "repopulation kept {} < naive {}",
                result.keypoints.len(),
                naive_survivors
            );
        }
    }
}
