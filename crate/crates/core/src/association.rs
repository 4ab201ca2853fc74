//! Data association at two time scales: frame-to-frame matching of
//! detections to last-frame objects by IoU (short-term), and map-level
//! identity resolution of object candidates by centroid distance
//! (long-term), which also drives the persistence belief updates.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::map::{compute_centroid, GatingChange, SemanticMap};
use crate::persistence::{belief_update_detection, PersistenceConfig};
use crate::tracker::TrackState;
use crate::types::{BoundingBox, Detection, ObjectId, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationConfig {
    /// Minimum IoU for a short-term match.
    pub iou_threshold: f64,
    /// Maximum centroid distance (m) for a long-term merge.
    pub ltda_threshold: f64,
    /// Keyframe window: a re-sighting after more than this many keyframes
    /// triggers a persistence belief update.
    pub keyframe_window_n: u64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            iou_threshold: 0.3,
            ltda_threshold: 0.5,
            keyframe_window_n: 5,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.iou_threshold > 0.0
            && self.iou_threshold < 1.0
            && self.ltda_threshold > 0.0
            && self.keyframe_window_n >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("assoc thresholds out of bounds".into()))
        }
    }
}

/// An object from the previous frame, as seen by the short-term matcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastFrameObject {
    pub id: ObjectId,
    pub class_id: i32,
    pub bbox: BoundingBox,
}

/// Short-term association outcome: every detection index lands in exactly
/// one of the two lists, and every object id is claimed at most once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShortTermResult {
    pub matches: Vec<(usize, ObjectId)>,
    pub new_objects: Vec<usize>,
}

/// Greedy frame-to-frame matching: each detection claims the first same-class
/// unclaimed last-frame object whose IoU clears the threshold; anything left
/// becomes a new object.
pub fn associate_short_term(
    detections: &[Detection],
    last_frame: &[LastFrameObject],
    cfg: &AssociationConfig,
) -> ShortTermResult {
    let mut result = ShortTermResult::default();
    let mut claimed = vec![false; last_frame.len()];
    for (det_index, det) in detections.iter().enumerate() {
        let mut matched = None;
        for (obj_index, obj) in last_frame.iter().enumerate() {
            if claimed[obj_index] || obj.class_id != det.class_id {
                continue;
            }
            if crate::types::iou(&det.bbox, &obj.bbox) > cfg.iou_threshold {
                matched = Some(obj_index);
                break;
            }
        }
        match matched {
            Some(obj_index) => {
                claimed[obj_index] = true;
                result.matches.push((det_index, last_frame[obj_index].id));
            }
            None => result.new_objects.push(det_index),
        }
    }
    result
}

/// A tracked object proposed for the map at a keyframe: the world points it
/// accumulated since the last keyframe, its live filter state, and its link
/// to a map object if it has already been committed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCandidate {
    pub id: ObjectId,
    pub class_id: i32,
    pub first_box: BoundingBox,
    pub current_box: BoundingBox,
    pub points: Vec<Vector3<f64>>,
    pub track: TrackState,
    pub map_link: Option<ObjectId>,
}

/// What the long-term association did with one candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum MergeAction {
    /// Candidate merged into an existing map object (candidate retires; the
    /// map object keeps its id and first box).
    Merged {
        candidate: ObjectId,
        into: ObjectId,
        distance: f64,
        /// True when the re-sighting came after more than the keyframe
        /// window and a belief update was applied.
        belief_updated: bool,
        belief: f64,
        gating: Vec<GatingChange>,
    },
    /// Candidate inserted as a new map object.
    Inserted { object: ObjectId },
    /// Candidate was already linked: its map object was refreshed in place.
    Refreshed { object: ObjectId },
}

/// Long-term data association of keyframe candidates against the map.
///
/// Unlinked candidates are merged into the nearest same-class map object
/// within `ltda_threshold` of their centroid, or inserted as new objects.
/// A merge that re-sights an object unseen for more than the keyframe window
/// also updates its persistence belief from the centroid distance and
/// re-gates its map points. Linked candidates refresh their map object.
pub fn associate_long_term(
    candidates: &[ObjectCandidate],
    map: &mut SemanticMap,
    current_keyframe: u64,
    timestamp: Timestamp,
    cfg: &AssociationConfig,
    persistence_cfg: &PersistenceConfig,
    tracker_cfg: &crate::tracker::TrackerConfig,
) -> Result<Vec<MergeAction>> {
    let mut actions = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        if candidate.points.is_empty() {
            return Err(Error::EmptyObject(candidate.id.0));
        }
        if let Some(linked) = candidate.map_link {
            if map.object(linked).is_none() {
                return Err(Error::UnknownObject(linked.0));
            }
            map.refresh_object(
                linked,
                &candidate.points,
                Some(candidate.current_box),
                current_keyframe,
                timestamp,
                tracker_cfg,
            )?;
            actions.push(MergeAction::Refreshed { object: linked });
            continue;
        }

        let centroid = compute_centroid(&candidate.points)?;
        let mut best: Option<(ObjectId, f64)> = None;
        for object in map.same_class_objects(candidate.class_id) {
            let dist = (object.centroid - centroid).norm();
            if dist < cfg.ltda_threshold && best.is_none_or(|(_, d)| dist < d) {
                best = Some((object.id, dist));
            }
        }

        match best {
            Some((into, distance)) => {
                let last_seen = map.object(into).expect("merge target exists").last_seen_keyframe;
                let unseen_for = current_keyframe.saturating_sub(last_seen);
                map.merge_points_into(
                    into,
                    &candidate.points,
                    candidate.current_box,
                    current_keyframe,
                    candidate.track,
                )?;
                let mut belief_updated = false;
                let mut gating = Vec::new();
                if unseen_for > cfg.keyframe_window_n {
                    let object = map.object_mut(into).expect("merge target exists");
                    object.belief = belief_update_detection(
                        &object.belief,
                        distance,
                        current_keyframe,
                        persistence_cfg,
                    );
                    belief_updated = true;
                    gating = map.apply_gating(into, persistence_cfg)?;
                }
                let belief = map.object(into).expect("merge target exists").belief.bel;
                actions.push(MergeAction::Merged {
                    candidate: candidate.id,
                    into,
                    distance,
                    belief_updated,
                    belief,
                    gating,
                });
            }
            None => {
                map.create_object(
                    candidate.id,
                    candidate.class_id,
                    candidate.first_box,
                    &candidate
                        .points
                        .iter()
                        .map(|p| (*p, candidate.class_id))
                        .collect::<Vec<_>>(),
                    current_keyframe,
                    timestamp,
                    tracker_cfg,
                    persistence_cfg,
                )?;
                // carry the live filter over the freshly initialized one
                map.object_mut(candidate.id).expect("just created").track = candidate.track;
                actions.push(MergeAction::Inserted {
                    object: candidate.id,
                });
            }
        }
    }
    Ok(actions)
}
