//! The object-level map: map point and map object stores, centroid and
//! 3D-extent statistics, active-point bookkeeping, and plain-text export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::persistence::{is_active, PersistenceBelief, PersistenceConfig};
use crate::tracker::{track_init, track_update, TrackState, TrackerConfig};
use crate::types::{BoundingBox, ObjectId, PointId, Timestamp, BACKGROUND_CLASS, PERSON_CLASS};

/// A 3D landmark. Background points (`class_id = -1`) are always active;
/// object points are gated by their object's persistence belief.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub id: PointId,
    pub position: Vector3<f64>,
    pub class_id: i32,
    pub object_id: Option<ObjectId>,
    pub active: bool,
    pub first_keyframe: u64,
}

/// An object-level landmark aggregating map points of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct MapObject {
    pub id: ObjectId,
    pub class_id: i32,
    pub first_box: BoundingBox,
    pub current_box: BoundingBox,
    pub mappoint_ids: Vec<PointId>,
    pub centroid: Vector3<f64>,
    pub extent: Vector3<f64>,
    pub belief: PersistenceBelief,
    pub track: TrackState,
    pub last_seen_keyframe: u64,
}

/// Arithmetic mean of a non-empty point set.
pub fn compute_centroid(points: &[Vector3<f64>]) -> Result<Vector3<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let sum: Vector3<f64> = points.iter().sum();
    Ok(sum / points.len() as f64)
}

fn median_of_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Axis-aligned 3D extent: per axis, the median of the top `fraction` of
/// coordinates minus the median of the bottom `fraction`. Falls back to raw
/// min/max for fewer than 20 points, where the tails degenerate.
pub fn compute_extent(points: &[Vector3<f64>], fraction: f64) -> Vector3<f64> {
    if points.is_empty() {
        return Vector3::zeros();
    }
    let mut extent = Vector3::zeros();
    for axis in 0..3 {
        let mut coords: Vec<f64> = points.iter().map(|p| p[axis]).collect();
        coords.sort_by(|a, b| a.total_cmp(b));
        let n = coords.len();
        if n < 20 {
            extent[axis] = coords[n - 1] - coords[0];
        } else {
            let k = ((n as f64 * fraction).ceil() as usize).max(1);
            let lo = median_of_sorted(&coords[..k]);
            let hi = median_of_sorted(&coords[n - k..]);
            extent[axis] = (hi - lo).max(0.0);
        }
    }
    extent
}

/// Fraction used for the extent statistic.
pub const EXTENT_FRACTION: f64 = 0.05;

/// Single-writer store of map points and map objects, with a class-bucketed
/// index for same-class scans. Object and point ids are monotone and never
/// reused.
#[derive(Debug, Clone, Default)]
pub struct SemanticMap {
    objects: BTreeMap<ObjectId, MapObject>,
    points: BTreeMap<PointId, MapPoint>,
    by_class: BTreeMap<i32, Vec<ObjectId>>,
    next_point: u64,
    next_object: u64,
}

/// A point-activation flip produced by gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingChange {
    pub object: ObjectId,
    pub point: PointId,
    pub active: bool,
}

impl SemanticMap {
    pub fn new() -> Self {
        SemanticMap::default()
    }

    /// Reserve a globally unique object id (shared by in-flight candidates
    /// and committed objects).
    pub fn allocate_object_id(&mut self) -> ObjectId {
        let id = ObjectId(self.next_object);
        self.next_object += 1;
        id
    }

    pub fn object(&self, id: ObjectId) -> Option<&MapObject> {
        self.objects.get(&id)
    }

    pub fn object_mut(&mut self, id: ObjectId) -> Option<&mut MapObject> {
        self.objects.get_mut(&id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &MapObject> {
        self.objects.values()
    }

    pub fn objects_mut(&mut self) -> impl Iterator<Item = &mut MapObject> {
        self.objects.values_mut()
    }

    pub fn point(&self, id: PointId) -> Option<&MapPoint> {
        self.points.get(&id)
    }

    pub fn points(&self) -> impl Iterator<Item = &MapPoint> {
        self.points.values()
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn same_class_objects(&self, class_id: i32) -> impl Iterator<Item = &MapObject> {
        self.by_class
            .get(&class_id)
            .into_iter()
            .flatten()
            .filter_map(|id| self.objects.get(id))
    }

    /// Add a background map point (always active).
    pub fn add_background_point(&mut self, position: Vector3<f64>, keyframe: u64) -> PointId {
        let id = PointId(self.next_point);
        self.next_point += 1;
        self.points.insert(
            id,
            MapPoint {
                id,
                position,
                class_id: BACKGROUND_CLASS,
                object_id: None,
                active: true,
                first_keyframe: keyframe,
            },
        );
        id
    }

    fn add_object_point(
        &mut self,
        object_id: ObjectId,
        class_id: i32,
        position: Vector3<f64>,
        keyframe: u64,
        active: bool,
    ) -> PointId {
        let id = PointId(self.next_point);
        self.next_point += 1;
        self.points.insert(
            id,
            MapPoint {
                id,
                position,
                class_id,
                object_id: Some(object_id),
                active,
                first_keyframe: keyframe,
            },
        );
        id
    }

    /// Create a map object from same-class world points. The object starts
    /// with belief 0.5; its points start active only if that clears the
    /// gating threshold (it does not under the default 0.6).
    #[allow(clippy::too_many_arguments)]
    pub fn create_object(
        &mut self,
        id: ObjectId,
        class_id: i32,
        bbox: BoundingBox,
        points: &[(Vector3<f64>, i32)],
        keyframe: u64,
        timestamp: Timestamp,
        tracker_cfg: &TrackerConfig,
        persistence_cfg: &PersistenceConfig,
    ) -> Result<ObjectId> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        for &(_, point_class) in points {
            if point_class != class_id {
                return Err(Error::ClassMismatch {
                    point_class,
                    object_class: class_id,
                });
            }
        }
        let positions: Vec<Vector3<f64>> = points.iter().map(|(p, _)| *p).collect();
        let centroid = compute_centroid(&positions)?;
        let extent = compute_extent(&positions, EXTENT_FRACTION);
        let belief = PersistenceBelief::new(keyframe);
        let active = point_active(class_id, belief.bel, persistence_cfg);
        let mappoint_ids: Vec<PointId> = positions
            .iter()
            .map(|p| self.add_object_point(id, class_id, *p, keyframe, active))
            .collect();
        let object = MapObject {
            id,
            class_id,
            first_box: bbox,
            current_box: bbox,
            mappoint_ids,
            centroid,
            extent,
            belief,
            track: track_init(&centroid, timestamp, tracker_cfg),
            last_seen_keyframe: keyframe,
        };
        self.objects.insert(id, object);
        self.by_class.entry(class_id).or_default().push(id);
        Ok(id)
    }

    /// Fold new world points into an existing object: union the point sets,
    /// recompute centroid and extent, and run a filter update with the new
    /// centroid.
    pub fn refresh_object(
        &mut self,
        id: ObjectId,
        new_points: &[Vector3<f64>],
        bbox: Option<BoundingBox>,
        keyframe: u64,
        timestamp: Timestamp,
        tracker_cfg: &TrackerConfig,
    ) -> Result<()> {
        let object = self.objects.get(&id).ok_or(Error::UnknownObject(id.0))?;
        let class_id = object.class_id;
        let active = object
            .mappoint_ids
            .first()
            .and_then(|pid| self.points.get(pid))
            .map(|p| p.active)
            .unwrap_or(false);
        let added: Vec<PointId> = new_points
            .iter()
            .map(|p| self.add_object_point(id, class_id, *p, keyframe, active))
            .collect();

        let object = self.objects.get_mut(&id).expect("object exists");
        object.mappoint_ids.extend(added);
        let positions: Vec<Vector3<f64>> = object
            .mappoint_ids
            .iter()
            .filter_map(|pid| self.points.get(pid))
            .map(|p| p.position)
            .collect();
        let object = self.objects.get_mut(&id).expect("object exists");
        object.centroid = compute_centroid(&positions)?;
        object.extent = compute_extent(&positions, EXTENT_FRACTION);
        if let Some(bbox) = bbox {
            object.current_box = bbox;
        }
        object.last_seen_keyframe = keyframe;
        if !new_points.is_empty() {
            let z = compute_centroid(new_points)?;
            let (track, _innovation) = track_update(&object.track, &z, timestamp, tracker_cfg)?;
            object.track = track;
        }
        Ok(())
    }

    /// Merge the points of a retiring candidate object into `into`.
    /// The older object keeps its id and first bounding box.
    pub fn merge_points_into(
        &mut self,
        into: ObjectId,
        new_points: &[Vector3<f64>],
        current_box: BoundingBox,
        keyframe: u64,
        track: TrackState,
    ) -> Result<()> {
        let object = self.objects.get(&into).ok_or(Error::UnknownObject(into.0))?;
        let class_id = object.class_id;
        let active = is_object_points_active(self, object);
        let added: Vec<PointId> = new_points
            .iter()
            .map(|p| self.add_object_point(into, class_id, *p, keyframe, active))
            .collect();
        let object = self.objects.get_mut(&into).expect("object exists");
        object.mappoint_ids.extend(added);
        object.current_box = current_box;
        object.track = track;
        object.last_seen_keyframe = keyframe;
        let positions: Vec<Vector3<f64>> = object
            .mappoint_ids
            .iter()
            .filter_map(|pid| self.points.get(pid))
            .map(|p| p.position)
            .collect();
        let object = self.objects.get_mut(&into).expect("object exists");
        object.centroid = compute_centroid(&positions)?;
        object.extent = compute_extent(&positions, EXTENT_FRACTION);
        Ok(())
    }

    /// Re-derive the active flag of every point of `id` from the object's
    /// belief. Returns the flips, ordered by point id.
    pub fn apply_gating(&mut self, id: ObjectId, cfg: &PersistenceConfig) -> Result<Vec<GatingChange>> {
        let object = self.objects.get(&id).ok_or(Error::UnknownObject(id.0))?;
        let target = point_active(object.class_id, object.belief.bel, cfg);
        let point_ids = object.mappoint_ids.clone();
        let mut changes = Vec::new();
        for pid in point_ids {
            if let Some(point) = self.points.get_mut(&pid) {
                if point.active != target {
                    point.active = target;
                    changes.push(GatingChange {
                        object: id,
                        point: pid,
                        active: target,
                    });
                }
            }
        }
        changes.sort_by_key(|c| c.point);
        Ok(changes)
    }

    /// Referential integrity: every object point references an existing
    /// object of its class, and every object's point list exists with the
    /// object's class. Debug builds of the pipeline call this each keyframe.
    pub fn check_integrity(&self) -> Result<()> {
        for point in self.points.values() {
            match (point.class_id, point.object_id) {
                (BACKGROUND_CLASS, None) => {
                    if !point.active {
                        return Err(Error::Config(format!(
                            "background point {} is inactive",
                            point.id
                        )));
                    }
                }
                (class, Some(oid)) if class >= 0 => {
                    let object = self
                        .objects
                        .get(&oid)
                        .ok_or(Error::UnknownObject(oid.0))?;
                    if object.class_id != class {
                        return Err(Error::ClassMismatch {
                            point_class: class,
                            object_class: object.class_id,
                        });
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "point {} violates class/object pairing",
                        point.id
                    )))
                }
            }
        }
        for object in self.objects.values() {
            for pid in &object.mappoint_ids {
                let point = self
                    .points
                    .get(pid)
                    .ok_or_else(|| Error::Config(format!("dangling point id {pid}")))?;
                if point.object_id != Some(object.id) {
                    return Err(Error::Config(format!(
                        "point {} not owned by object {}",
                        pid, object.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serialize the gated map: objects whose belief clears the threshold
    /// (people are a-priori dynamic and never exported), then all active map
    /// points, both ordered by id.
    pub fn export(&self, cfg: &PersistenceConfig, config_hash: u64) -> String {
        let mut out = String::new();
        out.push_str("# beliefmap semantic map v1\n");
        let _ = writeln!(out, "# config_hash {config_hash:016x}");
        let exported: Vec<&MapObject> = self
            .objects
            .values()
            .filter(|o| o.class_id != PERSON_CLASS && is_active(o.belief.bel, cfg))
            .collect();
        let _ = writeln!(out, "objects {}", exported.len());
        for o in exported {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {}",
                o.id, o.class_id, o.centroid.x, o.centroid.y, o.centroid.z, o.extent.x, o.extent.y,
                o.extent.z, o.belief.bel
            );
        }
        let active_points: Vec<&MapPoint> = self.points.values().filter(|p| p.active).collect();
        let _ = writeln!(out, "points {}", active_points.len());
        for p in active_points {
            let oid = p.object_id.map(|o| o.0 as i64).unwrap_or(-1);
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                p.id, p.class_id, p.position.x, p.position.y, p.position.z, oid
            );
        }
        out
    }
}

fn is_object_points_active(map: &SemanticMap, object: &MapObject) -> bool {
    object
        .mappoint_ids
        .first()
        .and_then(|pid| map.points.get(pid))
        .map(|p| p.active)
        .unwrap_or(false)
}

fn point_active(class_id: i32, bel: f64, cfg: &PersistenceConfig) -> bool {
    class_id != PERSON_CLASS && is_active(bel, cfg)
}

/// One object record parsed back from an exported map.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedObject {
    pub id: u64,
    pub class_id: i32,
    pub centroid: Vector3<f64>,
    pub extent: Vector3<f64>,
    pub belief: f64,
}

/// One point record parsed back from an exported map.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedPoint {
    pub id: u64,
    pub class_id: i32,
    pub position: Vector3<f64>,
    pub object_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExportedMap {
    pub objects: Vec<ExportedObject>,
    pub points: Vec<ExportedPoint>,
}

/// Parse a map document produced by [`SemanticMap::export`].
pub fn parse_map(text: &str, source: &str) -> Result<ExportedMap> {
    enum Section {
        Preamble,
        Objects(usize),
        Points(usize),
    }
    let mut section = Section::Preamble;
    let mut map = ExportedMap::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::parse(source, line_no, msg);
        match section {
            Section::Preamble | Section::Objects(0) | Section::Points(0) => {
                let count: usize = fields
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("expected a section header with a count"))?;
                match fields[0] {
                    "objects" => section = Section::Objects(count),
                    "points" => section = Section::Points(count),
                    other => return Err(bad(&format!("unknown section '{other}'"))),
                }
            }
            Section::Objects(remaining) => {
                if fields.len() != 9 {
                    return Err(bad("object record needs 9 fields"));
                }
                let nums: Vec<f64> = fields
                    .iter()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(&format!("bad number: {e}")))?;
                map.objects.push(ExportedObject {
                    id: nums[0] as u64,
                    class_id: nums[1] as i32,
                    centroid: Vector3::new(nums[2], nums[3], nums[4]),
                    extent: Vector3::new(nums[5], nums[6], nums[7]),
                    belief: nums[8],
                });
                section = Section::Objects(remaining - 1);
            }
            Section::Points(remaining) => {
                if fields.len() != 6 {
                    return Err(bad("point record needs 6 fields"));
                }
                let nums: Vec<f64> = fields
                    .iter()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(&format!("bad number: {e}")))?;
                let oid = nums[5] as i64;
                map.points.push(ExportedPoint {
                    id: nums[0] as u64,
                    class_id: nums[1] as i32,
                    position: Vector3::new(nums[2], nums[3], nums[4]),
                    object_id: (oid >= 0).then_some(oid as u64),
                });
                section = Section::Points(remaining - 1);
            }
        }
    }
    Ok(map)
}
