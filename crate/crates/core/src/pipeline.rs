//! End-to-end runner: ingestion → keypoint classification → short-term
//! association → per-object tracking → keyframe mapping with long-term
//! association, persistence updates and map-point gating → artifacts.
//!
//! The single-threaded mode is the reference for determinism: identical
//! config and frames produce byte-identical outputs. The staged mode runs
//! ingestion, frame processing and artifact assembly as pipelined stages
//! over ordered channels; the map has a single writer (the processing
//! stage), so both modes produce the same result.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::mpsc;

use nalgebra::Vector3;

use crate::association::{
    associate_long_term, associate_short_term, LastFrameObject, MergeAction, ObjectCandidate,
};
use crate::classifier::{classify_keypoints, compute_box_depth_stats, detect_occlusions};
use crate::config::{LogLevel, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::Trajectory;
use crate::io;
use crate::map::SemanticMap;
use crate::persistence::{belief_update_miss, frustum_check};
use crate::tracker::{classify_dynamic, reset_velocity, track_init, track_predict, track_update};
use crate::types::{backproject, BoundingBox, Frame, ObjectId, PERSON_CLASS};

/// One record of the run's event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub frame: u64,
    pub keyframe: Option<u64>,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    ObjectCreated {
        object: ObjectId,
        class_id: i32,
    },
    Inserted {
        object: ObjectId,
        class_id: i32,
        points: usize,
    },
    Merged {
        candidate: ObjectId,
        into: ObjectId,
        distance: f64,
        belief_updated: bool,
    },
    BeliefUpdate {
        object: ObjectId,
        belief: f64,
        distance: f64,
    },
    BeliefMiss {
        object: ObjectId,
        belief: f64,
        consecutive: u64,
    },
    PointActivate {
        object: ObjectId,
        point: crate::types::PointId,
        belief: f64,
    },
    PointDeactivate {
        object: ObjectId,
        point: crate::types::PointId,
        belief: f64,
    },
    Dynamic {
        object: ObjectId,
        class_id: i32,
        speed: f64,
    },
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "frame={}", self.frame)?;
        if let Some(kf) = self.keyframe {
            write!(f, " kf={kf}")?;
        }
        match &self.kind {
            EventKind::ObjectCreated { object, class_id } => {
                write!(f, " event=object_created object={object} class={class_id}")
            }
            EventKind::Inserted {
                object,
                class_id,
                points,
            } => write!(
                f,
                " event=object_inserted object={object} class={class_id} points={points}"
            ),
            EventKind::Merged {
                candidate,
                into,
                distance,
                belief_updated,
            } => write!(
                f,
                " event=merge candidate={candidate} into={into} dist={distance} belief_updated={}",
                *belief_updated as u8
            ),
            EventKind::BeliefUpdate {
                object,
                belief,
                distance,
            } => write!(
                f,
                " event=belief_update object={object} belief={belief} dist={distance}"
            ),
            EventKind::BeliefMiss {
                object,
                belief,
                consecutive,
            } => write!(
                f,
                " event=belief_miss object={object} belief={belief} misses={consecutive}"
            ),
            EventKind::PointActivate {
                object,
                point,
                belief,
            } => write!(
                f,
                " event=point_activate object={object} point={point} belief={belief}"
            ),
            EventKind::PointDeactivate {
                object,
                point,
                belief,
            } => write!(
                f,
                " event=point_deactivate object={object} point={point} belief={belief}"
            ),
            EventKind::Dynamic {
                object,
                class_id,
                speed,
            } => write!(
                f,
                " event=dynamic object={object} class={class_id} speed={speed}"
            ),
        }
    }
}

/// Aggregate counters for the run summary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub frames: u64,
    pub keyframes: u64,
    pub objects_created: u64,
    pub merges: u64,
    pub inserts: u64,
    pub refreshes: u64,
    pub belief_updates: u64,
    pub belief_misses: u64,
    pub point_activations: u64,
    pub point_deactivations: u64,
    pub dynamic_events: u64,
    pub keypoints_in: u64,
    pub keypoints_removed: u64,
    pub map_objects: u64,
    pub map_points: u64,
    pub config_hash: u64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config_hash={:016x}", self.config_hash);
        let _ = writeln!(out, "frames={}", self.frames);
        let _ = writeln!(out, "keyframes={}", self.keyframes);
        let _ = writeln!(out, "objects_created={}", self.objects_created);
        let _ = writeln!(out, "merges={}", self.merges);
        let _ = writeln!(out, "inserts={}", self.inserts);
        let _ = writeln!(out, "refreshes={}", self.refreshes);
        let _ = writeln!(out, "belief_updates={}", self.belief_updates);
        let _ = writeln!(out, "belief_misses={}", self.belief_misses);
        let _ = writeln!(out, "point_activations={}", self.point_activations);
        let _ = writeln!(out, "point_deactivations={}", self.point_deactivations);
        let _ = writeln!(out, "dynamic_events={}", self.dynamic_events);
        let _ = writeln!(out, "keypoints_in={}", self.keypoints_in);
        let _ = writeln!(out, "keypoints_removed={}", self.keypoints_removed);
        let _ = writeln!(out, "map_objects={}", self.map_objects);
        let _ = writeln!(out, "map_points={}", self.map_points);
        out
    }
}

/// Everything a run produces, in memory.
#[derive(Debug)]
pub struct RunArtifacts {
    pub map: SemanticMap,
    pub events: Vec<Event>,
    pub summary: RunSummary,
    /// Camera poses passed through from the input.
    pub trajectory: Trajectory,
    pub map_text: String,
    pub events_text: String,
    pub summary_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    SingleThread,
    Staged,
}

/// Fraction of the image border inside which a non-detection does not
/// count as evidence of absence.
const MISS_BORDER_MARGIN: f64 = 0.08;
/// Depth slack (m) when deciding whether the surface observed at a mapped
/// centroid's pixel is in front of, at, or behind the expected spot.
const MISS_DEPTH_MARGIN: f64 = 0.1;
/// Consecutive frames at a new measurement-support level before the track
/// re-baselines.
const SUPPORT_REBASE_FRAMES: u32 = 3;

/// A tracked object in the per-frame working set.
struct WorkingObject {
    id: ObjectId,
    class_id: i32,
    first_box: BoundingBox,
    current_box: BoundingBox,
    track: crate::tracker::TrackState,
    map_link: Option<ObjectId>,
    last_detected_keyframe: u64,
    /// Established keypoint support of this object's measurements.
    support: usize,
    /// Pending support-level change: (new value, consecutive frames seen).
    support_anomaly: Option<(usize, u32)>,
    /// World points observed at the current keyframe, pending commit.
    pending_points: Vec<Vector3<f64>>,
    moving: bool,
}

struct PipelineState {
    map: SemanticMap,
    working: Vec<WorkingObject>,
    consecutive_misses: BTreeMap<ObjectId, u64>,
    summary: RunSummary,
    current_keyframe: u64,
}

impl PipelineState {
    fn new(cfg: &PipelineConfig) -> Self {
        PipelineState {
            map: SemanticMap::new(),
            working: Vec::new(),
            consecutive_misses: BTreeMap::new(),
            summary: RunSummary {
                config_hash: cfg.hash(),
                ..RunSummary::default()
            },
            current_keyframe: 0,
        }
    }
}

fn process_frame(
    frame: &Frame,
    state: &mut PipelineState,
    cfg: &PipelineConfig,
    events: &mut Vec<Event>,
) -> Result<()> {
    state.summary.frames += 1;
    state.summary.keypoints_in += frame.keypoints.len() as u64;
    let is_keyframe = frame.id.is_multiple_of(cfg.mapping.keyframe_every);
    let keyframe_id = frame.id / cfg.mapping.keyframe_every;
    if is_keyframe {
        state.current_keyframe = keyframe_id;
        state.summary.keyframes += 1;
    }
    let event_kf = is_keyframe.then_some(keyframe_id);

    // ---- box statistics and occlusion analysis
    let stats: Vec<_> = frame
        .detections
        .iter()
        .map(|d| compute_box_depth_stats(&d.bbox, &frame.depth, cfg.classifier.stride).ok())
        .collect();
    let verdicts = detect_occlusions(&frame.detections, &stats, &frame.depth, &cfg.classifier);

    // ---- short-term association against the working set
    let last_frame: Vec<LastFrameObject> = state
        .working
        .iter()
        .map(|w| LastFrameObject {
            id: w.id,
            class_id: w.class_id,
            bbox: w.current_box,
        })
        .collect();
    let short_term = associate_short_term(&frame.detections, &last_frame, &cfg.assoc);

    // detection indices whose matched object is currently classified moving
    let moving_boxes: Vec<usize> = short_term
        .matches
        .iter()
        .filter(|(_, id)| {
            state
                .working
                .iter()
                .any(|w| w.id == *id && w.moving)
        })
        .map(|(det, _)| *det)
        .collect();

    // ---- keypoint classification with feature repopulation
    let classification =
        classify_keypoints(frame, &verdicts, &stats, &moving_boxes, &cfg.classifier);
    state.summary.keypoints_removed += classification.removed_count as u64;

    // ---- world-frame centroid measurement per detection
    type Measurement = (Vector3<f64>, Vec<Vector3<f64>>);
    let mut measurements: Vec<Option<Measurement>> = Vec::with_capacity(frame.detections.len());
    for (det_index, object_kps) in classification.object_keypoints.iter().enumerate() {
        if classification.box_skipped[det_index] {
            measurements.push(None);
            continue;
        }
        let points: Vec<Vector3<f64>> = object_kps
            .iter()
            .filter(|kp| kp.has_depth())
            .filter_map(|kp| backproject(kp, &cfg.camera, &frame.camera_pose).ok())
            .collect();
        if points.is_empty() {
            measurements.push(None);
        } else {
            let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
            measurements.push(Some((centroid, points)));
        }
    }

    // ---- track updates for matched objects
    for (det_index, object_id) in &short_term.matches {
        let object = state
            .working
            .iter_mut()
            .find(|w| w.id == *object_id)
            .expect("matched object is in the working set");
        object.current_box = frame.detections[*det_index].bbox;
        object.last_detected_keyframe = state.current_keyframe;
        if let Some((centroid, points)) = &measurements[*det_index] {
            // support consistency: when an overlapping box claims part of
            // this object's keypoints (or releases them again), the centroid
            // of the changed subset is shifted, and a settled filter would
            // read that step as velocity. Updates only run at the
            // established support level; a persistent change re-baselines
            // the track with a fresh filter so the shift lands in position.
            let support = points.len();
            if support == object.support {
                object.support_anomaly = None;
            } else {
                match &mut object.support_anomaly {
                    Some((value, count)) if *value == support => *count += 1,
                    other => *other = Some((support, 1)),
                }
                match object.support_anomaly {
                    Some((_, count)) if count >= SUPPORT_REBASE_FRAMES => {
                        object.track = track_init(centroid, frame.timestamp, &cfg.ekf);
                        object.support = support;
                        object.support_anomaly = None;
                        object.moving = false;
                    }
                    _ => continue,
                }
            }
            let dt = frame.timestamp.seconds() - object.track.last_update.seconds();
            if dt > 0.0 {
                object.track = track_predict(&object.track, dt, &cfg.ekf)?;
            }
            let (next, _innovation) =
                track_update(&object.track, centroid, frame.timestamp, &cfg.ekf)?;
            object.track = next;
            object.moving = classify_dynamic(&object.track, &cfg.ekf);
            object.last_detected_keyframe = state.current_keyframe;
            if is_keyframe && !object.moving && object.class_id != PERSON_CLASS {
                object.pending_points.extend(points.iter().copied());
            }
        }
    }

    // ---- new objects from unmatched detections
    for det_index in &short_term.new_objects {
        if let Some((centroid, points)) = &measurements[*det_index] {
            let detection = &frame.detections[*det_index];
            let id = state.map.allocate_object_id();
            let mut object = WorkingObject {
                id,
                class_id: detection.class_id,
                first_box: detection.bbox,
                current_box: detection.bbox,
                track: track_init(centroid, frame.timestamp, &cfg.ekf),
                map_link: None,
                last_detected_keyframe: state.current_keyframe,
                support: points.len(),
                support_anomaly: None,
                pending_points: Vec::new(),
                moving: false,
            };
            if is_keyframe && object.class_id != PERSON_CLASS {
                object.pending_points.extend(points.iter().copied());
            }
            state.working.push(object);
            state.summary.objects_created += 1;
            events.push(Event {
                frame: frame.id,
                keyframe: event_kf,
                kind: EventKind::ObjectCreated {
                    object: id,
                    class_id: detection.class_id,
                },
            });
        }
    }

    // ---- per-frame dynamic verdicts
    for object in &state.working {
        if object.moving {
            state.summary.dynamic_events += 1;
            events.push(Event {
                frame: frame.id,
                keyframe: event_kf,
                kind: EventKind::Dynamic {
                    object: object.id,
                    class_id: object.class_id,
                    speed: object.track.speed(),
                },
            });
        }
    }

    if !is_keyframe {
        return Ok(());
    }

    // ---- keyframe: commit background points
    let mut background_added = 0;
    for kp in &classification.keypoints {
        if kp.class_id == crate::types::BACKGROUND_CLASS && kp.has_depth() {
            if background_added >= 10 {
                break;
            }
            if let Ok(position) = backproject(kp, &cfg.camera, &frame.camera_pose) {
                state.map.add_background_point(position, keyframe_id);
                background_added += 1;
            }
        }
    }

    // ---- keyframe: long-term association of candidates with new points
    let candidates: Vec<ObjectCandidate> = state
        .working
        .iter()
        .filter(|w| !w.pending_points.is_empty())
        .map(|w| ObjectCandidate {
            id: w.id,
            class_id: w.class_id,
            first_box: w.first_box,
            current_box: w.current_box,
            points: w.pending_points.clone(),
            track: w.track,
            map_link: w.map_link,
        })
        .collect();
    let actions = associate_long_term(
        &candidates,
        &mut state.map,
        keyframe_id,
        frame.timestamp,
        &cfg.assoc,
        &cfg.persistence,
        &cfg.ekf,
    )?;
    for (candidate, action) in candidates.iter().zip(&actions) {
        match action {
            MergeAction::Merged {
                candidate: cand_id,
                into,
                distance,
                belief_updated,
                belief,
                gating,
            } => {
                state.summary.merges += 1;
                state.consecutive_misses.remove(into);
                events.push(Event {
                    frame: frame.id,
                    keyframe: event_kf,
                    kind: EventKind::Merged {
                        candidate: *cand_id,
                        into: *into,
                        distance: *distance,
                        belief_updated: *belief_updated,
                    },
                });
                if *belief_updated {
                    state.summary.belief_updates += 1;
                    events.push(Event {
                        frame: frame.id,
                        keyframe: event_kf,
                        kind: EventKind::BeliefUpdate {
                            object: *into,
                            belief: *belief,
                            distance: *distance,
                        },
                    });
                    push_gating_events(gating, *belief, frame.id, event_kf, events, &mut state.summary);
                }
                let object = state
                    .working
                    .iter_mut()
                    .find(|w| w.id == candidate.id)
                    .expect("candidate from working set");
                object.map_link = Some(*into);
            }
            MergeAction::Inserted { object } => {
                state.summary.inserts += 1;
                state.consecutive_misses.remove(object);
                events.push(Event {
                    frame: frame.id,
                    keyframe: event_kf,
                    kind: EventKind::Inserted {
                        object: *object,
                        class_id: candidate.class_id,
                        points: candidate.points.len(),
                    },
                });
                let working = state
                    .working
                    .iter_mut()
                    .find(|w| w.id == candidate.id)
                    .expect("candidate from working set");
                working.map_link = Some(*object);
            }
            MergeAction::Refreshed { object } => {
                state.summary.refreshes += 1;
                state.consecutive_misses.remove(object);
            }
        }
    }
    for object in state.working.iter_mut() {
        object.pending_points.clear();
    }

    // ---- keyframe: misses for observable map objects nobody matched
    let seen_this_keyframe: Vec<ObjectId> = state
        .map
        .objects()
        .filter(|o| o.last_seen_keyframe == keyframe_id)
        .map(|o| o.id)
        .collect();
    let miss_ids: Vec<ObjectId> = state
        .map
        .objects()
        .filter(|o| !seen_this_keyframe.contains(&o.id))
        .filter(|o| {
            frustum_check(
                &o.centroid,
                &frame.camera_pose,
                &cfg.camera,
                cfg.persistence.max_range,
            )
        })
        .filter(|o| {
            // absence only counts when the spot is well inside the image
            // (detectors fail on border-cropped objects), the depth image
            // has a reading there that is not in front of the spot (an
            // occluder hides it), and any detection box covering the
            // projection sits at a consistent depth — seeing a surface
            // clearly behind the spot means the object is gone even if a
            // neighboring box overlaps the pixel
            let margin_u = MISS_BORDER_MARGIN * cfg.camera.width;
            let margin_v = MISS_BORDER_MARGIN * cfg.camera.height;
            match crate::types::project(&o.centroid, &cfg.camera, &frame.camera_pose) {
                Some((u, v, expected_z)) => {
                    if u < margin_u
                        || u >= cfg.camera.width - margin_u
                        || v < margin_v
                        || v >= cfg.camera.height - margin_v
                    {
                        return false;
                    }
                    let observed = frame.depth.depth_at(u, v);
                    if observed <= 0.0 || observed < expected_z - MISS_DEPTH_MARGIN {
                        return false;
                    }
                    let covered = frame.detections.iter().any(|d| d.bbox.contains(u, v));
                    !(covered && observed <= expected_z + MISS_DEPTH_MARGIN)
                }
                None => false,
            }
        })
        .map(|o| o.id)
        .collect();
    for id in miss_ids {
        let object = state.map.object_mut(id).expect("object exists");
        object.belief = belief_update_miss(&object.belief, keyframe_id, &cfg.persistence);
        let belief = object.belief.bel;
        let misses = state.consecutive_misses.entry(id).or_insert(0);
        *misses += 1;
        let consecutive = *misses;
        state.summary.belief_misses += 1;
        events.push(Event {
            frame: frame.id,
            keyframe: event_kf,
            kind: EventKind::BeliefMiss {
                object: id,
                belief,
                consecutive,
            },
        });
        let gating = state.map.apply_gating(id, &cfg.persistence)?;
        push_gating_events(&gating, belief, frame.id, event_kf, events, &mut state.summary);
    }

    // ---- keyframe: working-set upkeep
    let window = cfg.assoc.keyframe_window_n;
    state
        .working
        .retain(|w| keyframe_id.saturating_sub(w.last_detected_keyframe) <= window);
    // stale velocities on long-unseen map objects
    for object in state.map.objects_mut() {
        if keyframe_id.saturating_sub(object.last_seen_keyframe) > window
            && object.track.speed() > 0.0
        {
            reset_velocity(&mut object.track, &cfg.ekf);
        }
    }

    if cfg.log_level == LogLevel::Debug {
        state.map.check_integrity()?;
    }
    Ok(())
}

fn push_gating_events(
    gating: &[crate::map::GatingChange],
    belief: f64,
    frame: u64,
    keyframe: Option<u64>,
    events: &mut Vec<Event>,
    summary: &mut RunSummary,
) {
    for change in gating {
        let kind = if change.active {
            summary.point_activations += 1;
            EventKind::PointActivate {
                object: change.object,
                point: change.point,
                belief,
            }
        } else {
            summary.point_deactivations += 1;
            EventKind::PointDeactivate {
                object: change.object,
                point: change.point,
                belief,
            }
        };
        events.push(Event {
            frame,
            keyframe,
            kind,
        });
    }
}

fn finish(
    state: PipelineState,
    events: Vec<Event>,
    trajectory: Trajectory,
    cfg: &PipelineConfig,
) -> RunArtifacts {
    let mut summary = state.summary;
    summary.map_objects = state.map.object_count() as u64;
    summary.map_points = state.map.point_count() as u64;
    let map_text = state.map.export(&cfg.persistence, cfg.hash());
    let mut events_text = String::new();
    for event in &events {
        let _ = writeln!(events_text, "{event}");
    }
    RunArtifacts {
        map: state.map,
        events,
        summary,
        trajectory,
        map_text,
        events_text,
        summary_text: summary.to_text(),
    }
}

/// Run the pipeline over an in-memory frame sequence.
pub fn run_pipeline(
    frames: Vec<Frame>,
    cfg: &PipelineConfig,
    mode: ExecutionMode,
) -> Result<RunArtifacts> {
    cfg.validate()?;
    match mode {
        ExecutionMode::SingleThread => run_single_thread(frames, cfg),
        ExecutionMode::Staged => run_staged(frames, cfg),
    }
}

fn build_trajectory(frames: &[Frame]) -> Result<Trajectory> {
    let mut trajectory = Trajectory::new();
    for frame in frames {
        trajectory.push(frame.timestamp, frame.camera_pose)?;
    }
    Ok(trajectory)
}

fn run_single_thread(frames: Vec<Frame>, cfg: &PipelineConfig) -> Result<RunArtifacts> {
    let trajectory = build_trajectory(&frames)?;
    let mut state = PipelineState::new(cfg);
    let mut events = Vec::new();
    for frame in &frames {
        process_frame(frame, &mut state, cfg, &mut events)?;
    }
    Ok(finish(state, events, trajectory, cfg))
}

/// Staged execution: ingestion feeds frames over a bounded channel to the
/// processing stage (the map's single writer), which streams event batches
/// to an assembly stage. Ordering is preserved end to end.
fn run_staged(frames: Vec<Frame>, cfg: &PipelineConfig) -> Result<RunArtifacts> {
    let trajectory = build_trajectory(&frames)?;
    let (frame_tx, frame_rx) = mpsc::sync_channel::<Frame>(8);
    let (event_tx, event_rx) = mpsc::sync_channel::<Vec<Event>>(8);

    std::thread::scope(|scope| -> Result<RunArtifacts> {
        let ingest = scope.spawn(move || {
            for frame in frames {
                if frame_tx.send(frame).is_err() {
                    return;
                }
            }
        });
        let assembler = scope.spawn(move || {
            let mut events = Vec::new();
            while let Ok(mut batch) = event_rx.recv() {
                events.append(&mut batch);
            }
            events
        });

        let mut state = PipelineState::new(cfg);
        let mut process_result = Ok(());
        while let Ok(frame) = frame_rx.recv() {
            let mut batch = Vec::new();
            process_result = process_frame(&frame, &mut state, cfg, &mut batch);
            if event_tx.send(batch).is_err() || process_result.is_err() {
                break;
            }
        }
        drop(event_tx);
        ingest.join().expect("ingest stage panicked");
        let events = assembler.join().expect("assembly stage panicked");
        process_result?;
        Ok(finish(state, events, trajectory, cfg))
    })
}

/// Artifact file names inside the output directory.
pub const MAP_FILE: &str = "map.txt";
pub const EVENTS_FILE: &str = "events.log";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const TRAJECTORY_FILE: &str = "trajectory.txt";

/// Load a sequence directory, run the pipeline, and write the artifacts
/// (`map.txt` or `map_out` override, `events.log`, `summary.txt`,
/// `trajectory.txt`) into `out_dir`.
pub fn run_pipeline_files(
    frames_dir: &Path,
    out_dir: &Path,
    map_out: Option<&Path>,
    cfg: &PipelineConfig,
    mode: ExecutionMode,
) -> Result<RunArtifacts> {
    let loaded = io::load_sequence(frames_dir, &cfg.camera)?;
    if cfg.log_level != LogLevel::Quiet {
        for warning in &loaded.warnings {
            eprintln!("warning: {warning}");
        }
        eprintln!("loaded {} frames from {}", loaded.frames.len(), frames_dir.display());
    }
    let artifacts = run_pipeline(loaded.frames, cfg, mode)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let map_path = map_out
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| out_dir.join(MAP_FILE));
    io::write_file(&map_path, &artifacts.map_text)?;
    io::write_file(&out_dir.join(EVENTS_FILE), &artifacts.events_text)?;
    io::write_file(&out_dir.join(SUMMARY_FILE), &artifacts.summary_text)?;
    io::write_file(
        &out_dir.join(TRAJECTORY_FILE),
        &io::format_trajectory(&artifacts.trajectory),
    )?;
    Ok(artifacts)
}
