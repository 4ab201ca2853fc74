//! Deterministic scenario generator: a camera wandering a walled room past
//! objects that can be moved, removed or replaced while out of its view,
//! plus a walking-person scenario for the dynamic-object path.
//!
//! Frames carry symbolic sensing only: detections, depth-tagged keypoints
//! and a rectangle depth image; no pixels are rendered. Everything is a
//! pure function of the scenario spec and its seed.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::io;
use crate::types::{
    BoundingBox, CameraIntrinsics, Detection, Frame, Keypoint, Pose, RegionDepthMap, Timestamp,
};

/// Half-extent of the square room in x and y (walls at ±ROOM_HALF).
const ROOM_HALF: f64 = 3.0;
/// Keypoints sampled on the background per frame.
const BACKGROUND_KEYPOINTS: usize = 14;
/// Per-object keypoint grid (GRID x GRID on the face toward the room).
const GRID: usize = 3;
/// Pixel noise sigma.
const PIXEL_SIGMA: f64 = 0.5;
/// Depth noise sigma as a fraction of range.
const DEPTH_SIGMA_FRACTION: f64 = 0.01;
/// Camera height jitter sigma (m) and yaw jitter sigma (rad).
const POSE_JITTER_Z: f64 = 0.002;
const POSE_JITTER_YAW: f64 = 0.1 * std::f64::consts::PI / 180.0;
/// Minimum camera-frame depth for a detection.
const MIN_DETECTION_DEPTH: f64 = 0.2;

pub const CLASS_PERSON: i32 = 0;
pub const CLASS_UMBRELLA: i32 = 25;
pub const CLASS_SUITCASE: i32 = 28;
pub const CLASS_MUG: i32 = 41;
pub const CLASS_CHAIR: i32 = 56;
pub const CLASS_TVMONITOR: i32 = 62;
pub const CLASS_BOOK: i32 = 73;
pub const CLASS_TEDDY_BEAR: i32 = 77;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Static,
    OneChair,
    Vanishing,
    Changing,
    Shift,
    Replacing,
    WalkingPerson,
}

impl ScenarioKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "static" => Ok(ScenarioKind::Static),
            "onechair" => Ok(ScenarioKind::OneChair),
            "vanishing" => Ok(ScenarioKind::Vanishing),
            "changing" => Ok(ScenarioKind::Changing),
            "shift" => Ok(ScenarioKind::Shift),
            "replacing" => Ok(ScenarioKind::Replacing),
            "walkingperson" => Ok(ScenarioKind::WalkingPerson),
            other => Err(Error::InvalidScenario(format!("unknown scenario '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Static => "Static",
            ScenarioKind::OneChair => "OneChair",
            ScenarioKind::Vanishing => "Vanishing",
            ScenarioKind::Changing => "Changing",
            ScenarioKind::Shift => "Shift",
            ScenarioKind::Replacing => "Replacing",
            ScenarioKind::WalkingPerson => "WalkingPerson",
        }
    }

    /// Changing-environment scenarios require object events to happen out of
    /// the camera's view.
    fn enforces_out_of_view_events(&self) -> bool {
        !matches!(self, ScenarioKind::WalkingPerson)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraPath {
    /// Counter-clockwise orbit on a circle, camera facing radially outward.
    Orbit {
        radius: f64,
        height: f64,
        frames_per_loop: u64,
        start_deg: f64,
    },
    /// Small oscillating arc segment, camera facing radially outward.
    Arc {
        radius: f64,
        height: f64,
        center_deg: f64,
        amplitude_deg: f64,
        period_frames: u64,
    },
}

impl CameraPath {
    fn angle_at(&self, frame: u64) -> f64 {
        match self {
            CameraPath::Orbit {
                frames_per_loop,
                start_deg,
                ..
            } => {
                start_deg.to_radians()
                    + std::f64::consts::TAU * frame as f64 / *frames_per_loop as f64
            }
            CameraPath::Arc {
                center_deg,
                amplitude_deg,
                period_frames,
                ..
            } => {
                center_deg.to_radians()
                    + amplitude_deg.to_radians()
                        * (std::f64::consts::TAU * frame as f64 / *period_frames as f64).sin()
            }
        }
    }

    fn radius_height(&self) -> (f64, f64) {
        match self {
            CameraPath::Orbit { radius, height, .. } => (*radius, *height),
            CameraPath::Arc { radius, height, .. } => (*radius, *height),
        }
    }

    /// Unjittered camera pose at a frame: on the circle, level, facing
    /// radially outward (camera z forward, y down).
    fn pose_at(&self, frame: u64) -> Pose {
        let theta = self.angle_at(frame);
        let (radius, height) = self.radius_height();
        camera_pose(radius, height, theta, 0.0, 0.0)
    }
}

fn camera_pose(radius: f64, height: f64, theta: f64, dz: f64, dyaw: f64) -> Pose {
    let theta = theta + dyaw;
    let (s, c) = theta.sin_cos();
    // columns: camera x (right), y (down), z (forward) in world coordinates
    let rot = Matrix3::from_columns(&[
        Vector3::new(s, -c, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(c, s, 0.0),
    ]);
    Pose::new(
        Vector3::new(radius * theta.cos(), radius * theta.sin(), height + dz),
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rot)),
    )
}

/// An object initially placed in the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInit {
    pub key: String,
    pub class_id: i32,
    /// Axis-aligned box dimensions (m).
    pub size: Vector3<f64>,
    /// Box center (m).
    pub position: Vector3<f64>,
    /// Present from the first frame (placed objects start absent).
    pub present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventAction {
    Place { position: Vector3<f64> },
    Remove,
    MoveTo { position: Vector3<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectEvent {
    pub frame: u64,
    pub key: String,
    pub action: EventAction,
}

/// Scripted back-and-forth walk along x at fixed y: an initial pause, then
/// alternating passes with pauses at the turning points.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerSpec {
    pub key: String,
    pub class_id: i32,
    pub size: Vector3<f64>,
    pub y: f64,
    pub z: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub speed: f64,
    pub start_pause: u64,
    pub end_pause: u64,
    pub passes: u32,
}

impl WalkerSpec {
    /// Position and velocity at a frame.
    fn state_at(&self, frame: u64, frame_rate: f64) -> (Vector3<f64>, Vector3<f64>) {
        let span = self.x_max - self.x_min;
        let pass_frames = (span / self.speed * frame_rate).round() as u64;
        let mut f = frame;
        if f < self.start_pause {
            return (Vector3::new(self.x_min, self.y, self.z), Vector3::zeros());
        }
        f -= self.start_pause;
        let mut from_min = true;
        for _ in 0..self.passes {
            if f < pass_frames {
                let progress = f as f64 / pass_frames as f64 * span;
                let (x, v) = if from_min {
                    (self.x_min + progress, self.speed)
                } else {
                    (self.x_max - progress, -self.speed)
                };
                return (Vector3::new(x, self.y, self.z), Vector3::new(v, 0.0, 0.0));
            }
            f -= pass_frames;
            let end_x = if from_min { self.x_max } else { self.x_min };
            if f < self.end_pause {
                return (Vector3::new(end_x, self.y, self.z), Vector3::zeros());
            }
            f -= self.end_pause;
            from_min = !from_min;
        }
        let final_x = if self.passes.is_multiple_of(2) { self.x_min } else { self.x_max };
        (Vector3::new(final_x, self.y, self.z), Vector3::zeros())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    pub seed: u64,
    pub frame_count: u64,
    pub frame_rate: f64,
    pub camera: CameraPath,
    pub objects: Vec<ObjectInit>,
    pub events: Vec<ObjectEvent>,
    pub walker: Option<WalkerSpec>,
}

/// Per-object ground truth at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTruth {
    pub key: String,
    pub class_id: i32,
    pub center: Vector3<f64>,
    pub present: bool,
    pub velocity: Vector3<f64>,
    pub in_frustum: bool,
}

/// Ground truth for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub frame_id: u64,
    pub camera: Pose,
    pub objects: Vec<ObjectTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub frames: Vec<Frame>,
    pub truth: Vec<GroundTruthFrame>,
}

impl SimOutput {
    /// Objects present at the final frame, as (class, true center) pairs.
    pub fn final_truth(&self) -> Vec<crate::eval::TruthObject> {
        self.truth
            .last()
            .map(|gt| {
                gt.objects
                    .iter()
                    .filter(|o| o.present)
                    .map(|o| crate::eval::TruthObject {
                        class_id: o.class_id,
                        position: o.center,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

fn object_size(class_id: i32) -> Vector3<f64> {
    match class_id {
        CLASS_PERSON => Vector3::new(0.5, 0.3, 1.7),
        CLASS_UMBRELLA => Vector3::new(0.2, 0.2, 1.0),
        CLASS_SUITCASE => Vector3::new(0.45, 0.2, 0.55),
        CLASS_MUG => Vector3::new(0.1, 0.1, 0.12),
        CLASS_CHAIR => Vector3::new(0.5, 0.5, 0.9),
        CLASS_TVMONITOR => Vector3::new(0.5, 0.12, 0.35),
        CLASS_BOOK => Vector3::new(0.25, 0.2, 0.15),
        CLASS_TEDDY_BEAR => Vector3::new(0.3, 0.3, 0.3),
        _ => Vector3::new(0.4, 0.4, 0.4),
    }
}

fn obj(key: &str, class_id: i32, x: f64, y: f64, z: f64) -> ObjectInit {
    ObjectInit {
        key: key.into(),
        class_id,
        size: object_size(class_id),
        position: Vector3::new(x, y, z),
        present: true,
    }
}

fn move_to(frame: u64, key: &str, x: f64, y: f64, z: f64) -> ObjectEvent {
    ObjectEvent {
        frame,
        key: key.into(),
        action: EventAction::MoveTo {
            position: Vector3::new(x, y, z),
        },
    }
}

fn remove(frame: u64, key: &str) -> ObjectEvent {
    ObjectEvent {
        frame,
        key: key.into(),
        action: EventAction::Remove,
    }
}

impl ScenarioSpec {
    /// The built-in scenario archetypes. The camera orbits a small circle
    /// facing outward (one 600-frame loop per minute at 10 Hz, roughly
    /// 0.08 m/s); the object zone near the north wall enters its view for a
    /// stretch of every loop, and scripted changes happen while the camera
    /// faces the opposite wall.
    pub fn builtin(name: ScenarioKind, seed: u64) -> ScenarioSpec {
        let orbit = CameraPath::Orbit {
            radius: 0.75,
            height: 0.4,
            frames_per_loop: 600,
            start_deg: 90.0,
        };
        let mut spec = ScenarioSpec {
            name,
            seed,
            frame_count: 1400,
            frame_rate: 10.0,
            camera: orbit,
            objects: Vec::new(),
            events: Vec::new(),
            walker: None,
        };
        match name {
            ScenarioKind::Static => {
                spec.objects = vec![
                    obj("chair", CLASS_CHAIR, -0.8, 2.5, 0.45),
                    obj("teddy", CLASS_TEDDY_BEAR, 0.5, 2.45, 0.15),
                ];
            }
            ScenarioKind::OneChair => {
                spec.frame_count = 2500;
                spec.objects = vec![obj("chair", CLASS_CHAIR, -0.5, 2.5, 0.45)];
                spec.events = vec![move_to(1500, "chair", 1.3, 2.5, 0.45)];
            }
            ScenarioKind::Vanishing => {
                spec.objects = vec![
                    obj("chair", CLASS_CHAIR, -0.7, 2.5, 0.45),
                    obj("teddy", CLASS_TEDDY_BEAR, 0.4, 2.45, 0.15),
                    obj("umbrella", CLASS_UMBRELLA, 0.9, 2.55, 0.5),
                ];
                spec.events = vec![
                    remove(900, "chair"),
                    remove(900, "teddy"),
                    remove(900, "umbrella"),
                ];
            }
            ScenarioKind::Changing => {
                spec.frame_count = 2000;
                spec.objects = vec![
                    obj("chair_left", CLASS_CHAIR, -1.0, 2.55, 0.45),
                    obj("chair_right", CLASS_CHAIR, 1.0, 2.55, 0.45),
                    obj("umbrella_left", CLASS_UMBRELLA, -1.7, 2.6, 0.5),
                    obj("umbrella_right", CLASS_UMBRELLA, 1.7, 2.6, 0.5),
                    obj("teddy", CLASS_TEDDY_BEAR, -0.35, 2.45, 0.15),
                ];
                spec.events = vec![move_to(900, "teddy", 0.35, 2.45, 0.15)];
            }
            ScenarioKind::Shift => {
                spec.frame_count = 3100;
                // movers relocate to a back row near the wall: a spot can
                // only be occluded by something between it and the camera,
                // so the vacated front-row spots stay observable
                spec.objects = vec![
                    obj("umbrella", CLASS_UMBRELLA, -1.8, 2.55, 0.5),
                    obj("chair", CLASS_CHAIR, -0.6, 2.5, 0.45),
                    obj("teddy", CLASS_TEDDY_BEAR, -1.15, 2.5, 0.15),
                    obj("suitcase", CLASS_SUITCASE, 0.7, 2.55, 0.275),
                    obj("monitor", CLASS_TVMONITOR, 1.25, 2.55, 0.175),
                    obj("mug", CLASS_MUG, 1.7, 2.55, 0.06),
                ];
                spec.events = vec![
                    move_to(1500, "umbrella", 1.7, 2.9, 0.5),
                    move_to(1500, "chair", 0.15, 2.9, 0.45),
                    move_to(1500, "teddy", 0.85, 2.9, 0.15),
                    move_to(2100, "suitcase", -1.3, 2.9, 0.275),
                    move_to(2100, "monitor", -0.6, 2.9, 0.175),
                    move_to(2100, "mug", -1.75, 2.9, 0.06),
                ];
            }
            ScenarioKind::Replacing => {
                spec.frame_count = 2000;
                spec.objects = vec![
                    obj("chair_books", CLASS_CHAIR, -0.9, 2.5, 0.45),
                    obj("books", CLASS_BOOK, -1.55, 2.5, 0.075),
                    obj("chair_teddy", CLASS_CHAIR, 0.7, 2.5, 0.45),
                    obj("teddy", CLASS_TEDDY_BEAR, 1.25, 2.45, 0.15),
                    obj("suitcase", CLASS_SUITCASE, 1.85, 2.6, 0.275),
                    obj("monitor", CLASS_TVMONITOR, -0.15, 2.65, 0.175),
                    ObjectInit {
                        present: false,
                        ..obj("umbrella", CLASS_UMBRELLA, 0.3, 2.6, 0.5)
                    },
                ];
                spec.events = vec![
                    remove(900, "chair_teddy"),
                    remove(900, "teddy"),
                    ObjectEvent {
                        frame: 900,
                        key: "umbrella".into(),
                        action: EventAction::Place {
                            position: Vector3::new(0.3, 2.6, 0.5),
                        },
                    },
                    remove(1500, "chair_books"),
                    remove(1500, "books"),
                ];
            }
            ScenarioKind::WalkingPerson => {
                // the walk extends past both sides of the view so direction
                // reversals happen out of frustum; every visible stretch is
                // a steady 0.5 m/s crossing
                spec.frame_count = 340;
                spec.camera = CameraPath::Arc {
                    radius: 0.3,
                    height: 0.4,
                    center_deg: 90.0,
                    amplitude_deg: 1.0,
                    period_frames: 200,
                };
                spec.objects = vec![
                    obj("chair", CLASS_CHAIR, -0.55, 2.95, 0.45),
                    obj("monitor", CLASS_TVMONITOR, 0.55, 2.95, 0.175),
                ];
                spec.walker = Some(WalkerSpec {
                    key: "person".into(),
                    class_id: CLASS_PERSON,
                    size: Vector3::new(0.5, 0.3, 1.4),
                    y: 2.15,
                    z: 0.7,
                    x_min: -2.0,
                    x_max: 2.0,
                    speed: 0.5,
                    start_pause: 0,
                    end_pause: 0,
                    passes: 4,
                });
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count == 0 || !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::InvalidScenario(
                "frame_count and frame_rate must be positive".into(),
            ));
        }
        for event in &self.events {
            if event.frame >= self.frame_count {
                return Err(Error::InvalidScenario(format!(
                    "event at frame {} beyond frame_count {}",
                    event.frame, self.frame_count
                )));
            }
            if !self.objects.iter().any(|o| o.key == event.key) {
                return Err(Error::InvalidScenario(format!(
                    "event references unknown object '{}'",
                    event.key
                )));
            }
        }
        Ok(())
    }
}

/// Distance from the camera to the nearest wall along its optical axis.
fn wall_distance(position: &Vector3<f64>, direction: &Vector3<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for (p, d, wall) in [
        (position.x, direction.x, ROOM_HALF),
        (position.x, direction.x, -ROOM_HALF),
        (position.y, direction.y, ROOM_HALF),
        (position.y, direction.y, -ROOM_HALF),
    ] {
        if d.abs() > 1e-12 {
            let t = (wall - p) / d;
            if t > 0.0 && t < best {
                best = t;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        2.0 * ROOM_HALF
    }
}

fn gauss(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2 = rng.random_range(0.0..1.0f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Box corners of an axis-aligned object.
fn corners(center: &Vector3<f64>, size: &Vector3<f64>) -> [Vector3<f64>; 8] {
    let h = size / 2.0;
    let mut out = [Vector3::zeros(); 8];
    let mut i = 0;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out[i] = center + Vector3::new(sx * h.x, sy * h.y, sz * h.z);
                i += 1;
            }
        }
    }
    out
}

/// Fixed keypoint grid on the face toward the room interior (-y face).
/// People get a single center column: their features cluster on the torso
/// midline, and a column keeps the measured centroid stable however much of
/// the silhouette is cropped.
fn face_grid(center: &Vector3<f64>, size: &Vector3<f64>, class_id: i32) -> Vec<Vector3<f64>> {
    let x_span = if class_id == CLASS_PERSON { 0.0 } else { 0.9 };
    let mut points = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            let fx = (i as f64 + 0.5) / GRID as f64 - 0.5;
            let fz = (j as f64 + 0.5) / GRID as f64 - 0.5;
            points.push(
                center
                    + Vector3::new(fx * size.x * x_span, -size.y / 2.0, fz * size.z * 0.9),
            );
        }
    }
    points
}

struct LiveObject {
    key: String,
    class_id: i32,
    size: Vector3<f64>,
    position: Vector3<f64>,
    present: bool,
    velocity: Vector3<f64>,
}

/// Projection footprint of a present object in the current frame.
struct Footprint {
    bbox: BoundingBox,
    near_depth: f64,
    centroid_in_frustum: bool,
}

fn footprint(
    object_position: &Vector3<f64>,
    size: &Vector3<f64>,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Option<Footprint> {
    let mut min_u = f64::INFINITY;
    let mut max_u = f64::NEG_INFINITY;
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    let mut near = f64::INFINITY;
    for corner in corners(object_position, size) {
        let (u, v, z) = crate::types::project(&corner, intr, pose)?;
        min_u = min_u.min(u);
        max_u = max_u.max(u);
        min_v = min_v.min(v);
        max_v = max_v.max(v);
        near = near.min(z);
    }
    if near < MIN_DETECTION_DEPTH {
        return None;
    }
    let raw = BoundingBox::new(min_u, min_v, (max_u - min_u).max(1e-6), (max_v - min_v).max(1e-6))
        .ok()?;
    let bbox = raw.clamp_to(intr.width, intr.height)?;
    let centroid_in_frustum = match crate::types::project(object_position, intr, pose) {
        Some((u, v, z)) => {
            z > MIN_DETECTION_DEPTH && u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height
        }
        None => false,
    };
    Some(Footprint {
        bbox,
        near_depth: near,
        centroid_in_frustum,
    })
}

/// Generate the frame stream and ground truth for a scenario.
///
/// Deterministic: the same spec and seed produce identical output. For
/// changing-environment scenarios, any scripted object change that would be
/// observable (old or new location inside the frustum around the event
/// frame) is rejected with `InvalidScenario`.
pub fn generate(spec: &ScenarioSpec, intr: &CameraIntrinsics) -> Result<SimOutput> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // frustum-exit validation against the unjittered path
    if spec.name.enforces_out_of_view_events() {
        for event in &spec.events {
            let object = spec
                .objects
                .iter()
                .find(|o| o.key == event.key)
                .expect("validated");
            // old position: wherever the object is just before the event;
            // replaying prior events keeps this exact
            let mut position = object.position;
            let mut prior: Vec<&ObjectEvent> = spec
                .events
                .iter()
                .filter(|e| e.key == event.key && e.frame < event.frame)
                .collect();
            prior.sort_by_key(|e| e.frame);
            for e in prior {
                match e.action {
                    EventAction::MoveTo { position: p } | EventAction::Place { position: p } => {
                        position = p
                    }
                    EventAction::Remove => {}
                }
            }
            let mut spots = vec![position];
            if let EventAction::MoveTo { position: p } | EventAction::Place { position: p } =
                event.action
            {
                spots.push(p);
            }
            for df in [-1i64, 0, 1] {
                let frame = event.frame.saturating_add_signed(df);
                if frame >= spec.frame_count {
                    continue;
                }
                let pose = spec.camera.pose_at(frame);
                for spot in &spots {
                    if crate::persistence::frustum_check(spot, &pose, intr, f64::INFINITY) {
                        return Err(Error::InvalidScenario(format!(
                            "event on '{}' at frame {} is inside the camera frustum",
                            event.key, event.frame
                        )));
                    }
                }
            }
        }
    }

    let mut live: Vec<LiveObject> = spec
        .objects
        .iter()
        .map(|o| LiveObject {
            key: o.key.clone(),
            class_id: o.class_id,
            size: o.size,
            position: o.position,
            present: o.present,
            velocity: Vector3::zeros(),
        })
        .collect();
    let mut events_by_frame: BTreeMap<u64, Vec<&ObjectEvent>> = BTreeMap::new();
    for event in &spec.events {
        events_by_frame.entry(event.frame).or_default().push(event);
    }

    let mut frames = Vec::with_capacity(spec.frame_count as usize);
    let mut truth = Vec::with_capacity(spec.frame_count as usize);

    for frame_id in 0..spec.frame_count {
        if let Some(events) = events_by_frame.get(&frame_id) {
            for event in events {
                let object = live
                    .iter_mut()
                    .find(|o| o.key == event.key)
                    .expect("validated");
                match event.action {
                    EventAction::Place { position } => {
                        object.position = position;
                        object.present = true;
                    }
                    EventAction::Remove => object.present = false,
                    EventAction::MoveTo { position } => object.position = position,
                }
            }
        }
        if let Some(walker) = &spec.walker {
            let (position, velocity) = walker.state_at(frame_id, spec.frame_rate);
            match live.iter_mut().find(|o| o.key == walker.key) {
                Some(object) => {
                    object.position = position;
                    object.velocity = velocity;
                }
                None => live.push(LiveObject {
                    key: walker.key.clone(),
                    class_id: walker.class_id,
                    size: walker.size,
                    position,
                    present: true,
                    velocity,
                }),
            }
        }

        let theta = spec.camera.angle_at(frame_id);
        let (radius, height) = spec.camera.radius_height();
        let dz = gauss(&mut rng) * POSE_JITTER_Z;
        let dyaw = gauss(&mut rng) * POSE_JITTER_YAW;
        let pose = camera_pose(radius, height, theta, dz, dyaw);

        let view_dir = pose.rotation * Vector3::new(0.0, 0.0, 1.0);
        let background_depth = wall_distance(&pose.translation, &view_dir);
        let mut depth = RegionDepthMap::uniform(background_depth);

        // paint far to near so closer objects win
        let mut painted: Vec<(f64, BoundingBox)> = Vec::new();
        let mut visible: Vec<(usize, Footprint)> = Vec::new();
        for (index, object) in live.iter().enumerate() {
            if !object.present {
                continue;
            }
            if let Some(fp) = footprint(&object.position, &object.size, &pose, intr) {
                painted.push((fp.near_depth, fp.bbox));
                visible.push((index, fp));
            }
        }
        painted.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (d, rect) in &painted {
            depth.paint(*rect, *d);
        }

        let mut detections = Vec::new();
        let mut keypoints = Vec::new();
        for (index, fp) in &visible {
            let object = &live[*index];
            if !fp.centroid_in_frustum {
                continue;
            }
            detections.push(Detection::new(fp.bbox, object.class_id, 0.95)?);
            // keypoints are all-or-nothing per object: a partially cropped
            // grid would shift the measured centroid from frame to frame and
            // masquerade as motion
            let projected: Vec<(f64, f64, f64)> = face_grid(&object.position, &object.size, object.class_id)
                .iter()
                .filter_map(|point| crate::types::project(point, intr, &pose))
                .filter(|(u, v, _)| {
                    *u >= 2.0 && *u < intr.width - 2.0 && *v >= 2.0 && *v < intr.height - 2.0
                })
                .collect();
            if projected.len() == GRID * GRID {
                for (u, v, z) in projected {
                    let nu = (u + gauss(&mut rng) * PIXEL_SIGMA)
                        .clamp(fp.bbox.x + 0.5, fp.bbox.right() - 0.5);
                    let nv = (v + gauss(&mut rng) * PIXEL_SIGMA)
                        .clamp(fp.bbox.y + 0.5, fp.bbox.bottom() - 0.5);
                    let nz = z * (1.0 + gauss(&mut rng) * DEPTH_SIGMA_FRACTION);
                    keypoints.push(Keypoint::new(nu, nv, nz.max(0.05)));
                }
            }
        }

        // background keypoints outside every painted object rectangle
        let mut added = 0;
        let mut attempts = 0;
        while added < BACKGROUND_KEYPOINTS && attempts < BACKGROUND_KEYPOINTS * 12 {
            attempts += 1;
            let u = rng.random_range(4.0..intr.width - 4.0);
            let v = rng.random_range(4.0..intr.height - 4.0);
            if painted.iter().any(|(_, rect)| rect.contains(u, v)) {
                continue;
            }
            let d = background_depth * (1.0 + gauss(&mut rng) * DEPTH_SIGMA_FRACTION);
            keypoints.push(Keypoint::new(u, v, d.max(0.05)));
            added += 1;
        }

        let timestamp = Timestamp::new(frame_id as f64 / spec.frame_rate)?;
        frames.push(Frame {
            id: frame_id,
            timestamp,
            camera_pose: pose,
            keypoints,
            detections,
            depth,
        });
        truth.push(GroundTruthFrame {
            frame_id,
            camera: pose,
            objects: live
                .iter()
                .map(|o| ObjectTruth {
                    key: o.key.clone(),
                    class_id: o.class_id,
                    center: o.position,
                    present: o.present,
                    velocity: o.velocity,
                    in_frustum: o.present
                        && crate::persistence::frustum_check(&o.position, &pose, intr, 1e9),
                })
                .collect(),
        });
    }

    Ok(SimOutput { frames, truth })
}

/// Write the frame stream as a sequence directory (the four standard files).
pub fn emit_tum(output: &SimOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut trajectory = crate::eval::Trajectory::new();
    let mut detections: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    let mut keypoints: BTreeMap<u64, Vec<Keypoint>> = BTreeMap::new();
    let mut depths: BTreeMap<u64, RegionDepthMap> = BTreeMap::new();
    for frame in &output.frames {
        trajectory.push(frame.timestamp, frame.camera_pose)?;
        if !frame.detections.is_empty() {
            detections.insert(frame.id, frame.detections.clone());
        }
        if !frame.keypoints.is_empty() {
            keypoints.insert(frame.id, frame.keypoints.clone());
        }
        depths.insert(frame.id, frame.depth.clone());
    }
    io::write_file(&dir.join(io::GROUNDTRUTH_FILE), &io::format_trajectory(&trajectory))?;
    io::write_file(&dir.join(io::DETECTIONS_FILE), &io::format_detections(&detections))?;
    io::write_file(&dir.join(io::KEYPOINTS_FILE), &io::format_keypoints(&keypoints))?;
    io::write_file(&dir.join(io::DEPTH_META_FILE), &io::format_depth_meta(&depths))?;
    Ok(())
}

/// Parse a declarative scenario file. Lines: `name`, `seed`, `frames`,
/// `rate`, `camera orbit r h frames_per_loop start_deg` or
/// `camera arc r h center_deg amplitude_deg period`, `object key class sx sy
/// sz x y z`, `event frame key remove|move_to x y z|place x y z`, `walker
/// key class sx sy sz y z x_min x_max speed start_pause end_pause passes`.
pub fn parse_scenario(text: &str, source: &str) -> Result<ScenarioSpec> {
    let mut name = None;
    let mut seed = 0u64;
    let mut frame_count = None;
    let mut frame_rate = 10.0;
    let mut camera = None;
    let mut objects = Vec::new();
    let mut events = Vec::new();
    let mut walker = None;

    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| Error::parse(source, line_no, msg);
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::parse(source, line_no, format!("bad number '{s}': {e}")))
        };
        match fields[0] {
            "name" => name = Some(ScenarioKind::parse(fields.get(1).copied().unwrap_or(""))?),
            "seed" => seed = num(fields.get(1).copied().unwrap_or(""))? as u64,
            "frames" => frame_count = Some(num(fields.get(1).copied().unwrap_or(""))? as u64),
            "rate" => frame_rate = num(fields.get(1).copied().unwrap_or(""))?,
            "camera" => {
                camera = Some(match fields.get(1).copied() {
                    Some("orbit") if fields.len() == 6 => CameraPath::Orbit {
                        radius: num(fields[2])?,
                        height: num(fields[3])?,
                        frames_per_loop: num(fields[4])? as u64,
                        start_deg: num(fields[5])?,
                    },
                    Some("arc") if fields.len() == 7 => CameraPath::Arc {
                        radius: num(fields[2])?,
                        height: num(fields[3])?,
                        center_deg: num(fields[4])?,
                        amplitude_deg: num(fields[5])?,
                        period_frames: num(fields[6])? as u64,
                    },
                    _ => return Err(bad("camera needs 'orbit r h loop start' or 'arc r h c a p'".into())),
                });
            }
            "object" => {
                if fields.len() != 9 {
                    return Err(bad("object needs: key class sx sy sz x y z".into()));
                }
                objects.push(ObjectInit {
                    key: fields[1].into(),
                    class_id: num(fields[2])? as i32,
                    size: Vector3::new(num(fields[3])?, num(fields[4])?, num(fields[5])?),
                    position: Vector3::new(num(fields[6])?, num(fields[7])?, num(fields[8])?),
                    present: true,
                });
            }
            "event" => {
                if fields.len() < 4 {
                    return Err(bad("event needs: frame key action".into()));
                }
                let frame = num(fields[1])? as u64;
                let key = fields[2].to_string();
                let action = match fields[3] {
                    "remove" => EventAction::Remove,
                    "move_to" if fields.len() == 7 => EventAction::MoveTo {
                        position: Vector3::new(num(fields[4])?, num(fields[5])?, num(fields[6])?),
                    },
                    "place" if fields.len() == 7 => EventAction::Place {
                        position: Vector3::new(num(fields[4])?, num(fields[5])?, num(fields[6])?),
                    },
                    other => return Err(bad(format!("unknown event action '{other}'"))),
                };
                events.push(ObjectEvent { frame, key, action });
            }
            "walker" => {
                if fields.len() != 14 {
                    return Err(bad(
                        "walker needs: key class sx sy sz y z x_min x_max speed start_pause end_pause passes".into(),
                    ));
                }
                walker = Some(WalkerSpec {
                    key: fields[1].into(),
                    class_id: num(fields[2])? as i32,
                    size: Vector3::new(num(fields[3])?, num(fields[4])?, num(fields[5])?),
                    y: num(fields[6])?,
                    z: num(fields[7])?,
                    x_min: num(fields[8])?,
                    x_max: num(fields[9])?,
                    speed: num(fields[10])?,
                    start_pause: num(fields[11])? as u64,
                    end_pause: num(fields[12])? as u64,
                    passes: num(fields[13])? as u32,
                });
            }
            other => return Err(bad(format!("unknown directive '{other}'"))),
        }
    }

    let name = name.ok_or_else(|| Error::parse(source, 0, "missing 'name'"))?;
    let mut spec = ScenarioSpec::builtin(name, seed);
    if let Some(frames) = frame_count {
        spec.frame_count = frames;
    }
    spec.frame_rate = frame_rate;
    if let Some(camera) = camera {
        spec.camera = camera;
    }
    if !objects.is_empty() {
        spec.objects = objects;
        spec.events.clear();
    }
    if !events.is_empty() {
        spec.events = events;
    }
    if walker.is_some() {
        spec.walker = walker;
    }
    spec.seed = seed;
    Ok(spec)
}
