//! Shared domain types and geometric primitives used by every other module.
//!
//! All types here are plain value types: once constructed they are immutable
//! and can be shared or sent across threads freely.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// COCO class id for `person` (a-priori dynamic).
pub const PERSON_CLASS: i32 = 0;
/// Class id for background keypoints / map points.
pub const BACKGROUND_CLASS: i32 = -1;

/// Seconds since sequence start (or epoch for recorded data).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Timestamp(f64);

impl Timestamp {
    pub fn new(seconds: f64) -> Result<Self> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(Error::Parse {
                file: String::new(),
                line: 0,
                msg: format!("timestamp {seconds} is not a finite non-negative number"),
            });
        }
        Ok(Timestamp(seconds))
    }

    pub fn seconds(&self) -> f64 {
        self.0
    }
}

/// Unique identifier of a map object. Never reused, even after removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub u64);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unique identifier of a map point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u64);

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Rigid camera-to-world transform: `p_world = rotation * p_camera + translation`.
///
/// Trajectory files use the TUM line order `tx ty tz qx qy qz qw`; quaternions
/// are normalized on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Pose {
            translation,
            rotation,
        }
    }

    /// Build from TUM component order (tx, ty, tz, qx, qy, qz, qw).
    /// The quaternion is normalized; a zero quaternion is rejected.
    pub fn from_tum_parts(t: [f64; 3], q_xyzw: [f64; 4]) -> Result<Self> {
        let [qx, qy, qz, qw] = q_xyzw;
        let q = Quaternion::new(qw, qx, qy, qz);
        let norm = q.norm();
        if norm < 1e-12 {
            return Err(Error::Parse {
                file: String::new(),
                line: 0,
                msg: "zero-norm quaternion".into(),
            });
        }
        // an already-normalized quaternion is kept bit-exact, so writing a
        // pose out and reading it back is lossless
        let rotation = if (norm - 1.0).abs() < 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(Pose {
            translation: Vector3::new(t[0], t[1], t[2]),
            rotation,
        })
    }

    /// TUM component order (tx, ty, tz, qx, qy, qz, qw).
    pub fn to_tum_parts(&self) -> ([f64; 3], [f64; 4]) {
        let t = self.translation;
        let q = self.rotation.quaternion();
        ([t.x, t.y, t.z], [q.i, q.j, q.k, q.w])
    }

    /// Camera-frame point to world frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// World-frame point to camera frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose {
            translation: -(rot_inv * self.translation),
            rotation: rot_inv,
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation * other.translation + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }
}

/// Axis-aligned image rectangle in pixels; `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox { w, h });
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x && u <= self.right() && v >= self.y && v <= self.bottom()
    }

    /// Overlap rectangle with `other`, if the interiors intersect.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let left = self.x.max(other.x);
        let top = self.y.max(other.y);
        let right = self.right().min(other.right());
        let bottom = self.bottom().min(other.bottom());
        if right > left && bottom > top {
            Some(BoundingBox {
                x: left,
                y: top,
                w: right - left,
                h: bottom - top,
            })
        } else {
            None
        }
    }

    /// Clamp to image bounds. Returns `None` when nothing remains.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let left = self.x.max(0.0);
        let top = self.y.max(0.0);
        let right = self.right().min(width);
        let bottom = self.bottom().min(height);
        if right > left && bottom > top {
            Some(BoundingBox {
                x: left,
                y: top,
                w: right - left,
                h: bottom - top,
            })
        } else {
            None
        }
    }
}

/// Intersection over union of two boxes. Symmetric, in [0, 1], 0 when disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = match a.intersection(b) {
        Some(r) => r.area(),
        None => return 0.0,
    };
    inter / (a.area() + b.area() - inter)
}

/// A 2D semantic detection: box, COCO class id and confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class_id: i32,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, class_id: i32, score: f64) -> Result<Self> {
        if class_id < 0 {
            return Err(Error::Parse {
                file: String::new(),
                line: 0,
                msg: format!("detection class_id {class_id} must be >= 0"),
            });
        }
        Ok(Detection {
            bbox,
            class_id,
            score: score.clamp(0.0, 1.0),
        })
    }

    pub fn is_person(&self) -> bool {
        self.class_id == PERSON_CLASS
    }
}

/// Keypoint category assigned by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeypointStatus {
    /// A-priori dynamic (people) or owned by an object currently moving.
    Dynamic,
    /// On a detected object that may move but currently is not.
    Movable,
    /// Background.
    Static,
}

/// An image feature with its depth reading and semantic classification.
///
/// `depth = 0` means "no measurement" (TUM convention); such keypoints are
/// excluded from back-projection and depth statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub class_id: i32,
    pub object_id: Option<ObjectId>,
    pub status: KeypointStatus,
}

impl Keypoint {
    /// A raw detector keypoint: background until classified.
    pub fn new(u: f64, v: f64, depth: f64) -> Self {
        Keypoint {
            u,
            v,
            depth,
            class_id: BACKGROUND_CLASS,
            object_id: None,
            status: KeypointStatus::Static,
        }
    }

    pub fn has_depth(&self) -> bool {
        self.depth > 0.0 && self.depth.is_finite()
    }
}

/// Pinhole camera intrinsics (no distortion model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        let ok = fx > 0.0
            && fy > 0.0
            && cx > 0.0
            && cx < width
            && cy > 0.0
            && cy < height
            && width > 0.0
            && height > 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "invalid camera intrinsics fx={fx} fy={fy} cx={cx} cy={cy} {width}x{height}"
            )));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }
}

/// Pinhole back-projection of a keypoint to a world-frame 3D position.
pub fn backproject(kp: &Keypoint, intr: &CameraIntrinsics, cam_pose: &Pose) -> Result<Vector3<f64>> {
    if !kp.has_depth() {
        return Err(Error::InvalidDepth(kp.depth));
    }
    let z = kp.depth;
    let p_cam = Vector3::new((kp.u - intr.cx) / intr.fx * z, (kp.v - intr.cy) / intr.fy * z, z);
    Ok(cam_pose.transform_point(&p_cam))
}

/// Project a world point into the image. Returns `(u, v, depth)` or `None`
/// when the point is behind the camera plane.
pub fn project(
    p_world: &Vector3<f64>,
    intr: &CameraIntrinsics,
    cam_pose: &Pose,
) -> Option<(f64, f64, f64)> {
    let p_cam = cam_pose.inverse_transform_point(p_world);
    if p_cam.z <= 0.0 {
        return None;
    }
    let u = intr.fx * p_cam.x / p_cam.z + intr.cx;
    let v = intr.fy * p_cam.y / p_cam.z + intr.cy;
    Some((u, v, p_cam.z))
}

/// A rectangle of the symbolic depth image with a constant depth value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRegion {
    pub rect: BoundingBox,
    pub depth: f64,
}

/// Symbolic per-frame depth image: a background depth plus painted
/// rectangles, later rectangles in front (painter order).
/// A depth of 0 means "no measurement".
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDepthMap {
    pub background: f64,
    pub regions: Vec<DepthRegion>,
}

impl RegionDepthMap {
    pub fn uniform(background: f64) -> Self {
        RegionDepthMap {
            background,
            regions: Vec::new(),
        }
    }

    pub fn paint(&mut self, rect: BoundingBox, depth: f64) {
        self.regions.push(DepthRegion { rect, depth });
    }

    pub fn depth_at(&self, u: f64, v: f64) -> f64 {
        for region in self.regions.iter().rev() {
            if region.rect.contains(u, v) {
                return region.depth;
            }
        }
        self.background
    }
}

/// One frame of input to the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub timestamp: Timestamp,
    pub camera_pose: Pose,
    pub keypoints: Vec<Keypoint>,
    pub detections: Vec<Detection>,
    pub depth: RegionDepthMap,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bbox(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_identity() {
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        let b = bbox(20.0, 20.0, 5.0, 5.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_half_shift() {
        // intersection 5x10 = 50, union 100 + 100 - 50 = 150
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        let b = bbox(5.0, 0.0, 10.0, 10.0);
        assert_relative_eq!(iou(&a, &b), 50.0 / 150.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_area_box_rejected() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 5.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 5.0, -1.0).is_err());
    }

    fn test_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640.0, 480.0).unwrap()
    }

    #[test]
    fn backproject_principal_point() {
        let intr = test_intrinsics();
        let kp = Keypoint::new(320.0, 240.0, 2.5);
        let p = backproject(&kp, &intr, &Pose::identity()).unwrap();
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.z, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn backproject_unit_offset() {
        let intr = test_intrinsics();
        let kp = Keypoint::new(320.0 + 500.0, 240.0, 1.0);
        let p = backproject(&kp, &intr, &Pose::identity()).unwrap();
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn backproject_translated_camera() {
        let intr = test_intrinsics();
        let pose = Pose::new(Vector3::new(1.0, 0.0, 0.0), UnitQuaternion::identity());
        let kp = Keypoint::new(320.0, 240.0, 2.0);
        let p = backproject(&kp, &intr, &pose).unwrap();
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.z, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn backproject_invalid_depth() {
        let intr = test_intrinsics();
        let kp = Keypoint::new(100.0, 100.0, 0.0);
        assert!(matches!(
            backproject(&kp, &intr, &Pose::identity()),
            Err(Error::InvalidDepth(_))
        ));
    }

    #[test]
    fn pose_inverse_compose_roundtrip() {
        let pose = Pose::new(
            Vector3::new(0.3, -1.2, 2.0),
            UnitQuaternion::from_euler_angles(0.1, -0.4, 1.3),
        );
        let ident = pose.compose(&pose.inverse());
        assert_relative_eq!(ident.translation.norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ident.rotation.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn depth_map_painter_order() {
        let mut depth = RegionDepthMap::uniform(3.0);
        depth.paint(bbox(0.0, 0.0, 100.0, 100.0), 2.0);
        depth.paint(bbox(10.0, 10.0, 20.0, 20.0), 1.0);
        assert_eq!(depth.depth_at(200.0, 200.0), 3.0);
        assert_eq!(depth.depth_at(5.0, 5.0), 2.0);
        assert_eq!(depth.depth_at(15.0, 15.0), 1.0);
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(
            ax in -50.0..50.0f64, ay in -50.0..50.0f64,
            aw in 0.1..80.0f64, ah in 0.1..80.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64,
            bw in 0.1..80.0f64, bh in 0.1..80.0f64,
        ) {
            let a = bbox(ax, ay, aw, ah);
            let b = bbox(bx, by, bw, bh);
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn backproject_project_roundtrip(
            u in 1.0..639.0f64, v in 1.0..479.0f64, d in 0.1..20.0f64,
            tx in -5.0..5.0f64, ty in -5.0..5.0f64, tz in -5.0..5.0f64,
            roll in -3.0..3.0f64, pitch in -1.5..1.5f64, yaw in -3.0..3.0f64,
        ) {
            let intr = test_intrinsics();
            let pose = Pose::new(
                Vector3::new(tx, ty, tz),
                UnitQuaternion::from_euler_angles(roll, pitch, yaw),
            );
            let kp = Keypoint::new(u, v, d);
            let world = backproject(&kp, &intr, &pose).unwrap();
            let (pu, pv, pd) = project(&world, &intr, &pose).unwrap();
            prop_assert!((pu - u).abs() < 1e-9);
            prop_assert!((pv - v).abs() < 1e-9);
            prop_assert!((pd - d).abs() < 1e-9);
        }
    }
}
