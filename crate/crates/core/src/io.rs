//! Line-oriented file formats: TUM trajectories, detection, keypoint and
//! depth-region files, and the assembly of frames from a sequence directory.
//!
//! All formats are whitespace-separated with `#` comment lines. A sequence
//! directory holds:
//!
//! - `groundtruth.txt` — TUM trajectory, `timestamp tx ty tz qx qy qz qw`;
//!   line order defines the frame ids.
//! - `detections.txt` — `frame_id class_id x y w h score`.
//! - `keypoints.txt` — `frame_id u v depth`.
//! - `depth_meta.txt` — `frame_id bg <depth>` or
//!   `frame_id rect <x> <y> <w> <h> <depth>`, painter order per frame.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::Trajectory;
use crate::types::{
    BoundingBox, CameraIntrinsics, Detection, Frame, Keypoint, Pose, RegionDepthMap, Timestamp,
};

pub const GROUNDTRUTH_FILE: &str = "groundtruth.txt";
pub const DETECTIONS_FILE: &str = "detections.txt";
pub const KEYPOINTS_FILE: &str = "keypoints.txt";
pub const DEPTH_META_FILE: &str = "depth_meta.txt";

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Iterate data lines (skipping blanks and `#` comments) with 1-based line
/// numbers and pre-split fields.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(idx, raw)| {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((idx + 1, line.split_whitespace().collect()))
        }
    })
}

fn parse_fields(fields: &[&str], file: &str, line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::parse(file, line, format!("bad number: {e}")))
}

/// Parse a TUM-format trajectory: `timestamp tx ty tz qx qy qz qw`.
pub fn parse_trajectory(text: &str, source: &str) -> Result<Trajectory> {
    let mut trajectory = Trajectory::new();
    for (line_no, fields) in data_lines(text) {
        if fields.len() != 8 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 8 fields, found {}", fields.len()),
            ));
        }
        let nums = parse_fields(&fields, source, line_no)?;
        let t = Timestamp::new(nums[0])
            .map_err(|_| Error::parse(source, line_no, "invalid timestamp"))?;
        let pose = Pose::from_tum_parts(
            [nums[1], nums[2], nums[3]],
            [nums[4], nums[5], nums[6], nums[7]],
        )
        .map_err(|_| Error::parse(source, line_no, "invalid quaternion"))?;
        trajectory
            .push(t, pose)
            .map_err(|_| Error::parse(source, line_no, "timestamps must strictly increase"))?;
    }
    Ok(trajectory)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = read_to_string(path)?;
    parse_trajectory(&text, &path.display().to_string())
}

pub fn format_trajectory(trajectory: &Trajectory) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (t, pose) in trajectory.entries() {
        let (tr, q) = pose.to_tum_parts();
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            t.seconds(),
            tr[0],
            tr[1],
            tr[2],
            q[0],
            q[1],
            q[2],
            q[3]
        );
    }
    out
}

/// Detections grouped by frame id, with ingest warnings (boxes degenerate
/// after clamping to the image are dropped, not fatal).
pub struct DetectionFile {
    pub by_frame: BTreeMap<u64, Vec<Detection>>,
    pub warnings: Vec<String>,
}

pub fn parse_detections(text: &str, source: &str, intr: &CameraIntrinsics) -> Result<DetectionFile> {
    let mut by_frame: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (line_no, fields) in data_lines(text) {
        if fields.len() != 7 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let nums = parse_fields(&fields, source, line_no)?;
        let frame_id = nums[0] as u64;
        let class_id = nums[1] as i32;
        if class_id < 0 {
            return Err(Error::parse(source, line_no, "class_id must be >= 0"));
        }
        let raw = BoundingBox::new(nums[2], nums[3], nums[4], nums[5])
            .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        match raw.clamp_to(intr.width, intr.height) {
            Some(bbox) => {
                let det = Detection::new(bbox, class_id, nums[6])
                    .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
                by_frame.entry(frame_id).or_default().push(det);
            }
            None => warnings.push(format!(
                "{source}:{line_no}: box outside image bounds dropped"
            )),
        }
    }
    Ok(DetectionFile { by_frame, warnings })
}

pub fn format_detections(by_frame: &BTreeMap<u64, Vec<Detection>>) -> String {
    let mut out = String::from("# frame_id class_id x y w h score\n");
    for (frame_id, detections) in by_frame {
        for d in detections {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                frame_id, d.class_id, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.score
            );
        }
    }
    out
}

pub fn parse_keypoints(text: &str, source: &str) -> Result<BTreeMap<u64, Vec<Keypoint>>> {
    let mut by_frame: BTreeMap<u64, Vec<Keypoint>> = BTreeMap::new();
    for (line_no, fields) in data_lines(text) {
        if fields.len() != 4 {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let nums = parse_fields(&fields, source, line_no)?;
        by_frame
            .entry(nums[0] as u64)
            .or_default()
            .push(Keypoint::new(nums[1], nums[2], nums[3]));
    }
    Ok(by_frame)
}

pub fn format_keypoints(by_frame: &BTreeMap<u64, Vec<Keypoint>>) -> String {
    let mut out = String::from("# frame_id u v depth\n");
    for (frame_id, keypoints) in by_frame {
        for kp in keypoints {
            let _ = writeln!(out, "{} {} {} {}", frame_id, kp.u, kp.v, kp.depth);
        }
    }
    out
}

pub fn parse_depth_meta(text: &str, source: &str) -> Result<BTreeMap<u64, RegionDepthMap>> {
    let mut by_frame: BTreeMap<u64, RegionDepthMap> = BTreeMap::new();
    for (line_no, fields) in data_lines(text) {
        if fields.len() < 3 {
            return Err(Error::parse(source, line_no, "truncated depth record"));
        }
        let frame_id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(source, line_no, "bad frame id"))?;
        let entry = by_frame
            .entry(frame_id)
            .or_insert_with(|| RegionDepthMap::uniform(0.0));
        match fields[1] {
            "bg" => {
                let nums = parse_fields(&fields[2..], source, line_no)?;
                entry.background = nums[0];
            }
            "rect" => {
                if fields.len() != 7 {
                    return Err(Error::parse(source, line_no, "rect needs 5 numbers"));
                }
                let nums = parse_fields(&fields[2..], source, line_no)?;
                let rect = BoundingBox::new(nums[0], nums[1], nums[2], nums[3])
                    .map_err(|e| Error::parse(source, line_no, e.to_string()))?;
                entry.paint(rect, nums[4]);
            }
            other => {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("unknown depth record '{other}'"),
                ))
            }
        }
    }
    Ok(by_frame)
}

pub fn format_depth_meta(by_frame: &BTreeMap<u64, RegionDepthMap>) -> String {
    let mut out = String::from("# frame_id bg <depth> | frame_id rect <x> <y> <w> <h> <depth>\n");
    for (frame_id, depth) in by_frame {
        let _ = writeln!(out, "{} bg {}", frame_id, depth.background);
        for region in &depth.regions {
            let _ = writeln!(
                out,
                "{} rect {} {} {} {} {}",
                frame_id, region.rect.x, region.rect.y, region.rect.w, region.rect.h, region.depth
            );
        }
    }
    out
}

/// Frames loaded from a sequence directory, plus ingest warnings.
pub struct LoadedSequence {
    pub frames: Vec<Frame>,
    pub warnings: Vec<String>,
}

/// Assemble frames from a sequence directory. Frame ids follow the
/// `groundtruth.txt` line order; per-frame data beyond the trajectory length
/// is a parse error.
pub fn load_sequence(dir: &Path, intr: &CameraIntrinsics) -> Result<LoadedSequence> {
    let trajectory = read_trajectory(&dir.join(GROUNDTRUTH_FILE))?;
    let det_path = dir.join(DETECTIONS_FILE);
    let detections = parse_detections(
        &read_to_string(&det_path)?,
        &det_path.display().to_string(),
        intr,
    )?;
    let kp_path = dir.join(KEYPOINTS_FILE);
    let mut keypoints = parse_keypoints(&read_to_string(&kp_path)?, &kp_path.display().to_string())?;
    let depth_path = dir.join(DEPTH_META_FILE);
    let mut depths =
        parse_depth_meta(&read_to_string(&depth_path)?, &depth_path.display().to_string())?;

    let frame_count = trajectory.len() as u64;
    let max_ids = [detections.by_frame.keys().next_back(), keypoints.keys().next_back()];
    for &&max_id in max_ids.iter().flatten() {
        if max_id >= frame_count {
            return Err(Error::parse(
                dir.display().to_string(),
                0,
                format!("frame id {max_id} beyond trajectory length {frame_count}"),
            ));
        }
    }

    let mut frames = Vec::with_capacity(trajectory.len());
    let mut det_by_frame = detections.by_frame;
    for (id, (t, pose)) in trajectory.entries().iter().enumerate() {
        let id = id as u64;
        frames.push(Frame {
            id,
            timestamp: *t,
            camera_pose: *pose,
            keypoints: keypoints.remove(&id).unwrap_or_default(),
            detections: det_by_frame.remove(&id).unwrap_or_default(),
            depth: depths.remove(&id).unwrap_or_else(|| RegionDepthMap::uniform(0.0)),
        });
    }
    Ok(LoadedSequence {
        frames,
        warnings: detections.warnings,
    })
}
