//! Object-level belief mapping for visual SLAM front-ends in dynamic and
//! changing environments.
//!
//! The pipeline ingests per-frame camera poses, semantic detections and
//! depth-tagged keypoints, classifies keypoints (with feature repopulation
//! inside detection boxes), tracks each object with a constant-velocity
//! Kalman filter, maintains a persistence belief per mapped object with a
//! recursive Bayes filter, and gates map points on that belief so that
//! vanished or moved objects stop feeding downstream tracking, mapping and
//! loop closure. A deterministic scenario simulator and an absolute
//! trajectory error evaluator round out the toolkit.

pub mod association;
pub mod classifier;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod map;
pub mod persistence;
pub mod pipeline;
pub mod sim;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
