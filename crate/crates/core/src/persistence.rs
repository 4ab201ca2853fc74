//! Recursive Bayes filter over each map object's persistence, and the
//! belief-gated activation of its map points.
//!
//! Persistence is a binary hypothesis (the object is still at its mapped
//! location, or it is not). Each observation multiplies the prior by a
//! likelihood ratio and renormalizes; a detection near the mapped centroid
//! raises the belief, a miss of an observable centroid lowers it.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::{project, CameraIntrinsics, Pose};

/// Belief floor/ceiling keeping the filter responsive (never fully saturated).
pub const BELIEF_FLOOR: f64 = 0.01;
pub const BELIEF_CEILING: f64 = 0.99;

/// Likelihood clamp bounds for the distance-based detection model.
const LIKELIHOOD_FLOOR: f64 = 0.05;
const LIKELIHOOD_CEILING: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceConfig {
    /// Map points are active iff the object belief is >= this.
    pub belief_threshold: f64,
    /// Decay length (m) of the detection likelihood in centroid distance.
    pub likelihood_scale: f64,
    /// p(no detection | object present).
    pub miss_likelihood_present: f64,
    /// p(no detection | object absent). Must exceed `miss_likelihood_present`.
    pub miss_likelihood_absent: f64,
    /// Maximum range (m) at which a non-detection still counts as evidence.
    pub max_range: f64,
}

impl Default for PersistenceConfig {
    fn default() -> Self {
        PersistenceConfig {
            belief_threshold: 0.6,
            likelihood_scale: 0.5,
            miss_likelihood_present: 0.3,
            miss_likelihood_absent: 0.7,
            max_range: 8.0,
        }
    }
}

impl PersistenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.belief_threshold > 0.0 && self.belief_threshold < 1.0) {
            return Err(Error::Config(
                "persistence.belief_threshold must be in (0,1)".into(),
            ));
        }
        if !(self.likelihood_scale.is_finite() && self.likelihood_scale > 0.0)
            || !(self.max_range.is_finite() && self.max_range > 0.0)
        {
            return Err(Error::Config(
                "persistence.likelihood_scale and persistence.max_range must be > 0".into(),
            ));
        }
        let (mp, ma) = (self.miss_likelihood_present, self.miss_likelihood_absent);
        if !(mp > 0.0 && mp < 1.0 && ma > 0.0 && ma < 1.0 && ma > mp) {
            return Err(Error::Config(
                "persistence miss likelihoods must be in (0,1) with miss_absent > miss_present"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Belief that the object is still present, plus the keyframe of the last
/// belief update (used by the long-term association to rate observations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceBelief {
    pub bel: f64,
    pub last_update_keyframe: u64,
}

impl PersistenceBelief {
    /// Fresh objects start undecided.
    pub fn new(keyframe: u64) -> Self {
        PersistenceBelief {
            bel: 0.5,
            last_update_keyframe: keyframe,
        }
    }
}

fn bayes(bel: f64, l_present: f64, l_absent: f64) -> f64 {
    let num = l_present * bel;
    let den = num + l_absent * (1.0 - bel);
    (num / den).clamp(BELIEF_FLOOR, BELIEF_CEILING)
}

/// Detection update: likelihood decays exponentially with the distance
/// between the measured centroid and the mapped one.
pub fn belief_update_detection(
    b: &PersistenceBelief,
    centroid_dist: f64,
    keyframe: u64,
    cfg: &PersistenceConfig,
) -> PersistenceBelief {
    let l_present =
        (-centroid_dist / cfg.likelihood_scale).exp().clamp(LIKELIHOOD_FLOOR, LIKELIHOOD_CEILING);
    let l_absent = (1.0 - l_present).clamp(LIKELIHOOD_FLOOR, LIKELIHOOD_CEILING);
    PersistenceBelief {
        bel: bayes(b.bel, l_present, l_absent),
        last_update_keyframe: keyframe,
    }
}

/// Miss update: the object's mapped location was observable yet no detection
/// associated with it.
pub fn belief_update_miss(
    b: &PersistenceBelief,
    keyframe: u64,
    cfg: &PersistenceConfig,
) -> PersistenceBelief {
    PersistenceBelief {
        bel: bayes(b.bel, cfg.miss_likelihood_present, cfg.miss_likelihood_absent),
        last_update_keyframe: keyframe,
    }
}

/// True iff the point projects inside the image with camera-frame depth in
/// `(0, max_range]`.
pub fn frustum_check(
    centroid: &Vector3<f64>,
    cam_pose: &Pose,
    intr: &CameraIntrinsics,
    max_range: f64,
) -> bool {
    match project(centroid, intr, cam_pose) {
        Some((u, v, depth)) => {
            depth <= max_range && u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height
        }
        None => false,
    }
}

/// Whether map points of this object should be active under the given belief.
/// The boundary is inclusive: belief exactly at the threshold is active.
pub fn is_active(bel: f64, cfg: &PersistenceConfig) -> bool {
    bel >= cfg.belief_threshold
}
