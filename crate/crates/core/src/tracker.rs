//! Per-object constant-velocity Kalman filter over the centroid, plus the
//! dynamic-object classification (DOC) speed test.
//!
//! The state is `[x, y, z, vx, vy, vz]` in the world frame. Centroids are
//! measured in the world frame (keypoints are back-projected through the
//! known camera pose before averaging), so the observation matrix is the
//! constant position extractor `H = [I3 | 0]` and the filter is exactly
//! linear.

use nalgebra::{Matrix3, Matrix3x6, Matrix6, Matrix6x3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::types::Timestamp;

/// Filter tuning. All values strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Process noise added to the position block each predict (m^2).
    pub q_pos: f64,
    /// Process noise added to the velocity block each predict (m^2/s^2).
    pub q_vel: f64,
    /// Observation noise on each centroid axis (m^2).
    pub r_meas: f64,
    /// Scale of the initial covariance `P0 = p0_scale * I`.
    pub p0_scale: f64,
    /// Speed above which an object is classified as moving (m/s).
    pub doc_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            q_pos: 1e-4,
            q_vel: 1e-2,
            r_meas: 1e-2,
            p0_scale: 1.0,
            doc_threshold: 0.15,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = self.q_pos > 0.0
            && self.q_vel > 0.0
            && self.r_meas > 0.0
            && self.p0_scale > 0.0
            && self.doc_threshold > 0.0;
        if all_positive {
            Ok(())
        } else {
            Err(Error::Config(
                "all ekf.* values must be strictly positive".into(),
            ))
        }
    }
}

/// Filter state: mean, covariance and the timestamp of the last update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
    pub last_update: Timestamp,
}

impl TrackState {
    pub fn position(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(3).into_owned()
    }

    pub fn speed(&self) -> f64 {
        self.velocity().norm()
    }
}

/// Initialize a filter on a fresh object: position at the measured centroid,
/// zero velocity, `P0 = p0_scale * I`.
pub fn track_init(centroid: &Vector3<f64>, t: Timestamp, cfg: &TrackerConfig) -> TrackState {
    let mut x = Vector6::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(centroid);
    TrackState {
        x,
        p: Matrix6::identity() * cfg.p0_scale,
        last_update: t,
    }
}

fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(cfg: &TrackerConfig) -> Matrix6<f64> {
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        q[(i, i)] = cfg.q_pos;
        q[(i + 3, i + 3)] = cfg.q_vel;
    }
    q
}

fn observation() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

fn symmetrize(p: &mut Matrix6<f64>) {
    let pt = p.transpose();
    *p = (*p + pt) * 0.5;
}

/// Constant-velocity prediction over `dt` seconds.
pub fn track_predict(s: &TrackState, dt: f64, cfg: &TrackerConfig) -> Result<TrackState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonPositiveDt(dt));
    }
    let f = transition(dt);
    let mut p = f * s.p * f.transpose() + process_noise(cfg);
    symmetrize(&mut p);
    Ok(TrackState {
        x: f * s.x,
        p,
        last_update: s.last_update,
    })
}

/// Measurement update with a world-frame centroid. Returns the new state and
/// the innovation.
pub fn track_update(
    s: &TrackState,
    z: &Vector3<f64>,
    t: Timestamp,
    cfg: &TrackerConfig,
) -> Result<(TrackState, Vector3<f64>)> {
    let h = observation();
    let innovation = z - h * s.x;
    let r = Matrix3::identity() * cfg.r_meas;
    let innovation_cov = h * s.p * h.transpose() + r;
    let s_inv = innovation_cov
        .try_inverse()
        .ok_or(Error::SingularInnovation)?;
    let gain: Matrix6x3<f64> = s.p * h.transpose() * s_inv;
    let x = s.x + gain * innovation;
    let mut p = (Matrix6::identity() - gain * h) * s.p;
    symmetrize(&mut p);
    Ok((
        TrackState {
            x,
            p,
            last_update: t,
        },
        innovation,
    ))
}

/// DOC test: true iff the estimated speed exceeds the threshold.
pub fn classify_dynamic(s: &TrackState, cfg: &TrackerConfig) -> bool {
    s.speed() > cfg.doc_threshold
}

/// Zero the velocity estimate and reset its covariance block.
///
/// Applied when an object has gone unobserved long enough that a stale
/// velocity would produce false "moving" verdicts on reappearance.
pub fn reset_velocity(s: &mut TrackState, cfg: &TrackerConfig) {
    for i in 3..6 {
        s.x[i] = 0.0;
        for j in 0..6 {
            s.p[(i, j)] = 0.0;
            s.p[(j, i)] = 0.0;
        }
        s.p[(i, i)] = cfg.p0_scale;
    }
}
