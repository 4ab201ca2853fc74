//! Trajectory evaluation: timestamp association, closed-form rigid
//! alignment of matched positions, and the absolute trajectory error with
//! its RMSE summary, plus map scoring against simulated ground truth.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::types::{Pose, Timestamp};

/// A timestamped pose sequence with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    entries: Vec<(Timestamp, Pose)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory::default()
    }

    pub fn push(&mut self, t: Timestamp, pose: Pose) -> Result<()> {
        if let Some((last, _)) = self.entries.last() {
            if t.seconds() <= last.seconds() {
                return Err(Error::Parse {
                    file: String::new(),
                    line: self.entries.len() + 1,
                    msg: format!(
                        "timestamps must strictly increase ({} after {})",
                        t.seconds(),
                        last.seconds()
                    ),
                });
            }
        }
        self.entries.push((t, pose));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Timestamp, Pose)] {
        &self.entries
    }

    pub fn pose(&self, index: usize) -> &Pose {
        &self.entries[index].1
    }
}

/// Greedy nearest-timestamp matching within `max_dt`; every pose on either
/// side is used at most once. Pairs are returned sorted by estimate index.
pub fn associate_timestamps(
    est: &Trajectory,
    gt: &Trajectory,
    max_dt: f64,
) -> Result<Vec<(usize, usize)>> {
    if est.is_empty() || gt.is_empty() {
        return Err(Error::NoMatches);
    }
    // candidate pairs inside the window, best (smallest |dt|) first
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let gt_entries = gt.entries();
    let mut lo = 0usize;
    for (i, (te, _)) in est.entries().iter().enumerate() {
        while lo < gt_entries.len() && gt_entries[lo].0.seconds() < te.seconds() - max_dt {
            lo += 1;
        }
        let mut j = lo;
        while j < gt_entries.len() && gt_entries[j].0.seconds() <= te.seconds() + max_dt {
            candidates.push(((te.seconds() - gt_entries[j].0.seconds()).abs(), i, j));
            j += 1;
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut est_used = vec![false; est.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !est_used[i] && !gt_used[j] {
            est_used[i] = true;
            gt_used[j] = true;
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoMatches);
    }
    pairs.sort();
    Ok(pairs)
}

/// Result of a rigid point-set alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    /// Transform minimizing the sum of squared `‖T·src_i − dst_i‖`.
    pub transform: Pose,
    /// True when the geometry (collinear or coincident points) leaves the
    /// rotation undetermined and the result fell back to translation only.
    pub degenerate: bool,
}

/// Closed-form least-squares rigid alignment (no scale): centroid
/// subtraction, cross-covariance factorization by singular value
/// decomposition with reflection correction.
pub fn align(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Alignment> {
    if src.is_empty() || src.len() != dst.len() {
        return Err(Error::DegenerateGeometry(format!(
            "cannot align {} source against {} destination points",
            src.len(),
            dst.len()
        )));
    }
    // equal point sets align exactly by the identity; skipping the
    // factorization keeps the residuals at exactly zero
    if src == dst {
        return Ok(Alignment {
            transform: Pose::identity(),
            degenerate: false,
        });
    }
    let n = src.len() as f64;
    let src_centroid: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
    let dst_centroid: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;

    let mut cross = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst.iter()) {
        cross += (d - dst_centroid) * (s - src_centroid).transpose();
    }
    cross /= n;

    let svd = cross.svd(true, true);
    let sigma = svd.singular_values;
    // collinear (or coincident) point sets leave at most one informative
    // direction: rotation about the line is unobservable
    let scale = sigma[0].max(1e-12);
    if src.len() < 3 || sigma[1] / scale < 1e-9 {
        return Ok(Alignment {
            transform: Pose::new(dst_centroid - src_centroid, UnitQuaternion::identity()),
            degenerate: true,
        });
    }

    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = dst_centroid - r * src_centroid;
    Ok(Alignment {
        transform: Pose::new(translation, rotation),
        degenerate: false,
    })
}

/// Absolute trajectory error report.
#[derive(Debug, Clone, PartialEq)]
pub struct AteReport {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub matched_pairs: usize,
    /// The transform composed with each ground-truth pose in the error
    /// term, i.e. the alignment of the ground truth into the estimate frame.
    pub alignment: Pose,
    pub alignment_degenerate: bool,
}

impl AteReport {
    /// Minimal JSON encoding of the report.
    pub fn to_json(&self) -> String {
        let (t, q) = self.alignment.to_tum_parts();
        format!(
            concat!(
                "{{\"rmse\":{},\"mean\":{},\"median\":{},\"max\":{},",
                "\"matched_pairs\":{},\"alignment_degenerate\":{},",
                "\"alignment\":{{\"t\":[{},{},{}],\"q_xyzw\":[{},{},{},{}]}}}}"
            ),
            self.rmse,
            self.mean,
            self.median,
            self.max,
            self.matched_pairs,
            self.alignment_degenerate,
            t[0],
            t[1],
            t[2],
            q[0],
            q[1],
            q[2],
            q[3]
        )
    }

    pub fn to_text(&self) -> String {
        format!(
            "matched_pairs={}\nrmse={}\nmean={}\nmedian={}\nmax={}\nalignment_degenerate={}\n",
            self.matched_pairs, self.rmse, self.mean, self.median, self.max,
            self.alignment_degenerate
        )
    }
}

/// Absolute trajectory error: match timestamps, align the matched ground
/// truth onto the estimate, then for each pair take the translational norm
/// of `E_i^-1 ∘ T ∘ G_i` and summarize.
pub fn compute_ate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<AteReport> {
    let pairs = associate_timestamps(est, gt, max_dt)?;
    let est_points: Vec<Vector3<f64>> =
        pairs.iter().map(|(i, _)| est.pose(*i).translation).collect();
    let gt_points: Vec<Vector3<f64>> =
        pairs.iter().map(|(_, j)| gt.pose(*j).translation).collect();
    let alignment = align(&gt_points, &est_points)?;

    let mut residuals: Vec<f64> = pairs
        .iter()
        .map(|(i, j)| {
            let ate = est
                .pose(*i)
                .inverse()
                .compose(&alignment.transform.compose(gt.pose(*j)));
            ate.translation.norm()
        })
        .collect();
    let n = residuals.len() as f64;
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let mean = residuals.iter().sum::<f64>() / n;
    let max = residuals.iter().copied().fold(0.0, f64::max);
    residuals.sort_by(|a, b| a.total_cmp(b));
    let median = if residuals.len() % 2 == 1 {
        residuals[residuals.len() / 2]
    } else {
        (residuals[residuals.len() / 2 - 1] + residuals[residuals.len() / 2]) / 2.0
    };
    Ok(AteReport {
        rmse,
        mean,
        median,
        max,
        matched_pairs: pairs.len(),
        alignment: alignment.transform,
        alignment_degenerate: alignment.degenerate,
    })
}

/// A present ground-truth object at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthObject {
    pub class_id: i32,
    pub position: Vector3<f64>,
}

/// Precision/recall of an exported semantic map against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapScore {
    pub precision: f64,
    pub recall: f64,
    pub mapped_objects: usize,
    pub true_objects: usize,
}

/// Score mapped objects against the truly present ones: a mapped object is
/// correct when a same-class true object lies within `radius`; a true object
/// is covered when a same-class mapped object lies within `radius`. Empty
/// sides score 1.0.
pub fn score_map(
    mapped: &[(i32, Vector3<f64>)],
    truth: &[TruthObject],
    radius: f64,
) -> MapScore {
    let correct = mapped
        .iter()
        .filter(|(class, pos)| {
            truth
                .iter()
                .any(|t| t.class_id == *class && (t.position - pos).norm() <= radius)
        })
        .count();
    let covered = truth
        .iter()
        .filter(|t| {
            mapped
                .iter()
                .any(|(class, pos)| *class == t.class_id && (t.position - pos).norm() <= radius)
        })
        .count();
    let precision = if mapped.is_empty() {
        1.0
    } else {
        correct as f64 / mapped.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        covered as f64 / truth.len() as f64
    };
    MapScore {
        precision,
        recall,
        mapped_objects: mapped.len(),
        true_objects: truth.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn ts(s: f64) -> Timestamp {
        Timestamp::new(s).unwrap()
    }

    fn trajectory_from_positions(positions: &[Vector3<f64>]) -> Trajectory {
        let mut t = Trajectory::new();
        for (i, p) in positions.iter().enumerate() {
            t.push(ts(i as f64), Pose::new(*p, UnitQuaternion::identity()))
                .unwrap();
        }
        t
    }

    #[test]
    fn trajectory_rejects_non_increasing_timestamps() {
        let mut t = Trajectory::new();
        t.push(ts(1.0), Pose::identity()).unwrap();
        assert!(t.push(ts(1.0), Pose::identity()).is_err());
        assert!(t.push(ts(0.5), Pose::identity()).is_err());
    }

    #[test]
    fn associate_exact_timestamps() {
        let a = trajectory_from_positions(&[Vector3::zeros(); 5]);
        let b = trajectory_from_positions(&[Vector3::zeros(); 5]);
        let pairs = associate_timestamps(&a, &b, 0.02).unwrap();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
    }

    #[test]
    fn associate_prefers_nearest_and_uses_each_once() {
        let mut est = Trajectory::new();
        est.push(ts(0.0), Pose::identity()).unwrap();
        est.push(ts(0.011), Pose::identity()).unwrap();
        let mut gt = Trajectory::new();
        gt.push(ts(0.01), Pose::identity()).unwrap();
        let pairs = associate_timestamps(&est, &gt, 0.02).unwrap();
        // the 0.011 estimate is closer to 0.01 than the 0.0 one
        assert_eq!(pairs, vec![(1, 0)]);
    }

    #[test]
    fn associate_no_matches_is_error() {
        let mut est = Trajectory::new();
        est.push(ts(0.0), Pose::identity()).unwrap();
        let mut gt = Trajectory::new();
        gt.push(ts(10.0), Pose::identity()).unwrap();
        assert!(matches!(
            associate_timestamps(&est, &gt, 0.02),
            Err(Error::NoMatches)
        ));
    }

    #[test]
    fn align_identity() {
        let pts: Vec<Vector3<f64>> = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let a = align(&pts, &pts).unwrap();
        assert!(!a.degenerate);
        assert_relative_eq!(a.transform.translation.norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(a.transform.rotation.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn align_pure_translation() {
        let src: Vec<Vector3<f64>> = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let offset = Vector3::new(1.0, 2.0, 3.0);
        let dst: Vec<Vector3<f64>> = src.iter().map(|p| p + offset).collect();
        let a = align(&src, &dst).unwrap();
        assert!(!a.degenerate);
        assert_relative_eq!((a.transform.translation - offset).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(a.transform.rotation.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn align_recovers_rotation_vs_exhaustive_search() {
        // 90° about z plus an offset, checked against a brute-force search
        // over yaw (the true rotation is a pure yaw by construction)
        let src: Vec<Vector3<f64>> = (0..10)
            .map(|i| {
                let a = i as f64 * 0.7;
                Vector3::new(a.cos(), a.sin(), 0.3 * a)
            })
            .collect();
        let true_rot = UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let true_t = Vector3::new(0.4, -0.2, 1.0);
        let dst: Vec<Vector3<f64>> = src.iter().map(|p| true_rot * p + true_t).collect();

        let a = align(&src, &dst).unwrap();
        assert!(!a.degenerate);
        assert_relative_eq!(
            a.transform.rotation.angle_to(&true_rot),
            0.0,
            epsilon = 1e-9
        );
        assert_relative_eq!((a.transform.translation - true_t).norm(), 0.0, epsilon = 1e-9);

        // independent oracle: sample yaw finely, compute optimal translation
        // in closed form for each, keep the best residual
        let mut best = (f64::INFINITY, 0.0);
        let n = src.len() as f64;
        for k in 0..200_000 {
            let yaw = k as f64 * (std::f64::consts::TAU / 200_000.0);
            let rot = UnitQuaternion::from_euler_angles(0.0, 0.0, yaw);
            let src_c: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
            let dst_c: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;
            let t = dst_c - rot * src_c;
            let res: f64 = src
                .iter()
                .zip(&dst)
                .map(|(s, d)| (rot * s + t - d).norm_squared())
                .sum();
            if res < best.0 {
                best = (res, yaw);
            }
        }
        assert_relative_eq!(best.1, std::f64::consts::FRAC_PI_2, epsilon = 1e-4);
        let (roll, pitch, yaw) = a.transform.rotation.euler_angles();
        assert_relative_eq!(roll, 0.0, epsilon = 1e-9);
        assert_relative_eq!(pitch, 0.0, epsilon = 1e-9);
        assert_relative_eq!(yaw, best.1, epsilon = 1e-4);
    }

    #[test]
    fn align_collinear_falls_back_to_translation() {
        let src: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let dst: Vec<Vector3<f64>> = src.iter().map(|p| p + Vector3::new(0.0, 2.0, 0.0)).collect();
        let a = align(&src, &dst).unwrap();
        assert!(a.degenerate);
        assert_relative_eq!(
            (a.transform.translation - Vector3::new(0.0, 2.0, 0.0)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ate_identical_trajectories_is_zero() {
        let positions: Vec<Vector3<f64>> = (0..50)
            .map(|i| Vector3::new((i as f64 * 0.1).sin(), (i as f64 * 0.1).cos(), 0.05 * i as f64))
            .collect();
        let t = trajectory_from_positions(&positions);
        let report = compute_ate(&t, &t, 0.02).unwrap();
        assert_eq!(report.rmse, 0.0);
        assert_eq!(report.matched_pairs, 50);
    }

    #[test]
    fn ate_constant_offset_absorbed() {
        let positions: Vec<Vector3<f64>> = (0..40)
            .map(|i| Vector3::new((i as f64 * 0.2).sin(), (i as f64 * 0.2).cos(), 0.01 * i as f64))
            .collect();
        let gt = trajectory_from_positions(&positions);
        let shifted: Vec<Vector3<f64>> = positions
            .iter()
            .map(|p| p + Vector3::new(1.0, 0.0, 0.0))
            .collect();
        let est = trajectory_from_positions(&shifted);
        let report = compute_ate(&est, &gt, 0.02).unwrap();
        assert!(report.rmse < 1e-12, "rmse {}", report.rmse);
    }

    #[test]
    fn ate_invariant_to_rigid_transform_of_estimate() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let positions: Vec<Vector3<f64>> = (0..100)
            .map(|i| {
                Vector3::new(
                    (i as f64 * 0.13).sin() + rng.random_range(-0.01..0.01),
                    (i as f64 * 0.13).cos() + rng.random_range(-0.01..0.01),
                    0.02 * i as f64,
                )
            })
            .collect();
        let gt = trajectory_from_positions(&positions);
        let est_positions: Vec<Vector3<f64>> = positions
            .iter()
            .map(|p| p + Vector3::new(rng.random_range(-0.05..0.05), 0.0, 0.0))
            .collect();
        let est = trajectory_from_positions(&est_positions);
        let base = compute_ate(&est, &gt, 0.02).unwrap();

        let rot = UnitQuaternion::from_euler_angles(0.3, -0.8, 1.1);
        let shift = Vector3::new(4.0, -2.0, 7.0);
        let moved: Vec<Vector3<f64>> = est_positions.iter().map(|p| rot * p + shift).collect();
        let mut est2 = Trajectory::new();
        for (i, p) in moved.iter().enumerate() {
            est2.push(ts(i as f64), Pose::new(*p, rot)).unwrap();
        }
        let transformed = compute_ate(&est2, &gt, 0.02).unwrap();
        assert!(
            (base.rmse - transformed.rmse).abs() < 1e-9,
            "rmse changed: {} vs {}",
            base.rmse,
            transformed.rmse
        );
    }

    #[test]
    fn ate_rmse_is_mean_of_squares() {
        // definition check against a one-line accumulation on a case with a
        // known optimal alignment: symmetric perturbation along y only
        let h = 1.0;
        let d = 0.1;
        let est = trajectory_from_positions(&[
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
            Vector3::new(1.0, h, 0.0),
        ]);
        let gt = trajectory_from_positions(&[
            Vector3::new(0.0, d, 0.0),
            Vector3::new(2.0, d, 0.0),
            Vector3::new(1.0, h - 2.0 * d, 0.0),
        ]);
        let report = compute_ate(&est, &gt, 0.02).unwrap();
        // residuals are exactly (d, d, 2d): rmse = sqrt(6 d^2 / 3) = d*sqrt(2)
        assert_relative_eq!(report.rmse, d * 2.0f64.sqrt(), epsilon = 1e-9);
        let brute = ((d * d + d * d + 4.0 * d * d) / 3.0).sqrt();
        assert_relative_eq!(report.rmse, brute, epsilon = 1e-12);
        assert!(report.median <= report.max && report.rmse <= report.max);
    }

    #[test]
    fn ate_noise_floor_matches_monte_carlo() {
        // zero-mean per-pose noise with sigma = 0.01 on each axis:
        // rmse ~= 0.01 * sqrt(3) within 20%
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        let sigma = 0.01;
        let mut gauss = move || -> f64 {
            let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.random_range(0.0..1.0f64);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let positions: Vec<Vector3<f64>> = (0..1000)
            .map(|i| Vector3::new((i as f64 * 0.01).sin() * 3.0, (i as f64 * 0.01).cos() * 3.0, 0.001 * i as f64))
            .collect();
        let noisy: Vec<Vector3<f64>> = positions
            .iter()
            .map(|p| p + Vector3::new(gauss(), gauss(), gauss()) * sigma)
            .collect();
        let gt = trajectory_from_positions(&positions);
        let est = trajectory_from_positions(&noisy);
        let report = compute_ate(&est, &gt, 0.02).unwrap();
        let expected = sigma * 3.0f64.sqrt();
        assert!(
            (report.rmse - expected).abs() / expected < 0.2,
            "rmse {} vs expected {}",
            report.rmse,
            expected
        );
    }

    #[test]
    fn score_map_cases() {
        let truth = vec![
            TruthObject { class_id: 56, position: Vector3::new(0.0, 0.0, 2.0) },
            TruthObject { class_id: 77, position: Vector3::new(1.0, 0.0, 2.0) },
        ];
        // perfect map
        let mapped = vec![
            (56, Vector3::new(0.1, 0.0, 2.0)),
            (77, Vector3::new(1.1, 0.0, 2.0)),
        ];
        let score = score_map(&mapped, &truth, 0.5);
        assert_eq!(score.precision, 1.0);
        assert_eq!(score.recall, 1.0);
        // ghost object hurts precision, missing object hurts recall
        let mapped = vec![(56, Vector3::new(0.1, 0.0, 2.0)), (62, Vector3::new(5.0, 0.0, 2.0))];
        let score = score_map(&mapped, &truth, 0.5);
        assert_eq!(score.precision, 0.5);
        assert_eq!(score.recall, 0.5);
        // class must match even when close
        let mapped = vec![(62, Vector3::new(0.0, 0.0, 2.0))];
        let score = score_map(&mapped, &truth, 0.5);
        assert_eq!(score.precision, 0.0);
        // empty map over empty truth is perfect
        let score = score_map(&[], &[], 0.5);
        assert_eq!(score.precision, 1.0);
        assert_eq!(score.recall, 1.0);
    }
}
