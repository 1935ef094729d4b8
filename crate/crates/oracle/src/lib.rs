//! Brute-force reference computations for the colobench test suites.
//!
//! Nothing here shares code with `colobench-core`. Poses are handled as
//! general 4×4 homogeneous matrices (nalgebra), rotations are built with the
//! Rodrigues formula, scale fits are found by bracketing search instead of
//! the closed form, and medians come from a full sort. Inputs are plain
//! arrays: poses use the `[tx, ty, tz, qx, qy, qz, qw]` layout.

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3};

pub type Mat4 = [[f64; 4]; 4];

/// Rotation matrix of a quaternion via its axis and angle (Rodrigues).
pub fn quaternion_matrix_via_axis_angle(q: [f64; 4]) -> [[f64; 3]; 3] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (x, y, z, w) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    let s = (x * x + y * y + z * z).sqrt();
    let angle = 2.0 * s.atan2(w);
    if s == 0.0 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let k = [x / s, y / s, z / s];
    rodrigues(k, angle)
}

/// `R = I + sinθ K + (1 − cosθ) K²` for unit axis `k`.
pub fn rodrigues(k: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let kx = Matrix3::new(0.0, -k[2], k[1], k[2], 0.0, -k[0], -k[1], k[0], 0.0);
    let r = Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos());
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = r[(i, j)];
        }
    }
    out
}

/// Scalar-last quaternion of `angle` radians about `axis`.
pub fn axis_angle_quaternion(axis: [f64; 3], angle: f64) -> [f64; 4] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (s, c) = ((angle / 2.0).sin(), (angle / 2.0).cos());
    [axis[0] / n * s, axis[1] / n * s, axis[2] / n * s, c]
}

fn to_na(m: &Mat4) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[i][j])
}

fn from_na(m: &Matrix4<f64>) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

pub fn pose_to_homogeneous(v: [f64; 7]) -> Mat4 {
    let r = quaternion_matrix_via_axis_angle([v[3], v[4], v[5], v[6]]);
    [
        [r[0][0], r[0][1], r[0][2], v[0]],
        [r[1][0], r[1][1], r[1][2], v[1]],
        [r[2][0], r[2][1], r[2][2], v[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    from_na(&(to_na(a) * to_na(b)))
}

/// General LU-based inverse; does not exploit rigid structure.
pub fn mat4_inverse(a: &Mat4) -> Mat4 {
    from_na(&to_na(a).try_inverse().expect("singular homogeneous matrix"))
}

pub fn translation(m: &Mat4) -> [f64; 3] {
    [m[0][3], m[1][3], m[2][3]]
}

/// Rotation angle (degrees) of the upper-left block, via nalgebra's
/// quaternion extraction rather than a trace formula.
pub fn rotation_angle_deg(m: &Mat4) -> f64 {
    let r = Matrix3::from_fn(|i, j| m[i][j]);
    let rot = Rotation3::from_matrix_unchecked(r);
    UnitQuaternion::from_rotation_matrix(&rot).angle().to_degrees()
}

/// Quaternion of the upper-left block, scalar-last.
pub fn rotation_quaternion(m: &Mat4) -> [f64; 4] {
    let r = Matrix3::from_fn(|i, j| m[i][j]);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    [q.i, q.j, q.k, q.w]
}

pub fn homogeneous_to_pose(m: &Mat4) -> [f64; 7] {
    let q = rotation_quaternion(m);
    [m[0][3], m[1][3], m[2][3], q[0], q[1], q[2], q[3]]
}

/// Hamilton product of scalar-last quaternions, via nalgebra.
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let qa = Quaternion::new(a[3], a[0], a[1], a[2]);
    let qb = Quaternion::new(b[3], b[0], b[1], b[2]);
    let p = qa * qb;
    [p.i, p.j, p.k, p.w]
}

fn norm3(v: [f64; 3]) -> f64 {
    Vector3::new(v[0], v[1], v[2]).norm()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Median by full sort; mean of the two central values for even counts.
pub fn median_by_sort(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn plain_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Neumaier-compensated mean.
pub fn compensated_mean(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / values.len() as f64
}

/// Minimizer of `Σ (a_i − s·b_i)²`, found without the closed form:
/// a coarse grid brackets the minimum of the objective, then bisection on the
/// sign of the per-term derivative `Σ b_i (s·b_i − a_i)` refines it.
pub fn least_squares_scale(pairs: &[(f64, f64)]) -> f64 {
    let objective = |s: f64| pairs.iter().map(|(a, b)| (a - s * b).powi(2)).sum::<f64>();
    let slope = |s: f64| pairs.iter().map(|(a, b)| b * (s * b - a)).sum::<f64>();

    // magnitude bound on the minimizer: |s| ≤ max|a| / min nonzero |b| · n
    let amax = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let bnorm = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
    let bound = (amax * (pairs.len() as f64).sqrt() / bnorm).max(1.0) * 2.0;

    let steps = 2000;
    let mut best = -bound;
    let mut best_val = f64::INFINITY;
    for k in 0..=steps {
        let s = -bound + 2.0 * bound * k as f64 / steps as f64;
        let v = objective(s);
        if v < best_val {
            best_val = v;
            best = s;
        }
    }
    let h = 2.0 * bound / steps as f64;
    let (mut lo, mut hi) = (best - h, best + h);
    assert!(slope(lo) <= 0.0 && slope(hi) >= 0.0, "grid failed to bracket the minimum");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares scale over paired 3-vectors (`Σ |a_i − s·b_i|²`).
pub fn least_squares_scale_vec3(pairs: &[([f64; 3], [f64; 3])]) -> f64 {
    let flat: Vec<(f64, f64)> = pairs.iter().flat_map(|(a, b)| (0..3).map(move |k| (a[k], b[k]))).collect();
    least_squares_scale(&flat)
}

/// `(l1, rel, rmse)` for one frame, one pixel at a time.
pub fn depth_frame_errors(gt: &[f64], pred: &[f64], s: f64) -> (f64, f64, f64) {
    let n = gt.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut rel = Vec::new();
    for d in 0..gt.len() {
        let r = gt[d] - s * pred[d];
        abs_sum += r.abs();
        sq_sum += r * r;
        if gt[d] > 0.0 {
            rel.push(r.abs() / gt[d]);
        }
    }
    (abs_sum / n, median_by_sort(&rel), (sq_sum / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct DepthOracle {
    pub scale: f64,
    pub l1: f64,
    pub rel: f64,
    pub rmse: f64,
    pub per_frame: Vec<(f64, f64, f64)>,
}

/// Whole-trajectory depth evaluation: image means, searched scale, per-frame
/// errors, unweighted frame means.
pub fn depth_trajectory(gt: &[Vec<f64>], pred: &[Vec<f64>]) -> DepthOracle {
    let pairs: Vec<(f64, f64)> = gt.iter().zip(pred).map(|(g, p)| (compensated_mean(g), compensated_mean(p))).collect();
    let scale = least_squares_scale(&pairs);
    let per_frame: Vec<_> = gt.iter().zip(pred).map(|(g, p)| depth_frame_errors(g, p, scale)).collect();
    let n = per_frame.len() as f64;
    DepthOracle {
        scale,
        l1: per_frame.iter().map(|e| e.0).sum::<f64>() / n,
        rel: per_frame.iter().map(|e| e.1).sum::<f64>() / n,
        rmse: per_frame.iter().map(|e| e.2).sum::<f64>() / n,
        per_frame,
    }
}

#[derive(Debug, Clone)]
pub struct PoseOracle {
    pub scale: f64,
    pub ate: f64,
    pub rte: f64,
    pub rot: f64,
    pub ate_per_frame: Vec<f64>,
    pub rte_per_frame: Vec<f64>,
    pub rot_per_frame: Vec<f64>,
}

fn aggregate(values: &[f64], median: bool) -> f64 {
    if median {
        median_by_sort(values)
    } else {
        plain_mean(values)
    }
}

fn scale_translation(m: &Mat4, s: f64) -> Mat4 {
    let mut out = *m;
    for row in out.iter_mut().take(3) {
        row[3] *= s;
    }
    out
}

fn local_errors(gt_rel: &[Mat4], pred_rel: &[Mat4]) -> (Vec<f64>, Vec<f64>) {
    gt_rel
        .iter()
        .zip(pred_rel)
        .map(|(g, p)| {
            let e = mat4_mul(&mat4_inverse(g), p);
            (norm3(translation(&e)), rotation_angle_deg(&e))
        })
        .unzip()
}

/// Relative-scale pipeline on 4×4 matrices: gt relatives by matrix inverse,
/// searched scale over relative translations, chain product anchored at the
/// ground-truth first pose.
pub fn pose_task2(gt_abs: &[[f64; 7]], pred_rel: &[[f64; 7]], median: bool) -> PoseOracle {
    let gt: Vec<Mat4> = gt_abs.iter().map(|v| pose_to_homogeneous(*v)).collect();
    let gt_rel: Vec<Mat4> = gt.windows(2).map(|w| mat4_mul(&mat4_inverse(&w[0]), &w[1])).collect();
    let pred: Vec<Mat4> = pred_rel.iter().map(|v| pose_to_homogeneous(*v)).collect();

    let pairs: Vec<_> = gt_rel.iter().zip(&pred).map(|(g, p)| (translation(g), translation(p))).collect();
    let scale = least_squares_scale_vec3(&pairs);
    let pred_scaled: Vec<Mat4> = pred.iter().map(|p| scale_translation(p, scale)).collect();

    let mut chain = vec![gt[0]];
    for p in &pred_scaled {
        let next = mat4_mul(chain.last().unwrap(), p);
        chain.push(next);
    }
    let ate_per_frame: Vec<f64> =
        gt.iter().zip(&chain).map(|(g, p)| norm3(sub3(translation(g), translation(p)))).collect();
    let (rte_per_frame, rot_per_frame) = local_errors(&gt_rel, &pred_scaled);
    PoseOracle {
        scale,
        ate: aggregate(&ate_per_frame, median),
        rte: aggregate(&rte_per_frame, median),
        rot: aggregate(&rot_per_frame, median),
        ate_per_frame,
        rte_per_frame,
        rot_per_frame,
    }
}

/// Absolute-scale pipeline: both trajectories expressed relative to their
/// first frame, prediction chained unscaled, scale searched over absolute
/// translations, then applied to every predicted translation.
pub fn pose_task3(gt_abs: &[[f64; 7]], pred_rel: &[[f64; 7]], median: bool) -> PoseOracle {
    let gt_raw: Vec<Mat4> = gt_abs.iter().map(|v| pose_to_homogeneous(*v)).collect();
    let first_inv = mat4_inverse(&gt_raw[0]);
    let gt: Vec<Mat4> = gt_raw.iter().map(|g| mat4_mul(&first_inv, g)).collect();
    let gt_rel: Vec<Mat4> = gt.windows(2).map(|w| mat4_mul(&mat4_inverse(&w[0]), &w[1])).collect();
    let pred: Vec<Mat4> = pred_rel.iter().map(|v| pose_to_homogeneous(*v)).collect();

    let mut chain: Vec<Mat4> = vec![from_na(&Matrix4::identity())];
    for p in &pred {
        let next = mat4_mul(chain.last().unwrap(), p);
        chain.push(next);
    }
    let pairs: Vec<_> = gt.iter().zip(&chain).map(|(g, p)| (translation(g), translation(p))).collect();
    let scale = least_squares_scale_vec3(&pairs);
    let chain_scaled: Vec<Mat4> = chain.iter().map(|p| scale_translation(p, scale)).collect();
    let pred_scaled_rel: Vec<Mat4> = chain_scaled.windows(2).map(|w| mat4_mul(&mat4_inverse(&w[0]), &w[1])).collect();

    let ate_per_frame: Vec<f64> =
        gt.iter().zip(&chain_scaled).map(|(g, p)| norm3(sub3(translation(g), translation(p)))).collect();
    let (rte_per_frame, rot_per_frame) = local_errors(&gt_rel, &pred_scaled_rel);
    PoseOracle {
        scale,
        ate: aggregate(&ate_per_frame, median),
        rte: aggregate(&rte_per_frame, median),
        rot: aggregate(&rot_per_frame, median),
        ate_per_frame,
        rte_per_frame,
        rot_per_frame,
    }
}

/// Relative poses `P_τ⁻¹ P_{τ+1}` via general matrix inverse.
pub fn relatives(abs: &[[f64; 7]]) -> Vec<[f64; 7]> {
    let m: Vec<Mat4> = abs.iter().map(|v| pose_to_homogeneous(*v)).collect();
    m.windows(2).map(|w| homogeneous_to_pose(&mat4_mul(&mat4_inverse(&w[0]), &w[1]))).collect()
}

/// z-depth where a camera-frame ray from a point on the axis of an infinite
/// cylinder (axis = camera z) meets the wall, from the ray/cylinder quadratic
/// `|o⊥ + t·d⊥|² = r²`. `None` when the ray is parallel to the axis.
pub fn cylinder_hit_depth(offset: [f64; 2], ray: [f64; 3], radius: f64) -> Option<f64> {
    let a = ray[0] * ray[0] + ray[1] * ray[1];
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * (offset[0] * ray[0] + offset[1] * ray[1]);
    let c = offset[0] * offset[0] + offset[1] * offset[1] - radius * radius;
    let disc = b * b - 4.0 * a * c;
    let t = (-b + disc.sqrt()) / (2.0 * a);
    Some(t * ray[2])
}

/// Weighted mean `Σ v·w / Σ w` of `(value, weight)` pairs.
pub fn weighted_mean(values: &[(f64, f64)]) -> f64 {
    let wsum: f64 = values.iter().map(|v| v.1).sum();
    values.iter().map(|(v, w)| v * w).sum::<f64>() / wsum
}

/// Rank points for one category by explicit pairwise comparison: a team gets
/// `1 + #(teams strictly worse)` points, ties share the mean of their slots.
pub fn pairwise_points(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let worse = (0..n).filter(|&j| values[j] > values[i]).count();
            let tied = (0..n).filter(|&j| values[j] == values[i]).count();
            // slots worse+1 ..= worse+tied
            (1..=tied).map(|k| (worse + k) as f64).sum::<f64>() / tied as f64
        })
        .collect()
}
