//! Depth evaluation: per-trajectory least-squares scale and the L1 /
//! median-relative / RMSE errors.
//!
//! The evaluation is two-pass. Image means of every frame pair feed one
//! scale per trajectory; that single scale is then applied to every pixel of
//! every frame. The pieces are public so streaming callers (which cannot hold
//! a whole trajectory in memory) follow exactly the same arithmetic as
//! [`evaluate_depth_trajectory`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::median_in_place;

/// Dense per-pixel depth in centimeters, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch { expected: width * height, actual: data.len() });
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn uniform(width: usize, height: usize, depth: f64) -> Result<Self> {
        DepthMap::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Every pixel multiplied by `c`.
    pub fn scaled(&self, c: f64) -> DepthMap {
        DepthMap { width: self.width, height: self.height, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// Arithmetic mean over all pixels, summed serially in row-major order.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Fails with [`Error::OutOfRange`] on the first value outside
    /// `[0, far]` (or non-finite).
    pub fn check_range(&self, far: f64) -> Result<()> {
        match self.data.iter().find(|v| !(**v >= 0.0 && **v <= far)) {
            Some(&value) => Err(Error::OutOfRange { value, min: 0.0, max: far }),
            None => Ok(()),
        }
    }
}

/// Mean depth of a map, in centimeters.
pub fn mean_depth(map: &DepthMap) -> f64 {
    map.mean()
}

/// Scale applied to every predicted depth of one trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DepthScale {
    pub s: f64,
    pub trajectory_id: String,
}

impl DepthScale {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::DegenerateScale);
        }
        Ok(DepthScale { s, trajectory_id: String::new() })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.trajectory_id = id.into();
        self
    }
}

/// Closed-form minimizer of `Σ (ȳ_i − s·ȳ'_i)²` over `(gt_mean, pred_mean)`
/// pairs.
pub fn scale_from_means(means: &[(f64, f64)]) -> Result<DepthScale> {
    if means.is_empty() {
        return Err(Error::EmptyInput);
    }
    let num: f64 = means.iter().map(|(g, p)| g * p).sum();
    let den: f64 = means.iter().map(|(_, p)| p * p).sum();
    if den == 0.0 {
        return Err(Error::DegenerateScale);
    }
    DepthScale::new(num / den)
}

fn check_pair(gt: &DepthMap, pred: &DepthMap) -> Result<()> {
    if gt.dims() != pred.dims() {
        return Err(Error::DimensionMismatch { expected: gt.dims(), actual: pred.dims() });
    }
    Ok(())
}

/// Per-trajectory scale from image means.
pub fn trajectory_scale(gt: &[DepthMap], pred: &[DepthMap]) -> Result<DepthScale> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), actual: pred.len() });
    }
    let means = gt
        .iter()
        .zip(pred)
        .map(|(g, p)| check_pair(g, p).map(|()| (g.mean(), p.mean())))
        .collect::<Result<Vec<_>>>()?;
    scale_from_means(&means)
}

/// Errors of one frame, in centimeters (`rel` is dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameDepthErrors {
    pub l1: f64,
    pub rel: f64,
    pub rmse: f64,
}

/// L1, median relative error over pixels with positive ground truth, RMSE.
pub fn depth_errors(gt: &DepthMap, pred: &DepthMap, scale: &DepthScale) -> Result<FrameDepthErrors> {
    let mut scratch = Vec::with_capacity(gt.data.len());
    depth_errors_with_scratch(gt, pred, scale, &mut scratch)
}

/// [`depth_errors`] reusing a caller-owned buffer for the relative errors.
pub fn depth_errors_with_scratch(
    gt: &DepthMap,
    pred: &DepthMap,
    scale: &DepthScale,
    scratch: &mut Vec<f64>,
) -> Result<FrameDepthErrors> {
    check_pair(gt, pred)?;
    let s = scale.s;
    scratch.clear();
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (&y, &y_pred) in gt.data.iter().zip(&pred.data) {
        let r = y - s * y_pred;
        abs_sum += libm::fabs(r);
        sq_sum += r * r;
        if y > 0.0 {
            scratch.push(libm::fabs(r) / y);
        }
    }
    let rel = median_in_place(scratch).ok_or(Error::NoValidPixels)?;
    let n = gt.data.len() as f64;
    Ok(FrameDepthErrors { l1: abs_sum / n, rel, rmse: libm::sqrt(sq_sum / n) })
}

/// Depth metrics of one trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DepthMetricReport {
    pub trajectory_id: String,
    pub scale: DepthScale,
    pub l1: f64,
    pub rel: f64,
    pub rmse: f64,
    pub per_frame: Vec<FrameDepthErrors>,
}

impl DepthMetricReport {
    /// Unweighted frame means of the per-frame errors.
    pub fn from_frames(
        trajectory_id: impl Into<String>,
        scale: DepthScale,
        per_frame: Vec<FrameDepthErrors>,
    ) -> Result<Self> {
        if per_frame.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = per_frame.len() as f64;
        let trajectory_id = trajectory_id.into();
        Ok(DepthMetricReport {
            scale: scale.with_id(trajectory_id.clone()),
            trajectory_id,
            l1: per_frame.iter().map(|e| e.l1).sum::<f64>() / n,
            rel: per_frame.iter().map(|e| e.rel).sum::<f64>() / n,
            rmse: per_frame.iter().map(|e| e.rmse).sum::<f64>() / n,
            per_frame,
        })
    }
}

/// Scale once, then per-frame errors with that scale, then frame means.
pub fn evaluate_depth_trajectory(trajectory_id: &str, gt: &[DepthMap], pred: &[DepthMap]) -> Result<DepthMetricReport> {
    let scale = trajectory_scale(gt, pred)?;
    let mut scratch = Vec::new();
    let per_frame = gt
        .iter()
        .zip(pred)
        .map(|(g, p)| depth_errors_with_scratch(g, p, &scale, &mut scratch))
        .collect::<Result<Vec<_>>>()?;
    DepthMetricReport::from_frames(trajectory_id, scale, per_frame)
}

/// Frames of one trajectory held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSequence {
    pub id: String,
    pub frames: Vec<DepthMap>,
}

/// Scene-level depth result: unweighted mean over trajectories.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneDepthSummary {
    pub l1: f64,
    pub rel: f64,
    pub rmse: f64,
    pub trajectories: Vec<DepthMetricReport>,
}

impl SceneDepthSummary {
    pub fn from_reports(trajectories: Vec<DepthMetricReport>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = trajectories.len() as f64;
        Ok(SceneDepthSummary {
            l1: trajectories.iter().map(|r| r.l1).sum::<f64>() / n,
            rel: trajectories.iter().map(|r| r.rel).sum::<f64>() / n,
            rmse: trajectories.iter().map(|r| r.rmse).sum::<f64>() / n,
            trajectories,
        })
    }
}

/// Trajectories are matched by id; both sides must carry the same id set.
pub fn evaluate_depth_scene(gt: &[DepthSequence], pred: &[DepthSequence]) -> Result<SceneDepthSummary> {
    check_same_ids(gt.iter().map(|t| t.id.as_str()), pred.iter().map(|t| t.id.as_str()))?;
    let mut reports = Vec::with_capacity(gt.len());
    for g in gt {
        let p = pred.iter().find(|p| p.id == g.id).expect("ids checked");
        reports.push(evaluate_depth_trajectory(&g.id, &g.frames, &p.frames)?);
    }
    SceneDepthSummary::from_reports(reports)
}

/// Same id multiset on both sides, else a consistency error naming the first
/// offender.
pub fn check_same_ids<'a>(gt: impl Iterator<Item = &'a str>, pred: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut g: Vec<&str> = gt.collect();
    let mut p: Vec<&str> = pred.collect();
    g.sort_unstable();
    p.sort_unstable();
    if let Some(missing) = g.iter().find(|id| !p.contains(id)) {
        return Err(Error::Consistency(alloc::format!("trajectory `{missing}` missing from prediction")));
    }
    if let Some(extra) = p.iter().find(|id| !g.contains(id)) {
        return Err(Error::Consistency(alloc::format!("prediction has unknown trajectory `{extra}`")));
    }
    if g.len() != p.len() {
        return Err(Error::Consistency("duplicate trajectory ids".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use colobench_oracle as oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> DepthMap {
        DepthMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0.5..20.0)).collect()).unwrap()
    }

    #[test]
    fn mean_of_small_maps() {
        assert_eq!(mean_depth(&DepthMap::uniform(3, 3, 5.0).unwrap()), 5.0);
        let m = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mean_depth(&m), 2.5);
    }

    #[test]
    fn empty_map_is_rejected() {
        assert_eq!(DepthMap::new(0, 4, vec![]), Err(Error::EmptyInput));
        assert!(matches!(DepthMap::new(2, 2, vec![1.0; 3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn mean_matches_compensated_sum_on_full_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_map(&mut rng, 475, 475);
        let reference = oracle::compensated_mean(m.data());
        assert!(((m.mean() - reference) / reference).abs() < 1e-9);
    }

    #[test]
    fn scale_of_identical_and_halved_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt: Vec<_> = (0..4).map(|_| random_map(&mut rng, 8, 8)).collect();
        assert!((trajectory_scale(&gt, &gt).unwrap().s - 1.0).abs() < 1e-15);
        let half: Vec<_> = gt.iter().map(|m| m.scaled(0.5)).collect();
        assert!((trajectory_scale(&gt, &half).unwrap().s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_prediction_is_degenerate() {
        let gt = vec![DepthMap::uniform(2, 2, 3.0).unwrap()];
        let pred = vec![DepthMap::uniform(2, 2, 0.0).unwrap()];
        assert_eq!(trajectory_scale(&gt, &pred), Err(Error::DegenerateScale));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let a = DepthMap::uniform(2, 2, 1.0).unwrap();
        let b = DepthMap::uniform(3, 2, 1.0).unwrap();
        assert!(matches!(trajectory_scale(std::slice::from_ref(&a), &[b]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(trajectory_scale(&[a.clone(), a.clone()], &[a]), Err(Error::LengthMismatch { .. })));
        assert_eq!(trajectory_scale(&[], &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn constant_residual_errors() {
        let gt = DepthMap::uniform(4, 4, 10.0).unwrap();
        let pred = DepthMap::uniform(4, 4, 8.0).unwrap();
        let e = depth_errors(&gt, &pred, &DepthScale::new(1.0).unwrap()).unwrap();
        assert!((e.l1 - 2.0).abs() < 1e-15);
        assert!((e.rel - 0.2).abs() < 1e-15);
        assert!((e.rmse - 2.0).abs() < 1e-15);
        let zero = depth_errors(&gt, &gt, &DepthScale::new(1.0).unwrap()).unwrap();
        assert_eq!(zero, FrameDepthErrors::default());
    }

    #[test]
    fn rel_ignores_zero_ground_truth_and_fails_without_valid_pixels() {
        let gt = DepthMap::new(2, 1, vec![0.0, 10.0]).unwrap();
        let pred = DepthMap::new(2, 1, vec![1.0, 9.0]).unwrap();
        let e = depth_errors(&gt, &pred, &DepthScale::new(1.0).unwrap()).unwrap();
        assert!((e.rel - 0.1).abs() < 1e-15);
        let gt0 = DepthMap::uniform(2, 1, 0.0).unwrap();
        assert_eq!(depth_errors(&gt0, &pred, &DepthScale::new(1.0).unwrap()), Err(Error::NoValidPixels));
    }

    #[test]
    fn errors_match_per_pixel_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let gt = random_map(&mut rng, 8, 8);
            let pred = random_map(&mut rng, 8, 8);
            let s: f64 = rng.gen_range(0.2..3.0);
            let e = depth_errors(&gt, &pred, &DepthScale::new(s).unwrap()).unwrap();
            let (l1, rel, rmse) = oracle::depth_frame_errors(gt.data(), pred.data(), s);
            assert!((e.l1 - l1).abs() < 1e-12);
            assert!((e.rel - rel).abs() < 1e-12);
            assert!((e.rmse - rmse).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_identity_and_global_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt: Vec<_> = (0..6).map(|_| random_map(&mut rng, 8, 8)).collect();
        let r = evaluate_depth_trajectory("t", &gt, &gt).unwrap();
        assert_eq!((r.l1, r.rel, r.rmse), (0.0, 0.0, 0.0));
        assert_eq!(r.scale.s, 1.0);
        assert_eq!(r.scale.trajectory_id, "t");

        let tripled: Vec<_> = gt.iter().map(|m| m.scaled(3.0)).collect();
        let r = evaluate_depth_trajectory("t", &gt, &tripled).unwrap();
        assert!((r.scale.s - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.l1 < 1e-12 && r.rel < 1e-12 && r.rmse < 1e-12);
    }

    #[test]
    fn trajectory_matches_monolithic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gt: Vec<_> = (0..5).map(|_| random_map(&mut rng, 8, 8)).collect();
        let pred: Vec<_> = (0..5).map(|_| random_map(&mut rng, 8, 8)).collect();
        let r = evaluate_depth_trajectory("t", &gt, &pred).unwrap();
        let gt_raw: Vec<Vec<f64>> = gt.iter().map(|m| m.data().to_vec()).collect();
        let pred_raw: Vec<Vec<f64>> = pred.iter().map(|m| m.data().to_vec()).collect();
        let o = oracle::depth_trajectory(&gt_raw, &pred_raw);
        assert!((r.scale.s - o.scale).abs() < 1e-12);
        assert!((r.l1 - o.l1).abs() < 1e-12);
        assert!((r.rel - o.rel).abs() < 1e-12);
        assert!((r.rmse - o.rmse).abs() < 1e-12);
        assert_eq!(r.per_frame.len(), 5);
    }

    #[test]
    fn scale_matches_search_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let gt: Vec<_> = (0..4).map(|_| random_map(&mut rng, 8, 8)).collect();
            let pred: Vec<_> = (0..4).map(|_| random_map(&mut rng, 8, 8)).collect();
            let s = trajectory_scale(&gt, &pred).unwrap().s;
            let pairs: Vec<_> = gt.iter().zip(&pred).map(|(g, p)| (g.mean(), p.mean())).collect();
            let o = oracle::least_squares_scale(&pairs);
            assert!(((s - o) / o).abs() < 1e-9);
        }
    }

    fn seq(id: &str, frames: Vec<DepthMap>) -> DepthSequence {
        DepthSequence { id: id.into(), frames }
    }

    #[test]
    fn scene_is_mean_of_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gt: Vec<_> =
            ["a", "b", "c"].iter().map(|id| seq(id, (0..3).map(|_| random_map(&mut rng, 8, 8)).collect())).collect();
        let zero = evaluate_depth_scene(&gt, &gt).unwrap();
        assert_eq!((zero.l1, zero.rel, zero.rmse), (0.0, 0.0, 0.0));

        let pred: Vec<_> =
            gt.iter().map(|t| seq(&t.id, (0..3).map(|_| random_map(&mut rng, 8, 8)).collect())).collect();
        let scene = evaluate_depth_scene(&gt, &pred).unwrap();
        let mut l1 = 0.0;
        for (g, p) in gt.iter().zip(&pred) {
            let raw = |v: &[DepthMap]| v.iter().map(|m| m.data().to_vec()).collect::<Vec<_>>();
            l1 += oracle::depth_trajectory(&raw(&g.frames), &raw(&p.frames)).l1 / 3.0;
        }
        assert!((scene.l1 - l1).abs() < 1e-12);
    }

    #[test]
    fn scene_mean_of_given_l1_values() {
        let reports: Vec<_> = [0.02, 0.03, 0.04]
            .iter()
            .map(|&l1| {
                DepthMetricReport::from_frames(
                    "t",
                    DepthScale::new(1.0).unwrap(),
                    vec![FrameDepthErrors { l1, rel: 0.0, rmse: l1 }],
                )
                .unwrap()
            })
            .collect();
        let s = SceneDepthSummary::from_reports(reports).unwrap();
        assert!((s.l1 - 0.03).abs() < 1e-15);
    }

    #[test]
    fn scene_id_mismatch() {
        let m = vec![DepthMap::uniform(2, 2, 1.0).unwrap()];
        let err = evaluate_depth_scene(&[seq("a", m.clone())], &[seq("b", m)]).unwrap_err();
        assert!(matches!(err, Error::Consistency(ref msg) if msg.contains("`a`")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn global_scale_is_absorbed(seed in any::<u64>(), c in 0.05f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt: Vec<_> = (0..4).map(|_| random_map(&mut rng, 6, 6)).collect();
            let pred: Vec<_> = (0..4).map(|_| random_map(&mut rng, 6, 6)).collect();
            let scaled: Vec<_> = pred.iter().map(|m| m.scaled(c)).collect();
            let a = evaluate_depth_trajectory("t", &gt, &pred).unwrap();
            let b = evaluate_depth_trajectory("t", &gt, &scaled).unwrap();
            prop_assert!((a.l1 - b.l1).abs() < 1e-9);
            prop_assert!((a.rel - b.rel).abs() < 1e-9);
            prop_assert!((a.rmse - b.rmse).abs() < 1e-9);
            prop_assert!((b.scale.s - a.scale.s / c).abs() < 1e-9 * a.scale.s / c);
            for e in &a.per_frame {
                prop_assert!(e.l1 <= e.rmse + 1e-15);
                prop_assert!(e.l1 >= 0.0 && e.rel >= 0.0);
            }
            prop_assert!(a.l1 <= a.rmse + 1e-15);
        }

        #[test]
        fn frame_order_does_not_matter(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt: Vec<_> = (0..5).map(|_| random_map(&mut rng, 5, 5)).collect();
            let pred: Vec<_> = (0..5).map(|_| random_map(&mut rng, 5, 5)).collect();
            let a = evaluate_depth_trajectory("t", &gt, &pred).unwrap();
            let gt_r: Vec<_> = gt.iter().rev().cloned().collect();
            let pred_r: Vec<_> = pred.iter().rev().cloned().collect();
            let b = evaluate_depth_trajectory("t", &gt_r, &pred_r).unwrap();
            prop_assert!((a.scale.s - b.scale.s).abs() < 1e-12);
            prop_assert!((a.l1 - b.l1).abs() < 1e-12);
            prop_assert!((a.rel - b.rel).abs() < 1e-12);
            prop_assert!((a.rmse - b.rmse).abs() < 1e-12);
        }

        #[test]
        fn median_resists_minority_corruption(seed in any::<u64>(), k in 0usize..12) {
            // 25 pixels; corrupting k < 12.5 of them cannot push rel past the
            // worst uncorrupted relative error
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_map(&mut rng, 5, 5);
            let pred = random_map(&mut rng, 5, 5);
            let scale = DepthScale::new(1.0).unwrap();
            let mut corrupted = pred.data().to_vec();
            for v in corrupted.iter_mut().take(k) {
                *v = 1e6;
            }
            let corrupted = DepthMap::new(5, 5, corrupted).unwrap();
            let rel = depth_errors(&gt, &corrupted, &scale).unwrap().rel;
            let worst_clean = gt.data().iter().zip(pred.data()).skip(k)
                .map(|(g, p)| (g - p).abs() / g)
                .fold(0.0, f64::max);
            prop_assert!(rel <= worst_clean + 1e-12);
        }
    }
}
