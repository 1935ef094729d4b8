//! Pose evaluation: relative-pose chains, the relative and absolute scale
//! fits, and the ATE / RTE / ROT errors.
//!
//! Relative pose `Ω_τ = P_τ⁻¹ · P_{τ+1}` maps frame `τ+1` camera coordinates
//! into frame `τ`. Only the forward direction is evaluated. Internally all
//! translations are centimeters and angles degrees.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::se3::{rotation_angle_deg, Pose, Vec3};
use crate::stats::Aggregator;

/// Ordered absolute camera poses of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Trajectory { id: id.into(), poses })
    }

    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    /// Same trajectory with the first pose moved to the identity.
    pub fn relative_to_first(&self) -> Trajectory {
        let first_inv = self.poses[0].inverse();
        Trajectory { id: self.id.clone(), poses: self.poses.iter().map(|p| first_inv.compose(p)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SequenceSource {
    GroundTruth,
    Prediction,
}

/// Consecutive relative poses; element `τ` maps frame `τ+1` into frame `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeSequence {
    pub rels: Vec<Pose>,
    pub source: SequenceSource,
}

impl RelativeSequence {
    pub fn new(rels: Vec<Pose>, source: SequenceSource) -> Result<Self> {
        if rels.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(RelativeSequence { rels, source })
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScaleMode {
    /// Fitted on relative translations.
    Relative,
    /// Fitted on absolute translations of first-frame-normalized trajectories.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseScale {
    pub s: f64,
    pub mode: ScaleMode,
}

/// Relatives of consecutive frames.
pub fn derive_relatives(traj: &Trajectory, source: SequenceSource) -> Result<RelativeSequence> {
    if traj.poses.len() < 2 {
        return Err(Error::TooShort { len: traj.poses.len(), min: 2 });
    }
    let rels = traj.poses.windows(2).map(|w| w[0].inverse().compose(&w[1])).collect();
    Ok(RelativeSequence { rels, source })
}

/// `P_1, P_1Ω_1, P_1Ω_1Ω_2, …`: `rels.len() + 1` poses.
pub fn compose_trajectory(anchor: &Pose, rels: &RelativeSequence) -> Vec<Pose> {
    let mut poses = Vec::with_capacity(rels.len() + 1);
    let mut current = *anchor;
    poses.push(current);
    for rel in &rels.rels {
        current = current.compose(rel);
        poses.push(current);
    }
    poses
}

fn least_squares_translation_scale<'a>(
    pairs: impl Iterator<Item = (&'a Pose, &'a Pose)>,
    mode: ScaleMode,
) -> Result<PoseScale> {
    let (mut num, mut den) = (0.0, 0.0);
    for (gt, pred) in pairs {
        num += gt.translation.dot(pred.translation);
        den += pred.translation.norm_squared();
    }
    if den == 0.0 {
        return Err(Error::DegenerateScale);
    }
    let s = num / den;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::DegenerateScale);
    }
    Ok(PoseScale { s, mode })
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    if expected == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// `Σ tᵀ t' / Σ t'ᵀ t'` over relative translations.
///
/// A non-positive fit (prediction moving against the ground truth) is
/// reported as [`Error::DegenerateScale`], since a scale must be positive.
pub fn relative_scale(gt: &RelativeSequence, pred: &RelativeSequence) -> Result<PoseScale> {
    check_len(gt.len(), pred.len())?;
    least_squares_translation_scale(gt.rels.iter().zip(&pred.rels), ScaleMode::Relative)
}

/// `Σ tᵀ t' / Σ t'ᵀ t'` over absolute translations; both inputs are expected
/// to be expressed relative to their own first frame.
pub fn absolute_scale(gt: &[Pose], pred: &[Pose]) -> Result<PoseScale> {
    check_len(gt.len(), pred.len())?;
    least_squares_translation_scale(gt.iter().zip(pred), ScaleMode::Absolute)
}

/// Translations multiplied by `s`, rotations untouched.
pub fn scale_relatives(rels: &RelativeSequence, s: f64) -> RelativeSequence {
    RelativeSequence { rels: rels.rels.iter().map(|p| p.scale_translation(s)).collect(), source: rels.source }
}

/// Per-frame `‖trans(Ω_τ⁻¹ Ω'_τ)‖`.
pub fn rte_per_frame(gt: &RelativeSequence, pred: &RelativeSequence) -> Result<Vec<f64>> {
    check_len(gt.len(), pred.len())?;
    Ok(gt.rels.iter().zip(&pred.rels).map(|(g, p)| g.inverse().compose(p).translation.norm()).collect())
}

/// Per-frame geodesic angle of `Rot(Ω_τ⁻¹ Ω'_τ)` in degrees.
pub fn rot_per_frame(gt: &RelativeSequence, pred: &RelativeSequence) -> Result<Vec<f64>> {
    check_len(gt.len(), pred.len())?;
    Ok(gt.rels.iter().zip(&pred.rels).map(|(g, p)| rotation_angle_deg(&(g.rotation.inverse() * p.rotation))).collect())
}

/// Per-frame `‖trans(P_τ) − trans(P'_τ)‖`.
pub fn ate_per_frame(gt: &[Pose], pred: &[Pose]) -> Result<Vec<f64>> {
    check_len(gt.len(), pred.len())?;
    Ok(gt.iter().zip(pred).map(|(g, p)| (g.translation - p.translation).norm()).collect())
}

fn reduce(values: &[f64], agg: Aggregator) -> Result<f64> {
    agg.apply(values).ok_or(Error::EmptyInput)
}

pub fn rte(gt: &RelativeSequence, pred_scaled: &RelativeSequence, agg: Aggregator) -> Result<f64> {
    reduce(&rte_per_frame(gt, pred_scaled)?, agg)
}

pub fn rot(gt: &RelativeSequence, pred: &RelativeSequence, agg: Aggregator) -> Result<f64> {
    reduce(&rot_per_frame(gt, pred)?, agg)
}

pub fn ate(gt: &[Pose], pred_abs: &[Pose], agg: Aggregator) -> Result<f64> {
    reduce(&ate_per_frame(gt, pred_abs)?, agg)
}

/// Pose errors of one trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseMetricReport {
    pub trajectory_id: String,
    /// Centimeters.
    pub ate: f64,
    /// Centimeters.
    pub rte: f64,
    /// Degrees.
    pub rot: f64,
    pub scale: PoseScale,
    pub aggregator: Aggregator,
    /// One entry per frame (the first is zero for anchored predictions).
    pub ate_per_frame: Vec<f64>,
    /// One entry per relative pose.
    pub rte_per_frame: Vec<f64>,
    pub rot_per_frame: Vec<f64>,
    /// Ground-truth and scaled predicted camera positions in the evaluation
    /// frame, for plotting.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub positions: Vec<(Vec3, Vec3)>,
}

fn build_report(
    id: &str,
    gt_abs: &[Pose],
    pred_abs: &[Pose],
    gt_rels: &RelativeSequence,
    pred_rels: &RelativeSequence,
    scale: PoseScale,
    agg: Aggregator,
) -> Result<PoseMetricReport> {
    let ate_frames = ate_per_frame(gt_abs, pred_abs)?;
    let rte_frames = rte_per_frame(gt_rels, pred_rels)?;
    let rot_frames = rot_per_frame(gt_rels, pred_rels)?;
    Ok(PoseMetricReport {
        trajectory_id: id.into(),
        ate: reduce(&ate_frames, agg)?,
        rte: reduce(&rte_frames, agg)?,
        rot: reduce(&rot_frames, agg)?,
        scale,
        aggregator: agg,
        positions: gt_abs.iter().zip(pred_abs).map(|(g, p)| (g.translation, p.translation)).collect(),
        ate_per_frame: ate_frames,
        rte_per_frame: rte_frames,
        rot_per_frame: rot_frames,
    })
}

fn check_prediction_len(gt: &Trajectory, pred_rels: &RelativeSequence) -> Result<()> {
    if gt.poses.len() < 2 {
        return Err(Error::TooShort { len: gt.poses.len(), min: 2 });
    }
    if pred_rels.len() != gt.poses.len() - 1 {
        return Err(Error::LengthMismatch { expected: gt.poses.len() - 1, actual: pred_rels.len() });
    }
    Ok(())
}

/// Synthetic-data pipeline: fit `s_rel` on relative translations, scale the
/// predicted relatives, chain them from the ground-truth first pose.
pub fn evaluate_pose_task2(gt: &Trajectory, pred_rels: &RelativeSequence, agg: Aggregator) -> Result<PoseMetricReport> {
    check_prediction_len(gt, pred_rels)?;
    let gt_rels = derive_relatives(gt, SequenceSource::GroundTruth)?;
    let scale = relative_scale(&gt_rels, pred_rels)?;
    let pred_scaled = scale_relatives(pred_rels, scale.s);
    let pred_abs = compose_trajectory(&gt.poses[0], &pred_scaled);
    build_report(&gt.id, &gt.poses, &pred_abs, &gt_rels, &pred_scaled, scale, agg)
}

/// Real-data pipeline: both trajectories moved to start at the identity, the
/// prediction chained unscaled, `s_abs` fitted on absolute translations and
/// applied to every predicted translation. No rotational alignment.
pub fn evaluate_pose_task3(gt: &Trajectory, pred_rels: &RelativeSequence, agg: Aggregator) -> Result<PoseMetricReport> {
    check_prediction_len(gt, pred_rels)?;
    let gt_norm = gt.relative_to_first();
    let gt_rels = derive_relatives(&gt_norm, SequenceSource::GroundTruth)?;
    let pred_abs = compose_trajectory(&Pose::IDENTITY, pred_rels);
    let scale = absolute_scale(&gt_norm.poses, &pred_abs)?;
    // Chained translations are linear in the relative translations, so
    // scaling the relatives equals scaling the absolute positions.
    let pred_abs_scaled: Vec<Pose> = pred_abs.iter().map(|p| p.scale_translation(scale.s)).collect();
    let pred_rels_scaled = derive_relatives(
        &Trajectory { id: gt.id.clone(), poses: pred_abs_scaled.clone() },
        SequenceSource::Prediction,
    )?;
    build_report(&gt.id, &gt_norm.poses, &pred_abs_scaled, &gt_rels, &pred_rels_scaled, scale, agg)
}

/// Scene-level pose result: unweighted mean over trajectories.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenePoseSummary {
    pub ate: f64,
    pub rte: f64,
    pub rot: f64,
    pub trajectories: Vec<PoseMetricReport>,
}

impl ScenePoseSummary {
    pub fn from_reports(trajectories: Vec<PoseMetricReport>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = trajectories.len() as f64;
        Ok(ScenePoseSummary {
            ate: trajectories.iter().map(|r| r.ate).sum::<f64>() / n,
            rte: trajectories.iter().map(|r| r.rte).sum::<f64>() / n,
            rot: trajectories.iter().map(|r| r.rot).sum::<f64>() / n,
            trajectories,
        })
    }
}
