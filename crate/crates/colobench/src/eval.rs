//! Scene-level evaluation over files on disk.
//!
//! Depth frames are streamed: a first pass reads every frame pair for the
//! image means that fix the trajectory scale, a second pass re-reads them for
//! the errors. Frames within a pass are processed in parallel but results are
//! collected in frame order and reduced serially, so the output does not
//! depend on the thread count.

use std::path::{Path, PathBuf};

use colobench_core::depth::{depth_errors_with_scratch, mean_depth, scale_from_means, SceneDepthSummary};
use colobench_core::pose::{evaluate_pose_task2, evaluate_pose_task3, ScenePoseSummary};
use colobench_core::{
    Aggregator, DepthMap, DepthMetricReport, Pose, PoseMetricReport, RelativeSequence, SequenceSource, Trajectory,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::io::{load_depth_png, SceneSet, TrajectoryData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseMode {
    /// Synthetic pipeline, scale fitted on relative translations.
    Rel,
    /// Real-data pipeline, scale fitted on absolute translations.
    Abs,
}

fn load_pair(gt: &Path, pred: &Path, full_scale: f64) -> Result<(DepthMap, DepthMap)> {
    let g = load_depth_png(gt, full_scale)?;
    let p = load_depth_png(pred, full_scale)?;
    if g.dims() != p.dims() {
        return Err(Error::Consistency(format!(
            "{}: prediction is {}x{} but ground truth is {}x{}",
            pred.display(),
            p.width(),
            p.height(),
            g.width(),
            g.height()
        )));
    }
    Ok((g, p))
}

/// Depth metrics of one trajectory from PNG files.
pub fn eval_depth_trajectory(
    traj: &TrajectoryData,
    pred_paths: &[PathBuf],
    full_scale: f64,
) -> Result<DepthMetricReport> {
    let pairs: Vec<(&PathBuf, &PathBuf)> = traj.depth_paths.iter().zip(pred_paths).collect();
    let means = pairs
        .par_iter()
        .map(|(g, p)| {
            let (gm, pm) = load_pair(g, p, full_scale)?;
            Ok((mean_depth(&gm), mean_depth(&pm)))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = scale_from_means(&means).context(|| format!("trajectory `{}`", traj.id))?;
    let per_frame = pairs
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |scratch, (i, (g, p))| {
            let (gm, pm) = load_pair(g, p, full_scale)?;
            depth_errors_with_scratch(&gm, &pm, &scale, scratch)
                .context(|| format!("trajectory `{}`, frame {i}", traj.id))
        })
        .collect::<Result<Vec<_>>>()?;
    DepthMetricReport::from_frames(traj.id.clone(), scale, per_frame).context(|| format!("trajectory `{}`", traj.id))
}

pub fn eval_depth_scene(gt: &SceneSet, pred: &[Vec<PathBuf>], full_scale: f64) -> Result<SceneDepthSummary> {
    let reports = gt
        .trajectories
        .iter()
        .zip(pred)
        .map(|(t, p)| eval_depth_trajectory(t, p, full_scale))
        .collect::<Result<Vec<_>>>()?;
    SceneDepthSummary::from_reports(reports).context(|| format!("scene `{}`", gt.scene_id))
}

pub fn eval_pose_trajectory(
    traj: &TrajectoryData,
    pred_rels: &[Pose],
    mode: PoseMode,
    agg: Aggregator,
) -> Result<PoseMetricReport> {
    let ctx = || format!("trajectory `{}`", traj.id);
    let gt = Trajectory::new(traj.id.clone(), traj.poses.clone()).context(ctx)?;
    let rels = RelativeSequence::new(pred_rels.to_vec(), SequenceSource::Prediction).context(ctx)?;
    match mode {
        PoseMode::Rel => evaluate_pose_task2(&gt, &rels, agg),
        PoseMode::Abs => evaluate_pose_task3(&gt, &rels, agg),
    }
    .context(ctx)
}

pub fn eval_pose_scene(gt: &SceneSet, pred: &[Vec<Pose>], mode: PoseMode, agg: Aggregator) -> Result<ScenePoseSummary> {
    let reports = gt
        .trajectories
        .par_iter()
        .zip(pred)
        .map(|(t, p)| eval_pose_trajectory(t, p, mode, agg))
        .collect::<Result<Vec<_>>>()?;
    ScenePoseSummary::from_reports(reports).context(|| format!("scene `{}`", gt.scene_id))
}
