//! Synthetic scene export.

use std::fs;
use std::path::Path;

use colobench_core::synth::{
    make_tube, sample_trajectory, DepthRenderer, Intrinsics, TrajectoryPlan, TubeParams, TubeWorld,
};
use colobench_core::DepthMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::io::{self, load_scene, SceneSet};
use crate::report::{write_text, ToolInfo};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to regenerate a scene bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: ToolInfo,
    pub seed: u64,
    pub tube: TubeParams,
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    pub depth_full_scale: f64,
    pub trajectories: Vec<ManifestTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTrajectory {
    pub id: String,
    pub plan: TrajectoryPlan,
}

/// Scene-generation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub seed: u64,
    pub tube: TubeParams,
    pub trajectories: usize,
    pub frames: usize,
    pub step: f64,
    pub lateral_sigma: f64,
    pub angular_sigma_deg: f64,
    pub resolution: usize,
    pub depth_full_scale: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        let plan = TrajectoryPlan::default();
        GenSpec {
            seed: 0,
            tube: TubeParams::default(),
            trajectories: 3,
            frames: plan.n_frames,
            step: plan.step,
            lateral_sigma: plan.lateral_sigma,
            angular_sigma_deg: plan.angular_sigma_deg,
            resolution: Intrinsics::CHALLENGE_SIZE,
            depth_full_scale: io::DEFAULT_FULL_SCALE,
        }
    }
}

impl GenSpec {
    /// One plan per trajectory, each on its own RNG stream. Start points are
    /// staggered along the tube when the path length leaves room.
    pub fn plans(&self) -> Vec<TrajectoryPlan> {
        let span = self.step * self.frames.saturating_sub(1) as f64;
        let base = TrajectoryPlan::default();
        (0..self.trajectories)
            .map(|k| {
                let staggered = base.start + 7.0 * k as f64;
                let start = if staggered + span <= self.tube.length { staggered } else { base.start };
                TrajectoryPlan {
                    n_frames: self.frames,
                    start,
                    step: self.step,
                    lateral_sigma: self.lateral_sigma,
                    angular_sigma_deg: self.angular_sigma_deg,
                    seed: self.seed,
                    stream: k as u64 + 1,
                    ..base
                }
            })
            .collect()
    }
}

/// Renders one frame with rows spread over the thread pool.
pub fn render_frame(
    world: &TubeWorld,
    pose: &colobench_core::Pose,
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
) -> colobench_core::Result<DepthMap> {
    let renderer = DepthRenderer::new(world, pose, intrinsics, width, height)?;
    let mut data = vec![0.0; width * height];
    data.par_chunks_mut(width).enumerate().for_each(|(row, chunk)| renderer.render_row(row, chunk));
    DepthMap::new(width, height, data)
}

/// Writes intrinsics, poses and depth PNGs for every plan, then reloads the
/// scene from disk.
pub fn export_dataset(
    world: &TubeWorld,
    plans: &[TrajectoryPlan],
    intrinsics: &Intrinsics,
    resolution: (usize, usize),
    full_scale: f64,
    out_dir: &Path,
) -> Result<SceneSet> {
    let (width, height) = resolution;
    fs::create_dir_all(out_dir).map_err(|e| Error::write(out_dir, e))?;
    io::save_intrinsics(&out_dir.join(io::INTRINSICS_FILE), intrinsics)?;
    for plan in plans {
        let traj = sample_trajectory(world, plan).context(|| format!("trajectory `{}`", plan.label()))?;
        let dir = out_dir.join(&traj.id);
        let depth_dir = dir.join(io::DEPTH_DIR);
        fs::create_dir_all(&depth_dir).map_err(|e| Error::write(&depth_dir, e))?;
        io::save_pose_file(&dir.join(io::POSE_FILE), &traj.poses)?;
        traj.poses.par_iter().enumerate().try_for_each(|(i, pose)| {
            let map = render_frame(world, pose, intrinsics, width, height)
                .context(|| format!("trajectory `{}`, frame {i}", traj.id))?;
            io::save_depth_png(&map, &depth_dir.join(io::depth_file_name(i)), full_scale)
        })?;
    }
    load_scene(out_dir)
}

/// Builds the tube, exports the scene and writes the manifest.
pub fn generate(spec: &GenSpec, out_dir: &Path) -> Result<(SceneSet, Manifest)> {
    if spec.resolution == 0 || spec.trajectories == 0 {
        return Err(Error::Usage("resolution and trajectory count must be positive".into()));
    }
    let world = make_tube(&spec.tube, spec.seed).context(|| "tube".into())?;
    let intrinsics = Intrinsics::challenge_like(spec.resolution);
    let plans = spec.plans();
    let scene = export_dataset(
        &world,
        &plans,
        &intrinsics,
        (spec.resolution, spec.resolution),
        spec.depth_full_scale,
        out_dir,
    )?;
    let manifest = Manifest {
        tool: ToolInfo::current(),
        seed: spec.seed,
        tube: spec.tube,
        width: spec.resolution,
        height: spec.resolution,
        intrinsics,
        depth_full_scale: spec.depth_full_scale,
        trajectories: plans.iter().map(|p| ManifestTrajectory { id: p.label(), plan: *p }).collect(),
    };
    // full precision so the manifest regenerates the exact scene
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    write_text(&out_dir.join(MANIFEST_FILE), &text)?;
    Ok((scene, manifest))
}
