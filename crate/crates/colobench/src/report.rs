//! Report documents and their serialization.
//!
//! Every floating-point number written to JSON or CSV carries 9 significant
//! digits; scores are computed at full precision before that.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use colobench_core::depth::SceneDepthSummary;
use colobench_core::pose::ScenePoseSummary;
use colobench_core::Aggregator;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Depth,
    Pose2,
    Pose3,
    Rank,
    Gen,
    Report,
}

/// Everything that determined a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub gt_dir: Option<PathBuf>,
    pub pred_dir: Option<PathBuf>,
    pub out_path: Option<PathBuf>,
    pub aggregator: Aggregator,
    pub depth_full_scale: f64,
    pub seed: Option<u64>,
    pub thread_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo { name: TOOL_NAME.into(), version: TOOL_VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub scene: String,
    pub summary: SceneDepthSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseReport {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub scene: String,
    pub summary: ScenePoseSummary,
}

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig9).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 9 significant digits.
pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut value = serde_json::to_value(doc).map_err(|e| Error::Internal(e.to_string()))?;
    round_value(&mut value);
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::write(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::write(path, e))
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn num(x: f64) -> String {
    round_sig9(x).to_string()
}

/// Per-frame depth errors: `trajectory,frame,l1,rel,rmse`.
pub fn depth_frames_csv(summary: &SceneDepthSummary) -> String {
    let mut out = String::from("trajectory,frame,l1,rel,rmse\n");
    for t in &summary.trajectories {
        for (i, e) in t.per_frame.iter().enumerate() {
            let _ = writeln!(out, "{},{i},{},{},{}", t.trajectory_id, num(e.l1), num(e.rel), num(e.rmse));
        }
    }
    out
}

/// Per-frame positions and errors for plotting. `rte` and `rot` belong to the
/// motion from this frame to the next, so the last frame leaves them empty.
/// Positions are blank for reports read back from JSON.
pub fn pose_frames_csv(summary: &ScenePoseSummary) -> String {
    let mut out = String::from("trajectory,frame,gt_x,gt_y,gt_z,pred_x,pred_y,pred_z,ate,rte,rot\n");
    for t in &summary.trajectories {
        for (i, &ate) in t.ate_per_frame.iter().enumerate() {
            let rel = |v: &[f64]| v.get(i).map(|&x| num(x)).unwrap_or_default();
            let xyz = match t.positions.get(i) {
                Some((g, p)) => [g.x, g.y, g.z, p.x, p.y, p.z].map(num).join(","),
                None => ",,,,,".to_string(),
            };
            let _ = writeln!(
                out,
                "{},{i},{xyz},{},{},{}",
                t.trajectory_id,
                num(ate),
                rel(&t.rte_per_frame),
                rel(&t.rot_per_frame),
            );
        }
    }
    out
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_header(cells: &[&str]) -> String {
    let mut s = md_row(&cells.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    s.push_str(&md_row(&vec!["---".to_string(); cells.len()]));
    s
}

pub fn depth_markdown(r: &DepthReport) -> String {
    let mut out = format!("## Depth evaluation: {}\n\n", r.scene);
    out.push_str(&md_header(&["Trajectory", "Frames", "Scale", "L1 (cm)", "Rel", "RMSE (cm)"]));
    for t in &r.summary.trajectories {
        out.push_str(&md_row(&[
            t.trajectory_id.clone(),
            t.per_frame.len().to_string(),
            format!("{:.4}", t.scale.s),
            format!("{:.4}", t.l1),
            format!("{:.4}", t.rel),
            format!("{:.4}", t.rmse),
        ]));
    }
    let s = &r.summary;
    out.push_str(&md_row(&[
        "**mean**".into(),
        String::new(),
        String::new(),
        format!("{:.4}", s.l1),
        format!("{:.4}", s.rel),
        format!("{:.4}", s.rmse),
    ]));
    out
}

pub fn pose_markdown(r: &PoseReport) -> String {
    let mut out = format!(
        "## Pose evaluation ({}): {}\n\nPer-frame aggregator: {}\n\n",
        match r.config.task {
            Task::Pose3 => "absolute scale",
            _ => "relative scale",
        },
        r.scene,
        r.config.aggregator
    );
    out.push_str(&md_header(&["Trajectory", "Frames", "Scale", "ATE (cm)", "RTE (cm)", "ROT (deg)"]));
    for t in &r.summary.trajectories {
        out.push_str(&md_row(&[
            t.trajectory_id.clone(),
            t.ate_per_frame.len().to_string(),
            format!("{:.4}", t.scale.s),
            format!("{:.4}", t.ate),
            format!("{:.4}", t.rte),
            format!("{:.4}", t.rot),
        ]));
    }
    let s = &r.summary;
    out.push_str(&md_row(&[
        "**mean**".into(),
        String::new(),
        String::new(),
        format!("{:.4}", s.ate),
        format!("{:.4}", s.rte),
        format!("{:.4}", s.rot),
    ]));
    out
}

/// A report file of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyReport {
    Depth(DepthReport),
    Pose(PoseReport),
}

pub fn load_report(path: &Path) -> Result<AnyReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, Some(e.line()), e.to_string()))?;
    let task = value.pointer("/config/task").and_then(Value::as_str).unwrap_or_default();
    let parsed = match task {
        "depth" => serde_json::from_value(value).map(AnyReport::Depth),
        "pose2" | "pose3" => serde_json::from_value(value).map(AnyReport::Pose),
        other => return Err(Error::format(path, None, format!("not an evaluation report (task `{other}`)"))),
    };
    parsed.map_err(|e| Error::format(path, None, e.to_string()))
}
