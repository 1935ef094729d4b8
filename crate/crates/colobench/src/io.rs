//! On-disk formats.
//!
//! ```text
//! <scene>/intrinsics.txt            3x3 row-major camera matrix
//! <scene>/<traj>/poses.txt          one "tx ty tz qx qy qz qw" per frame
//! <scene>/<traj>/depths/0000.png    16-bit grayscale, depth = raw/65535 * full scale
//! <pred>/<traj>/rel_poses.txt       one relative pose per consecutive frame pair
//! ```
//!
//! Numbers may be separated by spaces, tabs or commas. Lines starting with
//! `#` are comments.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use colobench_core::synth::Intrinsics;
use colobench_core::{DepthMap, Pose, Quaternion, Vec3, DEPTH_FAR_PLANE_CM};
use log::warn;

use crate::error::{Error, Result};

pub const POSE_FILE: &str = "poses.txt";
pub const REL_POSE_FILE: &str = "rel_poses.txt";
pub const INTRINSICS_FILE: &str = "intrinsics.txt";
pub const DEPTH_DIR: &str = "depths";
pub const DEFAULT_FULL_SCALE: f64 = DEPTH_FAR_PLANE_CM;

/// Width of the zero-padded frame index in depth file names.
pub const FRAME_DIGITS: usize = 4;

pub fn depth_file_name(frame: usize) -> String {
    format!("{frame:0FRAME_DIGITS$}.png")
}

/// Raw 16-bit samples of a single-channel PNG, row-major.
pub fn load_png_u16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, None, e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::format(
            path,
            None,
            format!("expected single-channel 16-bit PNG, found {:?} at {} bits", info.color_type, info.bit_depth as u8),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; width * height * 2];
    reader.next_frame(&mut buf).map_err(|e| Error::format(path, None, e.to_string()))?;
    let raw = buf.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
    Ok((width, height, raw))
}

/// Depth map in centimeters from a 16-bit PNG.
pub fn load_depth_png(path: &Path, full_scale: f64) -> Result<DepthMap> {
    let (width, height, raw) = load_png_u16(path)?;
    let k = full_scale / 65535.0;
    let data = raw.into_iter().map(|r| r as f64 * k).collect();
    DepthMap::new(width, height, data).map_err(|e| Error::format(path, None, e.to_string()))
}

/// Quantizes to 16 bits with round-to-nearest; values outside
/// `[0, full_scale]` are rejected.
pub fn encode_depth(map: &DepthMap, full_scale: f64) -> std::result::Result<Vec<u16>, String> {
    let k = 65535.0 / full_scale;
    map.data()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if (0.0..=full_scale).contains(&d) {
                Ok((d * k).round() as u16)
            } else {
                Err(format!(
                    "depth {d} cm at pixel ({}, {}) is outside [0, {full_scale}]",
                    i % map.width(),
                    i / map.width()
                ))
            }
        })
        .collect()
}

pub fn save_png_u16(path: &Path, width: usize, height: usize, raw: &[u16]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::write(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    encoder.set_compression(png::Compression::Fast);
    let png_err = |e: png::EncodingError| Error::write(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(png_err)?;
    let bytes: Vec<u8> = raw.iter().flat_map(|v| v.to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

pub fn save_depth_png(map: &DepthMap, path: &Path, full_scale: f64) -> Result<()> {
    let raw = encode_depth(map, full_scale).map_err(|msg| Error::Range { path: path.to_path_buf(), msg })?;
    save_png_u16(path, map.width(), map.height(), &raw)
}

fn numbers(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty())
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_numbers(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    numbers(line)
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| Error::format(path, Some(line_no), format!("`{t}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::format(path, Some(line_no), format!("non-finite value `{t}`")))
            }
        })
        .collect()
}

/// Poses from text, one `tx ty tz qx qy qz qw` per line.
pub fn parse_poses(text: &str, path: &Path) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for (line_no, line) in data_lines(text) {
        let v = parse_numbers(path, line_no, line)?;
        if v.len() != 7 {
            return Err(Error::format(path, Some(line_no), format!("expected 7 fields, found {}", v.len())));
        }
        let norm = (v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]).sqrt();
        if (norm - 1.0).abs() > 1e-3 {
            warn!("{}:{line_no}: quaternion norm {norm} renormalized", path.display());
        }
        let rotation = Quaternion::new(v[3], v[4], v[5], v[6])
            .map_err(|_| Error::format(path, Some(line_no), "zero quaternion"))?;
        let pose = Pose::new(Vec3::new(v[0], v[1], v[2]), rotation)
            .map_err(|e| Error::format(path, Some(line_no), e.to_string()))?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn load_pose_file(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text, path)
}

/// Shortest round-trip decimal for every component.
pub fn format_poses(poses: &[Pose]) -> String {
    let mut out = String::with_capacity(poses.len() * 96);
    for p in poses {
        let v = p.to_vector();
        let fields: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_pose_file(path: &Path, poses: &[Pose]) -> Result<()> {
    fs::write(path, format_poses(poses)).map_err(|e| Error::write(path, e))
}

/// Predicted relative poses; exactly `expected_frames − 1` lines.
pub fn load_prediction_rel(path: &Path, expected_frames: usize) -> Result<Vec<Pose>> {
    let rels = load_pose_file(path)?;
    let expected = expected_frames.saturating_sub(1);
    if rels.len() != expected {
        return Err(Error::Submission { path: path.to_path_buf(), expected, actual: rels.len() });
    }
    Ok(rels)
}

pub fn parse_intrinsics(text: &str, path: &Path) -> Result<Intrinsics> {
    let mut m = Vec::with_capacity(9);
    for (line_no, line) in data_lines(text) {
        m.extend(parse_numbers(path, line_no, line)?);
    }
    if m.len() != 9 {
        return Err(Error::format(path, None, format!("expected a 3x3 matrix, found {} numbers", m.len())));
    }
    if m[1].abs() > 1e-9 {
        return Err(Error::format(path, None, format!("nonzero skew {}", m[1])));
    }
    if m[3].abs() > 1e-9 || m[6].abs() > 1e-9 || m[7].abs() > 1e-9 || (m[8] - 1.0).abs() > 1e-9 {
        return Err(Error::format(path, None, "matrix is not of the form [[fx,0,cx],[0,fy,cy],[0,0,1]]"));
    }
    if !(m[0] > 0.0 && m[4] > 0.0) {
        return Err(Error::format(path, None, format!("focal lengths must be positive (fx={}, fy={})", m[0], m[4])));
    }
    Ok(Intrinsics { fx: m[0], fy: m[4], cx: m[2], cy: m[5] })
}

pub fn load_intrinsics(path: &Path) -> Result<Intrinsics> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intrinsics(&text, path)
}

pub fn format_intrinsics(k: &Intrinsics) -> String {
    format!("{} 0 {}\n0 {} {}\n0 0 1\n", k.fx, k.cx, k.fy, k.cy)
}

pub fn save_intrinsics(path: &Path, k: &Intrinsics) -> Result<()> {
    fs::write(path, format_intrinsics(k)).map_err(|e| Error::write(path, e))
}

/// One trajectory directory of a ground-truth scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryData {
    pub id: String,
    pub dir: PathBuf,
    pub poses: Vec<Pose>,
    /// Ordered by frame index; empty when the trajectory ships no depths.
    pub depth_paths: Vec<PathBuf>,
}

impl TrajectoryData {
    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSet {
    pub scene_id: String,
    pub root: PathBuf,
    pub intrinsics: Intrinsics,
    /// Sorted by id.
    pub trajectories: Vec<TrajectoryData>,
}

impl SceneSet {
    pub fn trajectory(&self, id: &str) -> Option<&TrajectoryData> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut subdirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            subdirs.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    subdirs.sort();
    Ok(subdirs)
}

/// Depth PNGs of a `depths/` directory, ordered by frame index. Indices must
/// run 0, 1, 2, … without gaps.
pub fn list_depth_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let index: usize =
            stem.parse().map_err(|_| Error::format(&path, None, "depth file name is not a frame index"))?;
        frames.push((index, path));
    }
    frames.sort();
    for (expected, (index, path)) in frames.iter().enumerate() {
        if *index != expected {
            return Err(Error::Consistency(format!(
                "{}: frame index {index} where {expected} was expected",
                path.display()
            )));
        }
    }
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

/// Loads a ground-truth scene: intrinsics plus every trajectory
/// subdirectory.
pub fn load_scene(dir: &Path) -> Result<SceneSet> {
    if !dir.is_dir() {
        return Err(Error::missing(dir, "scene directory does not exist"));
    }
    let mut trajectories = Vec::new();
    for (id, path) in sorted_subdirs(dir)? {
        let pose_path = path.join(POSE_FILE);
        if !pose_path.is_file() {
            return Err(Error::missing(&pose_path, format!("trajectory `{id}` has no pose file")));
        }
        let poses = load_pose_file(&pose_path)?;
        if poses.is_empty() {
            return Err(Error::missing(&pose_path, "pose file holds no poses"));
        }
        let depth_paths = list_depth_frames(&path.join(DEPTH_DIR))?;
        if !depth_paths.is_empty() && depth_paths.len() != poses.len() {
            return Err(Error::Consistency(format!(
                "trajectory `{id}`: {} poses but {} depth maps",
                poses.len(),
                depth_paths.len()
            )));
        }
        trajectories.push(TrajectoryData { id, dir: path, poses, depth_paths });
    }
    if trajectories.is_empty() {
        return Err(Error::missing(dir, "no trajectory directories"));
    }
    let k_path = dir.join(INTRINSICS_FILE);
    if !k_path.is_file() {
        return Err(Error::missing(&k_path, "scene has no intrinsics file"));
    }
    let intrinsics = load_intrinsics(&k_path)?;
    let scene_id = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| dir.display().to_string());
    Ok(SceneSet { scene_id, root: dir.to_path_buf(), intrinsics, trajectories })
}

fn check_prediction_ids(pred_dir: &Path, gt: &SceneSet) -> Result<()> {
    if !pred_dir.is_dir() {
        return Err(Error::missing(pred_dir, "prediction directory does not exist"));
    }
    for (id, _) in sorted_subdirs(pred_dir)? {
        if gt.trajectory(&id).is_none() {
            return Err(Error::Consistency(format!("prediction has unknown trajectory `{id}`")));
        }
    }
    for t in &gt.trajectories {
        if !pred_dir.join(&t.id).is_dir() {
            return Err(Error::Consistency(format!("trajectory `{}` missing from prediction", t.id)));
        }
    }
    Ok(())
}

/// Predicted depth files per ground-truth trajectory, in scene order.
pub fn load_depth_predictions(pred_dir: &Path, gt: &SceneSet) -> Result<Vec<Vec<PathBuf>>> {
    check_prediction_ids(pred_dir, gt)?;
    gt.trajectories
        .iter()
        .map(|t| {
            if t.depth_paths.is_empty() {
                return Err(Error::missing(
                    &t.dir.join(DEPTH_DIR),
                    format!("trajectory `{}` has no ground-truth depths", t.id),
                ));
            }
            let dir = pred_dir.join(&t.id).join(DEPTH_DIR);
            let frames = list_depth_frames(&dir)?;
            if frames.len() != t.depth_paths.len() {
                return Err(Error::Consistency(format!(
                    "trajectory `{}`: {} ground-truth depth maps but {} predicted",
                    t.id,
                    t.depth_paths.len(),
                    frames.len()
                )));
            }
            Ok(frames)
        })
        .collect()
}

/// Predicted relative poses per ground-truth trajectory, in scene order.
///
/// Reads `rel_poses.txt`; a trajectory that instead ships absolute
/// `poses.txt` has its relatives derived from consecutive frames.
pub fn load_pose_predictions(pred_dir: &Path, gt: &SceneSet) -> Result<Vec<Vec<Pose>>> {
    check_prediction_ids(pred_dir, gt)?;
    gt.trajectories
        .iter()
        .map(|t| {
            let dir = pred_dir.join(&t.id);
            let rel_path = dir.join(REL_POSE_FILE);
            if rel_path.is_file() {
                return load_prediction_rel(&rel_path, t.frame_count());
            }
            let abs_path = dir.join(POSE_FILE);
            if abs_path.is_file() {
                let abs = load_pose_file(&abs_path)?;
                if abs.len() != t.frame_count() {
                    return Err(Error::Consistency(format!(
                        "{}: {} absolute poses for a {}-frame trajectory",
                        abs_path.display(),
                        abs.len(),
                        t.frame_count()
                    )));
                }
                return Ok(abs.windows(2).map(|w| w[0].inverse().compose(&w[1])).collect());
            }
            Err(Error::missing(&rel_path, format!("trajectory `{}` has no pose prediction", t.id)))
        })
        .collect()
}
