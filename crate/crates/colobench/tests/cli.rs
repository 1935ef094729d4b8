use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use colobench::io::{depth_file_name, format_poses, load_depth_png, load_pose_file, save_depth_png};
use colobench_core::{Pose, Quaternion, Vec3};
use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn colobench(args: &[&str]) -> (i32, String, String) {
    let out =
        Command::new(env!("CARGO_BIN_EXE_colobench")).args(args).env_remove("COLOBENCH_THREADS").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = colobench(args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
    stdout
}

fn gen(dir: &Path, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["gen", "--out", out, "--trajectories", "2", "--frames", "12", "--resolution", "24"];
    args.extend_from_slice(extra);
    ok(&args);
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn num(v: &Value, ptr: &str) -> f64 {
    v.pointer(ptr).and_then(Value::as_f64).unwrap_or_else(|| panic!("no number at {ptr}"))
}

#[test]
fn depth_self_evaluation_is_zero() {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("scene");
    gen(&scene, &[]);
    let s = scene.to_str().unwrap();
    let report = json(&ok(&["eval-depth", "--gt", s, "--pred", s]));
    for m in ["l1", "rel", "rmse"] {
        assert_eq!(num(&report, &format!("/summary/{m}")), 0.0);
    }
    assert_eq!(report["tool"]["name"], "colobench");
    assert_eq!(report["config"]["task"], "depth");
    assert_eq!(report["summary"]["trajectories"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_trajectory_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    gen(&gt, &[]);
    let pred = dir.path().join("pred");
    fs::create_dir_all(pred.join("traj_001/depths")).unwrap();
    for i in 0..12 {
        fs::copy(
            gt.join("traj_001/depths").join(depth_file_name(i)),
            pred.join("traj_001/depths").join(depth_file_name(i)),
        )
        .unwrap();
    }
    let (code, _, stderr) = colobench(&["eval-depth", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("traj_002"), "{stderr}");

    let (code, _, stderr) = colobench(&["eval-pose", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("traj_002"), "{stderr}");
}

fn scaled_copy(gt: &Path, pred: &Path, c: f64, full_scale: f64) {
    for t in ["traj_001", "traj_002"] {
        let out = pred.join(t).join("depths");
        fs::create_dir_all(&out).unwrap();
        for i in 0..12 {
            let name = depth_file_name(i);
            let m = load_depth_png(&gt.join(t).join("depths").join(&name), full_scale).unwrap();
            save_depth_png(&m.scaled(c), &out.join(&name), full_scale).unwrap();
        }
    }
}

#[test]
fn scaled_depth_predictions_are_absorbed() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    // a wider full scale leaves room for doubled depths
    gen(&gt, &["--depth-full-scale", "41"]);
    let pred = dir.path().join("pred");
    scaled_copy(&gt, &pred, 2.0, 41.0);
    let report = json(&ok(&[
        "eval-depth",
        "--depth-full-scale",
        "41",
        "--gt",
        gt.to_str().unwrap(),
        "--pred",
        pred.to_str().unwrap(),
    ]));
    let quantum = 41.0 / 65535.0;
    assert!(num(&report, "/summary/l1") <= quantum, "{}", report["summary"]["l1"]);
    let s = num(&report, "/summary/trajectories/0/scale/s");
    assert!((s - 0.5).abs() < 1e-4, "{s}");

    let half = dir.path().join("half");
    scaled_copy(&gt, &half, 0.5, 41.0);
    let report = json(&ok(&[
        "eval-depth",
        "--depth-full-scale",
        "41",
        "--gt",
        gt.to_str().unwrap(),
        "--pred",
        half.to_str().unwrap(),
    ]));
    assert!(num(&report, "/summary/l1") <= quantum);
}

fn write_rel_predictions(gt: &Path, pred: &Path, f: impl Fn(usize, &Pose) -> Pose) {
    for t in ["traj_001", "traj_002"] {
        let poses = load_pose_file(&gt.join(t).join("poses.txt")).unwrap();
        let rels: Vec<Pose> = poses.windows(2).enumerate().map(|(i, w)| f(i, &w[0].inverse().compose(&w[1]))).collect();
        fs::create_dir_all(pred.join(t)).unwrap();
        fs::write(pred.join(t).join("rel_poses.txt"), format_poses(&rels)).unwrap();
    }
}

#[test]
fn pose_evaluation_examples() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    gen(&gt, &[]);
    let g = gt.to_str().unwrap();

    // absolute gt poses as prediction
    for mode in ["rel", "abs"] {
        let r = json(&ok(&["eval-pose", "--mode", mode, "--gt", g, "--pred", g]));
        for m in ["ate", "rte", "rot"] {
            assert!(num(&r, &format!("/summary/{m}")) < 1e-9);
        }
    }

    let exact = dir.path().join("exact");
    write_rel_predictions(&gt, &exact, |_, r| *r);
    let r = json(&ok(&["eval-pose", "--gt", g, "--pred", exact.to_str().unwrap()]));
    assert!(num(&r, "/summary/ate") < 1e-9 && num(&r, "/summary/rte") < 1e-9 && num(&r, "/summary/rot") < 1e-9);

    let times4 = dir.path().join("times4");
    write_rel_predictions(&gt, &times4, |_, r| r.scale_translation(4.0));
    let r = json(&ok(&["eval-pose", "--gt", g, "--pred", times4.to_str().unwrap()]));
    for m in ["ate", "rte", "rot"] {
        assert!(num(&r, &format!("/summary/{m}")) < 1e-9);
    }
    assert!((num(&r, "/summary/trajectories/0/scale/s") - 0.25).abs() < 1e-9);
    assert_eq!(r["summary"]["trajectories"][0]["scale"]["mode"], "relative");

    let r = json(&ok(&["eval-pose", "--mode", "abs", "--gt", g, "--pred", times4.to_str().unwrap()]));
    assert!(num(&r, "/summary/ate") < 1e-9);
    assert_eq!(r["config"]["task"], "pose3");
    assert_eq!(r["summary"]["trajectories"][0]["scale"]["mode"], "absolute");
}

#[test]
fn injected_rotation_noise_reads_back_as_rot() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    gen(&gt, &[]);
    let noisy = dir.path().join("noisy");
    write_rel_predictions(&gt, &noisy, |i, r| {
        let a = i as f64 * 2.3;
        let axis = Vec3::new(a.cos(), a.sin(), 0.5);
        let q = Quaternion::from_axis_angle(axis, 5f64.to_radians()).unwrap();
        Pose { translation: r.translation, rotation: r.rotation * q }
    });
    let csv = dir.path().join("frames.csv");
    let r = json(&ok(&[
        "eval-pose",
        "--aggregator",
        "mean",
        "--gt",
        gt.to_str().unwrap(),
        "--pred",
        noisy.to_str().unwrap(),
        "--per-frame-csv",
        csv.to_str().unwrap(),
    ]));
    let rot = num(&r, "/summary/rot");
    assert!((rot - 5.0).abs() < 1e-6, "{rot}");
    assert_eq!(r["config"]["aggregator"], "mean");
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trajectory,frame,gt_x,gt_y,gt_z,pred_x,pred_y,pred_z,ate,rte,rot");
    assert_eq!(lines.len(), 1 + 2 * 12);
    assert!(lines[12].ends_with(",,"), "{}", lines[12]);
}

#[test]
fn wrong_prediction_length_is_rejected() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    gen(&gt, &[]);
    let pred = dir.path().join("pred");
    write_rel_predictions(&gt, &pred, |_, r| *r);
    fs::write(pred.join("traj_002/rel_poses.txt"), "0 0 0 0 0 0 1\n".repeat(12)).unwrap();
    let (code, _, stderr) = colobench(&["eval-pose", "--gt", gt.to_str().unwrap(), "--pred", pred.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("expected 11") && stderr.contains("found 12"), "{stderr}");
}

fn sigma(board: &Value, team: &str) -> f64 {
    board["entries"].as_array().unwrap().iter().find(|e| e["team"] == team).and_then(|e| e["score"].as_f64()).unwrap()
}

#[test]
fn rank_reproduces_fixture_scores() {
    let t1 = data("task1.csv");
    let placements = data("task1_placements.txt");
    let board = json(&ok(&[
        "rank",
        "--task",
        "1",
        "--table",
        t1.to_str().unwrap(),
        "--placements-file",
        placements.to_str().unwrap(),
        "--format",
        "json",
    ]));
    for (team, points) in
        [("CVML", 54.0), ("MIVA", 44.0), ("EndoAI", 37.0), ("IntuitiveIL", 26.0), ("MMLAB", 16.0), ("KLIV", 12.0)]
    {
        assert_eq!(sigma(&board, team), points, "{team}");
    }
    assert_eq!(board["entries"][0]["team"], "CVML");

    let board = json(&ok(&["rank", "--task", "2", "--table", data("task2.csv").to_str().unwrap(), "--format", "json"]));
    for (team, s) in [("EndoAI", 0.165), ("MIVA", 0.183), ("MMLAB", 0.284)] {
        assert!((sigma(&board, team) - s).abs() <= 0.0005 + 1e-12, "{team}");
    }
    assert_eq!(board["config"]["weights"]["SynCol III"], 2.0);

    let board = json(&ok(&["rank", "--task", "3", "--table", data("task3.csv").to_str().unwrap(), "--format", "json"]));
    assert_eq!(board["entries"][0]["team"], "MIVA");
    assert_eq!(board["entries"][0]["scene_wins"], 5);
    assert!((num(&board, "/entries/0/scores/ate") - 3.59).abs() <= 0.005);
}

#[test]
fn rank_inline_placements_match_file() {
    let t1 = data("task1.csv");
    let inline = ok(&[
        "rank",
        "--task",
        "1",
        "--table",
        t1.to_str().unwrap(),
        "--placement",
        "SynCol III/Rel=CVML,MIVA",
        "--placement",
        "SynCol III/RMSE=MMLAB,KLIV",
        "--format",
        "csv",
    ]);
    let file = ok(&[
        "rank",
        "--task",
        "1",
        "--table",
        t1.to_str().unwrap(),
        "--placements-file",
        data("task1_placements.txt").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(inline, file);
    // without placements exact ties share points
    let shared = json(&ok(&["rank", "--task", "1", "--table", t1.to_str().unwrap(), "--format", "json"]));
    assert_eq!(sigma(&shared, "CVML"), 53.5);
    assert_eq!(sigma(&shared, "KLIV"), 12.5);
}

#[test]
fn rank_markdown_and_multiple_formats() {
    let md = ok(&["rank", "--task", "2", "--table", data("task2.csv").to_str().unwrap()]);
    let first_row = md.lines().find(|l| l.starts_with("| 1 |")).unwrap();
    assert!(first_row.contains("EndoAI") && first_row.contains("**0.165**"), "{first_row}");
    assert!(md.contains("SynCol I ATE (dm)"));
    assert!(first_row.contains("**0.574**"), "{first_row}");

    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "rank",
        "--task",
        "3",
        "--table",
        data("task3.csv").to_str().unwrap(),
        "--format",
        "json,csv,markdown",
        "--out",
        out,
    ]);
    for ext in ["json", "csv", "md"] {
        assert!(dir.path().join(format!("leaderboard.{ext}")).is_file());
    }
    let again = ok(&["rank", "--task", "3", "--table", data("task3.csv").to_str().unwrap(), "--format", "markdown"]);
    assert_eq!(fs::read_to_string(dir.path().join("leaderboard.md")).unwrap(), again);
}

#[test]
fn rank_rejects_empty_or_incomplete_tables() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(colobench(&["rank", "--task", "1", "--table", empty.to_str().unwrap()]).0, 2);
    let header_only = dir.path().join("header.csv");
    fs::write(&header_only, "team,I/L1\n").unwrap();
    assert_eq!(colobench(&["rank", "--task", "1", "--table", header_only.to_str().unwrap()]).0, 2);
    let t2 = dir.path().join("partial.csv");
    fs::write(&t2, "team,SynCol I/RTE\nA,0.1\n").unwrap();
    let (code, _, stderr) = colobench(&["rank", "--task", "2", "--table", t2.to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");
    assert_eq!(colobench(&["rank", "--task", "4", "--table", t2.to_str().unwrap()]).0, 2);
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    gen(&a, &["--seed", "9"]);
    gen(&b, &["--seed", "9", "--threads", "3"]);
    gen(&c, &["--seed", "10"]);
    for rel in
        ["traj_001/poses.txt", "traj_002/poses.txt", "traj_001/depths/0007.png", "intrinsics.txt", "manifest.json"]
    {
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    assert_ne!(fs::read(a.join("traj_001/poses.txt")).unwrap(), fs::read(c.join("traj_001/poses.txt")).unwrap());
    let manifest = json(&fs::read_to_string(a.join("manifest.json")).unwrap());
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["trajectories"][1]["id"], "traj_002");
}

#[test]
fn gen_smoke_single_trajectory() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("one");
    ok(&[
        "gen",
        "--out",
        out.to_str().unwrap(),
        "--trajectories",
        "1",
        "--frames",
        "10",
        "--resolution",
        "16",
        "--straight",
    ]);
    assert_eq!(fs::read_dir(out.join("traj_001/depths")).unwrap().count(), 10);
    assert_eq!(fs::read_to_string(out.join("traj_001/poses.txt")).unwrap().lines().count(), 10);
    let (code, _, _) = colobench(&["gen", "--out", dir.path().join("bad").to_str().unwrap(), "--radius", "9"]);
    assert_eq!(code, 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    gen(&gt, &[]);
    let pred = dir.path().join("pred");
    scaled_copy(&gt, &pred, 0.7, 20.0);
    let g = gt.to_str().unwrap();
    let p = pred.to_str().unwrap();
    let one = json(&ok(&["eval-depth", "--threads", "1", "--gt", g, "--pred", p]));
    let many = json(&ok(&["eval-depth", "--threads", "4", "--gt", g, "--pred", p]));
    assert_eq!(one["summary"], many["summary"]);
    assert_eq!(many["config"]["thread_count"], 4);

    let (code, _, _) = colobench(&["eval-depth", "--threads", "0", "--gt", g, "--pred", p]);
    assert_eq!(code, 2);
    let env_threads = Command::new(env!("CARGO_BIN_EXE_colobench"))
        .args(["eval-depth", "--gt", g, "--pred", p])
        .env("COLOBENCH_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(json(&String::from_utf8_lossy(&env_threads.stdout))["config"]["thread_count"], 2);
}

#[test]
fn report_renders_saved_reports() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt");
    gen(&gt, &[]);
    let g = gt.to_str().unwrap();
    let depth = dir.path().join("depth.json");
    let pose = dir.path().join("pose.json");
    ok(&["eval-depth", "--gt", g, "--pred", g, "--out", depth.to_str().unwrap()]);
    ok(&["eval-pose", "--gt", g, "--pred", g, "--out", pose.to_str().unwrap()]);

    let md = ok(&["report", "--input", depth.to_str().unwrap()]);
    assert!(md.contains("| traj_002 | 12 |"), "{md}");
    let csv = ok(&["report", "--input", depth.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(csv.lines().count(), 1 + 24);
    let md = ok(&["report", "--input", pose.to_str().unwrap()]);
    assert!(md.contains("Per-frame aggregator: median"));
    let round = ok(&["report", "--input", pose.to_str().unwrap(), "--format", "json"]);
    assert_eq!(json(&round), json(&fs::read_to_string(&pose).unwrap()));

    let bogus = dir.path().join("bogus.json");
    fs::write(&bogus, "{\"config\": {\"task\": \"gen\"}}").unwrap();
    assert_eq!(colobench(&["report", "--input", bogus.to_str().unwrap()]).0, 2);
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(colobench(&["eval-pose", "--mode", "sideways", "--gt", "a", "--pred", "b"]).0, 2);
    assert_eq!(colobench(&["eval-depth", "--gt", "/nonexistent/gt", "--pred", "/nonexistent/p"]).0, 2);
    assert_eq!(colobench(&["eval-depth", "--aggregator", "mode", "--gt", "a", "--pred", "b"]).0, 2);
    assert_eq!(colobench(&[]).0, 2);
}
