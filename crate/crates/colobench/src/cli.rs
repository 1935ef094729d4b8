use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use colobench_core::ranking::{rank_points_task1, rank_task2, rank_task3, task2_default_weights};
use colobench_core::synth::TubeParams;
use colobench_core::Aggregator;
use log::info;

use crate::error::{Context, Error, Result, EXIT_OK};
use crate::eval::{eval_depth_scene, eval_pose_scene, PoseMode};
use crate::generate::{generate, GenSpec};
use crate::io::{self, load_depth_predictions, load_pose_predictions, load_scene};
use crate::leaderboard::{emit_leaderboard, load_table, parse_placement, parse_placements_file, Format};
use crate::report::{
    depth_frames_csv, depth_markdown, emit, load_report, pose_frames_csv, pose_markdown, to_json, write_text,
    AnyReport, DepthReport, PoseReport, RunConfig, Task, ToolInfo,
};

#[derive(Debug, Parser)]
#[command(name = "colobench", version, about = "Depth and pose benchmark evaluation for colonoscopy trajectories")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "COLOBENCH_THREADS")]
    pub threads: Option<usize>,

    /// Depth in centimeters encoded by the PNG value 65535.
    #[arg(long, global = true, default_value_t = io::DEFAULT_FULL_SCALE)]
    pub depth_full_scale: f64,

    /// Per-frame aggregation of pose errors.
    #[arg(long, global = true, default_value = "median", value_parser = parse_aggregator)]
    pub aggregator: Aggregator,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_aggregator(s: &str) -> std::result::Result<Aggregator, String> {
    s.parse().map_err(|_| format!("unknown aggregator `{s}` (median or mean)"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predicted depth maps against a ground-truth scene.
    EvalDepth(EvalArgs),
    /// Score predicted relative poses against a ground-truth scene.
    EvalPose(PoseArgs),
    /// Build a task leaderboard from a metric table.
    Rank(RankArgs),
    /// Generate a synthetic scene.
    Gen(GenArgs),
    /// Render an evaluation report as markdown, CSV or JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth scene directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction directory with one subdirectory per trajectory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Report file (JSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-frame values as CSV.
    #[arg(long)]
    pub per_frame_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rel,
    Abs,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// `rel` fits the scale on relative translations (synthetic scenes),
    /// `abs` on absolute translations (real sequences).
    #[arg(long, value_enum, default_value = "rel")]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// 1 = depth rank points, 2 = weighted RTE, 3 = sequence means.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub task: u8,
    /// Metric table, CSV or JSON.
    #[arg(long)]
    pub table: PathBuf,
    /// Recorded order for an exact tie, `scene/metric=TEAM,TEAM,...`.
    #[arg(long = "placement")]
    pub placements: Vec<String>,
    /// File with one placement per line.
    #[arg(long)]
    pub placements_file: Option<PathBuf>,
    /// Task 2 scene weight, `scene=weight`; replaces the default weights.
    #[arg(long = "weight")]
    pub weights: Vec<String>,
    /// Output formats; more than one requires `--out` to be a directory.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "markdown")]
    pub format: Vec<Format>,
    /// Output file, or directory for `leaderboard.<ext>` files; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scene directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    /// Square image side in pixels.
    #[arg(long, default_value_t = 475)]
    pub resolution: usize,
    /// Centerline advance per frame, cm.
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Lateral camera offset standard deviation, cm.
    #[arg(long, default_value_t = 0.3)]
    pub lateral_sigma: f64,
    /// Camera rotation standard deviation, degrees.
    #[arg(long, default_value_t = 3.0)]
    pub angular_sigma: f64,
    /// Tube centerline length, cm.
    #[arg(long, default_value_t = 120.0)]
    pub tube_length: f64,
    /// Mean tube radius, cm.
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Straight cylinder of constant radius instead of a winding tube.
    #[arg(long)]
    pub straight: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report written by eval-depth or eval-pose.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: ReportFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn thread_count(requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(0) => Err(Error::Usage("--threads must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn check_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::missing(path, format!("{what} directory does not exist")))
    }
}

fn check_full_scale(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("--depth-full-scale must be positive, got {v}")))
    }
}

fn config(cli: &Cli, task: Task, threads: usize) -> RunConfig {
    let (gt_dir, pred_dir, out_path, seed) = match &cli.command {
        Command::EvalDepth(a) => (Some(a.gt.clone()), Some(a.pred.clone()), a.out.clone(), None),
        Command::EvalPose(a) => (Some(a.eval.gt.clone()), Some(a.eval.pred.clone()), a.eval.out.clone(), None),
        Command::Rank(a) => (None, None, a.out.clone(), None),
        Command::Gen(a) => (None, None, Some(a.out.clone()), Some(a.seed)),
        Command::Report(a) => (None, None, a.out.clone(), None),
    };
    RunConfig {
        task,
        gt_dir,
        pred_dir,
        out_path,
        aggregator: cli.aggregator,
        depth_full_scale: cli.depth_full_scale,
        seed,
        thread_count: threads,
    }
}

fn run_eval_depth(args: &EvalArgs, cfg: RunConfig) -> Result<()> {
    check_dir(&args.gt, "ground-truth")?;
    check_dir(&args.pred, "prediction")?;
    let gt = load_scene(&args.gt)?;
    let pred = load_depth_predictions(&args.pred, &gt)?;
    let summary = eval_depth_scene(&gt, &pred, cfg.depth_full_scale)?;
    info!("{}: L1 {:.6} Rel {:.6} RMSE {:.6}", gt.scene_id, summary.l1, summary.rel, summary.rmse);
    if let Some(p) = &args.per_frame_csv {
        write_text(p, &depth_frames_csv(&summary))?;
    }
    let report = DepthReport { tool: ToolInfo::current(), config: cfg, scene: gt.scene_id, summary };
    emit(args.out.as_deref(), &to_json(&report)?)
}

fn run_eval_pose(args: &PoseArgs, cfg: RunConfig) -> Result<()> {
    let e = &args.eval;
    check_dir(&e.gt, "ground-truth")?;
    check_dir(&e.pred, "prediction")?;
    let gt = load_scene(&e.gt)?;
    let pred = load_pose_predictions(&e.pred, &gt)?;
    let mode = match args.mode {
        ModeArg::Rel => PoseMode::Rel,
        ModeArg::Abs => PoseMode::Abs,
    };
    let summary = eval_pose_scene(&gt, &pred, mode, cfg.aggregator)?;
    info!("{}: ATE {:.6} RTE {:.6} ROT {:.6}", gt.scene_id, summary.ate, summary.rte, summary.rot);
    if let Some(p) = &e.per_frame_csv {
        write_text(p, &pose_frames_csv(&summary))?;
    }
    let report = PoseReport { tool: ToolInfo::current(), config: cfg, scene: gt.scene_id, summary };
    emit(e.out.as_deref(), &to_json(&report)?)
}

fn parse_weight(s: &str) -> Result<(String, f64)> {
    let bad = || Error::Usage(format!("weight `{s}` is not of the form scene=number"));
    let (scene, w) = s.rsplit_once('=').ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    Ok((scene.trim().to_string(), w))
}

fn run_rank(args: &RankArgs, cfg: RunConfig) -> Result<()> {
    let mut placements = match &args.placements_file {
        Some(p) => parse_placements_file(p)?,
        None => Vec::new(),
    };
    for p in &args.placements {
        placements.push(parse_placement(p)?);
    }
    let mut table = load_table(&args.table)?;
    if !placements.is_empty() {
        let mut all = table.placements().to_vec();
        all.extend(placements);
        table = table.with_placements(all).context(|| "placements".into())?;
    }
    let board = match args.task {
        1 => rank_points_task1(&table),
        2 => {
            let weights = if args.weights.is_empty() {
                task2_default_weights()
            } else {
                args.weights.iter().map(|w| parse_weight(w)).collect::<Result<Vec<_>>>()?
            };
            rank_task2(&table, &weights)
        }
        _ => rank_task3(&table, table.scenes()),
    }
    .context(|| format!("task {} ranking", args.task))?;

    let formats = &args.format;
    if formats.len() > 1 {
        let dir = args.out.as_ref().ok_or_else(|| Error::Usage("several formats need --out DIR".into()))?;
        for &f in formats {
            let path = dir.join(format!("leaderboard.{}", f.extension()));
            write_text(&path, &emit_leaderboard(&board, f, cfg.aggregator)?)?;
        }
        Ok(())
    } else {
        let f = formats.first().copied().unwrap_or(Format::Markdown);
        emit(args.out.as_deref(), &emit_leaderboard(&board, f, cfg.aggregator)?)
    }
}

fn run_gen(args: &GenArgs, cfg: &RunConfig) -> Result<()> {
    let tube = if args.straight {
        TubeParams::straight_cylinder(args.radius, args.tube_length)
    } else {
        TubeParams { length: args.tube_length, base_radius: args.radius, ..TubeParams::default() }
    };
    let spec = GenSpec {
        seed: args.seed,
        tube,
        trajectories: args.trajectories,
        frames: args.frames,
        step: args.step,
        lateral_sigma: args.lateral_sigma,
        angular_sigma_deg: args.angular_sigma,
        resolution: args.resolution,
        depth_full_scale: cfg.depth_full_scale,
    };
    let (scene, _) = generate(&spec, &args.out)?;
    info!("wrote {} trajectories of {} frames to {}", scene.trajectories.len(), args.frames, args.out.display());
    Ok(())
}

fn run_report(args: &ReportArgs) -> Result<()> {
    let report = load_report(&args.input)?;
    let text = match (&report, args.format) {
        (AnyReport::Depth(r), ReportFormat::Markdown) => depth_markdown(r),
        (AnyReport::Pose(r), ReportFormat::Markdown) => pose_markdown(r),
        (AnyReport::Depth(r), ReportFormat::Csv) => depth_frames_csv(&r.summary),
        (AnyReport::Pose(r), ReportFormat::Csv) => pose_frames_csv(&r.summary),
        (AnyReport::Depth(r), ReportFormat::Json) => to_json(r)?,
        (AnyReport::Pose(r), ReportFormat::Json) => to_json(r)?,
    };
    emit(args.out.as_deref(), &text)
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    check_full_scale(cli.depth_full_scale)?;
    let task = match &cli.command {
        Command::EvalDepth(_) => Task::Depth,
        Command::EvalPose(a) if a.mode == ModeArg::Abs => Task::Pose3,
        Command::EvalPose(_) => Task::Pose2,
        Command::Rank(_) => Task::Rank,
        Command::Gen(_) => Task::Gen,
        Command::Report(_) => Task::Report,
    };
    let cfg = config(cli, task, threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::EvalDepth(a) => run_eval_depth(a, cfg),
        Command::EvalPose(a) => run_eval_pose(a, cfg),
        Command::Rank(a) => run_rank(a, cfg),
        Command::Gen(a) => run_gen(a, &cfg),
        Command::Report(a) => run_report(a),
    })
}

/// Parses arguments, runs, prints any error and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
