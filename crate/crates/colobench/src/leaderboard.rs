//! Metric tables in, leaderboards out.
//!
//! CSV tables are wide: a `team` column followed by one `<scene>/<metric>`
//! column per category. JSON tables look like
//!
//! ```json
//! {
//!   "scenes": ["SynCol I", "SynCol II"],
//!   "metrics": ["L1", {"name": "Acc", "lower_is_better": false}],
//!   "values": {"CVML": {"SynCol I": {"L1": 0.03, "Acc": 0.9}, ...}, ...},
//!   "placements": [{"scene": "SynCol I", "metric": "L1", "order": ["CVML", "MIVA"]}]
//! }
//! ```
//!
//! `scenes` and `metrics` fix display order and default to sorted names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use colobench_core::ranking::{LeaderboardEntry, MetricSpec, Placement};
use colobench_core::{Aggregator, Leaderboard, MetricTable, Score};
use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};
use crate::report::{round_sig9, to_json, ToolInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

/// Parses `scene/metric=A,B,C`.
pub fn parse_placement(s: &str) -> Result<Placement> {
    let bad = || Error::Usage(format!("placement `{s}` is not of the form scene/metric=TEAM,TEAM,..."));
    let (category, order) = s.split_once('=').ok_or_else(bad)?;
    let (scene, metric) = category.rsplit_once('/').ok_or_else(bad)?;
    let order: Vec<String> = order.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
    if scene.trim().is_empty() || metric.trim().is_empty() || order.len() < 2 {
        return Err(bad());
    }
    Ok(Placement { scene: scene.trim().into(), metric: metric.trim().into(), order })
}

/// One placement per non-empty, non-comment line.
pub fn parse_placements_file(path: &Path) -> Result<Vec<Placement>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(parse_placement).collect()
}

fn push_unique(list: &mut Vec<String>, item: &str) {
    if !list.iter().any(|x| x == item) {
        list.push(item.to_string());
    }
}

pub fn parse_table_csv(text: &str, path: &Path) -> Result<MetricTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::format(path, Some(1), e.to_string()))?.clone();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("team") {
        return Err(Error::format(path, Some(1), "first column must be `team`"));
    }
    let mut scenes = Vec::new();
    let mut metrics = Vec::new();
    let mut columns = Vec::new();
    for h in headers.iter().skip(1) {
        let (scene, metric) = h
            .rsplit_once('/')
            .ok_or_else(|| Error::format(path, Some(1), format!("column `{h}` is not `scene/metric`")))?;
        push_unique(&mut scenes, scene);
        push_unique(&mut metrics, metric);
        columns.push((scene.to_string(), metric.to_string()));
    }
    let mut teams = Vec::new();
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize);
        let team = record.get(0).unwrap_or_default().to_string();
        if record.len() != headers.len() {
            return Err(Error::format(
                path,
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (field, (scene, metric)) in record.iter().skip(1).zip(&columns) {
            let v: f64 = field.parse().map_err(|_| Error::format(path, line, format!("`{field}` is not a number")))?;
            cells.push((team.clone(), scene.clone(), metric.clone(), v));
        }
        teams.push(team);
    }
    build_table(teams, scenes, metrics.iter().map(|m| MetricSpec::lower(m)).collect(), cells, Vec::new())
}

fn build_table(
    teams: Vec<String>,
    scenes: Vec<String>,
    metrics: Vec<MetricSpec>,
    cells: Vec<(String, String, String, f64)>,
    placements: Vec<Placement>,
) -> Result<MetricTable> {
    let table = MetricTable::from_cells(
        teams,
        scenes,
        metrics,
        cells.iter().map(|(t, s, m, v)| (t.as_str(), s.as_str(), m.as_str(), *v)),
    )
    .context(|| "metric table".into())?;
    table.with_placements(placements).context(|| "placements".into())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MetricDecl {
    Name(String),
    Spec(MetricSpec),
}

#[derive(Debug, Deserialize)]
struct TableDoc {
    #[serde(default)]
    scenes: Vec<String>,
    #[serde(default)]
    metrics: Vec<MetricDecl>,
    values: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(default)]
    placements: Vec<Placement>,
}

pub fn parse_table_json(text: &str, path: &Path) -> Result<MetricTable> {
    let doc: TableDoc = serde_json::from_str(text).map_err(|e| Error::format(path, Some(e.line()), e.to_string()))?;
    let mut scenes = doc.scenes;
    let mut metric_names: Vec<String> = Vec::new();
    let mut metrics: Vec<MetricSpec> = doc
        .metrics
        .into_iter()
        .map(|m| match m {
            MetricDecl::Name(n) => MetricSpec::lower(&n),
            MetricDecl::Spec(s) => s,
        })
        .collect();
    metric_names.extend(metrics.iter().map(|m| m.name.clone()));
    let explicit_scenes = !scenes.is_empty();
    let explicit_metrics = !metrics.is_empty();
    let mut cells = Vec::new();
    for (team, per_scene) in &doc.values {
        for (scene, per_metric) in per_scene {
            if !explicit_scenes {
                push_unique(&mut scenes, scene);
            }
            for (metric, &v) in per_metric {
                if !explicit_metrics && !metric_names.contains(metric) {
                    metric_names.push(metric.clone());
                    metrics.push(MetricSpec::lower(metric));
                }
                cells.push((team.clone(), scene.clone(), metric.clone(), v));
            }
        }
    }
    if !explicit_scenes {
        scenes.sort();
    }
    if !explicit_metrics {
        metrics.sort_by(|a, b| a.name.cmp(&b.name));
    }
    build_table(doc.values.keys().cloned().collect(), scenes, metrics, cells, doc.placements)
}

/// Reads a table, choosing the parser by extension (`.json`, anything else
/// is CSV).
pub fn load_table(path: &Path) -> Result<MetricTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::format(path, None, "empty metric table"));
    }
    if path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        parse_table_json(&text, path)
    } else {
        parse_table_csv(&text, path)
    }
}

#[derive(Debug, Serialize)]
struct EntryDoc<'a> {
    rank: usize,
    team: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<BTreeMap<&'static str, f64>>,
    per_scene: &'a BTreeMap<String, BTreeMap<String, f64>>,
    ties: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    scene_wins: Option<usize>,
}

#[derive(Debug, Serialize)]
struct BoardConfig<'a> {
    aggregator: Aggregator,
    weights: BTreeMap<&'a str, f64>,
}

#[derive(Debug, Serialize)]
struct BoardDoc<'a> {
    tool: ToolInfo,
    task: u8,
    scenes: &'a [String],
    metrics: &'a [String],
    entries: Vec<EntryDoc<'a>>,
    config: BoardConfig<'a>,
}

fn entry_doc(rank: usize, e: &LeaderboardEntry) -> EntryDoc<'_> {
    let (score, scores) = match e.score {
        Score::Points(v) | Score::WeightedRte(v) => (Some(v), None),
        Score::Triple { ate, rte, rot } => (None, Some(BTreeMap::from([("ate", ate), ("rte", rte), ("rot", rot)]))),
    };
    EntryDoc { rank, team: &e.team, score, scores, per_scene: &e.per_scene, ties: &e.ties, scene_wins: e.scene_wins }
}

/// Standard competition ranks: equal primary scores share a rank.
fn ranks(board: &Leaderboard) -> Vec<usize> {
    let mut out = Vec::with_capacity(board.entries.len());
    for (i, e) in board.entries.iter().enumerate() {
        let shared = i > 0 && board.entries[i - 1].score.primary() == e.score.primary();
        out.push(if shared { out[i - 1] } else { i + 1 });
    }
    out
}

pub fn leaderboard_json(board: &Leaderboard, aggregator: Aggregator) -> Result<String> {
    let r = ranks(board);
    let doc = BoardDoc {
        tool: ToolInfo::current(),
        task: board.task,
        scenes: &board.scenes,
        metrics: &board.metrics,
        entries: board.entries.iter().zip(r).map(|(e, rank)| entry_doc(rank, e)).collect(),
        config: BoardConfig { aggregator, weights: board.weights.iter().map(|(s, w)| (s.as_str(), *w)).collect() },
    };
    to_json(&doc)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn score_columns(task: u8) -> &'static [&'static str] {
    match task {
        1 => &["sigma1"],
        2 => &["sigma2"],
        _ => &["ate", "rte", "rot", "scene_wins"],
    }
}

fn score_values(e: &LeaderboardEntry) -> Vec<String> {
    let n = |x: f64| round_sig9(x).to_string();
    match e.score {
        Score::Points(v) | Score::WeightedRte(v) => vec![n(v)],
        Score::Triple { ate, rte, rot } => {
            vec![n(ate), n(rte), n(rot), e.scene_wins.map(|w| w.to_string()).unwrap_or_default()]
        }
    }
}

pub fn leaderboard_csv(board: &Leaderboard) -> String {
    let mut header = vec!["rank".to_string(), "team".to_string()];
    for s in &board.scenes {
        for m in &board.metrics {
            header.push(csv_field(&format!("{s}/{m}")));
        }
    }
    header.extend(score_columns(board.task).iter().map(|c| c.to_string()));
    let mut out = header.join(",");
    out.push('\n');
    for (e, rank) in board.entries.iter().zip(ranks(board)) {
        let mut row = vec![rank.to_string(), csv_field(&e.team)];
        for s in &board.scenes {
            for m in &board.metrics {
                let v = e.per_scene.get(s).and_then(|x| x.get(m)).copied().unwrap_or(f64::NAN);
                row.push(round_sig9(v).to_string());
            }
        }
        row.extend(score_values(e));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Display value and unit suffix for one metric column.
fn display(task: u8, metric: &str, v: f64) -> String {
    let decimals = if task == 3 { 2 } else { 3 };
    // Task 2 tables show ATE in decimeters.
    let v = if task == 2 && metric.eq_ignore_ascii_case("ATE") { v / 10.0 } else { v };
    format!("{v:.decimals$}")
}

/// Table with one row per team in leaderboard order, the best value of each
/// column in bold.
pub fn leaderboard_markdown(board: &Leaderboard) -> String {
    let task = board.task;
    let sigma = match task {
        1 => "Σ₁ ↑",
        2 => "Σ₂ ↓",
        _ => "Σ₃ ATE ↓",
    };
    let mut head = vec!["Rank".to_string(), "Team".to_string()];
    for s in &board.scenes {
        for m in &board.metrics {
            let unit = if task == 2 && m.eq_ignore_ascii_case("ATE") { " (dm)" } else { "" };
            head.push(format!("{s} {m}{unit}"));
        }
    }
    head.push(sigma.to_string());
    if task == 3 {
        head.extend(["Σ₃ RTE ↓".to_string(), "Σ₃ ROT ↓".to_string(), "ATE wins".to_string()]);
    }

    let best = |scene: &str, metric: &str| {
        board
            .entries
            .iter()
            .filter_map(|e| e.per_scene.get(scene).and_then(|x| x.get(metric)).copied())
            .fold(f64::INFINITY, f64::min)
    };
    let bold_if = |text: String, win: bool| if win { format!("**{text}**") } else { text };

    let mut out = format!("### Task {task} leaderboard\n\n");
    let _ = writeln!(out, "| {} |", head.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(head.len()));
    let top = board.entries.first().map(|e| e.score.primary());
    for (e, rank) in board.entries.iter().zip(ranks(board)) {
        let mut row = vec![rank.to_string(), e.team.clone()];
        for s in &board.scenes {
            for m in &board.metrics {
                let v = e.per_scene.get(s).and_then(|x| x.get(m)).copied().unwrap_or(f64::NAN);
                row.push(bold_if(display(task, m, v), v == best(s, m)));
            }
        }
        let leader = Some(e.score.primary()) == top;
        match e.score {
            Score::Points(p) => row.push(bold_if(format!("{}", round_sig9(p)), leader)),
            Score::WeightedRte(v) => row.push(bold_if(format!("{v:.3}"), leader)),
            Score::Triple { ate, rte, rot } => {
                row.push(bold_if(format!("{ate:.2}"), leader));
                row.push(format!("{rte:.2}"));
                row.push(format!("{rot:.2}"));
                row.push(e.scene_wins.map(|w| w.to_string()).unwrap_or_default());
            }
        }
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    let ties: Vec<String> =
        board.entries.iter().flat_map(|e| e.ties.iter().map(move |t| format!("- {}: {t}", e.team))).collect();
    if !ties.is_empty() {
        out.push_str("\nShared points:\n\n");
        out.push_str(&ties.join("\n"));
        out.push('\n');
    }
    out
}

pub fn emit_leaderboard(board: &Leaderboard, format: Format, aggregator: Aggregator) -> Result<String> {
    Ok(match format {
        Format::Json => leaderboard_json(board, aggregator)?,
        Format::Csv => leaderboard_csv(board),
        Format::Markdown => leaderboard_markdown(board),
    })
}
