//! Task scoring and leaderboards.
//!
//! * Task 1: rank points. In every (scene, metric) category the best of `n`
//!   teams gets `n` points, the next `n − 1`, down to 1; the score is the sum.
//! * Task 2: mean RTE over the synthetic scenes with the unseen scene
//!   weighted twice.
//! * Task 3: per-metric means of ATE, RTE and ROT over the real sequences.
//!
//! Scores are computed on full-precision inputs; rounding happens only when
//! a board is displayed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// Scene labels and weights of the synthetic pose task (unseen scene last).
pub const TASK2_DEFAULT_WEIGHTS: [(&str, f64); 3] = [("SynCol I", 1.0), ("SynCol II", 1.0), ("SynCol III", 2.0)];

/// Sequence labels of the real-data pose task.
pub const TASK3_DEFAULT_SCENES: [&str; 7] = ["1", "2", "3", "4", "5", "6", "7"];

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSpec {
    pub name: String,
    pub lower_is_better: bool,
}

impl MetricSpec {
    pub fn lower(name: &str) -> Self {
        MetricSpec { name: name.into(), lower_is_better: true }
    }
}

/// Recorded finishing order for one category, used only to split teams whose
/// full-precision values tie exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Placement {
    pub scene: String,
    pub metric: String,
    /// Best first.
    pub order: Vec<String>,
}

/// Complete team × scene × metric grid of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    teams: Vec<String>,
    scenes: Vec<String>,
    metrics: Vec<MetricSpec>,
    /// Indexed `[team][scene][metric]`, flattened.
    values: Vec<f64>,
    placements: Vec<Placement>,
}

impl MetricTable {
    /// Builds the grid from `(team, scene, metric, value)` cells. Every
    /// combination must appear exactly once.
    pub fn from_cells<'a>(
        teams: Vec<String>,
        scenes: Vec<String>,
        metrics: Vec<MetricSpec>,
        cells: impl IntoIterator<Item = (&'a str, &'a str, &'a str, f64)>,
    ) -> Result<Self> {
        if teams.is_empty() || scenes.is_empty() || metrics.is_empty() {
            return Err(Error::Consistency("metric table has no teams, scenes or metrics".into()));
        }
        for (what, names) in [
            ("team", teams.iter().collect::<Vec<_>>()),
            ("scene", scenes.iter().collect()),
            ("metric", metrics.iter().map(|m| &m.name).collect()),
        ] {
            let mut sorted = names.clone();
            sorted.sort();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Consistency(format!("duplicate {what} `{}`", w[0])));
            }
        }
        let (nt, ns, nm) = (teams.len(), scenes.len(), metrics.len());
        let mut grid: Vec<Option<f64>> = alloc::vec![None; nt * ns * nm];
        for (team, scene, metric, value) in cells {
            let ti = teams.iter().position(|t| t == team);
            let si = scenes.iter().position(|s| s == scene);
            let mi = metrics.iter().position(|m| m.name == metric);
            let (Some(ti), Some(si), Some(mi)) = (ti, si, mi) else {
                return Err(Error::Consistency(format!(
                    "cell ({team}, {scene}, {metric}) is outside the declared grid"
                )));
            };
            if !value.is_finite() {
                return Err(Error::Consistency(format!("non-finite value for ({team}, {scene}, {metric})")));
            }
            let slot = &mut grid[(ti * ns + si) * nm + mi];
            if slot.is_some() {
                return Err(Error::Consistency(format!("duplicate value for ({team}, {scene}, {metric})")));
            }
            *slot = Some(value);
        }
        let mut values = Vec::with_capacity(grid.len());
        for (i, v) in grid.into_iter().enumerate() {
            let Some(v) = v else {
                let (ti, si, mi) = (i / (ns * nm), (i / nm) % ns, i % nm);
                return Err(Error::Consistency(format!(
                    "missing value for ({}, {}, {})",
                    teams[ti], scenes[si], metrics[mi].name
                )));
            };
            values.push(v);
        }
        Ok(MetricTable { teams, scenes, metrics, values, placements: Vec::new() })
    }

    /// Attaches recorded placements; every named team, scene and metric must
    /// exist.
    pub fn with_placements(mut self, placements: Vec<Placement>) -> Result<Self> {
        for p in &placements {
            self.scene_index(&p.scene)?;
            self.metric_index(&p.metric)?;
            for t in &p.order {
                self.team_index(t)?;
            }
        }
        self.placements = placements;
        Ok(self)
    }

    pub fn teams(&self) -> &[String] {
        &self.teams
    }

    pub fn scenes(&self) -> &[String] {
        &self.scenes
    }

    pub fn metrics(&self) -> &[MetricSpec] {
        &self.metrics
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    fn team_index(&self, team: &str) -> Result<usize> {
        self.teams.iter().position(|t| t == team).ok_or_else(|| Error::Consistency(format!("unknown team `{team}`")))
    }

    fn scene_index(&self, scene: &str) -> Result<usize> {
        self.scenes
            .iter()
            .position(|s| s == scene)
            .ok_or_else(|| Error::Consistency(format!("unknown scene `{scene}`")))
    }

    fn metric_index(&self, metric: &str) -> Result<usize> {
        self.metrics
            .iter()
            .position(|m| m.name.eq_ignore_ascii_case(metric))
            .ok_or_else(|| Error::Consistency(format!("table has no metric `{metric}`")))
    }

    fn at(&self, team: usize, scene: usize, metric: usize) -> f64 {
        let (ns, nm) = (self.scenes.len(), self.metrics.len());
        self.values[(team * ns + scene) * nm + metric]
    }

    pub fn value(&self, team: &str, scene: &str, metric: &str) -> Result<f64> {
        Ok(self.at(self.team_index(team)?, self.scene_index(scene)?, self.metric_index(metric)?))
    }

    /// `scene → metric → value` for one team.
    pub fn per_scene(&self, team: &str) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
        let ti = self.team_index(team)?;
        Ok(self
            .scenes
            .iter()
            .enumerate()
            .map(|(si, s)| {
                let row =
                    self.metrics.iter().enumerate().map(|(mi, m)| (m.name.clone(), self.at(ti, si, mi))).collect();
                (s.clone(), row)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Score {
    /// Task 1 rank points (fractional only when exact ties share points).
    Points(f64),
    /// Task 2 weighted RTE, centimeters.
    WeightedRte(f64),
    /// Task 3 means over sequences.
    Triple { ate: f64, rte: f64, rot: f64 },
}

impl Score {
    /// Primary sort key; larger is better only for points.
    pub fn primary(&self) -> f64 {
        match *self {
            Score::Points(p) => p,
            Score::WeightedRte(v) => v,
            Score::Triple { ate, .. } => ate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeaderboardEntry {
    pub team: String,
    pub score: Score,
    pub per_scene: BTreeMap<String, BTreeMap<String, f64>>,
    /// Categories where this team shared points with others.
    pub ties: Vec<String>,
    /// Task 3 only: sequences on which this team has the lowest ATE.
    pub scene_wins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Leaderboard {
    pub task: u8,
    pub entries: Vec<LeaderboardEntry>,
    /// Column order for display.
    pub scenes: Vec<String>,
    pub metrics: Vec<String>,
    /// Scene weights of the task score (empty for task 1).
    pub weights: Vec<(String, f64)>,
}

impl Leaderboard {
    fn sorted(mut self) -> Self {
        let descending = self.task == 1;
        self.entries.sort_by(|a, b| {
            let (x, y) = (a.score.primary(), b.score.primary());
            let by_score = if descending { y.total_cmp(&x) } else { x.total_cmp(&y) };
            by_score.then_with(|| a.team.cmp(&b.team))
        });
        self
    }

    pub fn entry(&self, team: &str) -> Option<&LeaderboardEntry> {
        self.entries.iter().find(|e| e.team == team)
    }
}

fn better(a: f64, b: f64, lower_is_better: bool) -> Ordering {
    if lower_is_better {
        a.total_cmp(&b)
    } else {
        b.total_cmp(&a)
    }
}

/// Rank-point leaderboard over every (scene, metric) category.
///
/// Exact ties are split by a matching [`Placement`] when one names every
/// tied team; otherwise the tied teams share the mean of the contested point
/// values and the category is recorded in their `ties`.
pub fn rank_points_task1(table: &MetricTable) -> Result<Leaderboard> {
    let n = table.teams.len();
    let mut points = alloc::vec![0.0f64; n];
    let mut ties: Vec<Vec<String>> = alloc::vec![Vec::new(); n];

    for (si, scene) in table.scenes.iter().enumerate() {
        for (mi, metric) in table.metrics.iter().enumerate() {
            let placement =
                table.placements.iter().find(|p| &p.scene == scene && p.metric.eq_ignore_ascii_case(&metric.name));
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| better(table.at(a, si, mi), table.at(b, si, mi), metric.lower_is_better));

            let mut slot = 0;
            while slot < n {
                let value = table.at(order[slot], si, mi);
                let end = (slot..n).find(|&k| table.at(order[k], si, mi) != value).unwrap_or(n);
                let group = &order[slot..end];
                // the team in position k (0-based) earns n − k points
                let slot_points = |k: usize| (n - k) as f64;
                let recorded = placement.and_then(|p| {
                    let mut ranked: Vec<(usize, usize)> = group
                        .iter()
                        .map(|&t| p.order.iter().position(|name| *name == table.teams[t]).map(|r| (r, t)))
                        .collect::<Option<Vec<_>>>()?;
                    ranked.sort_unstable();
                    Some(ranked)
                });
                match recorded {
                    Some(ranked) => {
                        for (k, (_, t)) in ranked.into_iter().enumerate() {
                            points[t] += slot_points(slot + k);
                        }
                    }
                    None if group.len() > 1 => {
                        let shared = (slot..end).map(slot_points).sum::<f64>() / group.len() as f64;
                        for &t in group {
                            points[t] += shared;
                            let mut others: Vec<&str> =
                                group.iter().filter(|&&o| o != t).map(|&o| table.teams[o].as_str()).collect();
                            others.sort_unstable();
                            ties[t].push(format!("{scene}/{}: tied with {}", metric.name, others.join(", ")));
                        }
                    }
                    None => points[group[0]] += slot_points(slot),
                }
                slot = end;
            }
        }
    }

    let entries = table
        .teams
        .iter()
        .enumerate()
        .map(|(t, team)| {
            Ok(LeaderboardEntry {
                team: team.clone(),
                score: Score::Points(points[t]),
                per_scene: table.per_scene(team)?,
                ties: core::mem::take(&mut ties[t]),
                scene_wins: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Leaderboard {
        task: 1,
        entries,
        scenes: table.scenes.clone(),
        metrics: table.metrics.iter().map(|m| m.name.clone()).collect(),
        weights: Vec::new(),
    }
    .sorted())
}

/// Weighted mean of per-scene RTE; every weighted scene must be present.
pub fn score_task2(per_scene_rte: &BTreeMap<String, f64>, weights: &[(String, f64)]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::Consistency("no scene weights".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (scene, w) in weights {
        let v =
            per_scene_rte.get(scene).ok_or_else(|| Error::Consistency(format!("missing RTE for scene `{scene}`")))?;
        num += w * v;
        den += w;
    }
    if den <= 0.0 {
        return Err(Error::Consistency("scene weights sum to zero".into()));
    }
    Ok(num / den)
}

/// The default Task 2 weights as owned pairs.
pub fn task2_default_weights() -> Vec<(String, f64)> {
    TASK2_DEFAULT_WEIGHTS.iter().map(|(s, w)| (s.to_string(), *w)).collect()
}

/// Unweighted means of (ATE, RTE, ROT) over the listed scenes.
pub fn score_task3(per_scene: &BTreeMap<String, (f64, f64, f64)>, scenes: &[String]) -> Result<Score> {
    if scenes.is_empty() {
        return Err(Error::Consistency("no scenes listed".into()));
    }
    let (mut ate, mut rte, mut rot) = (0.0, 0.0, 0.0);
    for scene in scenes {
        let (a, r, o) =
            per_scene.get(scene).ok_or_else(|| Error::Consistency(format!("missing sequence `{scene}`")))?;
        ate += a;
        rte += r;
        rot += o;
    }
    let n = scenes.len() as f64;
    Ok(Score::Triple { ate: ate / n, rte: rte / n, rot: rot / n })
}

pub fn task3_default_scenes() -> Vec<String> {
    TASK3_DEFAULT_SCENES.iter().map(|s| s.to_string()).collect()
}

/// Task 2 leaderboard from a table that has an `RTE` metric.
pub fn rank_task2(table: &MetricTable, weights: &[(String, f64)]) -> Result<Leaderboard> {
    let rte = table.metric_index("RTE")?;
    let entries = table
        .teams
        .iter()
        .enumerate()
        .map(|(ti, team)| {
            let per_scene_rte: BTreeMap<String, f64> =
                table.scenes.iter().enumerate().map(|(si, s)| (s.clone(), table.at(ti, si, rte))).collect();
            Ok(LeaderboardEntry {
                team: team.clone(),
                score: Score::WeightedRte(score_task2(&per_scene_rte, weights)?),
                per_scene: table.per_scene(team)?,
                ties: Vec::new(),
                scene_wins: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Leaderboard {
        task: 2,
        entries,
        scenes: table.scenes.clone(),
        metrics: table.metrics.iter().map(|m| m.name.clone()).collect(),
        weights: weights.to_vec(),
    }
    .sorted())
}

/// Task 3 leaderboard from a table with `ATE`, `RTE` and `ROT` metrics. The
/// primary key is mean ATE; `scene_wins` counts sequences with the lowest
/// ATE (shared on exact ties).
pub fn rank_task3(table: &MetricTable, scenes: &[String]) -> Result<Leaderboard> {
    let (ate, rte, rot) = (table.metric_index("ATE")?, table.metric_index("RTE")?, table.metric_index("ROT")?);
    let scene_idx = scenes.iter().map(|s| table.scene_index(s)).collect::<Result<Vec<_>>>()?;
    let nt = table.teams.len();
    let entries = table
        .teams
        .iter()
        .enumerate()
        .map(|(ti, team)| {
            let per_scene: BTreeMap<String, (f64, f64, f64)> = scene_idx
                .iter()
                .map(|&si| {
                    (table.scenes[si].clone(), (table.at(ti, si, ate), table.at(ti, si, rte), table.at(ti, si, rot)))
                })
                .collect();
            let wins =
                scene_idx.iter().filter(|&&si| (0..nt).all(|o| table.at(ti, si, ate) <= table.at(o, si, ate))).count();
            Ok(LeaderboardEntry {
                team: team.clone(),
                score: score_task3(&per_scene, scenes)?,
                per_scene: table.per_scene(team)?,
                ties: Vec::new(),
                scene_wins: Some(wins),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Leaderboard {
        task: 3,
        entries,
        scenes: scenes.to_vec(),
        metrics: table.metrics.iter().map(|m| m.name.clone()).collect(),
        weights: scenes.iter().map(|s| (s.clone(), 1.0)).collect(),
    }
    .sorted())
}
