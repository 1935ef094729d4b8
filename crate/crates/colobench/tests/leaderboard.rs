use std::fs;
use std::path::{Path, PathBuf};

use colobench::leaderboard::{
    emit_leaderboard, leaderboard_csv, leaderboard_json, leaderboard_markdown, load_table, parse_placement,
    parse_placements_file, parse_table_json, Format,
};
use colobench_core::ranking::{rank_points_task1, rank_task2, rank_task3, task2_default_weights, task3_default_scenes};
use colobench_core::{Aggregator, Score};
use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn task1() -> colobench_core::Leaderboard {
    let placements = parse_placements_file(&data("task1_placements.txt")).unwrap();
    let table = load_table(&data("task1.csv")).unwrap().with_placements(placements).unwrap();
    rank_points_task1(&table).unwrap()
}

#[test]
fn placements_parse() {
    let p = parse_placement("SynCol III/Rel=CVML,MIVA").unwrap();
    assert_eq!(p.scene, "SynCol III");
    assert_eq!(p.metric, "Rel");
    assert_eq!(p.order, vec!["CVML".to_string(), "MIVA".to_string()]);
    for bad in ["", "SynCol III/Rel", "Rel=CVML,MIVA", "S/M=", "S/M=A"] {
        assert!(parse_placement(bad).is_err(), "{bad}");
    }
}

#[test]
fn task1_points_match_table() {
    let board = task1();
    let got: Vec<(String, f64)> = board.entries.iter().map(|e| (e.team.clone(), e.score.primary())).collect();
    let expected =
        [("CVML", 54.0), ("MIVA", 44.0), ("EndoAI", 37.0), ("IntuitiveIL", 26.0), ("MMLAB", 16.0), ("KLIV", 12.0)];
    assert_eq!(got.len(), expected.len());
    for ((team, pts), (et, ep)) in got.iter().zip(expected) {
        assert_eq!((team.as_str(), *pts), (et, ep));
    }
}

#[test]
fn markdown_lists_endoai_first_for_task2() {
    let table = load_table(&data("task2.csv")).unwrap();
    let board = rank_task2(&table, &task2_default_weights()).unwrap();
    let md = leaderboard_markdown(&board);
    let first = md.lines().find(|l| l.starts_with("| 1 |")).unwrap();
    assert!(first.contains("EndoAI") && first.contains("0.165"), "{first}");
    match board.entries[0].score {
        Score::WeightedRte(v) => assert!((v - 0.165).abs() <= 0.0005),
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_format_is_byte_deterministic() {
    let boards = [
        task1(),
        rank_task2(&load_table(&data("task2.csv")).unwrap(), &task2_default_weights()).unwrap(),
        rank_task3(&load_table(&data("task3.csv")).unwrap(), &task3_default_scenes()).unwrap(),
    ];
    for board in &boards {
        for format in [Format::Json, Format::Csv, Format::Markdown] {
            let a = emit_leaderboard(board, format, Aggregator::Median).unwrap();
            let b = emit_leaderboard(board, format, Aggregator::Median).unwrap();
            assert_eq!(a, b);
            assert!(a.ends_with('\n'));
        }
        let csv = leaderboard_csv(board);
        assert_eq!(csv.lines().count(), 1 + board.entries.len());
        let json: Value = serde_json::from_str(&leaderboard_json(board, Aggregator::Median).unwrap()).unwrap();
        assert_eq!(json["task"], board.task);
        assert_eq!(json["entries"].as_array().unwrap().len(), board.entries.len());
        assert_eq!(json["entries"][0]["rank"], 1);
    }
}

#[test]
fn task3_scores_and_wins() {
    let board = rank_task3(&load_table(&data("task3.csv")).unwrap(), &task3_default_scenes()).unwrap();
    let expected = [("MIVA", 3.59, 0.216, 0.544), ("EndoAI", 7.16, 0.226, 0.865)];
    for (team, ate, rte, rot) in expected {
        let e = board.entry(team).unwrap();
        let Score::Triple { ate: a, rte: r, rot: o } = e.score else { panic!() };
        assert!(
            (a - ate).abs() <= 0.005 && (r - rte).abs() <= 0.005 && (o - rot).abs() <= 0.005,
            "{team}: {a} {r} {o}"
        );
    }
    assert_eq!(board.entry("MIVA").unwrap().scene_wins, Some(5));
    assert_eq!(board.entry("EndoAI").unwrap().scene_wins, Some(2));
}

#[test]
fn json_tables_rank_like_csv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("t.json");
    let doc = r#"{
        "values": {
            "A": {"S1": {"RTE": 0.1}, "S2": {"RTE": 0.3}},
            "B": {"S1": {"RTE": 0.2}, "S2": {"RTE": 0.1}}
        }
    }"#;
    fs::write(&path, doc).unwrap();
    let table = load_table(&path).unwrap();
    let board = rank_task2(&table, &[("S1".into(), 1.0), ("S2".into(), 1.0)]).unwrap();
    assert_eq!(board.entries[0].team, "B");
    assert!((board.entries[0].score.primary() - 0.15).abs() < 1e-12);

    let csv = dir.path().join("t.csv");
    fs::write(&csv, "team,S1/RTE,S2/RTE\nA,0.1,0.3\nB,0.2,0.1\n").unwrap();
    let from_csv = rank_task2(&load_table(&csv).unwrap(), &[("S1".into(), 1.0), ("S2".into(), 1.0)]).unwrap();
    assert_eq!(leaderboard_csv(&board), leaderboard_csv(&from_csv));
}

#[test]
fn json_tables_carry_placements() {
    let doc = r#"{
        "values": {
            "A": {"S": {"L1": 0.1}},
            "B": {"S": {"L1": 0.1}},
            "C": {"S": {"L1": 0.3}}
        },
        "placements": [{"scene": "S", "metric": "L1", "order": ["B", "A"]}]
    }"#;
    let table = parse_table_json(doc, Path::new("inline.json")).unwrap();
    let board = rank_points_task1(&table).unwrap();
    assert_eq!(board.entry("B").unwrap().score, Score::Points(3.0));
    assert_eq!(board.entry("A").unwrap().score, Score::Points(2.0));

    // a placement that does not cover the tied group leaves the points shared
    let partial = doc.replace("\"order\": [\"B\", \"A\"]", "\"order\": [\"B\", \"C\"]");
    let board = rank_points_task1(&parse_table_json(&partial, Path::new("x.json")).unwrap()).unwrap();
    assert_eq!(board.entry("A").unwrap().score, Score::Points(2.5));
    assert_eq!(board.entry("B").unwrap().ties, vec!["S/L1: tied with A".to_string()]);
}

#[test]
fn malformed_tables_are_format_errors() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [
        ("empty.csv", ""),
        ("bad_number.csv", "team,S/L1\nA,abc\n"),
        ("bad_header.csv", "team,L1\nA,0.1\n"),
        ("ragged.csv", "team,S/L1,S/RMSE\nA,0.1\n"),
        ("bad.json", "{\"values\": 3}"),
    ] {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        let err = load_table(&p).expect_err(name);
        assert_eq!(err.exit_code(), 2, "{name}: {err}");
    }
}
