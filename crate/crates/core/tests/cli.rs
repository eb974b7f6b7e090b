mod common;

use std::fs;
use std::path::Path;

use cogede::data::read_csv_matrix;
use common::{cogede, tree, Run};
use serde_json::Value;

const SMALL: [&str; 10] = ["--subjects", "3", "--channels", "5,7", "--timepoints", "20", "--conditions", "2", "--seed", "2"];

fn ok(run: Run) -> Run {
    assert_eq!(run.code, 0, "stdout: {}\nstderr: {}", run.stdout, run.stderr);
    run
}

fn json_lines(run: &Run) -> Vec<Value> {
    run.stdout
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap_or_else(|e| panic!("bad line {l}: {e}"));
            for key in ["command", "status", "metrics", "paths"] {
                assert!(v.get(key).is_some(), "{key} missing in {l}");
            }
            v
        })
        .collect()
}

fn small_data(root: &Path) -> String {
    let mut args = vec!["synth", "-o", "data"];
    args.extend(SMALL);
    ok(cogede(&args, root));
    "data/manifest.json".into()
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn synth_defaults_write_every_block() {
    let dir = tempfile::tempdir().unwrap();
    let run = ok(cogede(&["synth", "-o", "data"], dir.path()));
    let lines = json_lines(&run);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["command"], "synth");
    assert_eq!(lines[0]["status"], "ok");
    // 4 subjects, 2 modalities, 3 splits
    assert_eq!(lines[0]["metrics"]["blocks"], 24);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("data/manifest.json")).unwrap()).unwrap();
    assert!(manifest.is_object());
    assert!(dir.path().join("data/truth_H.csv").exists());
}

#[test]
fn fit_writes_generator_and_mixing() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    let run = ok(cogede(
        &["fit", "--manifest", &manifest, "--method", "spca-qp", "--K", "3", "--l1", "1e-2", "--l2", "1e-1", "--formulation", "group", "-o", "fit"],
        dir.path(),
    ));
    let lines = json_lines(&run);
    assert_eq!(lines[0]["command"], "fit");
    let out = dir.path().join("fit");
    let g = read_csv_matrix(&out.join("G.csv")).unwrap();
    // two conditions of 20 samples
    assert_eq!(g.shape(), (40, 3));
    let s_files: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("S_"))
        .collect();
    assert_eq!(s_files.len(), 1);
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["K"], 3);
    assert_eq!(meta["method"], "spca-qp");
    assert_eq!(meta["formulation"], "group");
    assert!(meta.get("wall_time_seconds").is_none());
    let trace = read_csv(&out.join("trace.csv"));
    assert_eq!(trace.len() as u64, meta["iterations"].as_u64().unwrap());
}

#[test]
fn single_archetype_mixing_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    ok(cogede(&["fit", "--manifest", &manifest, "--method", "aa", "--K", "1", "-o", "fit"], dir.path()));
    let mut seen = 0;
    for entry in fs::read_dir(dir.path().join("fit")).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap().to_str().unwrap().starts_with("S_") {
            let s = read_csv_matrix(&path).unwrap();
            assert_eq!(s.nrows(), 1);
            assert!(s.iter().all(|&v| (v - 1.0).abs() < 1e-12));
            seen += 1;
        }
    }
    // default formulation keeps one block per modality and subject
    assert_eq!(seen, 6);
}

#[test]
fn engines_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    let objective = |method: &str| {
        let run = ok(cogede(
            &["fit", "--manifest", &manifest, "--method", method, "--K", "2", "--l1", "1e-2", "--l2", "1e-1", "-o", method],
            dir.path(),
        ));
        json_lines(&run)[0]["metrics"]["final_objective_exact"].as_f64().unwrap()
    };
    let (qp, sgd) = (objective("spca-qp"), objective("spca-sgd"));
    assert!((qp - sgd).abs() / qp.min(sgd) < 0.02, "qp {qp} sgd {sgd}");
}

#[test]
fn cv_grid_rows_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    let run = ok(cogede(&["cv", "--manifest", &manifest, "--K", "2", "--seeds", "1", "-o", "cv"], dir.path()));
    let rows = read_csv(&dir.path().join("cv/selection.csv"));
    assert_eq!(rows.len(), 49);

    // independent re-selection: lowest validation SSE, ties to larger λ1, λ2
    let mut best: Option<(f64, f64, f64)> = None;
    for r in &rows {
        assert_eq!(&r[6], "ok");
        let cand = (r[9].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap(), r[4].parse::<f64>().unwrap());
        best = match best {
            None => Some(cand),
            Some(b) if cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) > (b.1, b.2)) => Some(cand),
            keep => keep,
        };
    }
    let (val, l1, l2) = best.unwrap();
    let line = &json_lines(&run)[0];
    assert_eq!(line["metrics"]["K"], 2);
    assert_eq!(line["metrics"]["lambda1"].as_f64().unwrap(), l1);
    assert_eq!(line["metrics"]["lambda2"].as_f64().unwrap(), l2);
    assert_eq!(line["metrics"]["validation_sse"].as_f64().unwrap(), val);

    ok(cogede(
        &["cv", "--manifest", &manifest, "--K", "2", "--seeds", "1", "--l1-grid", "0", "-o", "cv0"],
        dir.path(),
    ));
    assert_eq!(read_csv(&dir.path().join("cv0/selection.csv")).len(), 7);
}

fn sweep_args<'a>(manifest: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "sweep", "--manifest", manifest, "--K", "2..5", "--seeds", "3", "--l1-grid", "0,1e-2", "--l2-grid", "0",
        "--formulations", "group,mmms", "-o", out,
    ]
}

#[test]
fn sweep_summary_matches_selection_table() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    let run = ok(cogede(&sweep_args(&manifest, "sweep"), dir.path()));
    assert_eq!(json_lines(&run)[0]["metrics"]["summary_rows"], 8);
    let rows = read_csv(&dir.path().join("sweep/selection.csv"));
    let summary = read_csv(&dir.path().join("sweep/summary.csv"));
    assert_eq!(rows.len(), 2 * 4 * 3 * 2);
    assert_eq!(summary.len(), 8);
    for s in &summary {
        let same = |r: &csv::StringRecord| r[0] == s[0] && r[1] == s[1] && r[2] == s[2] && r[3] == s[3] && r[4] == s[4];
        let tests: Vec<f64> = rows.iter().filter(|r| same(r)).map(|r| r[10].parse().unwrap()).collect();
        assert_eq!(tests.len(), 3);
        let mean = tests.iter().sum::<f64>() / 3.0;
        let mean_col: f64 = s[6].parse().unwrap();
        assert!((mean - mean_col).abs() <= 1e-12 * mean.abs());
    }
}

#[test]
fn resume_reproduces_a_fresh_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    ok(cogede(&sweep_args(&manifest, "full"), dir.path()));
    ok(cogede(&sweep_args(&manifest, "partial"), dir.path()));
    let cells = dir.path().join("partial/cells");
    let mut names: Vec<_> = fs::read_dir(&cells).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for path in names.iter().step_by(3) {
        fs::remove_file(path).unwrap();
    }
    let mut args = sweep_args(&manifest, "partial");
    args.push("--resume");
    ok(cogede(&args, dir.path()));
    assert_eq!(tree(&dir.path().join("full")), tree(&dir.path().join("partial")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cogede(&["--help"], dir.path()).code, 0);
    assert_eq!(cogede(&["fit", "--no-such-flag"], dir.path()).code, 2);
    assert_eq!(cogede(&["fit", "--manifest", "m.json", "--method", "pls"], dir.path()).code, 2);
    assert_eq!(cogede(&["cv", "--manifest", "m.json", "--K", "0"], dir.path()).code, 2);
    let missing = cogede(&["fit", "--manifest", "missing.json", "--K", "2", "-o", "x"], dir.path());
    assert_eq!(missing.code, 1);
    let lines = json_lines(&missing);
    assert_eq!(lines[0]["status"], "error");
    assert_eq!(lines[0]["command"], "fit");
}

#[test]
fn config_file_matches_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    fs::write(
        dir.path().join("run.json"),
        format!(r#"{{"manifest": "{manifest}", "method": "spca-sgd", "K": 2, "l1": 0.01, "init": "random", "seed": 4}}"#),
    )
    .unwrap();
    ok(cogede(&["fit", "--config", "run.json", "-o", "a"], dir.path()));
    ok(cogede(
        &["fit", "--manifest", &manifest, "--method", "spca-sgd", "--K", "2", "--l1", "0.01", "--init", "random", "--seed", "4", "-o", "b"],
        dir.path(),
    ));
    assert_eq!(tree(&dir.path().join("a")), tree(&dir.path().join("b")));
    // explicit flags win over the config file
    ok(cogede(&["fit", "--config", "run.json", "--K", "3", "-o", "c"], dir.path()));
    assert_eq!(read_csv_matrix(&dir.path().join("c/G.csv")).unwrap().ncols(), 3);
}

#[test]
fn timings_flag_adds_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_data(dir.path());
    ok(cogede(&["fit", "--manifest", &manifest, "--K", "2", "--timings", "-o", "t"], dir.path()));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("t/meta.json")).unwrap()).unwrap();
    assert!(meta["wall_time_seconds"].as_f64().unwrap() > 0.0);
}
