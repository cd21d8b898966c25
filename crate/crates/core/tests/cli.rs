use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use logaug::cli::read_results;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn logaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logaug"))
        .args(args)
        .env_remove("LOGAUG_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn only_checkpoint(dir: &Path) -> PathBuf {
    let ckpts: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ckpt"))
        .collect();
    assert_eq!(ckpts.len(), 1, "{ckpts:?}");
    ckpts.into_iter().next().unwrap()
}

/// CSV row with the trailing wall-clock column dropped.
fn without_wall(row: &str) -> String {
    let mut fields: Vec<&str> = row.trim().split(',').collect();
    fields.pop();
    fields.join(",")
}

// --- check -----------------------------------------------------------------

#[test]
fn shipped_tagging_rules_check_clean() {
    let o = logaug(&["check", "--task", "tag", "--rules", "c1-5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("c1-5: parse OK, 5 statement(s)"), "{out}");
    assert!(out.contains("normal form:"));
    assert!(out.contains("grounded:"));
    assert!(out.ends_with("5 statement(s): all acyclic and well-formed\n"), "{out}");
}

#[test]
fn every_shipped_program_checks_against_its_task() {
    for (name, task, _) in logaug::tasks::SHIPPED_RULES {
        let o = logaug(&["check", "--task", &task.to_string(), "--rules", name]);
        assert_eq!(code(&o), 0, "{name}: {}{}", stdout(&o), stderr(&o));
    }
}

#[test]
fn reversed_rule_is_reported_cyclic_with_witness() {
    let o = logaug(&["check", "--task", "tag", "--rules", &fixture("reversed.rules")]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.contains("cyclic:"), "{out}");
    assert!(out.contains("`y'`"), "witness names the neuron: {out}");
    assert!(out.contains("hint:"), "{out}");
    assert!(stderr(&o).contains("1 of 1 statement(s) failed"), "{}", stderr(&o));
}

#[test]
fn missing_table_is_a_config_error() {
    let o = logaug(&["check", "--task", "tag", "--rules", &fixture("missing_table.rules")]);
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).contains("gazetteer"), "{}", stderr(&o));
}

#[test]
fn syntax_errors_are_validation_failures_with_a_location() {
    let o = logaug(&["check", "--task", "tag", "--rules", &fixture("syntax_error.rules")]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("syntax_error.rules"), "{err}");
    assert!(err.contains('4'), "line number: {err}");
}

#[test]
fn check_runs_from_a_written_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("tagger.json");
    let o = logaug(&["graph", "--task", "tag", "--out", p(&graph)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("tagger.noun.tsv").exists());

    let o = logaug(&["check", "--graph", p(&graph), "--rules", "c1-5"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let o = logaug(&["check", "--graph", p(&graph), "--rules", &fixture("reversed.rules")]);
    assert_eq!(code(&o), 1);

    fs::remove_file(dir.path().join("tagger.noun.tsv")).unwrap();
    let o = logaug(&["check", "--graph", p(&graph), "--rules", "c1-5"]);
    assert_eq!(code(&o), 2);
    let o = logaug(&["check", "--graph", "/nonexistent/graph.json", "--rules", "c1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn augmented_graph_keeps_its_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let count = |args: &[&str]| {
        let o = logaug(args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let out = stdout(&o);
        let params: usize = out.split(", ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
        let nodes: usize = out.split(": ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
        (nodes, params)
    };
    let plain = dir.path().join("plain.json");
    let aug = dir.path().join("aug.json");
    let (n0, p0) = count(&["graph", "--task", "nli", "--out", p(&plain)]);
    let (n1, p1) = count(&["graph", "--task", "nli", "--rules", "n2-3", "--rho", "2", "--out", p(&aug)]);
    assert_eq!(p0, p1);
    assert!(n1 > n0);
}

// --- usage and configuration ----------------------------------------------

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    for args in [
        vec!["train", "--task", "tag", "--fraction", "1.5", "--out", out],
        vec!["train", "--task", "tag", "--rho", "-1", "--out", out],
        vec!["train", "--task", "tag", "--metric", "span_f1", "--out", out],
        vec!["train", "--task", "tag", "--rules", "/nonexistent.rules", "--out", out],
        vec!["train", "--task", "tag", "--seeds", "1,2", "--out", out],
        vec!["train", "--task", "bogus"],
        vec!["frobnicate"],
        vec!["eval", "--checkpoint", "/nonexistent.ckpt"],
    ] {
        let o = logaug(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
    assert_eq!(code(&logaug(&["--help"])), 0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "task = \"tag\"\nepochs = 1\nfractions = [0.05]\nseeds = [4]\n").unwrap();
    let out = dir.path().join("out");
    let o = logaug(&["train", "--config", p(&cfg), "--epochs", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // Seed from the file, best epoch bounded by the flag.
    let row = stdout(&o);
    let fields: Vec<&str> = row.trim().split(',').collect();
    assert_eq!(&fields[..5], ["tag", "0.05", "4", "none", "-"]);
    assert!(fields[6].parse::<usize>().unwrap() <= 2);

    fs::write(&cfg, "epochs = 1\nwarp = 9\n").unwrap();
    assert_eq!(code(&logaug(&["train", "--config", p(&cfg), "--task", "tag"])), 2);
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_logaug"))
        .args(["train", "--task", "tag", "--fraction", "0.05", "--epochs", "1"])
        .env("LOGAUG_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("train.csv").exists());
    only_checkpoint(dir.path());
}

// --- train / eval ----------------------------------------------------------

#[test]
fn eval_reproduces_the_training_metric_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let o = logaug(&[
        "train", "--task", "tag", "--rules", "c1-5", "--rho", "4", "--fraction", "0.1", "--seed", "3", "--epochs", "4",
        "--out", p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = stdout(&o);
    let fields: Vec<&str> = row.trim().split(',').collect();
    assert_eq!(&fields[..5], ["tag", "0.1", "3", "c1-5", "4"]);
    let trained: f64 = fields[5].parse().unwrap();

    let ckpt = only_checkpoint(dir.path());
    let o = logaug(&["eval", "--checkpoint", p(&ckpt)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o);
    let (name, value) = line.trim().split_once('\t').unwrap();
    assert_eq!(name, "accuracy");
    assert_eq!(value.parse::<f64>().unwrap().to_bits(), trained.to_bits());

    let o = logaug(&["eval", "--checkpoint", p(&ckpt), "--metric", "align_f1"]);
    assert_eq!(code(&o), 2);
    let o = logaug(&["eval", "--checkpoint", p(&ckpt), "--split", "dev"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_reads_a_generated_dataset_directory() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = logaug(&["gen", "--task", "nli", "--gen-seed", "3", "--train-size", "60", "--test-size", "30", "--out", p(&data)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let runs = dir.path().join("runs");
    let o = logaug(&["train", "--task", "nli", "--data", p(&data), "--epochs", "2", "--out", p(&runs)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trained: f64 = stdout(&o).trim().split(',').nth(5).unwrap().parse().unwrap();
    let o = logaug(&["eval", "--checkpoint", p(&only_checkpoint(&runs))]);
    let value: f64 = stdout(&o).trim().split_once('\t').unwrap().1.parse().unwrap();
    assert_eq!(value.to_bits(), trained.to_bits());
    // The dataset belongs to a different task.
    let o = logaug(&["train", "--task", "tag", "--data", p(&data), "--out", p(&runs)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn rules_none_is_the_same_as_no_rules() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str], sub: &str| {
        let out = dir.path().join(sub);
        let mut args = vec!["train", "--task", "tag", "--fraction", "0.05", "--seed", "2", "--epochs", "3", "--out", p(&out)];
        args.extend_from_slice(extra);
        let o = logaug(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (without_wall(&stdout(&o)), fs::read(only_checkpoint(&out)).unwrap())
    };
    let (row_a, ckpt_a) = run(&[], "a");
    let (row_b, ckpt_b) = run(&["--rules", "none"], "b");
    assert_eq!(row_a, row_b);
    assert_eq!(ckpt_a, ckpt_b);
}

#[test]
fn baseline_fits_the_tagging_training_pool() {
    let dir = tempfile::tempdir().unwrap();
    let o = logaug(&["train", "--task", "tag", "--fraction", "1", "--epochs", "100", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = logaug(&["eval", "--checkpoint", p(&only_checkpoint(dir.path())), "--split", "train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let acc: f64 = stdout(&o).trim().split_once('\t').unwrap().1.parse().unwrap();
    assert!(acc >= 0.95, "train accuracy {acc}");
}

// --- sweep -----------------------------------------------------------------

const SWEEP: &[&str] = &[
    "sweep", "--task", "tag", "--rules", "none,c1", "--rho", "2", "--fractions", "0.05,0.1", "--seeds", "1,2",
    "--epochs", "2",
];

fn sweep(out: &Path, extra: &[&str]) -> Output {
    let mut args = SWEEP.to_vec();
    args.extend_from_slice(&["--out", p(out)]);
    args.extend_from_slice(extra);
    let o = logaug(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    o
}

#[test]
fn sweep_covers_the_grid_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sweep(dir.path(), &[]);
    assert!(stdout(&o).starts_with("8 of 8 cell(s) to run"));
    let csv = dir.path().join("results.csv");
    let rows = read_results(&csv).unwrap();
    assert_eq!(rows.len(), 8);
    let before = fs::read(&csv).unwrap();

    let started = Instant::now();
    let o = sweep(dir.path(), &[]);
    assert!(stdout(&o).starts_with("0 of 8 cell(s) to run"));
    assert!(started.elapsed().as_secs_f64() < 5.0);
    assert_eq!(fs::read(&csv).unwrap(), before);

    // A partial results file is completed, not restarted.
    let text = String::from_utf8(before).unwrap();
    let kept: Vec<&str> = text.lines().take(4).collect();
    fs::write(&csv, kept.join("\n") + "\n").unwrap();
    let o = sweep(dir.path(), &["--workers", "2"]);
    assert!(stdout(&o).starts_with("5 of 8 cell(s) to run"));
    let again = read_results(&csv).unwrap();
    assert_eq!(again.len(), 8);
    let strip = |rows: &[logaug::tasks::SweepRow]| {
        let mut v: Vec<_> = rows.iter().map(|r| (r.key(), r.metric.to_bits(), r.epochs)).collect();
        v.sort();
        v
    };
    assert_eq!(strip(&again), strip(&rows));
}

#[test]
fn summary_means_match_the_results_file() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path(), &[]);
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    let mut cells: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        cells
            .entry((r.rules.clone(), r.rho.clone(), r.fraction.clone()))
            .or_default()
            .push(r.metric);
    }
    let summary = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    let table: Vec<Vec<String>> = summary
        .lines()
        .filter(|l| l.starts_with('|'))
        .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
        .collect();
    assert_eq!(table[0], ["rules", "rho", "5%", "10%"]);
    let fractions = ["0.05", "0.1"];
    let mut checked = 0;
    for row in &table[2..] {
        for (k, f) in fractions.iter().enumerate() {
            let values = &cells[&(row[0].clone(), row[1].clone(), f.to_string())];
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert_eq!(row[2 + k], format!("{mean:.4}"), "{row:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, 4);
    let config = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(config.contains("rules = [\"none\", \"c1\"]"), "{config}");
}

#[test]
fn sweep_rows_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    sweep(&a, &["--workers", "1"]);
    sweep(&b, &["--workers", "3"]);
    let read = |d: &Path| {
        fs::read_to_string(d.join("results.csv"))
            .unwrap()
            .lines()
            .map(without_wall)
            .collect::<Vec<_>>()
    };
    assert_eq!(read(&a), read(&b));
}
