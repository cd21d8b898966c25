use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use super::commands::load_data;
use super::{read_rules, rules_name, CliError, RunConfig};
use crate::tasks::{low_data_sweep, sweep_cells, CellKey, RuleSet, SweepRow, SweepSpec, TaskError};

/// Rows of an existing results file; a missing file has none.
pub fn read_results(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .map_err(|e| CliError::io(path, e))
}

/// Open `path` for appending, writing the header only into a new file.
fn open_results(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(fresh).from_writer(file))
}

pub(super) fn append_rows(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = open_results(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row in the results-file format, without a header or newline.
pub(super) fn row_line(row: &SweepRow) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(row).map_err(|e| CliError::Config(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).trim_end().to_string())
}

fn percent(fraction: f64) -> String {
    format!("{}%", (fraction * 1e6).round() / 1e4)
}

/// Markdown table of mean metric per (rule set, ρ) row and fraction column.
/// Cells with fewer seeds than requested show their count.
pub fn summary_table(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut groups: Vec<(String, String)> = Vec::new();
    for cell in sweep_cells(spec) {
        let k = cell.key(spec);
        if !groups.contains(&(k.rules.clone(), k.rho.clone())) {
            groups.push((k.rules, k.rho));
        }
    }
    let mut s = format!(
        "{} on `{}`, mean over {} seed(s)\n\n| rules | rho |",
        spec.metric,
        spec.task,
        spec.seeds.len()
    );
    for &f in &spec.fractions {
        s += &format!(" {} |", percent(f));
    }
    s += "\n|---|---|";
    s += &"---:|".repeat(spec.fractions.len());
    s += "\n";
    for (rules, rho) in &groups {
        s += &format!("| {rules} | {rho} |");
        for &f in &spec.fractions {
            let fraction = f.to_string();
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.task == spec.task.name() && &r.rules == rules && &r.rho == rho && r.fraction == fraction)
                .filter(|r| spec.seeds.contains(&r.seed))
                .map(|r| r.metric)
                .collect();
            if values.is_empty() {
                s += " – |";
                continue;
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            if values.len() < spec.seeds.len() {
                s += &format!(" {mean:.4} (n={}) |", values.len());
            } else {
                s += &format!(" {mean:.4} |");
            }
        }
        s += "\n";
    }
    s
}

pub(super) fn cmd_sweep(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let write_err = |e: std::io::Error| CliError::Config(format!("cannot write output: {e}"));
    let data = load_data(cfg.task, cfg.data.as_deref(), &cfg.generator)?;
    let mut rule_sets: Vec<RuleSet> = Vec::new();
    for spec in &cfg.rules {
        let name = rules_name(spec);
        if rule_sets.iter().any(|r| r.name == name) {
            return Err(CliError::Config(format!("rule set `{name}` is listed twice")));
        }
        rule_sets.push(RuleSet {
            name,
            program: read_rules(spec)?,
        });
    }
    let spec = SweepSpec {
        task: cfg.task,
        fractions: cfg.fractions.clone(),
        seeds: cfg.seeds.clone(),
        rule_sets,
        rho_grid: cfg.rho.clone(),
        train: cfg.train.clone(),
        metric: cfg.metric,
    };

    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let config_path = cfg.out.join("config.toml");
    fs::write(&config_path, cfg.to_toml()).map_err(|e| CliError::io(&config_path, e))?;
    let results = cfg.out.join("results.csv");
    let existing = read_results(&results)?;
    let done: HashSet<CellKey> = existing.iter().map(SweepRow::key).collect();
    let cells = sweep_cells(&spec);
    let todo = cells.iter().filter(|c| !done.contains(&c.key(&spec))).count();
    writeln!(out, "{todo} of {} cell(s) to run", cells.len()).map_err(write_err)?;

    let mut writer = open_results(&results)?;
    let new_rows = low_data_sweep(&data, &spec, &done, |row| {
        let io = |e: csv::Error| TaskError::io(&results, std::io::Error::other(e));
        writer.serialize(row).map_err(io)?;
        writer.flush().map_err(|e| TaskError::io(&results, e))
    })?;
    drop(writer);

    let rows: Vec<SweepRow> = existing.into_iter().chain(new_rows).collect();
    let table = summary_table(&spec, &rows);
    let summary_path = cfg.out.join("summary.md");
    fs::write(&summary_path, &table).map_err(|e| CliError::io(&summary_path, e))?;
    write!(out, "\n{table}").map_err(write_err)?;
    Ok(())
}
