use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::sweep::{append_rows, row_line};
use super::{read_rules, rules_name, CliError, EvalArgs, GenArgs, GraphArgs, RunConfig};
use crate::augment::{augment_pipeline, GroundingContext, ProbeContext};
use crate::graph::{ComputationGraph, GraphFile};
use crate::rules::{parse_rules, Rho, RuleProgram};
use crate::runtime::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::tasks::{
    build_instance, evaluate, generate, train, GenConfig, Metric, SweepRow, TaskData, TaskError, TaskKind,
    TrainConfig,
};

fn write_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write output: {e}"))
}

/// The dataset in `dir`, or a freshly generated one.
pub(super) fn load_data(task: TaskKind, dir: Option<&Path>, generator: &GenConfig) -> Result<TaskData, CliError> {
    match dir {
        Some(dir) => {
            let data = TaskData::load(dir)?;
            if data.task != task {
                return Err(CliError::Config(format!(
                    "{} holds `{}` data, not `{task}`",
                    dir.display(),
                    data.task
                )));
            }
            Ok(data)
        }
        None => Ok(generate(task, generator)),
    }
}

/// Merge rule specs into one program, named by joining their names with `+`.
pub(super) fn merged_program(specs: &[String]) -> Result<(String, RuleProgram), CliError> {
    let mut program = RuleProgram::default();
    let mut names = Vec::new();
    for spec in specs {
        let p = read_rules(spec)?;
        program = program.merge(p).map_err(CliError::Validation)?;
        if spec != "none" {
            names.push(rules_name(spec));
        }
    }
    let name = if names.is_empty() { "none".to_string() } else { names.join("+") };
    Ok((name, program))
}

/// Display form of the ρ a cell ran with; `-` when no rule was active.
pub(super) fn rho_label(program: &RuleProgram, rho: Rho) -> String {
    if program.is_empty() {
        "-".into()
    } else {
        rho.to_string()
    }
}

/// What a checkpoint needs to be re-evaluated on its own.
#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    task: TaskKind,
    rules: String,
    /// Rule source before the ρ override.
    program: String,
    rho: String,
    metric: Metric,
    train: TrainConfig,
    generator: GenConfig,
    data: Option<PathBuf>,
    best_epoch: usize,
    dev_metric: f64,
    test_metric: f64,
}

pub(super) fn cmd_train(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let ([fraction], [seed], [rho]) = (&cfg.fractions[..], &cfg.seeds[..], &cfg.rho[..]) else {
        return Err(CliError::Config(
            "train runs one cell: give one fraction, one seed and one rho (use `sweep` for grids)".into(),
        ));
    };
    let data = load_data(cfg.task, cfg.data.as_deref(), &cfg.generator)?;
    let (name, program) = merged_program(&cfg.rules)?;
    let tc = TrainConfig {
        fraction: *fraction,
        seed: *seed,
        ..cfg.train.clone()
    };
    let started = Instant::now();
    let outcome = train(&data, &program.clone().with_rho(*rho), &tc, cfg.metric)?;
    let rho = rho_label(&program, *rho);
    let row = SweepRow {
        task: cfg.task.to_string(),
        fraction: fraction.to_string(),
        seed: *seed,
        rules: name.clone(),
        rho: rho.clone(),
        metric: outcome.test_metric,
        epochs: outcome.best_epoch,
        wall_seconds: started.elapsed().as_secs_f64(),
    };

    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let stem = format!("{}-{name}-rho{}-f{fraction}-s{seed}", cfg.task, rho.replace('-', "none"));
    let ckpt_path = cfg.out.join(format!("{stem}.ckpt"));
    let meta = CheckpointMeta {
        task: cfg.task,
        rules: name,
        program: program.to_string(),
        rho,
        metric: cfg.metric,
        train: tc,
        generator: cfg.generator.clone(),
        data: cfg.data.clone(),
        best_epoch: outcome.best_epoch,
        dev_metric: outcome.dev_metric,
        test_metric: outcome.test_metric,
    };
    let ck = Checkpoint {
        params: outcome.params,
        metadata: serde_json::to_value(&meta).expect("metadata serializes"),
    };
    save_checkpoint(&ckpt_path, &ck).map_err(|e| CliError::io(&ckpt_path, e))?;
    append_rows(&cfg.out.join("train.csv"), std::slice::from_ref(&row))?;
    writeln!(out, "{}", row_line(&row)?).map_err(write_err)?;
    eprintln!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

pub(super) fn cmd_eval(a: &EvalArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint).map_err(|e| CliError::io(&a.checkpoint, e))?;
    let meta: CheckpointMeta = serde_json::from_value(ck.metadata.clone())
        .map_err(|e| CliError::io(&a.checkpoint, format!("unreadable metadata: {e}")))?;
    let metric = a.metric.unwrap_or(meta.metric);
    if !metric.applies_to(meta.task) {
        return Err(TaskError::MetricMismatch { metric, task: meta.task }.into());
    }
    let data_dir = a.data.as_deref().or(meta.data.as_deref());
    let data = load_data(meta.task, data_dir, &meta.generator)?;
    let mut program = parse_rules(&meta.program).map_err(|e| CliError::Validation(format!("checkpoint rules: {e}")))?;
    if meta.rho != "-" {
        program = program.with_rho(meta.rho.parse().map_err(CliError::Config)?);
    }
    let examples = match a.split.as_str() {
        "test" => &data.test,
        "train" => &data.train,
        s => return Err(CliError::Config(format!("unknown split `{s}` (expected test or train)"))),
    };
    let value = evaluate(&data, examples, &meta.train.model, &program, &ck.params, metric)?;
    writeln!(out, "{metric}\t{value}").map_err(write_err)?;
    Ok(())
}

pub(super) fn cmd_gen(a: &GenArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut g = GenConfig::for_task(a.task);
    if let Some(v) = a.gen_seed {
        g.seed = v;
    }
    if let Some(v) = a.noise {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Config(format!("noise {v} is outside [0, 1]")));
        }
        g.noise = v;
    }
    if let Some(v) = a.train_size {
        g.train = v;
    }
    if let Some(v) = a.test_size {
        g.test = v;
    }
    let data = generate(a.task, &g);
    data.save(&a.out)?;
    writeln!(
        out,
        "{}: {} train / {} test examples, vocabulary {} -> {}",
        a.task,
        data.train.len(),
        data.test.len(),
        data.vocab.len(),
        a.out.display()
    )
    .map_err(write_err)?;
    Ok(())
}

/// Graph and grounding context of the first test example of `task`.
pub(super) fn probe_instance(task: TaskKind, data: Option<&Path>) -> Result<(ComputationGraph, GroundingContext), CliError> {
    let data = load_data(task, data, &GenConfig::for_task(task))?;
    let example = data
        .test
        .first()
        .or(data.train.first())
        .ok_or(CliError::Config("dataset is empty".into()))?;
    let inst = build_instance(&TrainConfig::for_task(task).model, &data, example);
    Ok((inst.graph, inst.ctx))
}

pub(super) fn cmd_graph(a: &GraphArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let (mut graph, ctx) = probe_instance(a.task, a.data.as_deref())?;
    if !a.rules.is_empty() {
        let (_, mut program) = merged_program(&a.rules)?;
        if let Some(r) = &a.rho {
            program = program.with_rho(r.parse().map_err(CliError::Config)?);
        }
        graph = augment_pipeline(&program, &graph, &ctx)?.graph;
    }
    let stem = a
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "graph".into());
    let dir = a.out.parent().unwrap_or(Path::new(""));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    for (name, table) in &ctx.tables {
        let path = dir.join(format!("{stem}.{name}.tsv"));
        fs::write(&path, table.to_tsv()).map_err(|e| CliError::io(&path, e))?;
    }
    let probe = ProbeContext::describe(&ctx, |name| format!("{stem}.{name}.tsv").into());
    let mut file = GraphFile::from_graph(&graph);
    file.probe = Some(serde_json::to_value(&probe).expect("probe serializes"));
    fs::write(&a.out, file.to_json() + "\n").map_err(|e| CliError::io(&a.out, e))?;
    writeln!(
        out,
        "{}: {} nodes, {} parameters -> {}",
        a.task,
        graph.len(),
        graph.parameter_count(),
        a.out.display()
    )
    .map_err(write_err)?;
    Ok(())
}
