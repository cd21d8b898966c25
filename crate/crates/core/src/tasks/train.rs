//! Training, evaluation and the low-data sweep.

use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Example, TaskData};
use super::metrics::{score, Metric, Prediction};
use super::models::{build_instance, ModelConfig};
use super::{TaskError, TaskKind};
use crate::augment::augment_pipeline;
use crate::graph::ComputationGraph;
use crate::rules::{Rho, RuleProgram};
use crate::runtime::{backward, forward, Adam, AdamConfig, Feed, ParamStore, RuntimeError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Share of the training pool to sample before the 9:1 train/dev split.
    pub fraction: f64,
    pub seed: u64,
    pub model: ModelConfig,
}

impl TrainConfig {
    pub fn for_task(task: TaskKind) -> Self {
        let (epochs, lr) = match task {
            TaskKind::Align => (20, 0.02),
            TaskKind::Tag => (30, 0.02),
            TaskKind::Nli => (30, 0.01),
        };
        TrainConfig {
            epochs,
            lr,
            batch_size: 8,
            fraction: 1.0,
            seed: 1,
            model: ModelConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(TaskError::Config(format!("fraction {} is outside (0, 1]", self.fraction)));
        }
        if self.epochs == 0 {
            return Err(TaskError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TaskError::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TaskError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_task(TaskKind::Tag)
    }
}

/// An example's augmented graph and its inputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: ComputationGraph,
    pub feed: Feed,
}

/// Build and augment the graph of every example.
pub fn prepare(
    data: &TaskData,
    examples: &[Example],
    model: &ModelConfig,
    rules: &RuleProgram,
) -> Result<Vec<Prepared>, TaskError> {
    examples
        .par_iter()
        .map(|e| {
            let inst = build_instance(model, data, e);
            let graph = augment_pipeline(rules, &inst.graph, &inst.ctx)?.graph;
            Ok(Prepared { graph, feed: inst.feed })
        })
        .collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn output<'t>(p: &Prepared, tape: &'t crate::runtime::Tape, role: &str) -> Result<&'t Tensor, TaskError> {
    let id = p
        .graph
        .output(role)
        .ok_or_else(|| TaskError::Config(format!("model has no `{role}` output")))?;
    Ok(tape.value(id))
}

fn predict_one(task: TaskKind, example: &Example, p: &Prepared, params: &ParamStore) -> Result<Prediction, TaskError> {
    let tape = forward(&p.graph, params, &p.feed)?;
    Ok(match task {
        TaskKind::Tag => Prediction::Tags(output(p, &tape, "prediction")?.argmax_rows()),
        TaskKind::Nli => Prediction::Label(output(p, &tape, "prediction")?.argmax_rows()[0]),
        TaskKind::Align => {
            let Example::Align(e) = example else {
                return Err(TaskError::Config("alignment prediction on a non-alignment example".into()));
            };
            let start = argmax(output(p, &tape, "start")?.data());
            let end = argmax(output(p, &tape, "end")?.data());
            let att_id = p.graph.lookup("att'").or_else(|_| p.graph.lookup("att")).map_err(RuntimeError::from)?;
            let att = tape.value(att_id);
            let mut pairs = Vec::new();
            for (i, row) in att.rows().enumerate() {
                let j = argmax(row);
                if e.paragraph_content[i] && e.query_content[j] && row[j] >= 0.5 {
                    pairs.push((i, j));
                }
            }
            Prediction::Span { start, end, pairs }
        }
    })
}

pub fn predict_all(
    task: TaskKind,
    examples: &[Example],
    prepared: &[Prepared],
    params: &ParamStore,
) -> Result<Vec<Prediction>, TaskError> {
    examples
        .par_iter()
        .zip(prepared)
        .map(|(e, p)| predict_one(task, e, p, params))
        .collect()
}

/// Score `params` on `examples` with the model augmented by `rules`.
pub fn evaluate(
    data: &TaskData,
    examples: &[Example],
    model: &ModelConfig,
    rules: &RuleProgram,
    params: &ParamStore,
    metric: Metric,
) -> Result<f64, TaskError> {
    if examples.is_empty() {
        return Err(TaskError::EmptyDataset);
    }
    if !metric.applies_to(data.task) {
        return Err(TaskError::MetricMismatch { metric, task: data.task });
    }
    let prepared = prepare(data, examples, model, rules)?;
    let preds = predict_all(data.task, examples, &prepared, params)?;
    score(metric, examples, &preds)
}

/// Sample `fraction` of a pool of `n` examples with `seed` and split it 9:1
/// into train and dev indices. Both parts are non-empty when `n ≥ 2`.
pub fn select_fraction(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let k = ((fraction * n as f64).round() as usize).clamp(n.min(2), n);
    let dev = if k < 2 { 0 } else { ((k as f64 / 10.0).round() as usize).clamp(1, k - 1) };
    let mut sample = order[..k].to_vec();
    let dev_part = sample.split_off(k - dev);
    (sample, dev_part)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best dev metric.
    pub params: ParamStore,
    /// 1-based.
    pub best_epoch: usize,
    pub dev_metric: f64,
    pub test_metric: f64,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

fn batch_gradients(batch: &[&Prepared], params: &ParamStore) -> Result<(f64, BTreeMap<String, Tensor>), TaskError> {
    let parts: Vec<(f64, BTreeMap<String, Tensor>)> = batch
        .par_iter()
        .map(|p| {
            let tape = forward(&p.graph, params, &p.feed)?;
            let loss = p
                .graph
                .output("loss")
                .ok_or_else(|| TaskError::Config("model has no `loss` output".into()))?;
            let grads = backward(&p.graph, &tape, loss)?;
            Ok((tape.value(loss).item(), grads.parameters(&p.graph)))
        })
        .collect::<Result<_, TaskError>>()?;
    // Summed in batch order so the result does not depend on thread timing.
    let mut total = 0.0;
    let mut sum: BTreeMap<String, Tensor> = BTreeMap::new();
    for (loss, grads) in parts {
        total += loss;
        for (name, g) in grads {
            match sum.get_mut(&name) {
                Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
                None => {
                    sum.insert(name, g);
                }
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in sum.values_mut() {
        g.data_mut().iter_mut().for_each(|x| *x *= scale);
    }
    Ok((total, sum))
}

/// Train on a fraction of `data.train` with `rules` active during training and
/// prediction; the epoch with the best dev metric is kept and scored on `data.test`.
pub fn train(data: &TaskData, rules: &RuleProgram, cfg: &TrainConfig, metric: Metric) -> Result<TrainOutcome, TaskError> {
    cfg.validate()?;
    if data.train.len() < 2 || data.test.is_empty() {
        return Err(TaskError::EmptyDataset);
    }
    if !metric.applies_to(data.task) {
        return Err(TaskError::MetricMismatch { metric, task: data.task });
    }
    let (train_idx, dev_idx) = select_fraction(data.train.len(), cfg.fraction, cfg.seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| data.train[i].clone()).collect::<Vec<_>>();
    let (train_ex, dev_ex) = (pick(&train_idx), pick(&dev_idx));
    let train_set = prepare(data, &train_ex, &cfg.model, rules)?;
    let dev_set = prepare(data, &dev_ex, &cfg.model, rules)?;

    let mut params = ParamStore::new();
    params.init_missing(&train_set[0].graph, cfg.seed);
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(4);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradients(&batch, &params)?;
            epoch_loss += loss;
            adam.step(&mut params, &grads)?;
        }
        losses.push(epoch_loss / train_set.len() as f64);
        let preds = predict_all(data.task, &dev_ex, &dev_set, &params)?;
        let dev = score(metric, &dev_ex, &preds)?;
        if best.as_ref().is_none_or(|(_, b, _)| dev > *b) {
            best = Some((epoch, dev, params.clone()));
        }
    }
    let (best_epoch, dev_metric, params) = best.expect("at least one epoch");
    let test_set = prepare(data, &data.test, &cfg.model, rules)?;
    let preds = predict_all(data.task, &data.test, &test_set, &params)?;
    let test_metric = score(metric, &data.test, &preds)?;
    Ok(TrainOutcome {
        params,
        best_epoch,
        dev_metric,
        test_metric,
        losses,
    })
}

/// A named rule program for a sweep. An empty program is the baseline.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub name: String,
    pub program: RuleProgram,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub task: TaskKind,
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub rule_sets: Vec<RuleSet>,
    pub rho_grid: Vec<Rho>,
    /// Template; `fraction` and `seed` are set per cell.
    pub train: TrainConfig,
    pub metric: Metric,
}

/// Identity of one sweep cell, as written in the results file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub task: String,
    pub fraction: String,
    pub seed: u64,
    pub rules: String,
    pub rho: String,
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub fraction: f64,
    pub seed: u64,
    /// Index into [`SweepSpec::rule_sets`].
    pub rules: usize,
    /// `None` for the baseline.
    pub rho: Option<Rho>,
}

impl SweepCell {
    pub fn key(&self, spec: &SweepSpec) -> CellKey {
        CellKey {
            task: spec.task.to_string(),
            fraction: self.fraction.to_string(),
            seed: self.seed,
            rules: spec.rule_sets[self.rules].name.clone(),
            rho: self.rho.map_or_else(|| "-".to_string(), |r| r.to_string()),
        }
    }
}

/// One results row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub task: String,
    pub fraction: String,
    pub seed: u64,
    pub rules: String,
    pub rho: String,
    pub metric: f64,
    /// Best dev epoch (1-based).
    pub epochs: usize,
    pub wall_seconds: f64,
}

impl SweepRow {
    pub fn key(&self) -> CellKey {
        CellKey {
            task: self.task.clone(),
            fraction: self.fraction.clone(),
            seed: self.seed,
            rules: self.rules.clone(),
            rho: self.rho.clone(),
        }
    }
}

/// All cells in canonical order: fraction, seed, rule set, then ρ. Rule sets
/// with no statements run once, without a ρ.
pub fn sweep_cells(spec: &SweepSpec) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &fraction in &spec.fractions {
        for &seed in &spec.seeds {
            for (r, set) in spec.rule_sets.iter().enumerate() {
                if set.program.is_empty() {
                    cells.push(SweepCell { fraction, seed, rules: r, rho: None });
                } else {
                    for &rho in &spec.rho_grid {
                        cells.push(SweepCell { fraction, seed, rules: r, rho: Some(rho) });
                    }
                }
            }
        }
    }
    cells
}

fn run_cell(data: &TaskData, spec: &SweepSpec, cell: &SweepCell) -> Result<SweepRow, TaskError> {
    let started = Instant::now();
    let set = &spec.rule_sets[cell.rules];
    let program = match cell.rho {
        Some(rho) => set.program.clone().with_rho(rho),
        None => set.program.clone(),
    };
    let cfg = TrainConfig {
        fraction: cell.fraction,
        seed: cell.seed,
        ..spec.train.clone()
    };
    let outcome = train(data, &program, &cfg, spec.metric)?;
    let key = cell.key(spec);
    Ok(SweepRow {
        task: key.task,
        fraction: key.fraction,
        seed: key.seed,
        rules: key.rules,
        rho: key.rho,
        metric: outcome.test_metric,
        epochs: outcome.best_epoch,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Run every cell not in `done`, in parallel. `emit` receives the new rows
/// in canonical cell order, each as soon as it and all earlier cells are finished.
pub fn low_data_sweep(
    data: &TaskData,
    spec: &SweepSpec,
    done: &HashSet<CellKey>,
    mut emit: impl FnMut(&SweepRow) -> Result<(), TaskError> + Send,
) -> Result<Vec<SweepRow>, TaskError> {
    for &f in &spec.fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(TaskError::Config(format!("fraction {f} is outside (0, 1]")));
        }
    }
    let todo: Vec<SweepCell> = sweep_cells(spec)
        .into_iter()
        .filter(|c| !done.contains(&c.key(spec)))
        .collect();
    struct Pending {
        next: usize,
        ready: BTreeMap<usize, SweepRow>,
        rows: Vec<SweepRow>,
    }
    let state = Mutex::new(Pending {
        next: 0,
        ready: BTreeMap::new(),
        rows: Vec::new(),
    });
    let emit = Mutex::new(&mut emit);
    todo.par_iter().enumerate().try_for_each(|(i, cell)| {
        let row = run_cell(data, spec, cell)?;
        let mut st = state.lock().expect("sweep state");
        st.ready.insert(i, row);
        loop {
            let next = st.next;
            let Some(row) = st.ready.remove(&next) else { break };
            (emit.lock().expect("sweep writer"))(&row)?;
            st.rows.push(row);
            st.next += 1;
        }
        Ok::<_, TaskError>(())
    })?;
    Ok(state.into_inner().expect("sweep state").rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::data::{generate, GenConfig};

    #[test]
    fn fraction_split_is_disjoint_and_deterministic() {
        let (a, b) = select_fraction(400, 0.05, 3);
        assert_eq!(a.len() + b.len(), 20);
        assert_eq!(b.len(), 2);
        assert!(a.iter().all(|i| !b.contains(i)));
        assert_eq!(select_fraction(400, 0.05, 3), (a, b));
        let (a, b) = select_fraction(2, 0.01, 0);
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.fraction = 1.5;
        assert!(matches!(c.validate(), Err(TaskError::Config(_))));
    }

    #[test]
    fn short_training_run_is_deterministic() {
        let data = generate(
            TaskKind::Tag,
            &GenConfig {
                train: 30,
                test: 10,
                ..GenConfig::for_task(TaskKind::Tag)
            },
        );
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::for_task(TaskKind::Tag)
        };
        let a = train(&data, &RuleProgram::default(), &cfg, Metric::Accuracy).unwrap();
        let b = train(&data, &RuleProgram::default(), &cfg, Metric::Accuracy).unwrap();
        assert_eq!(a.test_metric.to_bits(), b.test_metric.to_bits());
        assert_eq!(a.losses, b.losses);
        assert!(a.losses[1] < a.losses[0]);
    }

    #[test]
    fn cells_cover_the_grid() {
        let spec = SweepSpec {
            task: TaskKind::Tag,
            fractions: vec![0.1, 0.2],
            seeds: vec![1, 2],
            rule_sets: vec![
                RuleSet { name: "none".into(), program: RuleProgram::default() },
                RuleSet {
                    name: "c1".into(),
                    program: crate::tasks::shipped_rules("c1").unwrap().1,
                },
            ],
            rho_grid: vec![Rho::Value(4.0)],
            train: TrainConfig::default(),
            metric: Metric::Accuracy,
        };
        let cells = sweep_cells(&spec);
        assert_eq!(cells.len(), 8);
        let keys: HashSet<_> = cells.iter().map(|c| c.key(&spec)).collect();
        assert_eq!(keys.len(), 8);
    }
}
