//! Desk-scale analogs of three experiments: a question-answering alignment
//! task, a natural-language-inference task and a chunking task, each with a
//! data generator, a baseline network, shipped rule programs and metrics.

pub mod data;
pub mod models;
mod metrics;
mod train;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{AugmentError, TableError};
use crate::rules::{parse_rules, ParseError, RuleProgram};
use crate::runtime::RuntimeError;

pub use data::{generate, Example, GenConfig, TaskData, Vocab};
pub use metrics::{score, violation_counts, Metric, Prediction, Violations};
pub use models::{build_instance, Instance, ModelConfig};
pub use train::{
    evaluate, low_data_sweep, predict_all, prepare, select_fraction, sweep_cells, train, CellKey,
    Prepared, RuleSet, SweepCell, SweepRow, SweepSpec, TrainConfig, TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Align,
    Tag,
    Nli,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Align, TaskKind::Tag, TaskKind::Nli];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Align => "align",
            TaskKind::Tag => "tag",
            TaskKind::Nli => "nli",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task `{s}` (expected align, tag or nli)"))
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("metric `{metric}` does not apply to task `{task}`")]
    MetricMismatch { metric: Metric, task: TaskKind },
    #[error("{0} predictions for {1} examples")]
    PredictionCount(usize, usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rules: {0}")]
    Rules(#[from] ParseError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl TaskError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TaskError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Rule files shipped with the crate: `(name, task, source)`.
pub const SHIPPED_RULES: &[(&str, TaskKind, &str)] = &[
    ("r1", TaskKind::Align, include_str!("../../rules/r1.rules")),
    ("r2", TaskKind::Align, include_str!("../../rules/r2.rules")),
    ("n1", TaskKind::Nli, include_str!("../../rules/n1.rules")),
    ("n2", TaskKind::Nli, include_str!("../../rules/n2.rules")),
    ("n3", TaskKind::Nli, include_str!("../../rules/n3.rules")),
    ("n2-3", TaskKind::Nli, include_str!("../../rules/n2-3.rules")),
    ("c1", TaskKind::Tag, include_str!("../../rules/c1.rules")),
    ("c2", TaskKind::Tag, include_str!("../../rules/c2.rules")),
    ("c3", TaskKind::Tag, include_str!("../../rules/c3.rules")),
    ("c4", TaskKind::Tag, include_str!("../../rules/c4.rules")),
    ("c5", TaskKind::Tag, include_str!("../../rules/c5.rules")),
    ("c1-5", TaskKind::Tag, include_str!("../../rules/c1-5.rules")),
];

/// Parse a shipped rule program by name.
pub fn shipped_rules(name: &str) -> Option<(TaskKind, RuleProgram)> {
    SHIPPED_RULES.iter().find(|(n, _, _)| *n == name).map(|(_, task, src)| {
        let program = parse_rules(src).unwrap_or_else(|e| panic!("shipped rule file `{name}`: {e}"));
        (*task, program)
    })
}

/// Resolve a rule-set argument: `none`, a shipped name, or a file path.
pub fn load_rules(spec: &str) -> Result<RuleProgram, TaskError> {
    if spec == "none" {
        return Ok(RuleProgram::default());
    }
    if let Some((_, p)) = shipped_rules(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| TaskError::io(path, e))?;
    Ok(parse_rules(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in TaskKind::ALL {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
        }
        assert!("pos".parse::<TaskKind>().is_err());
    }

    #[test]
    fn shipped_rules_parse() {
        for (name, _, _) in SHIPPED_RULES {
            assert!(shipped_rules(name).is_some());
        }
        assert!(load_rules("none").unwrap().is_empty());
    }
}
