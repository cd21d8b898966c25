use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::data::{noun_violations, pairwise_violations, Example};
use super::{TaskError, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Token accuracy (tagging) or label accuracy (inference).
    Accuracy,
    /// Mean token-overlap F1 of predicted vs. gold answer spans (alignment).
    SpanF1,
    /// Micro F1 of predicted vs. gold alignment pairs (alignment).
    AlignF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::SpanF1 => "span_f1",
            Metric::AlignF1 => "align_f1",
        }
    }

    pub fn default_for(task: TaskKind) -> Self {
        match task {
            TaskKind::Align => Metric::SpanF1,
            TaskKind::Tag | TaskKind::Nli => Metric::Accuracy,
        }
    }

    pub fn applies_to(self, task: TaskKind) -> bool {
        match self {
            Metric::Accuracy => task != TaskKind::Align,
            Metric::SpanF1 | Metric::AlignF1 => task == TaskKind::Align,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Metric::Accuracy, Metric::SpanF1, Metric::AlignF1]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric `{s}` (expected accuracy, span_f1 or align_f1)"))
    }
}

/// A model decision for one example.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Tags(Vec<usize>),
    Label(usize),
    Span {
        start: usize,
        end: usize,
        pairs: Vec<(usize, usize)>,
    },
}

/// Score `predictions` against the gold annotations of `examples`.
pub fn score(metric: Metric, examples: &[Example], predictions: &[Prediction]) -> Result<f64, TaskError> {
    let Some(first) = examples.first() else {
        return Err(TaskError::EmptyDataset);
    };
    if !metric.applies_to(first.task()) {
        return Err(TaskError::MetricMismatch {
            metric,
            task: first.task(),
        });
    }
    if predictions.len() != examples.len() {
        return Err(TaskError::PredictionCount(predictions.len(), examples.len()));
    }
    let mismatch = || TaskError::Config("prediction kind does not match the example".into());
    match metric {
        Metric::Accuracy => {
            let (mut right, mut total) = (0usize, 0usize);
            for (e, p) in examples.iter().zip(predictions) {
                match (e, p) {
                    (Example::Tag(e), Prediction::Tags(tags)) => {
                        total += e.labels.len();
                        right += e.labels.iter().zip(tags).filter(|(a, b)| a == b).count();
                    }
                    (Example::Nli(e), Prediction::Label(l)) => {
                        total += 1;
                        right += usize::from(e.label == *l);
                    }
                    _ => return Err(mismatch()),
                }
            }
            // A corpus of empty sentences has nothing to get wrong.
            Ok(if total == 0 { 1.0 } else { right as f64 / total as f64 })
        }
        Metric::SpanF1 => {
            let mut sum = 0.0;
            for (e, p) in examples.iter().zip(predictions) {
                let (Example::Align(e), Prediction::Span { start, end, .. }) = (e, p) else {
                    return Err(mismatch());
                };
                sum += span_f1((*start, *end), e.answer);
            }
            Ok(sum / examples.len() as f64)
        }
        Metric::AlignF1 => {
            let (mut tp, mut predicted, mut gold) = (0usize, 0usize, 0usize);
            for (e, p) in examples.iter().zip(predictions) {
                let (Example::Align(e), Prediction::Span { pairs, .. }) = (e, p) else {
                    return Err(mismatch());
                };
                predicted += pairs.len();
                gold += e.gold.len();
                tp += pairs.iter().filter(|x| e.gold.contains(x)).count();
            }
            if predicted + gold == 0 {
                return Ok(1.0);
            }
            Ok(2.0 * tp as f64 / (predicted + gold) as f64)
        }
    }
}

/// Token-overlap F1 between two inclusive spans; an inverted prediction is empty.
fn span_f1(pred: (usize, usize), gold: (usize, usize)) -> f64 {
    if pred.0 > pred.1 {
        return 0.0;
    }
    let lo = pred.0.max(gold.0);
    let hi = pred.1.min(gold.1);
    let overlap = if lo <= hi { hi - lo + 1 } else { 0 };
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / (pred.1 - pred.0 + 1) as f64;
    let r = overlap as f64 / (gold.1 - gold.0 + 1) as f64;
    2.0 * p * r / (p + r)
}

/// Rule violations in tagging predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Violations {
    /// Adjacent label pairs forbidden by the four pairwise rules.
    pub pairwise: usize,
    /// Nouns labeled as part of a verb or preposition phrase.
    pub noun: usize,
}

pub fn violation_counts(examples: &[Example], predictions: &[Prediction]) -> Violations {
    let mut v = Violations::default();
    for (e, p) in examples.iter().zip(predictions) {
        if let (Example::Tag(e), Prediction::Tags(tags)) = (e, p) {
            v.pairwise += pairwise_violations(tags);
            v.noun += noun_violations(tags, &e.nouns);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::super::data::{AlignmentExample, InferenceExample, TaggingExample};
    use super::*;

    fn tag(labels: &[usize]) -> Example {
        Example::Tag(TaggingExample {
            tokens: labels.iter().map(|_| "n0".to_string()).collect(),
            labels: labels.to_vec(),
            nouns: vec![false; labels.len()],
        })
    }

    #[test]
    fn token_accuracy_on_a_fixture() {
        // 5 sentences, 14 tokens, 11 right.
        let ex = vec![
            tag(&[0, 1, 2]),
            tag(&[0, 2, 3]),
            tag(&[4, 0]),
            tag(&[0, 1, 1, 2]),
            tag(&[6, 0]),
        ];
        let pred = vec![
            Prediction::Tags(vec![0, 1, 2]),
            Prediction::Tags(vec![0, 2, 2]),
            Prediction::Tags(vec![4, 1]),
            Prediction::Tags(vec![0, 1, 1, 2]),
            Prediction::Tags(vec![0, 0]),
        ];
        assert_eq!(score(Metric::Accuracy, &ex, &pred).unwrap(), 11.0 / 14.0);
        let perfect: Vec<_> = ex
            .iter()
            .map(|e| match e {
                Example::Tag(t) => Prediction::Tags(t.labels.clone()),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(score(Metric::Accuracy, &ex, &perfect).unwrap(), 1.0);
    }

    #[test]
    fn empty_dataset_and_mismatched_metric_are_errors() {
        assert!(matches!(score(Metric::Accuracy, &[], &[]), Err(TaskError::EmptyDataset)));
        assert!(matches!(
            score(Metric::SpanF1, &[tag(&[0])], &[Prediction::Tags(vec![0])]),
            Err(TaskError::MetricMismatch { .. })
        ));
    }

    #[test]
    fn span_and_alignment_f1() {
        let ex = |answer, gold: Vec<(usize, usize)>| {
            Example::Align(AlignmentExample {
                paragraph: vec!["f0".into(); 6],
                query: vec!["f0".into(); 3],
                gold,
                answer,
                paragraph_content: vec![true; 6],
                query_content: vec![true; 3],
            })
        };
        let ex = vec![ex((1, 2), vec![(1, 0)]), ex((4, 4), vec![(4, 1), (5, 2)])];
        let pred = vec![
            Prediction::Span { start: 2, end: 3, pairs: vec![(1, 0)] },
            Prediction::Span { start: 4, end: 4, pairs: vec![(4, 2)] },
        ];
        // Span F1: (P=1/2, R=1/2 → 0.5) and 1.0.
        assert!((score(Metric::SpanF1, &ex, &pred).unwrap() - 0.75).abs() < 1e-15);
        // Pairs: tp=1, predicted=2, gold=3.
        assert!((score(Metric::AlignF1, &ex, &pred).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn label_accuracy() {
        let ex: Vec<Example> = (0..4)
            .map(|l| {
                Example::Nli(InferenceExample {
                    premise: vec![],
                    hypothesis: vec![],
                    label: l % 3,
                    premise_content: vec![],
                    hypothesis_content: vec![],
                })
            })
            .collect();
        let pred = [0, 1, 0, 0].map(Prediction::Label).to_vec();
        assert_eq!(score(Metric::Accuracy, &ex, &pred).unwrap(), 0.75);
    }
}
