//! Scoring metrics and challenge-constraint enforcement.
//!
//! Multiclass precision and recall are macro-averaged over the classes that
//! occur in `y_true`. A class that is never predicted has precision 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{ChallengeType, ConstraintSet};
use crate::dataset::{LabelKind, LabelVector};
use crate::sandbox::SubmissionOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Mse,
    Accuracy,
    MacroPrecision,
    MacroRecall,
}

impl MetricId {
    pub fn direction(self) -> Direction {
        match self {
            MetricId::Mse => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    pub fn requires_categorical(self) -> bool {
        !matches!(self, MetricId::Mse)
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricId::Mse => "mse",
            MetricId::Accuracy => "accuracy",
            MetricId::MacroPrecision => "macro_precision",
            MetricId::MacroRecall => "macro_recall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mse" => Some(MetricId::Mse),
            "accuracy" => Some(MetricId::Accuracy),
            "macro_precision" => Some(MetricId::MacroPrecision),
            "macro_recall" => Some(MetricId::MacroRecall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric_id: MetricId,
    pub value: f64,
    pub direction: Direction,
}

impl MetricValue {
    fn new(metric_id: MetricId, value: f64) -> Self {
        Self {
            metric_id,
            value,
            direction: metric_id.direction(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {truth} true values vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("metric requires at least one sample")]
    Empty,
    #[error("{0} requires categorical labels")]
    NotCategorical(&'static str),
}

fn check_lengths(y_true: &[f64], y_pred: &[f64]) -> Result<(), MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn mse(y_true: &LabelVector, y_pred: &LabelVector) -> Result<MetricValue, MetricError> {
    mse_values(y_true.values(), y_pred.values())
}

pub fn mse_values(y_true: &[f64], y_pred: &[f64]) -> Result<MetricValue, MetricError> {
    check_lengths(y_true, y_pred)?;
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(MetricValue::new(MetricId::Mse, sum / y_true.len() as f64))
}

fn categorical_pair<'a>(
    name: &'static str,
    y_true: &'a LabelVector,
    y_pred: &'a LabelVector,
) -> Result<(&'a [f64], &'a [f64]), MetricError> {
    if y_true.kind() != LabelKind::Categorical || y_pred.kind() != LabelKind::Categorical {
        return Err(MetricError::NotCategorical(name));
    }
    check_lengths(y_true.values(), y_pred.values())?;
    Ok((y_true.values(), y_pred.values()))
}

pub fn accuracy(y_true: &LabelVector, y_pred: &LabelVector) -> Result<MetricValue, MetricError> {
    let (t, p) = categorical_pair("accuracy", y_true, y_pred)?;
    let hits = t.iter().zip(p).filter(|(a, b)| a == b).count();
    Ok(MetricValue::new(
        MetricId::Accuracy,
        hits as f64 / t.len() as f64,
    ))
}

#[derive(Default, Clone, Copy)]
struct ClassCounts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn class_counts(t: &[f64], p: &[f64]) -> BTreeMap<u32, ClassCounts> {
    let mut counts: BTreeMap<u32, ClassCounts> = BTreeMap::new();
    for &c in t {
        counts.entry(c as u32).or_default();
    }
    for (&a, &b) in t.iter().zip(p) {
        let (a, b) = (a as u32, b as u32);
        if a == b {
            counts.entry(a).or_default().tp += 1;
        } else {
            counts.entry(a).or_default().fn_ += 1;
            if let Some(c) = counts.get_mut(&b) {
                c.fp += 1;
            }
        }
    }
    counts
}

pub fn macro_precision(
    y_true: &LabelVector,
    y_pred: &LabelVector,
) -> Result<MetricValue, MetricError> {
    let (t, p) = categorical_pair("macro_precision", y_true, y_pred)?;
    let counts = class_counts(t, p);
    let total: f64 = counts
        .values()
        .map(|c| {
            let predicted = c.tp + c.fp;
            if predicted == 0 {
                0.0
            } else {
                c.tp as f64 / predicted as f64
            }
        })
        .sum();
    Ok(MetricValue::new(
        MetricId::MacroPrecision,
        total / counts.len() as f64,
    ))
}

pub fn macro_recall(
    y_true: &LabelVector,
    y_pred: &LabelVector,
) -> Result<MetricValue, MetricError> {
    let (t, p) = categorical_pair("macro_recall", y_true, y_pred)?;
    let counts = class_counts(t, p);
    let total: f64 = counts
        .values()
        .map(|c| c.tp as f64 / (c.tp + c.fn_) as f64)
        .sum();
    Ok(MetricValue::new(
        MetricId::MacroRecall,
        total / counts.len() as f64,
    ))
}

pub fn compute(
    id: MetricId,
    y_true: &LabelVector,
    y_pred: &LabelVector,
) -> Result<MetricValue, MetricError> {
    match id {
        MetricId::Mse => mse(y_true, y_pred),
        MetricId::Accuracy => accuracy(y_true, y_pred),
        MetricId::MacroPrecision => macro_precision(y_true, y_pred),
        MetricId::MacroRecall => macro_recall(y_true, y_pred),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintVerdict {
    pub ok: bool,
    pub zero_score: bool,
    pub violations: Vec<String>,
}

impl ConstraintVerdict {
    pub fn clean() -> Self {
        Self {
            ok: true,
            zero_score: false,
            violations: Vec::new(),
        }
    }
}

/// Checks a well-formed output against the challenge constraints.
///
/// Exceeding `max_output_dims` yields a zero-score verdict: the submission is
/// still scored but ranks last. Missing cells left in an imputation output
/// are a plain violation.
pub fn enforce_constraints(
    challenge_type: ChallengeType,
    out: &SubmissionOutput,
    constraints: &ConstraintSet,
) -> ConstraintVerdict {
    let mut verdict = ConstraintVerdict::clean();
    let dims = match out {
        SubmissionOutput::TransformedData { x_train, .. } => Some(x_train.cols()),
        SubmissionOutput::ColumnSelection(cols) => Some(cols.len()),
        _ => None,
    };
    if let (Some(dims), Some(max)) = (dims, constraints.max_output_dims) {
        if dims > max {
            verdict.ok = false;
            verdict.zero_score = true;
            verdict.violations.push(format!(
                "output has {dims} dimensions, the limit is {max}; submission scores 0"
            ));
        }
    }
    if let SubmissionOutput::TransformedData { x_train, x_test } = out {
        let imputation = challenge_type == ChallengeType::DataImputation;
        if (imputation || constraints.require_no_missing_output)
            && (x_train.has_missing() || x_test.has_missing())
        {
            verdict.ok = false;
            verdict.violations.push(format!(
                "output still contains {} missing cells",
                x_train.missing_count() + x_test.missing_count()
            ));
        }
    }
    verdict
}
