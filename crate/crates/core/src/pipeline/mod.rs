//! The server-side half of each challenge: deterministic reference models
//! and the glue that splices a guest's output in front of them.

mod knn;
mod linear;
mod loss_train;
mod softmax;
mod tree;

pub use knn::KnnModel;
pub use linear::{fit_linear, LinearModel, SINGULAR_FALLBACK_LAMBDA};
pub use loss_train::{train_with_loss, LossTrainingError};
pub use softmax::{fit_softmax, softmax_loss_gradient, SoftmaxModel};
pub use tree::{fit_tree, TreeModel, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{ChallengeType, PreparedChallenge};
use crate::dataset::{LabelKind, LabelVector, Matrix, TaskKind};
use crate::loss::{LossError, LossFunction, ParseError};
use crate::sandbox::SubmissionOutput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceModelConfig {
    Ols,
    Ridge {
        lambda: f64,
    },
    KnnClassifier {
        k: usize,
    },
    SoftmaxRegression {
        learning_rate: f64,
        epochs: usize,
        #[serde(default)]
        seed: u64,
    },
    DecisionTree {
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
        task_kind: TaskKind,
    },
}

fn default_min_leaf() -> usize {
    1
}

impl ReferenceModelConfig {
    /// The task this model can be trained for.
    pub fn task_kind(&self) -> TaskKind {
        match self {
            ReferenceModelConfig::Ols | ReferenceModelConfig::Ridge { .. } => TaskKind::Regression,
            ReferenceModelConfig::KnnClassifier { .. }
            | ReferenceModelConfig::SoftmaxRegression { .. } => TaskKind::Classification,
            ReferenceModelConfig::DecisionTree { task_kind, .. } => *task_kind,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        match self {
            ReferenceModelConfig::Ridge { lambda } if !(*lambda >= 0.0 && lambda.is_finite()) => {
                Err(format!("ridge lambda must be >= 0, got {lambda}"))
            }
            ReferenceModelConfig::KnnClassifier { k: 0 } => Err("knn k must be >= 1".into()),
            ReferenceModelConfig::SoftmaxRegression { learning_rate, .. }
                if !(*learning_rate > 0.0 && learning_rate.is_finite()) =>
            {
                Err(format!("learning rate must be > 0, got {learning_rate}"))
            }
            ReferenceModelConfig::DecisionTree { min_leaf: 0, .. } => {
                Err("decision tree min_leaf must be >= 1".into())
            }
            _ => Ok(()),
        }
    }
}

/// Server-side model configuration for challenges whose guest output is
/// spliced into a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub reference_model: ReferenceModelConfig,
    #[serde(default)]
    pub training_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Linear(LinearModel),
    Knn(KnnModel),
    Softmax(SoftmaxModel),
    Tree(TreeModel),
}

impl TrainedModel {
    pub fn features(&self) -> usize {
        match self {
            TrainedModel::Linear(m) => m.coefficients.len(),
            TrainedModel::Knn(m) => m.exemplars.cols(),
            TrainedModel::Softmax(m) => m.features,
            TrainedModel::Tree(m) => m.features,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("training data contains {0} missing cells")]
    MissingCells(usize),
    #[error("{rows} rows but {labels} labels")]
    RowMismatch { rows: usize, labels: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("normal equations are singular")]
    Singular,
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("model expects {expected} columns, got {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("{model} cannot be trained on {labels:?} labels")]
    WrongLabels { model: &'static str, labels: LabelKind },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("challenge has no server-side pipeline configured")]
    NoPipeline,
    #[error("output variant does not match a {0:?} challenge")]
    OutputMismatch(ChallengeType),
    #[error("{count} predictions for {expected} test rows")]
    PredictionCount { count: usize, expected: usize },
    #[error("transformed train data has {train} columns but test data has {test}")]
    TransformedColumnsDiffer { train: usize, test: usize },
    #[error("transformed {which} data has {found} rows, expected {expected}")]
    TransformedRows {
        which: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("selected column {index} is out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("loss expression: {0}")]
    LossParse(#[from] ParseError),
    #[error("loss domain error: {0}")]
    LossDomain(#[from] LossError),
}

fn check_training(x: &Matrix, y: &LabelVector) -> Result<(), PipelineError> {
    if x.has_missing() {
        return Err(PipelineError::MissingCells(x.missing_count()));
    }
    if x.rows() != y.len() {
        return Err(PipelineError::RowMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    if x.rows() == 0 {
        return Err(PipelineError::EmptyTraining);
    }
    Ok(())
}

fn require_labels(model: &'static str, y: &LabelVector, kind: LabelKind) -> Result<(), PipelineError> {
    if y.kind() == kind {
        Ok(())
    } else {
        Err(PipelineError::WrongLabels {
            model,
            labels: y.kind(),
        })
    }
}

/// Deterministic in `(cfg, x, y)`.
pub fn fit(cfg: &ReferenceModelConfig, x: &Matrix, y: &LabelVector) -> Result<TrainedModel, PipelineError> {
    cfg.check().map_err(PipelineError::Config)?;
    check_training(x, y)?;
    match cfg {
        ReferenceModelConfig::Ols => {
            require_labels("ols", y, LabelKind::Continuous)?;
            fit_linear(x, y, 0.0).map(TrainedModel::Linear)
        }
        ReferenceModelConfig::Ridge { lambda } => {
            require_labels("ridge", y, LabelKind::Continuous)?;
            fit_linear(x, y, *lambda).map(TrainedModel::Linear)
        }
        ReferenceModelConfig::KnnClassifier { k } => {
            require_labels("knn", y, LabelKind::Categorical)?;
            if *k > x.rows() {
                return Err(PipelineError::KTooLarge { k: *k, n: x.rows() });
            }
            Ok(TrainedModel::Knn(KnnModel {
                k: *k,
                exemplars: x.clone(),
                classes: y.classes().collect(),
            }))
        }
        ReferenceModelConfig::SoftmaxRegression {
            learning_rate,
            epochs,
            ..
        } => {
            require_labels("softmax regression", y, LabelKind::Categorical)?;
            let classes: Vec<u32> = y.classes().collect();
            Ok(TrainedModel::Softmax(fit_softmax(
                x,
                &classes,
                y.class_set(),
                *learning_rate,
                *epochs,
            )))
        }
        ReferenceModelConfig::DecisionTree {
            max_depth,
            min_leaf,
            task_kind,
        } => {
            require_labels("decision tree", y, task_kind.label_kind())?;
            Ok(TrainedModel::Tree(fit_tree(
                x,
                y.values(),
                *task_kind,
                y.class_set(),
                *max_depth,
                *min_leaf,
            )))
        }
    }
}

pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<LabelVector, PipelineError> {
    if x.cols() != model.features() {
        return Err(PipelineError::ColumnMismatch {
            expected: model.features(),
            found: x.cols(),
        });
    }
    if x.has_missing() {
        return Err(PipelineError::MissingCells(x.missing_count()));
    }
    Ok(match model {
        TrainedModel::Linear(m) => continuous(m.predict(x)),
        TrainedModel::Knn(m) => LabelVector::from_classes(&m.predict(x)),
        TrainedModel::Softmax(m) => LabelVector::from_classes(&m.predict(x)),
        TrainedModel::Tree(m) => match m.task_kind {
            TaskKind::Regression => continuous(m.predict(x)),
            TaskKind::Classification => {
                let classes: Vec<u32> = m.predict(x).into_iter().map(|v| v as u32).collect();
                LabelVector::from_classes(&classes)
            }
        },
    })
}

fn continuous(values: Vec<f64>) -> LabelVector {
    // Models trained on finite data with finite parameters produce finite
    // predictions; anything else would be a bug upstream.
    LabelVector::continuous(values).expect("model produced non-finite predictions")
}

fn pipeline_model(prepared: &PreparedChallenge) -> Result<&ReferenceModelConfig, PipelineError> {
    prepared
        .private
        .pipeline
        .as_ref()
        .map(|p| &p.reference_model)
        .ok_or(PipelineError::NoPipeline)
}

/// Produces predictions for the withheld test rows from a guest output.
/// Pure in `(prepared, out)`; every call retrains from scratch.
pub fn run_pipeline(prepared: &PreparedChallenge, out: &SubmissionOutput) -> Result<LabelVector, PipelineError> {
    let ty = prepared.challenge_type;
    if !out.matches(ty) {
        return Err(PipelineError::OutputMismatch(ty));
    }
    let x_train = &prepared.public.x_train;
    let y_train = &prepared.public.y_train;
    let x_test = &prepared.private.x_test;
    match out {
        SubmissionOutput::Predictions(pred) => {
            if pred.len() != x_test.rows() {
                return Err(PipelineError::PredictionCount {
                    count: pred.len(),
                    expected: x_test.rows(),
                });
            }
            Ok(pred.clone())
        }
        SubmissionOutput::TransformedData {
            x_train: xt,
            x_test: xs,
        } => {
            if xt.rows() != x_train.rows() {
                return Err(PipelineError::TransformedRows {
                    which: "train",
                    found: xt.rows(),
                    expected: x_train.rows(),
                });
            }
            if xs.rows() != x_test.rows() {
                return Err(PipelineError::TransformedRows {
                    which: "test",
                    found: xs.rows(),
                    expected: x_test.rows(),
                });
            }
            if xt.cols() != xs.cols() {
                return Err(PipelineError::TransformedColumnsDiffer {
                    train: xt.cols(),
                    test: xs.cols(),
                });
            }
            let model = fit(pipeline_model(prepared)?, xt, y_train)?;
            predict(&model, xs)
        }
        SubmissionOutput::ColumnSelection(columns) => {
            if let Some(&index) = columns.iter().find(|&&c| c >= x_train.cols()) {
                return Err(PipelineError::ColumnOutOfRange {
                    index,
                    cols: x_train.cols(),
                });
            }
            let xt = x_train.select_columns(columns).expect("columns checked");
            let xs = x_test.select_columns(columns).expect("columns checked");
            let model = fit(pipeline_model(prepared)?, &xt, y_train)?;
            predict(&model, &xs)
        }
        SubmissionOutput::LossExpression(text) => {
            let loss = LossFunction::parse(text.trim())?;
            check_training(x_train, y_train)?;
            let model = train_with_loss(pipeline_model(prepared)?, &loss, x_train, y_train)
                .map_err(|e| match e {
                    LossTrainingError::Loss(l) => PipelineError::LossDomain(l),
                    LossTrainingError::Config(c) => PipelineError::Config(c),
                })?;
            predict(&model, x_test)
        }
    }
}
