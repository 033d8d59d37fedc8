use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::{ChallengeError, ChallengeSpec, ChallengeType, ConstraintSet, MetricSet};
use crate::dataset::{load_csv, split_dataset, LabelVector, LoadOptions, Matrix, TaskKind};
use crate::pipeline::PipelineConfig;

/// Everything a participant may see or download.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublicBundle {
    pub title: String,
    pub description_markdown: String,
    pub baseline_source: String,
    pub column_names: Option<Vec<String>>,
    pub x_train: Matrix,
    pub y_train: LabelVector,
}

/// Evaluator-only data. Deliberately not `Serialize`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateBundle {
    /// Handed to the sandbox at evaluation time, never part of the public bundle.
    pub x_test: Matrix,
    pub y_test: LabelVector,
    pub pipeline: Option<PipelineConfig>,
    pub metric_set: MetricSet,
    pub constraints: ConstraintSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedChallenge {
    pub id: String,
    pub challenge_type: ChallengeType,
    pub task_kind: TaskKind,
    pub image_shape: Option<(usize, usize)>,
    pub runner_command: String,
    pub entry_file: String,
    pub quiz_path: Option<PathBuf>,
    pub public: PublicBundle,
    pub private: PrivateBundle,
}

/// Loads and splits the dataset. Pure in (manifest, dataset file).
pub fn materialize(spec: &ChallengeSpec) -> Result<PreparedChallenge, ChallengeError> {
    let ds = load_csv(
        &spec.dataset.path,
        &LoadOptions {
            label_column: spec.dataset.label_column.clone(),
            task_kind: spec.dataset.task_kind,
            has_header: spec.dataset.has_header,
        },
    )?;
    let mut ds = ds;
    ds.features = ds.features.with_image_shape(spec.dataset.image_shape)?;
    let split = split_dataset(&ds, &spec.split)?;
    let baseline_source =
        fs::read_to_string(&spec.baseline_submission).map_err(|source| ChallengeError::Io {
            path: spec.baseline_submission.clone(),
            source,
        })?;
    Ok(PreparedChallenge {
        id: spec.id.clone(),
        challenge_type: spec.challenge_type,
        task_kind: spec.dataset.task_kind,
        image_shape: spec.dataset.image_shape,
        runner_command: spec.runner_command.clone(),
        entry_file: spec.entry_file.clone(),
        quiz_path: spec.quiz_path.clone(),
        public: PublicBundle {
            title: spec.title.clone(),
            description_markdown: spec.description_markdown.clone(),
            baseline_source,
            column_names: ds.column_names.clone(),
            x_train: split.x_train,
            y_train: split.y_train,
        },
        private: PrivateBundle {
            x_test: split.x_test,
            y_test: split.y_test,
            pipeline: spec.pipeline.clone(),
            metric_set: spec.metric_set.clone(),
            constraints: spec.constraints.clone(),
        },
    })
}
