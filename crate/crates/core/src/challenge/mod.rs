//! Challenge definitions: manifest loading, validation, and materialization
//! into a public bundle (what a participant may download) and a private
//! bundle (what only the evaluator sees).

mod manifest;
mod prepare;
mod validate;

pub use manifest::{load_challenge, MANIFEST_FILE, SCHEMA_VERSION};
pub use prepare::{materialize, PreparedChallenge, PrivateBundle, PublicBundle};
pub use validate::validate_challenge;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, LabelColumn, SplitSpec, TaskKind};
use crate::metrics::{Direction, MetricId};
pub use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeType {
    RegressionModel,
    ClassificationModel,
    FeatureSelection,
    DimensionalityReduction,
    DataImputation,
    FeatureEngineering,
    LossSpecification,
}

impl ChallengeType {
    pub const ALL: [ChallengeType; 7] = [
        ChallengeType::RegressionModel,
        ChallengeType::ClassificationModel,
        ChallengeType::FeatureSelection,
        ChallengeType::DimensionalityReduction,
        ChallengeType::DataImputation,
        ChallengeType::FeatureEngineering,
        ChallengeType::LossSpecification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChallengeType::RegressionModel => "regression_model",
            ChallengeType::ClassificationModel => "classification_model",
            ChallengeType::FeatureSelection => "feature_selection",
            ChallengeType::DimensionalityReduction => "dimensionality_reduction",
            ChallengeType::DataImputation => "data_imputation",
            ChallengeType::FeatureEngineering => "feature_engineering",
            ChallengeType::LossSpecification => "loss_specification",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Whether the guest output is fed into a server-side model.
    pub fn needs_pipeline(self) -> bool {
        !matches!(
            self,
            ChallengeType::RegressionModel | ChallengeType::ClassificationModel
        )
    }

    /// The task kind the challenge type pins, if any.
    pub fn required_task(self) -> Option<TaskKind> {
        match self {
            ChallengeType::RegressionModel => Some(TaskKind::Regression),
            ChallengeType::ClassificationModel => Some(TaskKind::Classification),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintSet {
    pub max_output_dims: Option<usize>,
    pub require_flat_vectors: bool,
    pub require_no_missing_output: bool,
    pub wall_clock_s: f64,
    pub memory_mb: u64,
    pub console_cap_bytes: usize,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            max_output_dims: None,
            require_flat_vectors: false,
            require_no_missing_output: false,
            wall_clock_s: 20.0,
            memory_mb: 512,
            console_cap_bytes: 65536,
        }
    }
}

impl ConstraintSet {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_output_dims == Some(0) {
            out.push("max_output_dims must be positive".into());
        }
        if !(self.wall_clock_s > 0.0 && self.wall_clock_s.is_finite()) {
            out.push(format!("wall_clock_s must be positive, got {}", self.wall_clock_s));
        }
        if self.memory_mb == 0 {
            out.push("memory_mb must be positive".into());
        }
        if self.console_cap_bytes == 0 {
            out.push("console_cap_bytes must be positive".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub metrics: Vec<MetricId>,
    pub primary: MetricId,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub path: PathBuf,
    pub label_column: LabelColumn,
    pub has_header: bool,
    pub task_kind: TaskKind,
    pub image_shape: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSpec {
    pub id: String,
    pub title: String,
    pub description_markdown: String,
    pub challenge_type: ChallengeType,
    pub dataset: DatasetSource,
    pub split: SplitSpec,
    pub constraints: ConstraintSet,
    pub pipeline: Option<PipelineConfig>,
    pub metric_set: MetricSet,
    pub baseline_submission: PathBuf,
    pub quiz_path: Option<PathBuf>,
    /// Command template; `{entry}` is replaced by the entry file name.
    pub runner_command: String,
    pub entry_file: String,
    pub manifest_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ChallengeError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("unsupported manifest schema {0} (expected {SCHEMA_VERSION})")]
    UnsupportedSchema(i64),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown challenge type {0:?}")]
    UnknownChallengeType(String),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("unknown metric direction {0:?}")]
    UnknownDirection(String),
    #[error("`{key}` points to missing file {path}")]
    DanglingPath { key: &'static str, path: PathBuf },
    #[error("invalid challenge: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
}
