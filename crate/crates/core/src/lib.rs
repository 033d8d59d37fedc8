//! Core library for a self-hostable platform of open-ended machine-learning
//! challenges: datasets and splits, challenge manifests, the guest sandbox,
//! server-side reference pipelines, metrics, the loss DSL, and the
//! evaluation service.

pub mod challenge;
pub mod dataset;
pub mod demo;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod quiz;
pub mod sandbox;
pub mod service;

pub use challenge::{ChallengeSpec, ChallengeType, ConstraintSet, MetricSet, PreparedChallenge};
pub use dataset::{DataSplit, Dataset, LabelVector, Matrix, SplitSpec, TaskKind};
pub use loss::{LossExpr, LossFunction};
pub use metrics::{ConstraintVerdict, Direction, MetricId, MetricValue};
pub use pipeline::{PipelineConfig, ReferenceModelConfig, TrainedModel};
pub use quiz::{Quiz, QuizAttempt};
pub use sandbox::{RunLimits, RunResult, RunStatus, SubmissionOutput};
pub use service::{ScoreReport, Service, ServiceConfig, SubmissionStatus};
