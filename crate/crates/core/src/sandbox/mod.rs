//! Runs untrusted guest programs in a child process against a temp
//! workspace and reads back their typed output.
//!
//! Workspace layout:
//!
//! ```text
//! input/x_train.csv  input/y_train.csv  input/x_test.csv  input/meta.json
//! <entry file>
//! output/            guest writes one of:
//!                      predictions.csv
//!                      x_train_out.csv + x_test_out.csv
//!                      columns.csv
//!                      loss.expr
//! console.log        combined stdout/stderr, written after the run
//! ```
//!
//! Isolation is process level: a fresh process group, a scrubbed
//! environment, rlimits on address space, CPU time, file size and core
//! dumps, and a wall-clock deadline enforced with `SIGKILL` on the group.
//! Test labels are never written into the workspace.

mod collect;
mod exec;
mod workspace;

pub use collect::{collect_outputs, CollectError};
pub use exec::{execute, RawRun, GUEST_ENV};
pub use workspace::{prepare_workspace, Workspace, WorkspaceMeta};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{ChallengeType, ConstraintSet, PreparedChallenge};
use crate::dataset::{LabelVector, Matrix};

/// Output cap used when nothing else is configured: 64 MiB.
pub const DEFAULT_OUTPUT_CAP: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionBundle {
    pub submission_id: String,
    pub challenge_id: String,
    pub user_id: String,
    /// Source text of the entry file.
    pub source: String,
    pub dedupe_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    pub wall_clock_s: f64,
    pub memory_mb: u64,
    pub console_cap_bytes: usize,
    pub output_cap_bytes: usize,
}

impl RunLimits {
    pub fn from_constraints(c: &ConstraintSet) -> Self {
        Self {
            wall_clock_s: c.wall_clock_s,
            memory_mb: c.memory_mb,
            console_cap_bytes: c.console_cap_bytes,
            output_cap_bytes: DEFAULT_OUTPUT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    Timeout,
    Crashed,
    ProtocolViolation,
    OutputTooLarge,
}

/// A guest's typed contribution. The variant is fixed by the challenge type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SubmissionOutput {
    Predictions(LabelVector),
    TransformedData { x_train: Matrix, x_test: Matrix },
    /// Sorted, distinct column indices.
    ColumnSelection(Vec<usize>),
    LossExpression(String),
}

impl SubmissionOutput {
    pub fn matches(&self, ty: ChallengeType) -> bool {
        use ChallengeType as T;
        match self {
            SubmissionOutput::Predictions(_) => {
                matches!(ty, T::RegressionModel | T::ClassificationModel)
            }
            SubmissionOutput::TransformedData { .. } => matches!(
                ty,
                T::DimensionalityReduction | T::DataImputation | T::FeatureEngineering
            ),
            SubmissionOutput::ColumnSelection(_) => ty == T::FeatureSelection,
            SubmissionOutput::LossExpression(_) => ty == T::LossSpecification,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub status: RunStatus,
    pub console: String,
    pub exit_code: Option<i32>,
    pub elapsed_s: f64,
    /// Present iff `status` is `Ok`.
    pub outputs: Option<SubmissionOutput>,
    /// Human-readable reason for any non-`Ok` status.
    pub message: Option<String>,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("runner command is empty")]
    EmptyCommand,
    #[error("cannot start guest `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
}

/// Prepares a workspace, runs the guest, and collects its output.
/// Guest misbehaviour is reported through `RunResult::status`; only host
/// failures (filesystem, spawn) are errors.
pub fn run_submission(
    prepared: &PreparedChallenge,
    source: &str,
    limits: &RunLimits,
) -> Result<RunResult, SandboxError> {
    let ws = prepare_workspace(prepared, source)?;
    let raw = execute(ws.path(), &prepared.runner_command, &prepared.entry_file, limits)?;
    let console_path = ws.path().join("console.log");
    std::fs::write(&console_path, &raw.console).map_err(|source| SandboxError::Io {
        path: console_path,
        source,
    })?;

    let mut result = RunResult {
        status: RunStatus::Ok,
        console: raw.console.clone(),
        exit_code: raw.exit_code,
        elapsed_s: raw.elapsed_s,
        outputs: None,
        message: None,
    };
    if raw.timed_out {
        result.status = RunStatus::Timeout;
        result.message = Some(format!("exceeded wall clock limit of {} s", limits.wall_clock_s));
    } else if raw.signal == Some(libc::SIGXFSZ) {
        result.status = RunStatus::OutputTooLarge;
        result.message = Some(format!("wrote a file larger than {} bytes", limits.output_cap_bytes));
    } else if let Some(sig) = raw.signal {
        result.status = RunStatus::Crashed;
        result.message = Some(format!("killed by signal {sig}"));
    } else if raw.exit_code != Some(0) {
        result.status = RunStatus::Crashed;
        result.message = Some(format!("exited with code {}", raw.exit_code.unwrap_or(-1)));
    } else {
        match collect_outputs(ws.path(), prepared, limits.output_cap_bytes) {
            Ok(out) => result.outputs = Some(out),
            Err(CollectError::TooLarge { bytes, cap }) => {
                result.status = RunStatus::OutputTooLarge;
                result.message = Some(format!("output is {bytes} bytes, the cap is {cap}"));
            }
            Err(CollectError::Violation(msg)) => {
                result.status = RunStatus::ProtocolViolation;
                result.message = Some(msg);
            }
            Err(CollectError::Io { path, source }) => {
                return Err(SandboxError::Io { path, source });
            }
        }
    }
    Ok(result)
}
