use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::challenge::PreparedChallenge;
use crate::metrics::{self, enforce_constraints, ConstraintVerdict, Direction, MetricValue};
use crate::pipeline::run_pipeline;
use crate::sandbox::{run_submission, RunLimits, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubmissionStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl SubmissionStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SubmissionStatus::Done | SubmissionStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub submission_id: String,
    pub challenge_id: String,
    pub status: SubmissionStatus,
    pub run_status: RunStatus,
    /// Every metric of the challenge, in manifest order. Empty on failure.
    pub metrics: Vec<MetricValue>,
    /// `None` when failed, or when a minimize metric hit the zero-score rule.
    pub primary_value: Option<f64>,
    pub verdict: Option<ConstraintVerdict>,
    pub console: String,
    pub exit_code: Option<i32>,
    pub failure: Option<String>,
    /// Guest run time.
    pub run_elapsed_s: f64,
    /// Whole evaluation, including pipeline and metrics.
    pub duration_s: f64,
}

impl ScoreReport {
    pub fn zero_score(&self) -> bool {
        self.verdict.as_ref().is_some_and(|v| v.zero_score)
    }

    pub fn metric(&self, id: metrics::MetricId) -> Option<f64> {
        self.metrics.iter().find(|m| m.metric_id == id).map(|m| m.value)
    }

    /// Copy with the wall-clock fields zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        Self {
            run_elapsed_s: 0.0,
            duration_s: 0.0,
            ..self.clone()
        }
    }
}

/// Limit overrides applied on top of a challenge's constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitOverrides {
    pub wall_clock_s: Option<f64>,
    pub memory_mb: Option<u64>,
}

pub fn limits_for(prepared: &PreparedChallenge, overrides: &LimitOverrides) -> RunLimits {
    let mut limits = RunLimits::from_constraints(&prepared.private.constraints);
    if let Some(w) = overrides.wall_clock_s {
        limits.wall_clock_s = w;
    }
    if let Some(m) = overrides.memory_mb {
        limits.memory_mb = m;
    }
    limits
}

/// Runs the full chain: workspace, guest, outputs, constraints, hidden
/// pipeline, metrics. Never fails; every problem ends up in the report.
pub fn evaluate_source(
    prepared: &PreparedChallenge,
    submission_id: &str,
    source: &str,
    limits: &RunLimits,
) -> ScoreReport {
    let start = Instant::now();
    let mut report = ScoreReport {
        submission_id: submission_id.to_string(),
        challenge_id: prepared.id.clone(),
        status: SubmissionStatus::Failed,
        run_status: RunStatus::Crashed,
        metrics: Vec::new(),
        primary_value: None,
        verdict: None,
        console: String::new(),
        exit_code: None,
        failure: None,
        run_elapsed_s: 0.0,
        duration_s: 0.0,
    };
    score_into(prepared, source, limits, &mut report);
    report.duration_s = start.elapsed().as_secs_f64();
    report
}

fn score_into(prepared: &PreparedChallenge, source: &str, limits: &RunLimits, report: &mut ScoreReport) {
    let run = match run_submission(prepared, source, limits) {
        Ok(run) => run,
        Err(e) => {
            report.failure = Some(format!("sandbox error: {e}"));
            return;
        }
    };
    report.run_status = run.status;
    report.console = run.console;
    report.exit_code = run.exit_code;
    report.run_elapsed_s = run.elapsed_s;
    report.failure = run.message;
    let Some(output) = run.outputs else {
        return;
    };

    let verdict = enforce_constraints(prepared.challenge_type, &output, &prepared.private.constraints);
    report.verdict = Some(verdict.clone());
    if !verdict.ok && !verdict.zero_score {
        report.run_status = RunStatus::ProtocolViolation;
        report.failure = Some(verdict.violations.join("; "));
        return;
    }

    let y_pred = match run_pipeline(prepared, &output) {
        Ok(y) => y,
        Err(e) => {
            report.run_status = RunStatus::ProtocolViolation;
            report.failure = Some(format!("pipeline rejected the output: {e}"));
            return;
        }
    };

    let metric_set = &prepared.private.metric_set;
    let mut values = Vec::with_capacity(metric_set.metrics.len());
    for &id in &metric_set.metrics {
        match metrics::compute(id, &prepared.private.y_test, &y_pred) {
            Ok(v) => values.push(v),
            Err(e) => {
                report.failure = Some(format!("cannot compute {}: {e}", id.name()));
                return;
            }
        }
    }
    let primary = values
        .iter()
        .find(|v| v.metric_id == metric_set.primary)
        .map(|v| v.value);
    report.primary_value = if verdict.zero_score {
        match metric_set.direction {
            Direction::Maximize => Some(0.0),
            Direction::Minimize => None,
        }
    } else {
        primary
    };
    report.metrics = values;
    report.status = SubmissionStatus::Done;
}
