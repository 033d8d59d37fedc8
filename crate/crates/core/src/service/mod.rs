//! Submission orchestration: persistence, the evaluation worker pool,
//! leaderboards and approach summaries.
//!
//! Data directory layout:
//!
//! ```text
//! <data_dir>/challenges/<id>/challenge.toml   one directory per challenge
//! <data_dir>/store/log.jsonl                  append-only record log
//! <data_dir>/store/snapshot.json              periodic snapshot
//! ```

mod board;
mod evaluate;
mod store;

pub use board::{approach_summary, leaderboard, summarize, ApproachSummary, LeaderboardEntry};
pub use evaluate::{evaluate_source, limits_for, LimitOverrides, ScoreReport, SubmissionStatus};
pub use store::{load_state, Record, State, Store, StoreError, Submission, SubmissionRecord, LOG_FILE, SNAPSHOT_FILE};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam::channel::{unbounded, Sender};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::challenge::{
    load_challenge, materialize, validate_challenge, ChallengeError, ChallengeSpec, ChallengeType,
    ConstraintSet, PreparedChallenge, MANIFEST_FILE,
};
use crate::dataset::TaskKind;
use crate::metrics::{Direction, MetricId};
use crate::quiz::{grade_quiz, load_quiz, PublicQuiz, Quiz, QuizAttempt, QuizError};
use crate::sandbox::RunStatus;

/// Largest accepted submission source.
pub const MAX_SOURCE_BYTES: usize = 256 * 1024;
pub const CHALLENGES_DIR: &str = "challenges";
pub const STORE_DIR: &str = "store";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown challenge {0:?}")]
    UnknownChallenge(String),
    #[error("unknown submission {0:?}")]
    UnknownSubmission(String),
    #[error("unknown quiz {0:?}")]
    UnknownQuiz(String),
    #[error("user {user:?} has not passed quiz {quiz:?}")]
    Unqualified { user: String, quiz: String },
    #[error("submission is {bytes} bytes, the limit is {MAX_SOURCE_BYTES}")]
    PayloadTooLarge { bytes: usize },
    #[error("invalid request: {0}")]
    InvalidPayload(String),
    #[error("{0}")]
    InvalidState(String),
    #[error("challenge {id:?} is invalid: {}", violations.join("; "))]
    InvalidChallenge { id: String, violations: Vec<String> },
    #[error(transparent)]
    Quiz(#[from] QuizError),
    #[error(transparent)]
    Challenge(#[from] ChallengeError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// An installed, materialized challenge.
#[derive(Debug)]
pub struct ChallengeEntry {
    pub spec: ChallengeSpec,
    pub prepared: PreparedChallenge,
    pub quiz: Option<Arc<Quiz>>,
}

#[derive(Debug, Default)]
pub struct Registry {
    challenges: BTreeMap<String, Arc<ChallengeEntry>>,
    quizzes: BTreeMap<String, Arc<Quiz>>,
}

impl Registry {
    /// Loads every `<dir>/*/challenge.toml`, refusing invalid challenges.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut reg = Registry::default();
        if !dir.exists() {
            return Ok(reg);
        }
        let io = |source| ServiceError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut manifests: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path().join(MANIFEST_FILE)))
            .filter(|p| p.is_file())
            .collect();
        manifests.sort();
        for m in manifests {
            reg.install(load_challenge(&m)?)?;
        }
        Ok(reg)
    }

    pub fn install(&mut self, spec: ChallengeSpec) -> Result<()> {
        let violations = validate_challenge(&spec);
        if !violations.is_empty() {
            return Err(ServiceError::InvalidChallenge {
                id: spec.id,
                violations,
            });
        }
        let prepared = materialize(&spec)?;
        let quiz = match &spec.quiz_path {
            Some(p) => {
                let q = Arc::new(load_quiz(p)?);
                let q = self.quizzes.entry(q.id.clone()).or_insert(q).clone();
                Some(q)
            }
            None => None,
        };
        self.challenges.insert(
            spec.id.clone(),
            Arc::new(ChallengeEntry { spec, prepared, quiz }),
        );
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<ChallengeEntry>> {
        self.challenges.get(id)
    }

    pub fn quiz(&self, id: &str) -> Option<&Arc<Quiz>> {
        self.quizzes.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.challenges.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = &Arc<ChallengeEntry>> {
        self.challenges.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSummary {
    pub id: String,
    pub title: String,
    pub challenge_type: ChallengeType,
    pub task_kind: TaskKind,
    pub primary_metric: MetricId,
    pub direction: Direction,
    pub quiz_id: Option<String>,
}

/// Public metadata for one challenge. Contains nothing from the test split
/// beyond its row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeDetail {
    #[serde(flatten)]
    pub summary: ChallengeSummary,
    pub description_markdown: String,
    pub baseline_source: String,
    pub entry_file: String,
    pub metrics: Vec<MetricId>,
    pub constraints: ConstraintSet,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub image_shape: Option<(usize, usize)>,
    pub column_names: Option<Vec<String>>,
    /// First rows of `x_train`, `null` for missing cells.
    pub x_train_preview: Vec<Vec<Option<f64>>>,
    pub y_train_preview: Vec<f64>,
}

const PREVIEW_ROWS: usize = 20;

impl ChallengeEntry {
    pub fn summary(&self) -> ChallengeSummary {
        ChallengeSummary {
            id: self.spec.id.clone(),
            title: self.spec.title.clone(),
            challenge_type: self.spec.challenge_type,
            task_kind: self.spec.dataset.task_kind,
            primary_metric: self.spec.metric_set.primary,
            direction: self.spec.metric_set.direction,
            quiz_id: self.quiz.as_ref().map(|q| q.id.clone()),
        }
    }

    pub fn detail(&self) -> ChallengeDetail {
        let p = &self.prepared;
        let x = &p.public.x_train;
        let rows = x.rows().min(PREVIEW_ROWS);
        ChallengeDetail {
            summary: self.summary(),
            description_markdown: p.public.description_markdown.clone(),
            baseline_source: p.public.baseline_source.clone(),
            entry_file: p.entry_file.clone(),
            metrics: self.spec.metric_set.metrics.clone(),
            constraints: self.spec.constraints.clone(),
            n_train: x.rows(),
            n_test: p.private.x_test.rows(),
            n_features: x.cols(),
            image_shape: p.image_shape,
            column_names: p.public.column_names.clone(),
            x_train_preview: (0..rows)
                .map(|r| (0..x.cols()).map(|c| x.get(r, c)).collect())
                .collect(),
            y_train_preview: p.public.y_train.values()[..rows].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionView {
    pub submission_id: String,
    pub challenge_id: String,
    pub user_id: String,
    pub status: SubmissionStatus,
    pub received_at_ms: u64,
    pub approach_tag: Option<String>,
    pub report: Option<ScoreReport>,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub pool_size: usize,
    pub limits: LimitOverrides,
    /// When false, queued submissions wait for explicit `evaluate` calls.
    pub start_workers: bool,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            pool_size: thread::available_parallelism().map_or(1, |n| n.get()),
            limits: LimitOverrides::default(),
            start_workers: true,
        }
    }
}

struct Inner {
    registry: Registry,
    store: Mutex<Store>,
    ids: Mutex<ulid::Generator>,
    limits: LimitOverrides,
    stopping: AtomicBool,
}

struct Pool {
    tx: Sender<String>,
    handles: Vec<JoinHandle<()>>,
}

pub struct Service {
    inner: Arc<Inner>,
    pool: Mutex<Option<Pool>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Service {
    /// Loads challenges from `<data_dir>/challenges` and opens the store.
    pub fn open(config: ServiceConfig) -> Result<Self> {
        let registry = Registry::load_dir(config.data_dir.join(CHALLENGES_DIR))?;
        Self::with_registry(registry, config)
    }

    /// Opens the store, fails submissions interrupted mid-run, and
    /// re-queues submissions that never started.
    pub fn with_registry(registry: Registry, config: ServiceConfig) -> Result<Self> {
        let mut store = Store::open(config.data_dir.join(STORE_DIR))?;
        let interrupted: Vec<Submission> = store
            .state()
            .submissions
            .values()
            .filter(|s| s.status == SubmissionStatus::Running)
            .cloned()
            .collect();
        for s in interrupted {
            log::warn!("submission {} was interrupted; marking failed", s.record.submission_id);
            let report = failed_report(&s.record, "interrupted: the service stopped during evaluation");
            store.append(Record::Finished { report })?;
        }
        let queued: Vec<String> = store
            .state()
            .submissions
            .values()
            .filter(|s| s.status == SubmissionStatus::Queued)
            .map(|s| s.record.submission_id.clone())
            .collect();

        let svc = Service {
            inner: Arc::new(Inner {
                registry,
                store: Mutex::new(store),
                ids: Mutex::new(ulid::Generator::new()),
                limits: config.limits,
                stopping: AtomicBool::new(false),
            }),
            pool: Mutex::new(None),
        };
        if config.start_workers {
            svc.start_workers(config.pool_size.max(1));
            for id in queued {
                svc.enqueue(id);
            }
        }
        Ok(svc)
    }

    pub fn start_workers(&self, n: usize) {
        let mut pool = lock(&self.pool);
        if pool.is_some() {
            return;
        }
        let (tx, rx) = unbounded::<String>();
        let handles = (0..n.max(1))
            .map(|i| {
                let rx = rx.clone();
                let inner = self.inner.clone();
                thread::Builder::new()
                    .name(format!("eval-{i}"))
                    .spawn(move || {
                        for id in rx {
                            if inner.stopping.load(Ordering::SeqCst) {
                                break;
                            }
                            if let Err(e) = inner.evaluate(&id) {
                                log::error!("evaluating {id}: {e}");
                            }
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        *pool = Some(Pool { tx, handles });
    }

    fn enqueue(&self, id: String) {
        if let Some(pool) = lock(&self.pool).as_ref() {
            let _ = pool.tx.send(id);
        }
    }

    /// Lets running evaluations finish, leaves queued submissions for the
    /// next start, and writes a snapshot.
    pub fn shutdown(&self) -> Result<()> {
        self.inner.stopping.store(true, Ordering::SeqCst);
        if let Some(pool) = lock(&self.pool).take() {
            drop(pool.tx);
            for h in pool.handles {
                let _ = h.join();
            }
        }
        lock(&self.inner.store).snapshot()?;
        Ok(())
    }

    pub fn registry(&self) -> &Registry {
        &self.inner.registry
    }

    pub fn challenges(&self) -> Vec<ChallengeSummary> {
        self.inner.registry.entries().map(|e| e.summary()).collect()
    }

    pub fn challenge(&self, id: &str) -> Result<ChallengeDetail> {
        Ok(self.inner.entry(id)?.detail())
    }

    pub fn submit(
        &self,
        challenge_id: &str,
        user_id: &str,
        source: &str,
        dedupe_key: Option<&str>,
    ) -> Result<String> {
        let entry = self.inner.entry(challenge_id)?;
        if source.len() > MAX_SOURCE_BYTES {
            return Err(ServiceError::PayloadTooLarge { bytes: source.len() });
        }
        if source.trim().is_empty() {
            return Err(ServiceError::InvalidPayload("source is empty".into()));
        }
        if user_id.trim().is_empty() {
            return Err(ServiceError::InvalidPayload("user_id is empty".into()));
        }
        let id = {
            let mut store = lock(&self.inner.store);
            if let Some(quiz) = &entry.quiz {
                if !store.state().has_passed(user_id, &quiz.id) {
                    return Err(ServiceError::Unqualified {
                        user: user_id.to_string(),
                        quiz: quiz.id.clone(),
                    });
                }
            }
            if let Some(key) = dedupe_key {
                if let Some(existing) = store.state().find_dedupe(challenge_id, user_id, key) {
                    return Ok(existing.to_string());
                }
            }
            let id = self.inner.next_id();
            store.append(Record::Submitted(SubmissionRecord {
                submission_id: id.clone(),
                user_id: user_id.to_string(),
                challenge_id: challenge_id.to_string(),
                received_at_ms: now_ms(),
                source: source.to_string(),
                dedupe_key: dedupe_key.map(String::from),
            }))?;
            id
        };
        self.enqueue(id.clone());
        Ok(id)
    }

    /// Runs a queued submission to completion on the calling thread.
    pub fn evaluate(&self, submission_id: &str) -> Result<ScoreReport> {
        self.inner.evaluate(submission_id)
    }

    pub fn get_result(&self, submission_id: &str) -> Result<SubmissionView> {
        let store = lock(&self.inner.store);
        let s = store
            .state()
            .submissions
            .get(submission_id)
            .ok_or_else(|| ServiceError::UnknownSubmission(submission_id.to_string()))?;
        Ok(SubmissionView {
            submission_id: s.record.submission_id.clone(),
            challenge_id: s.record.challenge_id.clone(),
            user_id: s.record.user_id.clone(),
            status: s.status,
            received_at_ms: s.record.received_at_ms,
            approach_tag: s.tag.clone(),
            report: s.report.clone(),
        })
    }

    /// Polls until the submission is terminal or `timeout` passes.
    pub fn wait_for(&self, submission_id: &str, timeout: Duration) -> Result<SubmissionView> {
        let deadline = Instant::now() + timeout;
        loop {
            let view = self.get_result(submission_id)?;
            if view.status.is_terminal() || Instant::now() >= deadline {
                return Ok(view);
            }
            thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn leaderboard(&self, challenge_id: &str) -> Result<Vec<LeaderboardEntry>> {
        let entry = self.inner.entry(challenge_id)?;
        let store = lock(&self.inner.store);
        Ok(leaderboard(
            store.state().submissions.values(),
            challenge_id,
            entry.spec.metric_set.direction,
        ))
    }

    pub fn tag_submission(&self, submission_id: &str, tag: &str) -> Result<()> {
        let tag = tag.trim();
        if tag.is_empty() {
            return Err(ServiceError::InvalidPayload("tag is empty".into()));
        }
        let mut store = lock(&self.inner.store);
        let s = store
            .state()
            .submissions
            .get(submission_id)
            .ok_or_else(|| ServiceError::UnknownSubmission(submission_id.to_string()))?;
        if s.status != SubmissionStatus::Done {
            return Err(ServiceError::InvalidState(format!(
                "submission {submission_id} is {:?}; only Done submissions can be tagged",
                s.status
            )));
        }
        store.append(Record::Tagged {
            submission_id: submission_id.to_string(),
            tag: tag.to_string(),
        })?;
        Ok(())
    }

    pub fn approach_summary(&self, challenge_id: &str) -> Result<Vec<ApproachSummary>> {
        let entry = self.inner.entry(challenge_id)?;
        let store = lock(&self.inner.store);
        Ok(approach_summary(
            store.state().submissions.values(),
            challenge_id,
            entry.spec.metric_set.direction,
        ))
    }

    pub fn quiz(&self, quiz_id: &str) -> Result<PublicQuiz> {
        self.inner
            .registry
            .quiz(quiz_id)
            .map(|q| q.public_view())
            .ok_or_else(|| ServiceError::UnknownQuiz(quiz_id.to_string()))
    }

    pub fn attempt_quiz(&self, quiz_id: &str, user_id: &str, answers: &[usize]) -> Result<QuizAttempt> {
        let quiz = self
            .inner
            .registry
            .quiz(quiz_id)
            .ok_or_else(|| ServiceError::UnknownQuiz(quiz_id.to_string()))?;
        if user_id.trim().is_empty() {
            return Err(ServiceError::InvalidPayload("user_id is empty".into()));
        }
        let attempt = grade_quiz(quiz, user_id, answers, now_ms())?;
        lock(&self.inner.store).append(Record::QuizAttempt(attempt.clone()))?;
        Ok(attempt)
    }

    /// Copy of the folded store state.
    pub fn state(&self) -> State {
        lock(&self.inner.store).state().clone()
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        if let Err(e) = self.shutdown() {
            log::error!("shutdown: {e}");
        }
    }
}

impl Inner {
    fn entry(&self, id: &str) -> Result<&Arc<ChallengeEntry>> {
        self.registry
            .get(id)
            .ok_or_else(|| ServiceError::UnknownChallenge(id.to_string()))
    }

    fn next_id(&self) -> String {
        let mut generator = lock(&self.ids);
        loop {
            if let Ok(id) = generator.generate() {
                return id.to_string();
            }
            // Random component overflowed within one millisecond.
            thread::sleep(Duration::from_millis(1));
        }
    }

    fn evaluate(&self, submission_id: &str) -> Result<ScoreReport> {
        let record = {
            let mut store = lock(&self.store);
            let s = store
                .state()
                .submissions
                .get(submission_id)
                .ok_or_else(|| ServiceError::UnknownSubmission(submission_id.to_string()))?;
            if s.status != SubmissionStatus::Queued {
                return Err(ServiceError::InvalidState(format!(
                    "submission {submission_id} is {:?}, not Queued",
                    s.status
                )));
            }
            let record = s.record.clone();
            store.append(Record::Started {
                submission_id: submission_id.to_string(),
            })?;
            record
        };
        let report = match self.registry.get(&record.challenge_id) {
            Some(entry) => {
                let limits = limits_for(&entry.prepared, &self.limits);
                evaluate_source(&entry.prepared, submission_id, &record.source, &limits)
            }
            None => failed_report(&record, "challenge is no longer installed"),
        };
        lock(&self.store).append(Record::Finished {
            report: report.clone(),
        })?;
        Ok(report)
    }
}

fn failed_report(record: &SubmissionRecord, why: &str) -> ScoreReport {
    ScoreReport {
        submission_id: record.submission_id.clone(),
        challenge_id: record.challenge_id.clone(),
        status: SubmissionStatus::Failed,
        run_status: RunStatus::Crashed,
        metrics: Vec::new(),
        primary_value: None,
        verdict: None,
        console: String::new(),
        exit_code: None,
        failure: Some(why.to_string()),
        run_elapsed_s: 0.0,
        duration_s: 0.0,
    }
}

/// Evaluates a challenge's baseline submission without persisting anything.
pub fn check_baseline(prepared: &PreparedChallenge, overrides: &LimitOverrides) -> ScoreReport {
    evaluate_local(prepared, &prepared.public.baseline_source, overrides)
}

/// The service's evaluation chain without the store, as used by
/// `eval-local`.
pub fn evaluate_local(prepared: &PreparedChallenge, source: &str, overrides: &LimitOverrides) -> ScoreReport {
    evaluate_source(prepared, "local", source, &limits_for(prepared, overrides))
}
