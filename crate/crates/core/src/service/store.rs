//! Append-only JSON-lines record log with periodic snapshots.
//!
//! `log.jsonl` holds one record per line and is fsynced after every append.
//! `snapshot.json` holds the folded state together with the number of log
//! lines it covers; on open the snapshot is loaded and the remaining lines
//! are replayed. A final line without its newline is a torn write and is
//! discarded; any other unreadable line is reported with its line number.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ScoreReport, SubmissionStatus};
use crate::quiz::QuizAttempt;

pub const LOG_FILE: &str = "log.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const SNAPSHOT_EVERY: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub submission_id: String,
    pub user_id: String,
    pub challenge_id: String,
    /// Milliseconds since the Unix epoch.
    pub received_at_ms: u64,
    pub source: String,
    pub dedupe_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    QuizAttempt(QuizAttempt),
    Submitted(SubmissionRecord),
    Started { submission_id: String },
    Finished { report: ScoreReport },
    Tagged { submission_id: String, tag: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub record: SubmissionRecord,
    pub status: SubmissionStatus,
    pub report: Option<ScoreReport>,
    pub tag: Option<String>,
}

/// Everything the log folds into.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub submissions: BTreeMap<String, Submission>,
    pub quiz_attempts: Vec<QuizAttempt>,
    #[serde(skip)]
    dedupe: HashMap<(String, String, String), String>,
    #[serde(skip)]
    qualified: HashSet<(String, String)>,
}

impl State {
    fn index(&mut self) {
        self.dedupe.clear();
        self.qualified.clear();
        for s in self.submissions.values() {
            if let Some(key) = &s.record.dedupe_key {
                self.dedupe.insert(
                    (s.record.challenge_id.clone(), s.record.user_id.clone(), key.clone()),
                    s.record.submission_id.clone(),
                );
            }
        }
        for a in &self.quiz_attempts {
            if a.passed {
                self.qualified.insert((a.user_id.clone(), a.quiz_id.clone()));
            }
        }
    }

    pub fn find_dedupe(&self, challenge_id: &str, user_id: &str, key: &str) -> Option<&str> {
        self.dedupe
            .get(&(challenge_id.to_string(), user_id.to_string(), key.to_string()))
            .map(String::as_str)
    }

    pub fn has_passed(&self, user_id: &str, quiz_id: &str) -> bool {
        self.qualified.contains(&(user_id.to_string(), quiz_id.to_string()))
    }

    /// Checks that `record` is a legal next record without applying it.
    pub fn validate(&self, record: &Record) -> Result<(), String> {
        let status = |id: &str| {
            self.submissions
                .get(id)
                .map(|s| s.status)
                .ok_or_else(|| format!("unknown submission {id}"))
        };
        match record {
            Record::QuizAttempt(_) => Ok(()),
            Record::Submitted(r) if self.submissions.contains_key(&r.submission_id) => {
                Err(format!("duplicate submission id {}", r.submission_id))
            }
            Record::Submitted(_) => Ok(()),
            Record::Started { submission_id } => match status(submission_id)? {
                SubmissionStatus::Queued => Ok(()),
                other => Err(format!("{submission_id}: cannot start from {other:?}")),
            },
            Record::Finished { report } => {
                let from = status(&report.submission_id)?;
                if from == SubmissionStatus::Running && report.status.is_terminal() {
                    Ok(())
                } else {
                    Err(format!(
                        "{}: cannot move from {from:?} to {:?}",
                        report.submission_id, report.status
                    ))
                }
            }
            Record::Tagged { submission_id, .. } => status(submission_id).map(|_| ()),
        }
    }

    /// Folds one record in, rejecting illegal status transitions. State is
    /// unchanged on error.
    pub fn apply(&mut self, record: Record) -> Result<(), String> {
        self.validate(&record)?;
        match record {
            Record::QuizAttempt(a) => {
                if a.passed {
                    self.qualified.insert((a.user_id.clone(), a.quiz_id.clone()));
                }
                self.quiz_attempts.push(a);
            }
            Record::Submitted(r) => {
                if let Some(key) = &r.dedupe_key {
                    self.dedupe.insert(
                        (r.challenge_id.clone(), r.user_id.clone(), key.clone()),
                        r.submission_id.clone(),
                    );
                }
                self.submissions.insert(
                    r.submission_id.clone(),
                    Submission {
                        record: r,
                        status: SubmissionStatus::Queued,
                        report: None,
                        tag: None,
                    },
                );
            }
            Record::Started { submission_id } => {
                self.get_mut(&submission_id).status = SubmissionStatus::Running;
            }
            Record::Finished { report } => {
                let s = self.get_mut(&report.submission_id);
                s.status = report.status;
                s.report = Some(report);
            }
            Record::Tagged { submission_id, tag } => {
                self.get_mut(&submission_id).tag = Some(tag);
            }
        }
        Ok(())
    }

    fn get_mut(&mut self, id: &str) -> &mut Submission {
        self.submissions.get_mut(id).expect("validated")
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store record at {path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corrupt snapshot {path}: {message}")]
    CorruptSnapshot { path: PathBuf, message: String },
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    log_lines: usize,
    state: State,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    log: File,
    log_lines: usize,
    since_snapshot: usize,
    state: State,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Replayed {
    state: State,
    lines: usize,
    covered: usize,
    good_bytes: u64,
}

fn replay(dir: &Path) -> Result<Replayed, StoreError> {
    let log_path = dir.join(LOG_FILE);
    let snap_path = dir.join(SNAPSHOT_FILE);
    let (mut state, covered) = match fs::read(&snap_path) {
        Ok(bytes) => {
            let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptSnapshot {
                path: snap_path.clone(),
                message: e.to_string(),
            })?;
            (snap.state, snap.log_lines)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (State::default(), 0),
        Err(e) => return Err(io_err(&snap_path)(e)),
    };
    state.index();

    let mut good_bytes = 0u64;
    let mut lines = 0usize;
    if log_path.exists() {
        let mut reader = BufReader::new(File::open(&log_path).map_err(io_err(&log_path))?);
        let mut buf = Vec::new();
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf).map_err(io_err(&log_path))?;
            if n == 0 {
                break;
            }
            if buf.last() != Some(&b'\n') {
                log::warn!("discarding torn final record in {}", log_path.display());
                break;
            }
            lines += 1;
            let corrupt = |message: String| StoreError::Corrupt {
                path: log_path.clone(),
                line: lines,
                message,
            };
            let record: Record = serde_json::from_slice(&buf[..n - 1]).map_err(|e| corrupt(e.to_string()))?;
            if lines > covered {
                state.apply(record).map_err(corrupt)?;
            }
            good_bytes += n as u64;
        }
    }
    if lines < covered {
        return Err(StoreError::CorruptSnapshot {
            path: snap_path,
            message: format!("snapshot covers {covered} log lines but the log has {lines}"),
        });
    }
    Ok(Replayed {
        state,
        lines,
        covered,
        good_bytes,
    })
}

/// Replays a store without modifying it. A missing store is empty.
pub fn load_state(dir: impl AsRef<Path>) -> Result<State, StoreError> {
    let dir = dir.as_ref();
    if !dir.exists() {
        return Ok(State::default());
    }
    replay(dir).map(|r| r.state)
}

impl Store {
    /// Opens (creating if needed) the store in `dir` and replays it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let replayed = replay(&dir)?;
        let log_path = dir.join(LOG_FILE);
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        // Drop a torn tail so the next append starts on a fresh line.
        log.set_len(replayed.good_bytes).map_err(io_err(&log_path))?;
        Ok(Self {
            dir,
            log,
            log_lines: replayed.lines,
            since_snapshot: replayed.lines - replayed.covered,
            state: replayed.state,
        })
    }

    /// Validates, persists and applies one record.
    pub fn append(&mut self, record: Record) -> Result<(), StoreError> {
        self.state.validate(&record).map_err(|message| StoreError::Corrupt {
            path: self.dir.join(LOG_FILE),
            line: self.log_lines + 1,
            message,
        })?;
        let mut line = serde_json::to_vec(&record).expect("records serialize");
        line.push(b'\n');
        let path = self.dir.join(LOG_FILE);
        self.log.write_all(&line).map_err(io_err(&path))?;
        self.log.sync_data().map_err(io_err(&path))?;
        self.state.apply(record).expect("validated");
        self.log_lines += 1;
        self.since_snapshot += 1;
        if self.since_snapshot >= SNAPSHOT_EVERY {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Writes the snapshot atomically (temp file + rename).
    pub fn snapshot(&mut self) -> Result<(), StoreError> {
        let path = self.dir.join(SNAPSHOT_FILE);
        let tmp = self.dir.join("snapshot.json.tmp");
        let snap = Snapshot {
            log_lines: self.log_lines,
            state: self.state.clone(),
        };
        let bytes = serde_json::to_vec(&snap).expect("state serializes");
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn log_lines(&self) -> usize {
        self.log_lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::RunStatus;

    fn submitted(id: &str) -> Record {
        Record::Submitted(SubmissionRecord {
            submission_id: id.into(),
            user_id: "u".into(),
            challenge_id: "c".into(),
            received_at_ms: 1,
            source: "print(1)".into(),
            dedupe_key: Some(format!("k{id}")),
        })
    }

    fn finished(id: &str) -> Record {
        Record::Finished {
            report: ScoreReport {
                submission_id: id.into(),
                challenge_id: "c".into(),
                status: SubmissionStatus::Done,
                run_status: RunStatus::Ok,
                metrics: vec![],
                primary_value: Some(0.1 + 0.2),
                verdict: None,
                console: String::new(),
                exit_code: Some(0),
                failure: None,
                run_elapsed_s: 0.5,
                duration_s: 0.7,
            },
        }
    }

    #[test]
    fn replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        s.append(submitted("a")).unwrap();
        s.append(Record::Started { submission_id: "a".into() }).unwrap();
        s.append(finished("a")).unwrap();
        let before = s.state.clone();
        drop(s);
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.state, before);
        assert_eq!(s.state.submissions["a"].report.as_ref().unwrap().primary_value, Some(0.1 + 0.2));
        assert_eq!(s.state.find_dedupe("c", "u", "ka"), Some("a"));
    }

    #[test]
    fn illegal_transition_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        s.append(submitted("a")).unwrap();
        assert!(s.append(finished("a")).is_err());
        assert_eq!(s.log_lines(), 1);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        s.append(submitted("a")).unwrap();
        drop(s);
        let mut f = OpenOptions::new().append(true).open(dir.path().join(LOG_FILE)).unwrap();
        f.write_all(b"{\"type\":\"submit").unwrap();
        drop(f);
        let mut s = Store::open(dir.path()).unwrap();
        assert_eq!(s.log_lines(), 1);
        s.append(submitted("b")).unwrap();
        drop(s);
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.state.submissions.len(), 2);
    }

    #[test]
    fn corrupt_middle_line_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        s.append(submitted("a")).unwrap();
        drop(s);
        let path = dir.path().join(LOG_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("garbage\n");
        text.push_str(&serde_json::to_string(&submitted("b")).unwrap());
        text.push('\n');
        fs::write(&path, text).unwrap();
        match Store::open(dir.path()) {
            Err(StoreError::Corrupt { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_plus_tail() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        s.append(submitted("a")).unwrap();
        s.snapshot().unwrap();
        s.append(submitted("b")).unwrap();
        let before = s.state.clone();
        drop(s);
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.state, before);
        assert_eq!(s.log_lines(), 2);
    }
}
