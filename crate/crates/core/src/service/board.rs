use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::store::Submission;
use super::SubmissionStatus;
use crate::metrics::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub user_id: String,
    pub submission_id: String,
    pub primary_value: Option<f64>,
    pub zero_score: bool,
    pub approach_tag: Option<String>,
    pub received_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSummary {
    pub tag: String,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single member.
    pub std: Option<f64>,
    /// `count N, mean ± std` with two decimals, std omitted for singletons.
    pub display: String,
}

/// Scored entries first (best value per `direction`), zero-score entries
/// last, then earlier submissions, then submission id.
fn compare(direction: Direction, a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    a.zero_score
        .cmp(&b.zero_score)
        .then_with(|| match (a.primary_value, b.primary_value) {
            (Some(x), Some(y)) => match direction {
                Direction::Minimize => x.total_cmp(&y),
                Direction::Maximize => y.total_cmp(&x),
            },
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then(a.received_at_ms.cmp(&b.received_at_ms))
        .then_with(|| a.submission_id.cmp(&b.submission_id))
}

/// Best Done submission per user, ranked from 1. Pure in the set of Done
/// submissions.
pub fn leaderboard<'a>(
    submissions: impl IntoIterator<Item = &'a Submission>,
    challenge_id: &str,
    direction: Direction,
) -> Vec<LeaderboardEntry> {
    let mut best: BTreeMap<&str, LeaderboardEntry> = BTreeMap::new();
    for s in submissions {
        if s.record.challenge_id != challenge_id || s.status != SubmissionStatus::Done {
            continue;
        }
        let Some(report) = &s.report else { continue };
        let entry = LeaderboardEntry {
            rank: 0,
            user_id: s.record.user_id.clone(),
            submission_id: s.record.submission_id.clone(),
            primary_value: report.primary_value,
            zero_score: report.zero_score(),
            approach_tag: s.tag.clone(),
            received_at_ms: s.record.received_at_ms,
        };
        match best.get(s.record.user_id.as_str()) {
            Some(current) if compare(direction, current, &entry) != Ordering::Greater => {}
            _ => {
                best.insert(&s.record.user_id, entry);
            }
        }
    }
    let mut entries: Vec<LeaderboardEntry> = best.into_values().collect();
    entries.sort_by(|a, b| compare(direction, a, b));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

pub fn summarize(tag: &str, values: &[f64]) -> ApproachSummary {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count as f64;
    let std = (count > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (count - 1) as f64).sqrt()
    });
    let display = match std {
        Some(s) => format!("count {count}, {mean:.2} ± {s:.2}"),
        None => format!("count {count}, {mean:.2}"),
    };
    ApproachSummary {
        tag: tag.to_string(),
        count,
        mean,
        std,
        display,
    }
}

/// Groups tagged Done submissions with a primary value by tag, best mean
/// first.
pub fn approach_summary<'a>(
    submissions: impl IntoIterator<Item = &'a Submission>,
    challenge_id: &str,
    direction: Direction,
) -> Vec<ApproachSummary> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in submissions {
        if s.record.challenge_id != challenge_id || s.status != SubmissionStatus::Done {
            continue;
        }
        if let (Some(tag), Some(v)) = (&s.tag, s.report.as_ref().and_then(|r| r.primary_value)) {
            groups.entry(tag).or_default().push(v);
        }
    }
    let mut out: Vec<ApproachSummary> = groups.iter().map(|(tag, v)| summarize(tag, v)).collect();
    out.sort_by(|a, b| {
        let by_mean = match direction {
            Direction::Minimize => a.mean.total_cmp(&b.mean),
            Direction::Maximize => b.mean.total_cmp(&a.mean),
        };
        by_mean.then_with(|| a.tag.cmp(&b.tag))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConstraintVerdict;
    use crate::sandbox::RunStatus;
    use crate::service::store::SubmissionRecord;
    use crate::service::ScoreReport;

    fn done(id: &str, user: &str, at: u64, value: Option<f64>, zero: bool, tag: Option<&str>) -> Submission {
        Submission {
            record: SubmissionRecord {
                submission_id: id.into(),
                user_id: user.into(),
                challenge_id: "c".into(),
                received_at_ms: at,
                source: String::new(),
                dedupe_key: None,
            },
            status: SubmissionStatus::Done,
            report: Some(ScoreReport {
                submission_id: id.into(),
                challenge_id: "c".into(),
                status: SubmissionStatus::Done,
                run_status: RunStatus::Ok,
                metrics: vec![],
                primary_value: value,
                verdict: Some(ConstraintVerdict {
                    ok: !zero,
                    zero_score: zero,
                    violations: vec![],
                }),
                console: String::new(),
                exit_code: Some(0),
                failure: None,
                run_elapsed_s: 0.0,
                duration_s: 0.0,
            }),
            tag: tag.map(String::from),
        }
    }

    fn users(board: &[LeaderboardEntry]) -> Vec<&str> {
        board.iter().map(|e| e.user_id.as_str()).collect()
    }

    #[test]
    fn minimize_orders_ascending() {
        let subs = [done("1", "B", 1, Some(33.7), false, None), done("2", "A", 2, Some(9.4), false, None)];
        let b = leaderboard(&subs, "c", Direction::Minimize);
        assert_eq!(users(&b), ["A", "B"]);
        assert_eq!(b[0].rank, 1);
        assert_eq!(b[1].rank, 2);
    }

    #[test]
    fn maximize_orders_descending() {
        let subs = [done("1", "B", 1, Some(0.8), false, None), done("2", "A", 2, Some(0.9), false, None)];
        assert_eq!(users(&leaderboard(&subs, "c", Direction::Maximize)), ["A", "B"]);
    }

    #[test]
    fn zero_score_is_last() {
        let subs = [done("1", "Z", 1, None, true, None), done("2", "A", 2, Some(1e9), false, None)];
        assert_eq!(users(&leaderboard(&subs, "c", Direction::Minimize)), ["A", "Z"]);
        let subs = [done("1", "Z", 1, Some(0.0), true, None), done("2", "A", 2, Some(0.0), false, None)];
        assert_eq!(users(&leaderboard(&subs, "c", Direction::Maximize)), ["A", "Z"]);
    }

    #[test]
    fn best_per_user_and_ties_by_time() {
        let subs = [
            done("1", "A", 5, Some(2.0), false, None),
            done("2", "A", 6, Some(1.0), false, None),
            done("3", "B", 1, Some(1.0), false, None),
            done("4", "A", 7, Some(1.0), false, None),
        ];
        let b = leaderboard(&subs, "c", Direction::Minimize);
        assert_eq!(users(&b), ["B", "A"]);
        assert_eq!(b[1].submission_id, "2");
    }

    #[test]
    fn order_independent() {
        let mut subs = vec![
            done("1", "A", 5, Some(2.0), false, None),
            done("2", "B", 6, Some(1.0), false, None),
            done("3", "C", 1, None, true, None),
        ];
        let a = leaderboard(&subs, "c", Direction::Minimize);
        subs.reverse();
        assert_eq!(a, leaderboard(&subs, "c", Direction::Minimize));
    }

    #[test]
    fn summary_format() {
        let s = summarize("pair", &[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.display, "count 2, 2.00 ± 1.41");
        let single = summarize("svr", &[11.13]);
        assert_eq!(single.std, None);
        assert_eq!(single.display, "count 1, 11.13");
    }

    #[test]
    fn summary_groups_by_tag() {
        let subs = [
            done("1", "A", 1, Some(1.0), false, Some("lin")),
            done("2", "B", 2, Some(3.0), false, Some("lin")),
            done("3", "C", 3, Some(0.5), false, Some("tree")),
            done("4", "D", 4, Some(9.0), false, None),
        ];
        let s = approach_summary(&subs, "c", Direction::Minimize);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tag, "tree");
        assert_eq!(s[1].count, 2);
    }
}
