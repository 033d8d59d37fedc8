//! Subcommand implementations. Each returns the process exit code.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use crowdml_core::challenge::{load_challenge, materialize, validate_challenge, ChallengeSpec, MANIFEST_FILE};
use crowdml_core::dataset::{labels_to_csv, matrix_to_csv};
use crowdml_core::demo::seed_demo;
use crowdml_core::quiz::{grade_quiz, load_quiz};
use crowdml_core::service::{
    check_baseline, evaluate_local, leaderboard, load_state, now_ms, ChallengeEntry, LeaderboardEntry, ScoreReport,
    Service, ServiceConfig, SubmissionStatus, CHALLENGES_DIR, STORE_DIR,
};

use crate::config::CliConfig;

/// Bad invocation or unusable input; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Accepts a manifest file or a directory containing one.
fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

fn load_spec(path: &Path) -> Result<ChallengeSpec> {
    let manifest = manifest_path(path);
    if !manifest.is_file() {
        return Err(usage(format!("manifest not found: {}", manifest.display())));
    }
    Ok(load_challenge(&manifest)?)
}

pub fn serve(cfg: &CliConfig) -> Result<u8> {
    let challenges = cfg.data_dir.join(CHALLENGES_DIR);
    if !challenges.is_dir() {
        log::warn!("{} does not exist; serving no challenges", challenges.display());
    }
    let mut svc_cfg = ServiceConfig::new(&cfg.data_dir);
    svc_cfg.pool_size = cfg.pool_size;
    svc_cfg.limits = cfg.limits.clone();
    let service = Arc::new(Service::open(svc_cfg).context("starting the service")?);
    log::info!(
        "loaded {} challenge(s) with {} worker(s)",
        service.challenges().len(),
        cfg.pool_size
    );

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.listen)
            .await
            .with_context(|| format!("binding {}", cfg.listen))?;
        let addr: SocketAddr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        axum::serve(listener, crate::http::router(service.clone()))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .context("serving")
    })?;

    log::info!("draining running evaluations");
    service.shutdown().context("shutting down")?;
    log::info!("stopped");
    Ok(EXIT_OK)
}

async fn shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
    tokio::select! {
        _ = term.recv() => {}
        _ = tokio::signal::ctrl_c() => {}
    }
}

pub fn validate(cfg: &CliConfig, manifest: &Path, no_run: bool) -> Result<u8> {
    let spec = load_spec(manifest)?;
    let violations = validate_challenge(&spec);
    if !violations.is_empty() {
        println!("{}: invalid", spec.id);
        for v in &violations {
            println!("  - {v}");
        }
        return Ok(EXIT_FAILED);
    }
    if no_run {
        println!("{}: valid (baseline not run)", spec.id);
        return Ok(EXIT_OK);
    }
    let prepared = materialize(&spec)?;
    let report = check_baseline(&prepared, &cfg.limits);
    if report.status != SubmissionStatus::Done {
        println!("{}: baseline failed", spec.id);
        print!("{}", render_report(&report));
        return Ok(EXIT_FAILED);
    }
    let primary = report
        .primary_value
        .map_or_else(|| "none".to_string(), |v| v.to_string());
    println!(
        "{}: valid; baseline {} = {primary}",
        spec.id,
        spec.metric_set.primary.name()
    );
    Ok(EXIT_OK)
}

/// Writes everything a participant may download into `out`.
pub fn package(dir: &Path, out: Option<&Path>) -> Result<u8> {
    let spec = load_spec(dir)?;
    let violations = validate_challenge(&spec);
    if !violations.is_empty() {
        bail!("{} is invalid: {}", spec.id, violations.join("; "));
    }
    let prepared = materialize(&spec)?;
    let quiz = spec.quiz_path.as_ref().map(load_quiz).transpose()?.map(Arc::new);
    let out = out.map_or_else(|| PathBuf::from(format!("{}-public", spec.id)), Path::to_path_buf);
    if out.exists() && fs::read_dir(&out)?.next().is_some() {
        return Err(usage(format!("{} exists and is not empty", out.display())));
    }
    let entry = ChallengeEntry { spec, prepared, quiz };
    let public = &entry.prepared.public;
    let put = |name: &str, contents: &str| -> Result<()> {
        let path = out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    };
    put("challenge.json", &serde_json::to_string_pretty(&entry.detail())?)?;
    put("description.md", &public.description_markdown)?;
    put(&format!("baseline/{}", entry.prepared.entry_file), &public.baseline_source)?;
    put("x_train.csv", &matrix_to_csv(&public.x_train))?;
    put("y_train.csv", &labels_to_csv(&public.y_train))?;
    if let Some(q) = &entry.quiz {
        put("quiz.json", &serde_json::to_string_pretty(&q.public_view())?)?;
    }
    println!("{}", out.display());
    Ok(EXIT_OK)
}

pub fn eval_local(cfg: &CliConfig, manifest: &Path, submission: &Path, json: bool) -> Result<u8> {
    let spec = load_spec(manifest)?;
    let violations = validate_challenge(&spec);
    if !violations.is_empty() {
        return Err(usage(format!("{} is invalid: {}", spec.id, violations.join("; "))));
    }
    let source = fs::read_to_string(submission)
        .map_err(|e| usage(format!("cannot read submission {}: {e}", submission.display())))?;
    let prepared = materialize(&spec)?;
    let report = evaluate_local(&prepared, &source, &cfg.limits);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", render_report(&report));
    }
    Ok(if report.status == SubmissionStatus::Done {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

pub fn render_report(r: &ScoreReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status: {:?} ({:?})", r.status, r.run_status);
    for m in &r.metrics {
        let _ = writeln!(s, "{}: {}", m.metric_id.name(), m.value);
    }
    if let Some(v) = &r.verdict {
        if v.zero_score {
            let _ = writeln!(s, "zero score: {}", v.violations.join("; "));
        }
    }
    if let Some(p) = r.primary_value {
        let _ = writeln!(s, "primary: {p}");
    }
    if let Some(f) = &r.failure {
        let _ = writeln!(s, "failure: {f}");
    }
    let _ = writeln!(s, "elapsed: {:.2}s", r.run_elapsed_s);
    if !r.console.is_empty() {
        let _ = writeln!(s, "console:\n{}", r.console.trim_end());
    }
    s
}

pub fn seed(dir: &Path) -> Result<u8> {
    let manifests = seed_demo(dir).map_err(|e| match e {
        crowdml_core::demo::DemoError::NotEmpty(_) => usage(e.to_string()),
        e => anyhow!(e),
    })?;
    for m in manifests {
        println!("installed {}", m.display());
    }
    Ok(EXIT_OK)
}

/// Reads the store without modifying it, so it is safe beside a live server.
pub fn show_leaderboard(cfg: &CliConfig, challenge_id: &str, json: bool) -> Result<u8> {
    let dir = cfg.data_dir.join(CHALLENGES_DIR).join(challenge_id);
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(usage(format!("unknown challenge {challenge_id:?} in {}", cfg.data_dir.display())));
    }
    let spec = load_challenge(&dir)?;
    let state = load_state(cfg.data_dir.join(STORE_DIR))?;
    let board = leaderboard(state.submissions.values(), challenge_id, spec.metric_set.direction);
    if json {
        println!("{}", serde_json::to_string_pretty(&board)?);
    } else {
        print!("{}", render_leaderboard(&board, spec.metric_set.primary.name()));
    }
    Ok(EXIT_OK)
}

pub fn render_leaderboard(board: &[LeaderboardEntry], metric: &str) -> String {
    let mut s = format!("{:>4}  {:<20} {:>14}  {:<16} {}\n", "rank", "user", metric, "approach", "submission");
    for e in board {
        let value = match (e.zero_score, e.primary_value) {
            (true, _) => "0 (violation)".to_string(),
            (false, Some(v)) => format!("{v:.6}"),
            (false, None) => "-".to_string(),
        };
        let _ = writeln!(
            s,
            "{:>4}  {:<20} {:>14}  {:<16} {}",
            e.rank,
            e.user_id,
            value,
            e.approach_tag.as_deref().unwrap_or("-"),
            e.submission_id
        );
    }
    s
}

/// Parses a JSON array or whitespace/comma separated option indices.
pub fn parse_answers(text: &str) -> Result<Vec<usize>> {
    let t = text.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).context("answers must be a JSON array of option indices");
    }
    t.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().with_context(|| format!("bad answer {p:?}")))
        .collect()
}

pub fn grade(quiz: &Path, answers_file: &Path, user: &str) -> Result<u8> {
    if !quiz.is_file() {
        return Err(usage(format!("quiz not found: {}", quiz.display())));
    }
    let quiz = load_quiz(quiz)?;
    let text = fs::read_to_string(answers_file)
        .map_err(|e| usage(format!("cannot read answers {}: {e}", answers_file.display())))?;
    let answers = parse_answers(&text).map_err(|e| usage(format!("{e:#}")))?;
    let attempt = grade_quiz(&quiz, user, &answers, now_ms())?;
    println!(
        "score {:.2}, threshold {:.2}: {}",
        attempt.score,
        quiz.pass_threshold,
        if attempt.passed { "passed" } else { "failed" }
    );
    Ok(if attempt.passed { EXIT_OK } else { EXIT_FAILED })
}
