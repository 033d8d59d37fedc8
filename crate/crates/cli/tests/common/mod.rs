//! Helpers shared by the CLI integration tests.
#![allow(dead_code)]

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crowdml_core::quiz::load_quiz;
use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_crowdml");

pub fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run crowdml")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// The demo quiz's correct answers.
pub fn demo_answer_key(data_dir: &Path) -> Vec<usize> {
    load_quiz(data_dir.join("challenges/housing/quiz.toml"))
        .expect("demo quiz")
        .answer_key()
}

/// A `crowdml serve` child process on an ephemeral port.
pub struct Server {
    child: Option<Child>,
    pub base: String,
    pub stderr_path: PathBuf,
    agent: ureq::Agent,
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into()
}

impl Server {
    pub fn start(data_dir: &Path, pool_size: usize) -> Server {
        Self::try_start(data_dir, pool_size).unwrap_or_else(|e| panic!("server failed to start: {e}"))
    }

    /// Starts the server; on early exit returns its stderr.
    pub fn try_start(data_dir: &Path, pool_size: usize) -> Result<Server, String> {
        let stderr_path = data_dir.with_extension(format!("stderr-{}.log", crate::common::unique()));
        let mut child = Command::new(BIN)
            .args([
                "--data-dir",
                path_str(data_dir),
                "--pool-size",
                &pool_size.to_string(),
                "--listen",
                "127.0.0.1:0",
                "serve",
            ])
            .env("RUST_LOG", "info")
            .stdout(Stdio::piped())
            .stderr(File::create(&stderr_path).expect("stderr log"))
            .spawn()
            .expect("spawn server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().expect("stdout"))
            .read_line(&mut line)
            .expect("read server stdout");
        let Some(base) = line.trim().strip_prefix("listening on ") else {
            let _ = child.wait();
            return Err(fs::read_to_string(&stderr_path).unwrap_or_default());
        };
        Ok(Server {
            base: base.to_string(),
            child: Some(child),
            stderr_path,
            agent: agent(),
        })
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.agent.get(format!("{}{path}", self.base)).call().expect("GET");
        decode(resp)
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .expect("POST");
        decode(resp)
    }

    pub fn qualify(&self, user: &str, answers: &[usize]) -> Value {
        let (status, body) = self.post(
            "/api/quizzes/ml-basics/attempts",
            &serde_json::json!({ "user_id": user, "answers": answers }),
        );
        assert_eq!(status, 200, "{body}");
        body
    }

    /// Submits and returns the submission id.
    pub fn submit(&self, challenge: &str, user: &str, source: &str) -> String {
        let (status, body) = self.post(
            &format!("/api/challenges/{challenge}/submissions"),
            &serde_json::json!({ "user_id": user, "source": source }),
        );
        assert_eq!(status, 202, "{body}");
        body["submission_id"].as_str().expect("submission_id").to_string()
    }

    pub fn status(&self, id: &str) -> String {
        let (code, body) = self.get(&format!("/api/submissions/{id}"));
        assert_eq!(code, 200, "{body}");
        body["status"].as_str().unwrap_or_default().to_string()
    }

    /// Polls until the submission reaches `Done` or `Failed`.
    pub fn wait_terminal(&self, id: &str, timeout: Duration) -> Value {
        let deadline = Instant::now() + timeout;
        loop {
            let (_, body) = self.get(&format!("/api/submissions/{id}"));
            let status = body["status"].as_str().unwrap_or_default();
            if status == "Done" || status == "Failed" {
                return body;
            }
            assert!(Instant::now() < deadline, "submission {id} still {status}");
            thread::sleep(Duration::from_millis(100));
        }
    }

    pub fn wait_status(&self, id: &str, want: &str, timeout: Duration) {
        let deadline = Instant::now() + timeout;
        while self.status(id) != want {
            assert!(Instant::now() < deadline, "submission {id} never became {want}");
            thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn pid(&self) -> i32 {
        self.child.as_ref().expect("running").id() as i32
    }

    pub fn kill(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }

    /// Sends SIGTERM and waits for a clean exit.
    pub fn terminate(&mut self, timeout: Duration) -> std::process::ExitStatus {
        let mut c = self.child.take().expect("running");
        unsafe {
            libc::kill(c.id() as i32, libc::SIGTERM);
        }
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(status) = c.try_wait().expect("wait") {
                return status;
            }
            if Instant::now() > deadline {
                let _ = c.kill();
                panic!("server did not exit within {timeout:?} of SIGTERM");
            }
            thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn stderr(&self) -> String {
        fs::read_to_string(&self.stderr_path).unwrap_or_default()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

fn decode(mut resp: ureq::http::Response<ureq::Body>) -> (u16, Value) {
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap_or_default();
    let body = if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or(Value::String(text))
    };
    (status, body)
}

pub fn unique() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static N: AtomicU64 = AtomicU64::new(0);
    N.fetch_add(1, Ordering::Relaxed)
}
