use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::{RunLimits, SandboxError};

/// The complete environment a guest sees.
pub const GUEST_ENV: &[(&str, &str)] = &[
    ("PATH", "/usr/local/bin:/usr/bin:/bin"),
    ("LANG", "C.UTF-8"),
    ("LC_ALL", "C.UTF-8"),
    ("PYTHONHASHSEED", "0"),
    ("PYTHONDONTWRITEBYTECODE", "1"),
    ("PYTHONUNBUFFERED", "1"),
];

const POLL: Duration = Duration::from_millis(5);
const READER_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub timed_out: bool,
    /// Combined stdout and stderr, cut at the console cap plus a marker.
    pub console: String,
    pub console_truncated: bool,
    pub elapsed_s: f64,
}

pub fn truncation_marker(cap: usize) -> String {
    format!("\n[console truncated at {cap} bytes]\n")
}

/// Splits a runner template on whitespace and substitutes `{entry}`.
fn argv(template: &str, entry: &str) -> Result<Vec<String>, SandboxError> {
    let parts: Vec<String> = template
        .split_whitespace()
        .map(|p| p.replace("{entry}", entry))
        .collect();
    if parts.is_empty() {
        return Err(SandboxError::EmptyCommand);
    }
    Ok(parts)
}

fn rlimit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: setrlimit is async-signal-safe and `lim` is a valid pointer.
    if unsafe { libc::setrlimit(resource, &lim) } == 0 {
        Ok(())
    } else {
        Err(std::io::Error::last_os_error())
    }
}

fn kill_group(pid: u32) {
    // SAFETY: plain syscall; a stale group id only yields ESRCH.
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

/// Runs the guest with `workspace` as working directory. The whole process
/// group is killed at the wall-clock deadline and again after the guest
/// exits, so stray children cannot outlive the run.
pub fn execute(
    workspace: &Path,
    runner_command: &str,
    entry: &str,
    limits: &RunLimits,
) -> Result<RawRun, SandboxError> {
    let args = argv(runner_command, entry)?;
    let (mut reader, writer) = std::io::pipe().map_err(|source| SandboxError::Io {
        path: workspace.to_path_buf(),
        source,
    })?;
    let writer_err = writer.try_clone().map_err(|source| SandboxError::Io {
        path: workspace.to_path_buf(),
        source,
    })?;

    let memory = limits.memory_mb.saturating_mul(1 << 20);
    let cpu = limits.wall_clock_s.ceil() as u64 + 1;
    let fsize = limits.output_cap_bytes as u64 + 1;

    let mut cmd = Command::new(&args[0]);
    cmd.args(&args[1..])
        .current_dir(workspace)
        .env_clear()
        .envs(GUEST_ENV.iter().copied())
        .stdin(Stdio::null())
        .stdout(writer)
        .stderr(writer_err)
        .process_group(0);
    // SAFETY: the closure only calls setrlimit, which is async-signal-safe.
    unsafe {
        cmd.pre_exec(move || {
            rlimit(libc::RLIMIT_AS, memory)?;
            rlimit(libc::RLIMIT_CORE, 0)?;
            rlimit(libc::RLIMIT_FSIZE, fsize)?;
            rlimit(libc::RLIMIT_CPU, cpu)?;
            // Take the guest down with the host if the host dies mid-run.
            if libc::prctl(libc::PR_SET_PDEATHSIG, libc::SIGKILL as libc::c_ulong) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            Ok(())
        });
    }

    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|source| SandboxError::Spawn {
        program: args[0].clone(),
        source,
    })?;
    // Release the parent's copies of the pipe's write end.
    drop(cmd);

    let cap = limits.console_cap_bytes;
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut kept = Vec::with_capacity(cap.min(1 << 16));
        let mut overflow = false;
        let mut chunk = [0u8; 8192];
        loop {
            match reader.read(&mut chunk) {
                Ok(0) => break,
                Ok(n) => {
                    let room = cap - kept.len();
                    if n > room {
                        overflow = true;
                    }
                    kept.extend_from_slice(&chunk[..n.min(room)]);
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(_) => break,
            }
        }
        let _ = tx.send((kept, overflow));
    });

    let deadline = start + Duration::from_secs_f64(limits.wall_clock_s);
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {}
            Err(source) => {
                kill_group(child.id());
                return Err(SandboxError::Io {
                    path: workspace.to_path_buf(),
                    source,
                });
            }
        }
        if Instant::now() >= deadline {
            timed_out = true;
            kill_group(child.id());
            break child.wait().map_err(|source| SandboxError::Io {
                path: workspace.to_path_buf(),
                source,
            })?;
        }
        thread::sleep(POLL);
    };
    kill_group(child.id());
    let elapsed_s = start.elapsed().as_secs_f64();

    // A grandchild that left the process group may still hold the pipe.
    let (bytes, truncated) = rx.recv_timeout(READER_GRACE).unwrap_or_default();
    let mut console = String::from_utf8_lossy(&bytes).into_owned();
    if truncated {
        console.push_str(&truncation_marker(cap));
    }

    Ok(RawRun {
        exit_code: status.code(),
        signal: status.signal(),
        timed_out,
        console,
        console_truncated: truncated,
        elapsed_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn limits(wall: f64, cap: usize) -> RunLimits {
        RunLimits {
            wall_clock_s: wall,
            memory_mb: 256,
            console_cap_bytes: cap,
            output_cap_bytes: 1 << 20,
        }
    }

    fn sh(script: &str, lim: &RunLimits) -> RawRun {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.sh"), script).unwrap();
        execute(dir.path(), "/bin/sh {entry}", "run.sh", lim).unwrap()
    }

    #[test]
    fn exit_code_is_reported() {
        let r = sh("echo hi; exit 3", &limits(5.0, 1024));
        assert_eq!(r.exit_code, Some(3));
        assert_eq!(r.console, "hi\n");
        assert!(!r.timed_out);
    }

    #[test]
    fn stderr_is_captured() {
        let r = sh("echo oops >&2", &limits(5.0, 1024));
        assert_eq!(r.console, "oops\n");
        assert_eq!(r.exit_code, Some(0));
    }

    #[test]
    fn infinite_loop_times_out() {
        let t = Instant::now();
        let r = sh("while :; do :; done", &limits(1.0, 1024));
        assert!(r.timed_out);
        assert!(t.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn background_children_are_killed() {
        let t = Instant::now();
        let r = sh("sleep 30 &\nsleep 30", &limits(0.5, 1024));
        assert!(r.timed_out);
        assert!(t.elapsed() < Duration::from_secs(3), "{:?}", t.elapsed());
    }

    #[test]
    fn console_is_capped_with_marker() {
        let r = sh("head -c 100000 /dev/zero | tr '\\0' x", &limits(5.0, 4096));
        assert!(r.console_truncated);
        let marker = truncation_marker(4096);
        assert!(r.console.ends_with(&marker));
        assert_eq!(r.console.len(), 4096 + marker.len());
    }

    #[test]
    fn environment_is_scrubbed() {
        // SAFETY: test-only; no other thread reads this variable.
        unsafe { std::env::set_var("CROWDML_SECRET_TEST", "leak") };
        let r = sh("env | sort", &limits(5.0, 4096));
        assert!(!r.console.contains("leak"));
        let mut expected: Vec<String> = GUEST_ENV.iter().map(|(k, v)| format!("{k}={v}")).collect();
        expected.sort();
        let seen: Vec<&str> = r
            .console
            .lines()
            .filter(|l| GUEST_ENV.iter().any(|(k, _)| l.starts_with(&format!("{k}="))))
            .collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn missing_program_is_spawn_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            execute(dir.path(), "/nonexistent/bin {entry}", "x", &limits(1.0, 10)),
            Err(SandboxError::Spawn { .. })
        ));
    }

    #[test]
    fn empty_command() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            execute(dir.path(), "  ", "x", &limits(1.0, 10)),
            Err(SandboxError::EmptyCommand)
        ));
    }
}
