//! Child processes with a wall-clock limit and bounded stream capture.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

const POLL: Duration = Duration::from_millis(5);
/// How long to wait for pipe readers after the child is gone. A grandchild
/// that inherited the pipes can keep them open indefinitely.
const DRAIN_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Default)]
pub struct Captured {
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct ProcessOutput {
    /// `None` when the process was killed or terminated by a signal.
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    pub stdout: Captured,
    pub stderr: Captured,
    pub wall_time_ms: u64,
}

impl ProcessOutput {
    pub fn success(&self) -> bool {
        self.exit_code == Some(0) && !self.timed_out
    }
}

/// Everything needed to launch one command.
#[derive(Debug, Clone)]
pub struct Invocation<'a> {
    pub argv: &'a [String],
    pub cwd: &'a Path,
    pub env: &'a BTreeMap<String, String>,
    pub timeout: Duration,
    pub cap: usize,
}

fn spawn_reader<R: Read + Send + 'static>(mut src: R, cap: usize) -> mpsc::Receiver<Captured> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut truncated = false;
        let mut buf = [0u8; 8192];
        loop {
            match src.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        let _ = tx.send(Captured {
            text: String::from_utf8_lossy(&kept).into_owned(),
            truncated,
        });
    });
    rx
}

/// Runs a command to completion or until the timeout, then kills it.
/// Only a failure to spawn is an error.
pub fn run(inv: &Invocation<'_>) -> std::io::Result<ProcessOutput> {
    let (program, args) = inv
        .argv
        .split_first()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"))?;
    let mut child = Command::new(program)
        .args(args)
        .current_dir(inv.cwd)
        .env_clear()
        .envs(inv.env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let started = Instant::now();
    let out_rx = spawn_reader(child.stdout.take().expect("piped stdout"), inv.cap);
    let err_rx = spawn_reader(child.stderr.take().expect("piped stderr"), inv.cap);

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if started.elapsed() >= inv.timeout {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        thread::sleep(POLL);
    };
    let wall_time_ms = started.elapsed().as_millis() as u64;

    let collect = |rx: mpsc::Receiver<Captured>| {
        rx.recv_timeout(DRAIN_GRACE).unwrap_or(Captured {
            text: String::new(),
            truncated: true,
        })
    };
    Ok(ProcessOutput {
        exit_code: status.and_then(|s| s.code()),
        timed_out,
        stdout: collect(out_rx),
        stderr: collect(err_rx),
        wall_time_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str, timeout_ms: u64, cap: usize) -> ProcessOutput {
        let argv = vec!["/bin/sh".to_string(), "-c".to_string(), script.to_string()];
        let env = BTreeMap::new();
        let dir = std::env::temp_dir();
        run(&Invocation {
            argv: &argv,
            cwd: &dir,
            env: &env,
            timeout: Duration::from_millis(timeout_ms),
            cap,
        })
        .unwrap()
    }

    #[test]
    fn captures_both_streams_and_exit_code() {
        let out = sh("echo out; echo err >&2; exit 3", 5000, 1024);
        assert_eq!(out.exit_code, Some(3));
        assert_eq!(out.stdout.text, "out\n");
        assert_eq!(out.stderr.text, "err\n");
        assert!(!out.timed_out);
    }

    #[test]
    fn kills_on_timeout() {
        let out = sh("while :; do :; done", 300, 1024);
        assert!(out.timed_out);
        assert_eq!(out.exit_code, None);
        assert!(out.wall_time_ms >= 300);
    }

    #[test]
    fn truncates_at_cap() {
        let out = sh("i=0; while [ $i -lt 100 ]; do echo 0123456789; i=$((i+1)); done", 5000, 50);
        assert_eq!(out.stdout.text.len(), 50);
        assert!(out.stdout.truncated);
    }

    #[test]
    fn missing_binary_is_a_spawn_error() {
        let argv = vec!["/definitely/not/here".to_string()];
        let env = BTreeMap::new();
        let dir = std::env::temp_dir();
        let inv = Invocation { argv: &argv, cwd: &dir, env: &env, timeout: Duration::from_secs(1), cap: 10 };
        assert!(run(&inv).is_err());
    }
}
