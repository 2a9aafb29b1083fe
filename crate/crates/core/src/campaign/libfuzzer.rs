//! Subprocess runner for libFuzzer-linked target binaries.
//!
//! A slot runs `<binaries_dir>/<target_id>` with `-max_total_time` set to
//! the slot's remaining seconds. libFuzzer stops the process when it
//! finds a bug, so the runner relaunches it for the remaining time
//! (restart-on-crash); `max_crashes_per_slot` optionally ends the slot
//! early once enough crashing inputs have been collected, which keeps
//! desk-scale runs fast when planted bugs are shallow.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use super::{ReplayOutcome, RunOutcome, RunnerError};

pub struct LibFuzzerRunner {
    binaries_dir: PathBuf,
    /// End the slot after collecting this many crash inputs.
    pub max_crashes_per_slot: Option<u32>,
    /// Relaunch the fuzzer for the slot's remaining time after it exits
    /// on a found bug.
    pub restart_on_crash: bool,
}

impl LibFuzzerRunner {
    pub fn new(binaries_dir: impl Into<PathBuf>) -> Self {
        LibFuzzerRunner {
            binaries_dir: binaries_dir.into(),
            max_crashes_per_slot: None,
            restart_on_crash: true,
        }
    }

    fn binary_for(&self, target_id: &str) -> Result<PathBuf, RunnerError> {
        let path = self.binaries_dir.join(target_id);
        if path.is_file() {
            Ok(path)
        } else {
            Err(RunnerError::Unavailable {
                target_id: target_id.to_string(),
                reason: format!("missing binary {}", path.display()),
            })
        }
    }
}

fn apply_env(cmd: &mut Command, env: &BTreeMap<String, String>) {
    for (key, value) in env {
        cmd.env(key, value);
    }
}

/// Wait with a deadline; returns the exit code, killing the child when
/// the grace period expires. Stderr is drained on a separate thread to
/// keep the pipe from filling up.
fn wait_capturing_stderr(mut child: Child, deadline: Instant) -> std::io::Result<(Option<i32>, String)> {
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    });

    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(25));
    };
    let stderr = reader.join().unwrap_or_default();
    Ok((status.code(), stderr))
}

/// Pull the execution count out of libFuzzer's output: the final-stats
/// line when present, else the last `#N` status line.
fn parse_executions(stderr: &str) -> u64 {
    for line in stderr.lines().rev() {
        if let Some(rest) = line.trim().strip_prefix("stat::number_of_executed_units:") {
            if let Ok(n) = rest.trim().parse::<u64>() {
                return n;
            }
        }
    }
    stderr
        .lines()
        .rev()
        .find_map(|line| {
            let line = line.trim();
            let rest = line.strip_prefix('#')?;
            let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.is_empty() {
                None
            } else {
                digits.parse().ok()
            }
        })
        .unwrap_or(0)
}

/// Crash artifacts libFuzzer writes with its default naming.
fn artifact_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let is_artifact = ["crash-", "leak-", "timeout-", "oom-"]
            .iter()
            .any(|prefix| name.starts_with(prefix));
        if is_artifact && !name.ends_with(".log") && entry.file_type()?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

impl super::FuzzerRunner for LibFuzzerRunner {
    fn id(&self) -> &str {
        "libfuzzer"
    }

    fn run(
        &self,
        target_id: &str,
        duration_secs: u64,
        env: &BTreeMap<String, String>,
        work_dir: &Path,
    ) -> Result<RunOutcome, RunnerError> {
        let binary = self.binary_for(target_id)?;
        let corpus_dir = work_dir.join("corpus");
        std::fs::create_dir_all(&corpus_dir)?;

        let started = Instant::now();
        let slot_end = started + Duration::from_secs(duration_secs);
        let mut crash_input_paths: Vec<PathBuf> = Vec::new();
        let mut sanitizer_logs: Vec<String> = Vec::new();
        let mut executions = 0u64;
        let mut seen: std::collections::BTreeSet<PathBuf> =
            artifact_files(work_dir)?.into_iter().collect();

        loop {
            let now = Instant::now();
            if now >= slot_end {
                break;
            }
            let remaining = (slot_end - now).as_secs().max(1);

            let mut cmd = Command::new(&binary);
            cmd.arg(format!("-artifact_prefix={}/", work_dir.display()))
                .arg(format!("-max_total_time={remaining}"))
                .arg("-print_final_stats=1")
                .arg(&corpus_dir)
                .current_dir(work_dir)
                .stdin(Stdio::null())
                .stdout(Stdio::null())
                .stderr(Stdio::piped());
            apply_env(&mut cmd, env);

            let child = cmd.spawn()?;
            let grace = Duration::from_secs(remaining + 15);
            let (code, stderr) = wait_capturing_stderr(child, Instant::now() + grace)?;
            executions += parse_executions(&stderr);

            let mut found_new = false;
            for artifact in artifact_files(work_dir)? {
                if seen.insert(artifact.clone()) {
                    found_new = true;
                    let log_path = artifact.with_file_name(format!(
                        "{}.log",
                        artifact.file_name().unwrap().to_string_lossy()
                    ));
                    std::fs::write(&log_path, &stderr)?;
                    crash_input_paths.push(artifact);
                    sanitizer_logs.push(stderr.clone());
                }
            }

            if code == Some(0) {
                break; // time budget exhausted without a crash
            }
            if !found_new && code != Some(0) {
                // Crashed without an artifact (e.g. startup failure);
                // do not spin on it.
                if !stderr.contains("libFuzzer") {
                    return Err(RunnerError::Unavailable {
                        target_id: target_id.to_string(),
                        reason: format!("target exited with {code:?} before fuzzing"),
                    });
                }
                break;
            }
            if let Some(max) = self.max_crashes_per_slot {
                if crash_input_paths.len() >= max as usize {
                    break;
                }
            }
            if !self.restart_on_crash {
                break;
            }
        }

        Ok(RunOutcome {
            target_id: target_id.to_string(),
            repetition: 0,
            crash_input_paths,
            sanitizer_logs,
            executions,
            wall_time_secs: started.elapsed().as_secs_f64(),
        })
    }

    fn replay(
        &self,
        target_id: &str,
        input_path: &Path,
        env: &BTreeMap<String, String>,
    ) -> Result<ReplayOutcome, RunnerError> {
        let binary = self.binary_for(target_id)?;
        // libFuzzer writes a fresh artifact when the replay crashes; keep
        // that out of the campaign's artifact directories.
        let scratch = tempfile::tempdir()?;

        let mut cmd = Command::new(&binary);
        cmd.arg(format!("-artifact_prefix={}/", scratch.path().display()))
            .arg(input_path)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped());
        apply_env(&mut cmd, env);

        let child = cmd.spawn()?;
        let (code, stderr) = wait_capturing_stderr(child, Instant::now() + Duration::from_secs(60))?;
        if code == Some(0) {
            Ok(ReplayOutcome::CleanExit)
        } else {
            Ok(ReplayOutcome::Report(stderr))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn execution_count_parses_final_stats_and_status_lines() {
        let with_stats = "#2 INITED\n#4096 DONE\nstat::number_of_executed_units: 4097\n";
        assert_eq!(parse_executions(with_stats), 4097);
        let status_only = "#2 INITED cov: 1\n#128 NEW cov: 2\n";
        assert_eq!(parse_executions(status_only), 128);
        assert_eq!(parse_executions("no numbers here"), 0);
    }

    #[test]
    fn missing_binary_reports_unavailable() {
        let runner = LibFuzzerRunner::new("/nonexistent/bins");
        let err = runner.binary_for("ghost_0").unwrap_err();
        assert!(matches!(err, RunnerError::Unavailable { .. }));
    }

    #[test]
    fn artifact_scan_picks_up_fuzzer_outputs_only() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("crash-abc"), b"x").unwrap();
        std::fs::write(dir.path().join("leak-def"), b"x").unwrap();
        std::fs::write(dir.path().join("crash-abc.log"), b"log").unwrap();
        std::fs::write(dir.path().join("notes.txt"), b"x").unwrap();
        std::fs::create_dir(dir.path().join("corpus")).unwrap();
        let files = artifact_files(dir.path()).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["crash-abc", "leak-def"]);
    }
}
