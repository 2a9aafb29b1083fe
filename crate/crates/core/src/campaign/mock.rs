//! Scripted runner for desk-scale tests and dry runs.
//!
//! Behaviors come from a [`MockScript`], either built in code or loaded
//! from a JSON file (`--runner mock` looks for `mock-script.json` in the
//! binaries directory). Each run writes crash inputs and synthesized
//! sanitizer logs shaped like real AddressSanitizer/LeakSanitizer output,
//! including `DEDUP_TOKEN:` lines, so the whole report pipeline can be
//! exercised without a compiler or fuzzer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ReplayOutcome, RunOutcome, RunnerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockKind {
    Crash,
    Leak,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockCrash {
    pub kind: MockKind,
    /// Deduplication token the synthesized log carries.
    pub token: String,
    /// Whether a replay of this input reproduces the failure.
    #[serde(default = "default_true")]
    pub reproduces: bool,
}

fn default_true() -> bool {
    true
}

fn default_executions() -> u64 {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MockTarget {
    /// Simulate a missing binary.
    #[serde(default)]
    pub missing: bool,
    /// Simulate running out of disk mid-slot.
    #[serde(default)]
    pub disk_full: bool,
    #[serde(default = "default_executions")]
    pub executions: u64,
    /// Crashing inputs found per slot, in order.
    #[serde(default)]
    pub crashes: Vec<MockCrash>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MockScript {
    #[serde(default)]
    pub targets: BTreeMap<String, MockTarget>,
}

impl MockScript {
    pub fn with_target(mut self, target_id: &str, target: MockTarget) -> Self {
        self.targets.insert(target_id.to_string(), target);
        self
    }
}

pub struct MockRunner {
    script: MockScript,
}

impl MockRunner {
    pub fn new(script: MockScript) -> Self {
        MockRunner { script }
    }

    pub fn from_file(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)?;
        let script: MockScript = serde_json::from_str(&text).map_err(|e| {
            RunnerError::Unavailable {
                target_id: path.display().to_string(),
                reason: format!("bad mock script: {e}"),
            }
        })?;
        Ok(MockRunner { script })
    }

    fn target(&self, target_id: &str) -> Result<&MockTarget, RunnerError> {
        let target = self
            .script
            .targets
            .get(target_id)
            .ok_or_else(|| RunnerError::Unavailable {
                target_id: target_id.to_string(),
                reason: "not in mock script".to_string(),
            })?;
        if target.missing {
            return Err(RunnerError::Unavailable {
                target_id: target_id.to_string(),
                reason: "missing binary (scripted)".to_string(),
            });
        }
        Ok(target)
    }
}

/// Synthesize a sanitizer log with the same landmarks real ones carry.
pub fn synthesize_log(kind: MockKind, token: &str) -> String {
    let top_frame = token.split("--").next().unwrap_or("frame0");
    match kind {
        MockKind::Crash => format!(
            "INFO: Seed: 1direct\n\
             ==4242==ERROR: AddressSanitizer: heap-buffer-overflow on address 0x602000000011 at pc 0x000000400f00 bp 0x7ffc1000 sp 0x7ffc0ff8\n\
             READ of size 1 at 0x602000000011 thread T0\n\
             \x20   #0 0x400eff in {top_frame} /src/lib.c:42:10\n\
             \x20   #1 0x400f55 in LLVMFuzzerTestOneInput /src/target.c:12:3\n\
             DEDUP_TOKEN: {token}\n\
             SUMMARY: AddressSanitizer: heap-buffer-overflow /src/lib.c:42:10 in {top_frame}\n\
             ==4242==ABORTING\n"
        ),
        MockKind::Leak => format!(
            "==4242==ERROR: LeakSanitizer: detected memory leaks\n\
             \n\
             Direct leak of 32 byte(s) in 1 object(s) allocated from:\n\
             \x20   #0 0x4a2b8d in malloc\n\
             \x20   #1 0x511212 in {top_frame} /src/lib.c:99:5\n\
             DEDUP_TOKEN: {token}\n\
             SUMMARY: AddressSanitizer: 32 byte(s) leaked in 1 allocation(s).\n"
        ),
    }
}

fn artifact_name(kind: MockKind, index: usize) -> String {
    match kind {
        MockKind::Crash => format!("crash-mock-{index:04}"),
        MockKind::Leak => format!("leak-mock-{index:04}"),
    }
}

fn index_from_artifact(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_string_lossy();
    name.rsplit('-').next()?.parse().ok()
}

impl super::FuzzerRunner for MockRunner {
    fn id(&self) -> &str {
        "mock"
    }

    fn run(
        &self,
        target_id: &str,
        duration_secs: u64,
        _env: &BTreeMap<String, String>,
        work_dir: &Path,
    ) -> Result<RunOutcome, RunnerError> {
        let target = self.target(target_id)?;
        if target.disk_full {
            return Err(RunnerError::Io(std::io::Error::new(
                std::io::ErrorKind::StorageFull,
                "mock disk full",
            )));
        }

        let mut crash_input_paths = Vec::new();
        let mut sanitizer_logs = Vec::new();
        for (index, crash) in target.crashes.iter().enumerate() {
            let input = work_dir.join(artifact_name(crash.kind, index));
            std::fs::write(&input, crash.token.as_bytes())?;
            let log = synthesize_log(crash.kind, &crash.token);
            std::fs::write(
                input.with_file_name(format!(
                    "{}.log",
                    input.file_name().unwrap().to_string_lossy()
                )),
                &log,
            )?;
            crash_input_paths.push(input);
            sanitizer_logs.push(log);
        }

        Ok(RunOutcome {
            target_id: target_id.to_string(),
            repetition: 0,
            crash_input_paths,
            sanitizer_logs,
            executions: target.executions,
            wall_time_secs: duration_secs as f64,
        })
    }

    fn replay(
        &self,
        target_id: &str,
        input_path: &Path,
        _env: &BTreeMap<String, String>,
    ) -> Result<ReplayOutcome, RunnerError> {
        let target = self.target(target_id)?;
        let index = index_from_artifact(input_path).ok_or_else(|| RunnerError::Unavailable {
            target_id: target_id.to_string(),
            reason: format!("unknown artifact {}", input_path.display()),
        })?;
        let crash = target.crashes.get(index).ok_or_else(|| RunnerError::Unavailable {
            target_id: target_id.to_string(),
            reason: format!("no scripted crash #{index}"),
        })?;
        if crash.reproduces {
            Ok(ReplayOutcome::Report(synthesize_log(crash.kind, &crash.token)))
        } else {
            Ok(ReplayOutcome::CleanExit)
        }
    }
}
