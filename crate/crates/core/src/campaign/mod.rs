//! Round-robin fuzzing campaigns over built targets.
//!
//! The orchestrator owns all mutable campaign state; runner invocations
//! are isolated subprocess-style executions whose results merge at a
//! single aggregation point. The optional worker-pool mode runs slots of
//! one repetition concurrently, each with a private artifact directory,
//! and produces the same outcomes as sequential execution modulo timing.
//!
//! Artifact directory layout (`ftg-artifacts v1`):
//!
//! ```text
//! <artifact_dir>/
//!   VERSION                  "ftg-artifacts v1"
//!   rep<k>/
//!     outcomes.json          all RunOutcomes of repetition k
//!     replay.json            replay verdicts (written by the CLI)
//!     <target_id>/
//!       corpus/              fuzzer-managed corpus for this slot
//!       crash-*, leak-*      crashing inputs as written by the fuzzer
//!       <artifact>.log       captured sanitizer log per crashing input
//! ```

pub mod libfuzzer;
pub mod mock;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use libfuzzer::LibFuzzerRunner;
pub use mock::MockRunner;

/// The artifact layout version marker.
pub const ARTIFACTS_VERSION: &str = "ftg-artifacts v1";

/// The sanitizer environment variable the runners pass through.
pub const ASAN_OPTIONS_VAR: &str = "ASAN_OPTIONS";
/// The option that makes the sanitizer print `DEDUP_TOKEN:` lines.
pub const DEDUP_TOKEN_OPTION: &str = "dedup_token_length=3";

/// Build the default runner environment: `ASAN_OPTIONS=dedup_token_length=3`,
/// with `external_symbolizer_path=...` joined by `:` when a symbolizer
/// path is given. Sanitizers need symbolized stack traces to emit
/// deduplication tokens.
pub fn default_env_settings(symbolizer: Option<&Path>) -> BTreeMap<String, String> {
    let mut value = DEDUP_TOKEN_OPTION.to_string();
    if let Some(path) = symbolizer {
        value.push_str(&format!(":external_symbolizer_path={}", path.display()));
    }
    let mut env = BTreeMap::new();
    env.insert(ASAN_OPTIONS_VAR.to_string(), value);
    env
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignConfig {
    /// Total allotted time `T`, split equally across targets.
    pub total_time_secs: u64,
    pub targets: Vec<String>,
    pub artifact_dir: PathBuf,
    pub runner_id: String,
    /// Environment passed to every runner invocation; must include the
    /// dedup-token setting in `ASAN_OPTIONS`.
    pub env_settings: BTreeMap<String, String>,
    /// Whole-schedule repetitions; results are averaged downstream.
    pub repeat_count: u32,
    /// Slots of one repetition run concurrently when > 1.
    pub workers: usize,
}

impl CampaignConfig {
    pub fn new(
        total_time_secs: u64,
        targets: Vec<String>,
        artifact_dir: PathBuf,
        runner_id: String,
    ) -> Self {
        CampaignConfig {
            total_time_secs,
            targets,
            artifact_dir,
            runner_id,
            env_settings: default_env_settings(None),
            repeat_count: 1,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.total_time_secs == 0 {
            return Err(CampaignError::InvalidConfig("total time must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(CampaignError::InvalidConfig("target list is empty".into()));
        }
        if self.repeat_count < 1 {
            return Err(CampaignError::InvalidConfig("repeat count must be at least 1".into()));
        }
        let has_dedup = self
            .env_settings
            .get(ASAN_OPTIONS_VAR)
            .is_some_and(|v| v.contains("dedup_token_length="));
        if !has_dedup {
            return Err(CampaignError::InvalidConfig(format!(
                "env_settings must include `{ASAN_OPTIONS_VAR}` with `{DEDUP_TOKEN_OPTION}`"
            )));
        }
        Ok(())
    }
}

/// One target's share of the schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleSlot {
    pub target_id: String,
    pub duration_secs: u64,
}

/// Result of running one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub target_id: String,
    pub repetition: u32,
    /// Crashing inputs found, parallel to `sanitizer_logs`.
    pub crash_input_paths: Vec<PathBuf>,
    /// One captured sanitizer log per crash input.
    pub sanitizer_logs: Vec<String>,
    pub executions: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReplayVerdict {
    Reproduced,
    NotReproduced,
}

/// Outcome of replaying one crashing input.
#[derive(Debug, Clone)]
pub enum ReplayOutcome {
    CleanExit,
    /// Raw sanitizer output of the reproduced failure.
    Report(String),
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("runner unavailable for `{target_id}`: {reason}")]
    Unavailable { target_id: String, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("cannot split {total}s across {targets} targets (less than one second each)")]
    InsufficientTime { total: u64, targets: usize },
    #[error("campaign aborted: {message} (partial results preserved)")]
    Aborted {
        message: String,
        partial: Box<CampaignResult>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A per-target failure that did not abort the campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunnerFailure {
    pub repetition: u32,
    pub target_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CampaignResult {
    pub outcomes: Vec<RunOutcome>,
    pub failures: Vec<RunnerFailure>,
}

/// Executes fuzzing runs. Implemented by the libFuzzer subprocess runner
/// for production and by a mock for desk-scale tests.
pub trait FuzzerRunner: Send + Sync {
    fn id(&self) -> &str;

    /// Fuzz one target for `duration_secs`, writing crash inputs and
    /// their logs under `work_dir`. Restarting after a crash within the
    /// slot is the runner's business.
    fn run(
        &self,
        target_id: &str,
        duration_secs: u64,
        env: &BTreeMap<String, String>,
        work_dir: &Path,
    ) -> Result<RunOutcome, RunnerError>;

    /// Re-execute one input against its target. Side-effect-free on
    /// campaign state.
    fn replay(
        &self,
        target_id: &str,
        input_path: &Path,
        env: &BTreeMap<String, String>,
    ) -> Result<ReplayOutcome, RunnerError>;
}

/// Split the allotted time equally: every slot gets `floor(T/n)` seconds
/// and the residue `T mod n` is spread one extra second over the first
/// slots, so durations sum to exactly `T` and differ by at most one.
pub fn schedule_round_robin(cfg: &CampaignConfig) -> Result<Vec<ScheduleSlot>, CampaignError> {
    cfg.validate()?;
    let n = cfg.targets.len() as u64;
    let total = cfg.total_time_secs;
    if total < n {
        return Err(CampaignError::InsufficientTime {
            total,
            targets: cfg.targets.len(),
        });
    }
    let base = total / n;
    let residue = (total % n) as usize;
    Ok(cfg
        .targets
        .iter()
        .enumerate()
        .map(|(i, target_id)| ScheduleSlot {
            target_id: target_id.clone(),
            duration_secs: base + u64::from(i < residue),
        })
        .collect())
}

/// Private work directory for one (repetition, target) pair. Distinct
/// pairs never share a path.
pub fn slot_work_dir(artifact_dir: &Path, repetition: u32, target_id: &str) -> PathBuf {
    artifact_dir.join(format!("rep{repetition}")).join(target_id)
}

fn is_disk_full(err: &io::Error) -> bool {
    matches!(err.kind(), io::ErrorKind::StorageFull | io::ErrorKind::QuotaExceeded)
}

/// Run the whole schedule `repeat_count` times.
///
/// A runner failure on one target is recorded in the result and does not
/// abort the campaign; running out of disk aborts with partial results
/// preserved.
pub fn run_campaign(
    cfg: &CampaignConfig,
    runner: &dyn FuzzerRunner,
) -> Result<CampaignResult, CampaignError> {
    let schedule = schedule_round_robin(cfg)?;

    std::fs::create_dir_all(&cfg.artifact_dir)?;
    std::fs::write(
        cfg.artifact_dir.join("VERSION"),
        format!("{ARTIFACTS_VERSION}\n"),
    )?;

    let mut result = CampaignResult::default();
    for repetition in 0..cfg.repeat_count {
        let rep_result = if cfg.workers > 1 {
            run_repetition_parallel(cfg, runner, &schedule, repetition)
        } else {
            run_repetition_sequential(cfg, runner, &schedule, repetition)
        };
        match rep_result {
            Ok(mut rep) => {
                result.outcomes.append(&mut rep.outcomes);
                result.failures.append(&mut rep.failures);
            }
            Err(RepetitionAbort { message, mut partial }) => {
                result.outcomes.append(&mut partial.outcomes);
                result.failures.append(&mut partial.failures);
                return Err(CampaignError::Aborted {
                    message,
                    partial: Box::new(result),
                });
            }
        }
        write_outcomes_index(cfg, repetition, &result)?;
    }
    Ok(result)
}

struct RepetitionAbort {
    message: String,
    partial: CampaignResult,
}

fn run_slot(
    cfg: &CampaignConfig,
    runner: &dyn FuzzerRunner,
    slot: &ScheduleSlot,
    repetition: u32,
) -> Result<Result<RunOutcome, RunnerFailure>, RepetitionAbort> {
    let work_dir = slot_work_dir(&cfg.artifact_dir, repetition, &slot.target_id);
    if let Err(err) = std::fs::create_dir_all(&work_dir) {
        if is_disk_full(&err) {
            return Err(RepetitionAbort {
                message: err.to_string(),
                partial: CampaignResult::default(),
            });
        }
        return Ok(Err(RunnerFailure {
            repetition,
            target_id: slot.target_id.clone(),
            error: err.to_string(),
        }));
    }
    match runner.run(&slot.target_id, slot.duration_secs, &cfg.env_settings, &work_dir) {
        Ok(mut outcome) => {
            outcome.repetition = repetition;
            debug_assert_eq!(
                outcome.crash_input_paths.len(),
                outcome.sanitizer_logs.len(),
                "one sanitizer log per crash input"
            );
            Ok(Ok(outcome))
        }
        Err(RunnerError::Io(err)) if is_disk_full(&err) => Err(RepetitionAbort {
            message: err.to_string(),
            partial: CampaignResult::default(),
        }),
        Err(err) => Ok(Err(RunnerFailure {
            repetition,
            target_id: slot.target_id.clone(),
            error: err.to_string(),
        })),
    }
}

fn run_repetition_sequential(
    cfg: &CampaignConfig,
    runner: &dyn FuzzerRunner,
    schedule: &[ScheduleSlot],
    repetition: u32,
) -> Result<CampaignResult, RepetitionAbort> {
    let mut result = CampaignResult::default();
    for slot in schedule {
        match run_slot(cfg, runner, slot, repetition) {
            Ok(Ok(outcome)) => result.outcomes.push(outcome),
            Ok(Err(failure)) => result.failures.push(failure),
            Err(mut abort) => {
                abort.partial.outcomes.splice(0..0, result.outcomes);
                abort.partial.failures.splice(0..0, result.failures);
                return Err(abort);
            }
        }
    }
    Ok(result)
}

fn run_repetition_parallel(
    cfg: &CampaignConfig,
    runner: &dyn FuzzerRunner,
    schedule: &[ScheduleSlot],
    repetition: u32,
) -> Result<CampaignResult, RepetitionAbort> {
    let next = Mutex::new(0usize);
    let outcomes: Mutex<Vec<Option<Result<RunOutcome, RunnerFailure>>>> =
        Mutex::new((0..schedule.len()).map(|_| None).collect());
    let abort: Mutex<Option<String>> = Mutex::new(None);
    let stop = AtomicBool::new(false);

    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(schedule.len()) {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    return;
                }
                let index = {
                    let mut guard = next.lock().unwrap();
                    let i = *guard;
                    if i >= schedule.len() {
                        return;
                    }
                    *guard += 1;
                    i
                };
                match run_slot(cfg, runner, &schedule[index], repetition) {
                    Ok(slot_result) => {
                        outcomes.lock().unwrap()[index] = Some(slot_result);
                    }
                    Err(a) => {
                        *abort.lock().unwrap() = Some(a.message);
                        stop.store(true, Ordering::SeqCst);
                        return;
                    }
                }
            });
        }
    });

    let mut result = CampaignResult::default();
    for slot_result in outcomes.into_inner().unwrap().into_iter().flatten() {
        match slot_result {
            Ok(outcome) => result.outcomes.push(outcome),
            Err(failure) => result.failures.push(failure),
        }
    }
    if let Some(message) = abort.into_inner().unwrap() {
        return Err(RepetitionAbort { message, partial: result });
    }
    Ok(result)
}

fn write_outcomes_index(
    cfg: &CampaignConfig,
    repetition: u32,
    result: &CampaignResult,
) -> Result<(), CampaignError> {
    let rep_dir = cfg.artifact_dir.join(format!("rep{repetition}"));
    std::fs::create_dir_all(&rep_dir)?;
    let rep_outcomes: Vec<&RunOutcome> = result
        .outcomes
        .iter()
        .filter(|o| o.repetition == repetition)
        .collect();
    let json = serde_json::to_string_pretty(&rep_outcomes)
        .map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
    std::fs::write(rep_dir.join("outcomes.json"), json)?;
    Ok(())
}

/// Replay verdicts plus any per-input runner failures.
#[derive(Debug, Default)]
pub struct ReplayReport {
    pub verdicts: BTreeMap<PathBuf, ReplayVerdict>,
    pub failures: Vec<RunnerFailure>,
}

/// Replay every crash input once against its own target. Inputs whose
/// failure does not reproduce are excluded from bug counting downstream.
pub fn replay_verify(
    cfg: &CampaignConfig,
    outcomes: &[RunOutcome],
    runner: &dyn FuzzerRunner,
) -> ReplayReport {
    let mut report = ReplayReport::default();
    for outcome in outcomes {
        for input in &outcome.crash_input_paths {
            match runner.replay(&outcome.target_id, input, &cfg.env_settings) {
                Ok(ReplayOutcome::Report(_)) => {
                    report.verdicts.insert(input.clone(), ReplayVerdict::Reproduced);
                }
                Ok(ReplayOutcome::CleanExit) => {
                    report
                        .verdicts
                        .insert(input.clone(), ReplayVerdict::NotReproduced);
                }
                Err(err) => {
                    report
                        .verdicts
                        .insert(input.clone(), ReplayVerdict::NotReproduced);
                    report.failures.push(RunnerFailure {
                        repetition: outcome.repetition,
                        target_id: outcome.target_id.clone(),
                        error: err.to_string(),
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(total: u64, n: usize) -> CampaignConfig {
        CampaignConfig::new(
            total,
            (0..n).map(|i| format!("t{i}")).collect(),
            PathBuf::from("/tmp/unused"),
            "mock".into(),
        )
    }

    #[test]
    fn ten_hours_over_66_targets() {
        let slots = schedule_round_robin(&cfg(36_000, 66)).unwrap();
        assert_eq!(slots.len(), 66);
        // 36000 = 545 * 66 + 30: first 30 slots get the extra second.
        assert!(slots[..30].iter().all(|s| s.duration_secs == 546));
        assert!(slots[30..].iter().all(|s| s.duration_secs == 545));
        assert_eq!(slots.iter().map(|s| s.duration_secs).sum::<u64>(), 36_000);
    }

    #[test]
    fn single_target_gets_everything() {
        let slots = schedule_round_robin(&cfg(36_000, 1)).unwrap();
        assert_eq!(slots.len(), 1);
        assert_eq!(slots[0].duration_secs, 36_000);
    }

    #[test]
    fn residue_spreads_over_first_slots() {
        let slots = schedule_round_robin(&cfg(10, 3)).unwrap();
        assert_eq!(
            slots.iter().map(|s| s.duration_secs).collect::<Vec<_>>(),
            vec![4, 3, 3]
        );
    }

    #[test]
    fn more_targets_than_seconds_is_rejected() {
        assert!(matches!(
            schedule_round_robin(&cfg(5, 6)),
            Err(CampaignError::InsufficientTime { .. })
        ));
    }

    #[test]
    fn config_requires_dedup_token_setting() {
        let mut c = cfg(100, 2);
        c.env_settings.clear();
        assert!(matches!(c.validate(), Err(CampaignError::InvalidConfig(_))));
        c.env_settings
            .insert(ASAN_OPTIONS_VAR.into(), "halt_on_error=0".into());
        assert!(c.validate().is_err());
        c.env_settings.insert(
            ASAN_OPTIONS_VAR.into(),
            format!("halt_on_error=0:{DEDUP_TOKEN_OPTION}"),
        );
        assert!(c.validate().is_ok());
    }

    #[test]
    fn default_env_matches_documented_strings() {
        let env = default_env_settings(None);
        assert_eq!(env[ASAN_OPTIONS_VAR], "dedup_token_length=3");
        let env = default_env_settings(Some(Path::new("/usr/bin/llvm-symbolizer")));
        assert_eq!(
            env[ASAN_OPTIONS_VAR],
            "dedup_token_length=3:external_symbolizer_path=/usr/bin/llvm-symbolizer"
        );
    }

    #[test]
    fn work_dirs_are_isolated() {
        let base = Path::new("/artifacts");
        let mut seen = std::collections::BTreeSet::new();
        for rep in 0..5u32 {
            for target in ["alpha", "beta", "rep1"] {
                assert!(seen.insert(slot_work_dir(base, rep, target)));
            }
        }
        assert_eq!(seen.len(), 15);
    }
}
