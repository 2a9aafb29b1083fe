//! `ftg` — generate fuzz targets for C code, schedule fuzzing campaigns
//! over them, and aggregate the resulting bug reports.
//!
//! Exit codes:
//!   0  success
//!   1  internal error
//!   2  command-line usage error
//!   3  source parse failure
//!   4  directive or binding validation failure
//!   5  no targets generated
//!   6  campaign failure (no target could run, or the campaign aborted)

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ftg_core::abi::AbiModel;
use ftg_core::c_model::{parse_translation_unit, SourceModel};
use ftg_core::campaign::{
    self, replay_verify, run_campaign, CampaignConfig, CampaignError, FuzzerRunner,
    LibFuzzerRunner, MockRunner, ReplayVerdict, RunOutcome,
};
use ftg_core::codegen::{
    generate_manifest, generate_target, harness_file_name, parse_manifest, CodegenOptions,
};
use ftg_core::directives::{bind, extract_directives, has_fuzztest_token};
use ftg_core::discovery::discover;
use ftg_core::layout::plan_layout;
use ftg_core::report::{
    dedup, render_delimited, render_table, reports_from_outcomes, summarize, RepetitionData,
};
use ftg_core::{GeneratedTarget, LayoutPlan};

const EXIT_PARSE: u8 = 3;
const EXIT_DIRECTIVE: u8 = 4;
const EXIT_NO_TARGETS: u8 = 5;
const EXIT_CAMPAIGN: u8 = 6;

#[derive(Parser)]
#[command(
    name = "ftg",
    version,
    about = "Fuzz target generator: harness generation, campaign scheduling, bug triage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate fuzz target harnesses and a build manifest
    Generate(GenerateArgs),
    /// List functions eligible for fully automated generation
    Discover(DiscoverArgs),
    /// Run a round-robin fuzzing campaign over built target binaries
    Campaign(CampaignArgs),
    /// Re-aggregate results from an existing artifact directory
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Only functions marked with @fuzztest
    Annotated,
    /// Only automatically discovered functions
    Auto,
    /// Both, with annotations taking precedence per function
    Both,
}

#[derive(Args)]
struct GenerateArgs {
    /// C source and header files to process
    #[arg(required = true)]
    sources: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    mode: Mode,
    /// ABI name (`lp64`) or path to an ABI config file
    #[arg(long, default_value = "lp64")]
    abi: String,
    /// Output directory for harnesses and the manifest
    #[arg(long, default_value = "ftg-out")]
    out: PathBuf,
    /// Include line for generated harnesses (repeatable). A bare name
    /// like `foo.h` becomes `#include "foo.h"`. Defaults to including
    /// the file that declares each target function.
    #[arg(long = "include")]
    includes: Vec<String>,
    /// Pass the raw buffer tail as the array argument instead of an
    /// aligned copy
    #[arg(long)]
    no_aligned_array_copy: bool,
    /// Omit the minimum-input-size guard
    #[arg(long)]
    no_size_guard: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(required = true)]
    sources: Vec<PathBuf>,
    /// One `name verdict reason` line per function instead of a table
    #[arg(long)]
    machine: bool,
}

#[derive(Args)]
struct CampaignArgs {
    /// Manifest written by `ftg generate`
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding one built fuzzer binary per target id
    #[arg(long)]
    binaries: PathBuf,
    /// Total campaign time budget in seconds, split across targets
    #[arg(long, default_value_t = 600)]
    time: u64,
    /// Repetitions of the whole schedule (results are averaged)
    #[arg(long, default_value_t = 1)]
    repeat: u32,
    #[arg(long, default_value = "ftg-artifacts")]
    artifact_dir: PathBuf,
    /// `libfuzzer` runs real binaries; `mock` replays
    /// `<binaries>/mock-script.json`
    #[arg(long, default_value = "libfuzzer")]
    runner: String,
    /// Run this many slots concurrently (private artifact dirs)
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// End a slot early after collecting this many crashing inputs
    #[arg(long)]
    max_crashes: Option<u32>,
    /// llvm-symbolizer path exported via ASAN_OPTIONS; without working
    /// symbolization the sanitizer cannot emit dedup tokens
    #[arg(long)]
    symbolizer: Option<PathBuf>,
    /// Row label in the results table
    #[arg(long, default_value = "Campaign")]
    label: String,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "ftg-artifacts")]
    artifact_dir: PathBuf,
    #[arg(long, default_value = "Campaign")]
    label: String,
    /// Target count for the bugs-per-target column; defaults to the
    /// number of distinct targets seen in the artifacts
    #[arg(long)]
    targets: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Discover(args) => cmd_discover(args),
        Command::Campaign(args) => cmd_campaign(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn load_abi(spec: &str) -> Result<AbiModel, String> {
    if spec == "lp64" {
        return Ok(AbiModel::lp64());
    }
    AbiModel::from_config_file(Path::new(spec)).map_err(|e| e.to_string())
}

/// Parse and merge all inputs, printing diagnostics as they come.
fn load_model(sources: &[PathBuf]) -> Result<SourceModel, ExitCode> {
    let mut model = SourceModel::new();
    let mut parse_failed = false;
    for path in sources {
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(err) => {
                eprintln!("{}: error: {err}", path.display());
                parse_failed = true;
                continue;
            }
        };
        match parse_translation_unit(&text, &path.display().to_string()) {
            Ok(unit) => {
                for diag in &unit.diagnostics {
                    eprintln!("{diag}");
                }
                for diag in model.merge(unit.model) {
                    eprintln!("{diag}");
                }
            }
            Err(err) => {
                eprintln!("{err}");
                parse_failed = true;
            }
        }
    }
    if parse_failed {
        return Err(ExitCode::from(EXIT_PARSE));
    }
    Ok(model)
}

fn include_line(raw: &str) -> String {
    if raw.trim_start().starts_with('#') {
        raw.to_string()
    } else {
        format!("#include \"{raw}\"")
    }
}

fn file_base_name(path: &str) -> String {
    Path::new(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

fn cmd_generate(args: GenerateArgs) -> ExitCode {
    let abi = match load_abi(&args.abi) {
        Ok(abi) => abi,
        Err(err) => {
            eprintln!("ftg: error: {err}");
            return ExitCode::FAILURE;
        }
    };
    let model = match load_model(&args.sources) {
        Ok(model) => model,
        Err(code) => return code,
    };

    let mut targets: Vec<GeneratedTarget> = Vec::new();
    let mut plans: Vec<LayoutPlan> = Vec::new();
    let mut directive_errors = 0usize;

    let opts_for = |declaring_file: &str| CodegenOptions {
        include_lines: if args.includes.is_empty() {
            vec![include_line(&file_base_name(declaring_file))]
        } else {
            args.includes.iter().map(|i| include_line(i)).collect()
        },
        aligned_array_copy: !args.no_aligned_array_copy,
        emit_size_guard: !args.no_size_guard,
    };

    if args.mode != Mode::Auto {
        for func in &model.functions {
            if !has_fuzztest_token(&func.comment_block) {
                continue;
            }
            let loc = &func.location;
            let directives = match extract_directives(&func.comment_block) {
                Ok(ds) => ds,
                Err(err) => {
                    eprintln!("{}:{}: error: {}: {err}", loc.file, loc.line, func.name);
                    directive_errors += 1;
                    continue;
                }
            };
            let bound = match bind(&model, func, &directives) {
                Ok(bound) => bound,
                Err(err) => {
                    eprintln!("{}:{}: error: {}: {err}", loc.file, loc.line, func.name);
                    directive_errors += 1;
                    continue;
                }
            };
            let plan = match plan_layout(&model, &abi, &bound) {
                Ok(plan) => plan,
                Err(err) => {
                    eprintln!("{}:{}: error: {}: {err}", loc.file, loc.line, func.name);
                    directive_errors += 1;
                    continue;
                }
            };
            match generate_target(&model, &abi, &bound, &plan, &opts_for(&loc.file)) {
                Ok(target) => {
                    targets.push(target);
                    plans.push(plan);
                }
                Err(err) => {
                    eprintln!("{}:{}: error: {}: {err}", loc.file, loc.line, func.name);
                    directive_errors += 1;
                }
            }
        }
    }

    if args.mode != Mode::Annotated {
        let report = discover(&model);
        for bound in &report.eligible {
            let loc = &bound.signature.location;
            let plan = match plan_layout(&model, &abi, bound) {
                Ok(plan) => plan,
                Err(err) => {
                    eprintln!("{}:{}: error: {}: {err}", loc.file, loc.line, bound.signature.name);
                    continue;
                }
            };
            match generate_target(&model, &abi, bound, &plan, &opts_for(&loc.file)) {
                Ok(target) => {
                    targets.push(target);
                    plans.push(plan);
                }
                Err(err) => {
                    eprintln!("{}:{}: error: {}: {err}", loc.file, loc.line, bound.signature.name);
                }
            }
        }
    }

    if directive_errors > 0 {
        eprintln!("ftg: {directive_errors} annotated function(s) failed validation; nothing written");
        return ExitCode::from(EXIT_DIRECTIVE);
    }
    if targets.is_empty() {
        eprintln!("ftg: no targets generated");
        return ExitCode::from(EXIT_NO_TARGETS);
    }

    if let Err(err) = std::fs::create_dir_all(&args.out) {
        eprintln!("ftg: error: cannot create {}: {err}", args.out.display());
        return ExitCode::FAILURE;
    }
    for target in &targets {
        let path = args.out.join(harness_file_name(&target.function_name));
        if let Err(err) = std::fs::write(&path, &target.source_text) {
            eprintln!("ftg: error: cannot write {}: {err}", path.display());
            return ExitCode::FAILURE;
        }
    }
    let manifest_path = args.out.join("ftg-manifest.txt");
    if let Err(err) = std::fs::write(&manifest_path, generate_manifest(&targets, &plans)) {
        eprintln!("ftg: error: cannot write {}: {err}", manifest_path.display());
        return ExitCode::FAILURE;
    }
    println!(
        "generated {} target(s) into {} (manifest: {})",
        targets.len(),
        args.out.display(),
        manifest_path.display()
    );
    ExitCode::SUCCESS
}

fn cmd_discover(args: DiscoverArgs) -> ExitCode {
    let model = match load_model(&args.sources) {
        Ok(model) => model,
        Err(code) => return code,
    };
    let report = discover(&model);

    if args.machine {
        for func in &report.eligible {
            println!("{} eligible -", func.signature.name);
        }
        for (name, reason) in &report.skipped {
            println!("{name} skipped {reason}");
        }
    } else {
        println!("{:<40} {:<10} {}", "FUNCTION", "VERDICT", "REASON");
        for func in &report.eligible {
            println!("{:<40} {:<10} -", func.signature.name, "eligible");
        }
        for (name, reason) in &report.skipped {
            println!("{name:<40} {:<10} {reason}", "skipped");
        }
        println!(
            "\n{} eligible, {} skipped",
            report.eligible.len(),
            report.skipped.len()
        );
    }
    ExitCode::SUCCESS
}

/// Campaign environment: start from the caller's ASAN_OPTIONS (verbatim
/// passthrough), make sure the dedup-token option is present, and append
/// the symbolizer path when given.
fn campaign_env(symbolizer: Option<&Path>) -> BTreeMap<String, String> {
    let mut value = match std::env::var(campaign::ASAN_OPTIONS_VAR) {
        Ok(existing) if !existing.is_empty() => existing,
        _ => String::new(),
    };
    if !value.contains("dedup_token_length=") {
        if !value.is_empty() {
            value.push(':');
        }
        value.push_str(campaign::DEDUP_TOKEN_OPTION);
    }
    if let Some(path) = symbolizer {
        if !value.contains("external_symbolizer_path=") {
            value.push_str(&format!(":external_symbolizer_path={}", path.display()));
        }
    }
    let mut env = BTreeMap::new();
    env.insert(campaign::ASAN_OPTIONS_VAR.to_string(), value);
    env
}

fn cmd_campaign(args: CampaignArgs) -> ExitCode {
    let manifest_text = match std::fs::read_to_string(&args.manifest) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("ftg: error: cannot read {}: {err}", args.manifest.display());
            return ExitCode::FAILURE;
        }
    };
    let entries = match parse_manifest(&manifest_text) {
        Ok(entries) => entries,
        Err(err) => {
            eprintln!("ftg: error: {err}");
            return ExitCode::FAILURE;
        }
    };
    if entries.is_empty() {
        eprintln!("ftg: error: manifest lists no targets");
        return ExitCode::from(EXIT_CAMPAIGN);
    }

    let mut cfg = CampaignConfig::new(
        args.time,
        entries.iter().map(|e| e.target_id.clone()).collect(),
        args.artifact_dir.clone(),
        args.runner.clone(),
    );
    cfg.repeat_count = args.repeat;
    cfg.workers = args.workers.max(1);
    cfg.env_settings = campaign_env(args.symbolizer.as_deref());

    let libfuzzer;
    let mock;
    let runner: &dyn FuzzerRunner = match args.runner.as_str() {
        "libfuzzer" => {
            let mut r = LibFuzzerRunner::new(&args.binaries);
            r.max_crashes_per_slot = args.max_crashes;
            libfuzzer = r;
            &libfuzzer
        }
        "mock" => {
            let script = args.binaries.join("mock-script.json");
            match MockRunner::from_file(&script) {
                Ok(r) => {
                    mock = r;
                    &mock
                }
                Err(err) => {
                    eprintln!("ftg: error: {err}");
                    return ExitCode::from(EXIT_CAMPAIGN);
                }
            }
        }
        other => {
            eprintln!("ftg: error: unknown runner `{other}` (expected `libfuzzer` or `mock`)");
            return ExitCode::FAILURE;
        }
    };

    let result = match run_campaign(&cfg, runner) {
        Ok(result) => result,
        Err(CampaignError::Aborted { message, partial }) => {
            eprintln!("ftg: campaign aborted: {message}");
            eprintln!(
                "ftg: partial results preserved under {} ({} outcomes)",
                cfg.artifact_dir.display(),
                partial.outcomes.len()
            );
            return ExitCode::from(EXIT_CAMPAIGN);
        }
        Err(err) => {
            eprintln!("ftg: error: {err}");
            return ExitCode::from(EXIT_CAMPAIGN);
        }
    };
    for failure in &result.failures {
        eprintln!(
            "ftg: warning: rep {} target {}: {}",
            failure.repetition, failure.target_id, failure.error
        );
    }
    if result.outcomes.is_empty() {
        eprintln!("ftg: error: no target could be run");
        return ExitCode::from(EXIT_CAMPAIGN);
    }

    let replay = replay_verify(&cfg, &result.outcomes, runner);
    for failure in &replay.failures {
        eprintln!(
            "ftg: warning: replay rep {} target {}: {}",
            failure.repetition, failure.target_id, failure.error
        );
    }
    if let Err(err) = write_replay_index(&cfg.artifact_dir, &result.outcomes, &replay.verdicts) {
        eprintln!("ftg: error: {err}");
        return ExitCode::FAILURE;
    }

    match aggregate_and_render(
        &result.outcomes,
        &replay.verdicts,
        entries.len(),
        &args.label,
        &args.artifact_dir,
    ) {
        Ok(table) => {
            print!("{table}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("ftg: error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn write_replay_index(
    artifact_dir: &Path,
    outcomes: &[RunOutcome],
    verdicts: &BTreeMap<PathBuf, ReplayVerdict>,
) -> Result<(), String> {
    let mut reps: BTreeMap<u32, BTreeMap<&Path, &ReplayVerdict>> = BTreeMap::new();
    for outcome in outcomes {
        let bucket = reps.entry(outcome.repetition).or_default();
        for input in &outcome.crash_input_paths {
            if let Some(verdict) = verdicts.get(input) {
                bucket.insert(input.as_path(), verdict);
            }
        }
    }
    for (rep, bucket) in reps {
        let path = artifact_dir.join(format!("rep{rep}")).join("replay.json");
        let json = serde_json::to_string_pretty(&bucket).map_err(|e| e.to_string())?;
        std::fs::write(&path, json).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

/// Parse logs, dedup per repetition, summarize, and write the results
/// artifacts next to the raw logs.
fn aggregate_and_render(
    outcomes: &[RunOutcome],
    verdicts: &BTreeMap<PathBuf, ReplayVerdict>,
    target_count: usize,
    label: &str,
    artifact_dir: &Path,
) -> Result<String, String> {
    let (by_rep, parse_errors) = reports_from_outcomes(outcomes);
    for (input, err) in &parse_errors {
        eprintln!("ftg: warning: {}: {err}", input.display());
    }

    let all_reps: std::collections::BTreeSet<u32> =
        outcomes.iter().map(|o| o.repetition).collect();
    let mut per_rep = Vec::new();
    for rep in all_reps {
        let reports = by_rep.get(&rep).cloned().unwrap_or_default();
        let records = dedup(&reports, verdicts, rep);
        per_rep.push(RepetitionData { repetition: rep, reports, bug_records: records });
    }
    if per_rep.is_empty() {
        return Err("no repetitions to summarize".to_string());
    }

    let row = summarize(&per_rep, target_count, label);
    let table = render_table(std::slice::from_ref(&row));
    let delimited = render_delimited(std::slice::from_ref(&row));
    std::fs::write(artifact_dir.join("results.txt"), &table)
        .map_err(|e| format!("cannot write results.txt: {e}"))?;
    std::fs::write(artifact_dir.join("results.csv"), &delimited)
        .map_err(|e| format!("cannot write results.csv: {e}"))?;
    Ok(table)
}

fn cmd_report(args: ReportArgs) -> ExitCode {
    let mut outcomes: Vec<RunOutcome> = Vec::new();
    let mut verdicts: BTreeMap<PathBuf, ReplayVerdict> = BTreeMap::new();

    let entries = match std::fs::read_dir(&args.artifact_dir) {
        Ok(entries) => entries,
        Err(err) => {
            eprintln!("ftg: error: cannot read {}: {err}", args.artifact_dir.display());
            return ExitCode::FAILURE;
        }
    };
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.starts_with("rep") || !entry.path().is_dir() {
            continue;
        }
        let outcomes_path = entry.path().join("outcomes.json");
        match std::fs::read_to_string(&outcomes_path) {
            Ok(text) => match serde_json::from_str::<Vec<RunOutcome>>(&text) {
                Ok(mut parsed) => outcomes.append(&mut parsed),
                Err(err) => {
                    eprintln!("ftg: error: {}: {err}", outcomes_path.display());
                    return ExitCode::FAILURE;
                }
            },
            Err(err) => {
                eprintln!("ftg: warning: {}: {err}", outcomes_path.display());
            }
        }
        let replay_path = entry.path().join("replay.json");
        if let Ok(text) = std::fs::read_to_string(&replay_path) {
            match serde_json::from_str::<BTreeMap<PathBuf, ReplayVerdict>>(&text) {
                Ok(parsed) => verdicts.extend(parsed),
                Err(err) => {
                    eprintln!("ftg: error: {}: {err}", replay_path.display());
                    return ExitCode::FAILURE;
                }
            }
        }
    }
    if outcomes.is_empty() {
        eprintln!("ftg: error: no outcomes under {}", args.artifact_dir.display());
        return ExitCode::FAILURE;
    }

    let target_count = args.targets.unwrap_or_else(|| {
        outcomes
            .iter()
            .map(|o| o.target_id.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    });
    match aggregate_and_render(&outcomes, &verdicts, target_count, &args.label, &args.artifact_dir)
    {
        Ok(table) => {
            print!("{table}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("ftg: error: {err}");
            ExitCode::FAILURE
        }
    }
}
