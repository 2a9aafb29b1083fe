//! Acceptance suite: one test per shipping criterion. Each prints a
//! PASS/FAIL line and enforces its runtime budget.
//!
//! Run with: cargo test -p ftg-cli --test acceptance -- --nocapture
//!
//! Criterion 3 builds and fuzzes the seeded-bug fixture library with a
//! real coverage-guided fuzzer; it needs `clang` with libFuzzer and
//! AddressSanitizer support on PATH, plus a working symbolizer
//! (`llvm-symbolizer` on PATH, or the `scripts/llvm-symbolizer` adapter
//! in this repository).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ftg_core::abi::{record_layout, AbiModel};
use ftg_core::c_model::{
    parse_translation_unit, BasicType, Field, FunctionSignature, Param, RecordDef, SourceLoc,
    SourceModel, TypeRef,
};
use ftg_core::campaign::{
    default_env_settings, replay_verify, run_campaign, schedule_round_robin, CampaignConfig,
    LibFuzzerRunner,
};
use ftg_core::codegen::{generate_target, harness_file_name, CodegenOptions};
use ftg_core::directives::{bind, extract_directives, AnnotatedFunction, ParamRole, TargetOrigin};
use ftg_core::layout::plan_layout;
use ftg_core::probe::probe_record_layouts;
use ftg_core::report::{
    dedup, render_table, reports_from_outcomes, row_from_means, summarize, BugKind, BugRecord,
    RepetitionData,
};
use ftg_core::{GeneratedTarget, LayoutPlan};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn repo_symbolizer() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/llvm-symbolizer")
}

/// Prefer a real llvm-symbolizer; fall back to the bundled adapter.
fn symbolizer_path() -> PathBuf {
    let native_works = Command::new("llvm-symbolizer")
        .arg("--version")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false);
    if native_works {
        PathBuf::from("llvm-symbolizer")
    } else {
        repo_symbolizer().canonicalize().expect("bundled symbolizer present")
    }
}

/// Run one criterion body, print its PASS/FAIL line, enforce its budget.
fn criterion<F>(number: u8, name: &str, budget: Duration, body: F)
where
    F: FnOnce() + std::panic::UnwindSafe,
{
    let start = Instant::now();
    let result = std::panic::catch_unwind(body);
    let elapsed = start.elapsed();
    let verdict = match &result {
        Ok(()) if elapsed <= budget => "PASS",
        _ => "FAIL",
    };
    println!(
        "acceptance criterion {number} ({name}): {verdict} [{elapsed:.2?}, budget {budget:?}]"
    );
    if let Err(panic) = result {
        std::panic::resume_unwind(panic);
    }
    assert!(
        elapsed <= budget,
        "criterion {number} exceeded its runtime budget: {elapsed:.2?} > {budget:?}"
    );
}

/// Annotated pipeline over one fixture file.
fn generate_annotated(path: &Path) -> Vec<(GeneratedTarget, LayoutPlan)> {
    let text = std::fs::read_to_string(path).unwrap();
    let file_name = path.file_name().unwrap().to_string_lossy().into_owned();
    let unit = parse_translation_unit(&text, &file_name).unwrap();
    let abi = AbiModel::lp64();
    let opts = CodegenOptions {
        include_lines: vec![format!("#include \"{file_name}\"")],
        ..CodegenOptions::default()
    };
    let mut out = Vec::new();
    for func in &unit.model.functions {
        let directives = extract_directives(&func.comment_block).unwrap();
        if directives.is_empty() {
            continue;
        }
        let bound = bind(&unit.model, func, &directives).unwrap();
        let plan = plan_layout(&unit.model, &abi, &bound).unwrap();
        let target = generate_target(&unit.model, &abi, &bound, &plan, &opts).unwrap();
        out.push((target, plan));
    }
    out
}

// ---------------------------------------------------------------------
// Criterion 1: the four documented directive examples parse, bind, plan,
// and generate; harnesses match golden files and the entry/call/copy
// structure. Budget: 1 s.
// ---------------------------------------------------------------------

#[test]
fn criterion_1_directive_fidelity() {
    criterion(1, "directive fidelity", Duration::from_secs(1), || {
        let cases: &[(&str, &str, &str, usize)] = &[
            // fixture, target function, golden file, expected slot copies
            ("example_array.h", "foo", "array_foo_fuzz.c", 0),
            ("example_value.h", "foo", "value_foo_fuzz.c", 1),
            ("example_cleanup.h", "allocate_some_memory", "cleanup_allocate_some_memory_fuzz.c", 1),
            (
                "example_output.h",
                "maybe_allocate_memory_to_output",
                "output_maybe_allocate_memory_to_output_fuzz.c",
                1,
            ),
        ];
        for &(fixture_name, function, golden_name, slot_copies) in cases {
            let targets = generate_annotated(&fixture(fixture_name));
            assert_eq!(targets.len(), 1, "{fixture_name}: one annotated function");
            let (target, plan) = &targets[0];
            assert_eq!(target.function_name, function);
            let src = &target.source_text;

            // Entry point exactly as libFuzzer expects, exactly once.
            assert_eq!(
                src.matches("int LLVMFuzzerTestOneInput(uint8_t *data, size_t size)").count(),
                1,
                "{fixture_name}"
            );
            // The target is called exactly once per invocation.
            assert_eq!(
                src.matches(&format!("{function}(")).count(),
                1,
                "{fixture_name}: exactly one call site"
            );
            // One memcpy per serialized slot (the array tail copy is
            // accounted separately).
            let expected_copies = slot_copies + usize::from(plan.array.is_some());
            assert_eq!(
                src.matches("memcpy(").count(),
                expected_copies,
                "{fixture_name}: copies"
            );
            assert_eq!(plan.slots.len(), slot_copies, "{fixture_name}: slots");

            let golden_path = golden(golden_name);
            if std::env::var_os("FTG_BLESS").is_some() {
                std::fs::write(&golden_path, src).unwrap();
            }
            let expected = std::fs::read_to_string(&golden_path)
                .unwrap_or_else(|_| panic!("golden file {golden_name} missing; run with FTG_BLESS=1"));
            assert_eq!(
                src, &expected,
                "{fixture_name}: harness text diverged from golden file"
            );
        }
    });
}

// ---------------------------------------------------------------------
// Criterion 2: layout invariants over 500 random signatures, and record
// layouts identical to the host compiler. Budget: 30 s.
// ---------------------------------------------------------------------

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn random_model_with_records(rng: &mut XorShift, count: usize) -> SourceModel {
    let basics = BasicType::all_sized();
    let mut model = SourceModel::new();
    for r in 0..count {
        let fields = 1 + rng.below(6) as usize;
        let rec = RecordDef {
            name: format!("R{r:02}"),
            fields: (0..fields)
                .map(|f| Field {
                    name: format!("f{f}"),
                    ty: TypeRef::Basic(basics[rng.below(basics.len() as u64) as usize]),
                })
                .collect(),
        };
        model.records.insert(rec.name.clone(), rec);
    }
    model
}

fn random_bound_function(rng: &mut XorShift, model: &SourceModel, index: usize) -> AnnotatedFunction {
    let basics = BasicType::all_sized();
    let integers: Vec<BasicType> = basics.iter().copied().filter(|b| b.is_integer()).collect();
    let mut params = Vec::new();
    let mut roles = Vec::new();
    let n_params = rng.below(7) as usize;
    for p in 0..n_params {
        let name = format!("p{p}");
        let position = params.len();
        match rng.below(8) {
            0 | 1 | 2 | 3 => {
                params.push(Param {
                    name,
                    ty: TypeRef::Basic(basics[rng.below(basics.len() as u64) as usize]),
                    position,
                });
                roles.push(ParamRole::Serialized);
            }
            4 | 5 => {
                let r = rng.below(model.records.len() as u64);
                params.push(Param { name, ty: TypeRef::Record(format!("R{r:02}")), position });
                roles.push(ParamRole::Serialized);
            }
            6 => {
                params.push(Param { name, ty: TypeRef::Basic(BasicType::Int), position });
                roles.push(ParamRole::Fixed("7".into()));
            }
            _ => {
                params.push(Param {
                    name,
                    ty: TypeRef::pointer_to(TypeRef::Basic(
                        basics[rng.below(basics.len() as u64) as usize],
                    )),
                    position,
                });
                roles.push(ParamRole::Output);
            }
        }
    }
    if rng.below(10) < 3 {
        let position = params.len();
        params.push(Param {
            name: format!("p{position}"),
            ty: TypeRef::pointer_to(TypeRef::Basic(
                basics[rng.below(basics.len() as u64) as usize],
            )),
            position,
        });
        roles.push(ParamRole::ArrayData);
        let position = params.len();
        params.push(Param {
            name: format!("p{position}"),
            ty: TypeRef::Basic(integers[rng.below(integers.len() as u64) as usize]),
            position,
        });
        roles.push(ParamRole::ArrayLen);
    }
    AnnotatedFunction {
        signature: FunctionSignature {
            name: format!("case_fn_{index}"),
            return_type: TypeRef::Basic(BasicType::Void),
            params,
            variadic: false,
            comment_block: String::new(),
            location: SourceLoc { file: "gen.c".into(), line: 1 },
        },
        roles,
        cleanup: None,
        origin: TargetOrigin::Annotated,
    }
}

#[test]
fn criterion_2_layout_correctness() {
    criterion(2, "layout correctness", Duration::from_secs(30), || {
        let mut rng = XorShift(0x0123_4567_89ab_cdef);
        let abi = AbiModel::lp64();
        let model = random_model_with_records(&mut rng, 64);

        // Record layouts: tool arithmetic vs the compiler, exactly.
        let measured = probe_record_layouts(&model).expect("compiler probe");
        for rec in model.records.values() {
            let ours = record_layout(&model, &abi, rec).unwrap();
            let theirs = &measured[&rec.name];
            assert_eq!(ours.total_size, theirs.total_size, "size of {}", rec.name);
            assert_eq!(ours.alignment, theirs.alignment, "alignment of {}", rec.name);
            for (a, b) in ours.fields.iter().zip(&theirs.fields) {
                assert_eq!((a.offset, a.size), (b.offset, b.size), "{}.{}", rec.name, a.name);
            }
        }

        // 500 random signatures: tiling, accounting, array accuracy.
        for case in 0..500 {
            let func = random_bound_function(&mut rng, &model, case);
            let plan = plan_layout(&model, &abi, &func).unwrap();

            let mut cursor = 0usize;
            for slot in &plan.slots {
                assert_eq!(slot.offset, cursor, "case {case}: packed offsets, no gaps");
                assert!(slot.length > 0);
                cursor += slot.length;
            }
            assert_eq!(plan.fixed_size, cursor, "case {case}: fixed_size accounting");
            assert_eq!(plan.min_input_size, plan.fixed_size);

            let serialized = func.roles.iter().filter(|r| **r == ParamRole::Serialized).count();
            assert_eq!(plan.slots.len(), serialized, "case {case}: one slot per serialized param");

            if let Some(array) = &plan.array {
                for extra in [0usize, 1, array.element_size, 3 * array.element_size + 1] {
                    let input = plan.fixed_size + extra;
                    let count = plan.element_count(input).unwrap();
                    assert!(count * array.element_size <= extra, "case {case}");
                    assert!(extra < (count + 1) * array.element_size, "case {case}");
                }
            }
        }
    });
}

// ---------------------------------------------------------------------
// Criterion 3: end-to-end seeded-bug reproduction with a real
// coverage-guided fuzzer. Five planted defects (2 overflows, 1
// use-after-free via cleanup misuse, 2 leaks), 60 s/target schedule,
// five repetitions; at least 4 of 5 defects found, replay-verified, and
// collapsed to one bug record per defect, in at least 4 of 5
// repetitions. Budget: 15 min.
// ---------------------------------------------------------------------

const DEFECTS: &[(&str, BugKind)] = &[
    ("decode_frame", BugKind::Crash),
    ("checksum_samples", BugKind::Crash),
    ("session_close", BugKind::Crash), // use-after-free via Cleanup on a dangling handle
    ("record_event", BugKind::Leak),
    ("format_message", BugKind::Leak),
];

#[test]
fn criterion_3_end_to_end_seeded_bugs() {
    criterion(3, "end-to-end seeded-bug reproduction", Duration::from_secs(15 * 60), || {
        let work = tempfile::tempdir().unwrap();
        let bins = work.path().join("bins");
        let arts = work.path().join("artifacts");
        std::fs::create_dir_all(&bins).unwrap();

        // Generate harnesses from the annotated fixture library.
        let targets = generate_annotated(&fixture("vulnlib.h"));
        assert_eq!(targets.len(), 5, "five annotated defect functions");

        // Build each target with libFuzzer + ASan.
        let fixtures_dir = fixture("");
        for (target, _) in &targets {
            let harness = work.path().join(harness_file_name(&target.function_name));
            std::fs::write(&harness, &target.source_text).unwrap();
            let out = Command::new("clang")
                .arg("-g")
                .arg("-O0")
                .arg("-fsanitize=fuzzer,address")
                .arg("-I")
                .arg(&fixtures_dir)
                .arg(&harness)
                .arg(fixture("vulnlib.c"))
                .arg("-o")
                .arg(bins.join(&target.target_id))
                .output()
                .expect("clang present (required for the end-to-end criterion)");
            assert!(
                out.status.success(),
                "clang failed for {}:\n{}",
                target.target_id,
                String::from_utf8_lossy(&out.stderr)
            );
        }

        // 60 s per target, five repetitions, sequential slots. Planted
        // defects are shallow; capping each slot at two collected
        // crashes keeps the run well inside the budget without touching
        // the 60 s/target schedule.
        let mut cfg = CampaignConfig::new(
            60 * targets.len() as u64,
            targets.iter().map(|(t, _)| t.target_id.clone()).collect(),
            arts.clone(),
            "libfuzzer".into(),
        );
        cfg.repeat_count = 5;
        cfg.env_settings = default_env_settings(Some(&symbolizer_path()));

        let mut runner = LibFuzzerRunner::new(&bins);
        runner.max_crashes_per_slot = Some(2);

        let result = run_campaign(&cfg, &runner).unwrap();
        assert!(result.failures.is_empty(), "{:?}", result.failures);

        // Verify every crashing input by replay, then dedup per
        // repetition by sanitizer token.
        let replay = replay_verify(&cfg, &result.outcomes, &runner);
        let (by_rep, parse_errors) = reports_from_outcomes(&result.outcomes);
        assert!(
            parse_errors.is_empty(),
            "all sanitizer logs should carry tokens: {parse_errors:?}"
        );

        let mut reps_meeting_threshold = 0u32;
        for rep in 0..5u32 {
            let reports = by_rep.get(&rep).cloned().unwrap_or_default();
            let records: Vec<BugRecord> = dedup(&reports, &replay.verdicts, rep);

            let mut found = 0;
            for (defect, kind) in DEFECTS {
                let matching: Vec<&BugRecord> = records
                    .iter()
                    .filter(|r| r.dedup_token.contains(defect))
                    .collect();
                if matching.is_empty() {
                    continue;
                }
                found += 1;
                assert_eq!(
                    matching.len(),
                    1,
                    "rep {rep}: defect {defect} must collapse to one bug record, got {matching:?}"
                );
                assert_eq!(matching[0].kind, *kind, "rep {rep}: {defect} kind");
                assert!(matching[0].reproduced);
            }
            println!("  rep {rep}: {found}/5 planted defects found ({} records)", records.len());
            if found >= 4 {
                reps_meeting_threshold += 1;
            }
        }
        assert!(
            reps_meeting_threshold >= 4,
            "needed >= 4/5 defects in at least 4 of 5 repetitions, got {reps_meeting_threshold}"
        );
    });
}

// ---------------------------------------------------------------------
// Criterion 4: scheduling exactness for 1000 random (T, n) pairs plus
// the documented configurations. Budget: 1 s.
// ---------------------------------------------------------------------

#[test]
fn criterion_4_scheduling_exactness() {
    criterion(4, "scheduling exactness", Duration::from_secs(1), || {
        let check = |total: u64, n: usize| {
            let cfg = CampaignConfig::new(
                total,
                (0..n).map(|i| format!("t{i}")).collect(),
                PathBuf::from("/unused"),
                "mock".into(),
            );
            let slots = schedule_round_robin(&cfg).unwrap();
            assert_eq!(slots.len(), n);
            let sum: u64 = slots.iter().map(|s| s.duration_secs).sum();
            assert_eq!(sum, total, "time conservation for T={total}, n={n}");
            let max = slots.iter().map(|s| s.duration_secs).max().unwrap();
            let min = slots.iter().map(|s| s.duration_secs).min().unwrap();
            assert!(max - min <= 1, "fairness for T={total}, n={n}");
            slots
        };

        // Ten hours over 66, 6, and 1 targets.
        let slots = check(36_000, 66);
        assert_eq!(slots[0].duration_secs, 546);
        assert_eq!(slots[65].duration_secs, 545);
        assert!(slots[..30].iter().all(|s| s.duration_secs == 546));
        let slots = check(36_000, 6);
        assert!(slots.iter().all(|s| s.duration_secs == 6_000));
        let slots = check(36_000, 1);
        assert_eq!(slots[0].duration_secs, 36_000);

        let mut rng = XorShift(0xfeed_beef_cafe_f00d);
        for _ in 0..1_000 {
            let total = 1 + rng.below(500_000);
            let n = 1 + rng.below(total.min(800)) as usize;
            check(total, n);
        }
    });
}

// ---------------------------------------------------------------------
// Criterion 5: report arithmetic reproduces the documented results row
// (66 targets, crashes 82.6, leaks 11 -> total 93.6, 1.42 bugs/target).
// Budget: 1 s.
// ---------------------------------------------------------------------

#[test]
fn criterion_5_report_arithmetic() {
    criterion(5, "report arithmetic", Duration::from_secs(1), || {
        // Five repetitions whose per-repetition counts average to the
        // published values: crashes 82.6 and leaks 11.
        let crash_counts = [83usize, 83, 83, 82, 82];
        let per_rep: Vec<RepetitionData> = (0..5)
            .map(|rep| {
                let mut bug_records = Vec::new();
                for c in 0..crash_counts[rep] {
                    bug_records.push(BugRecord {
                        dedup_token: format!("c{c}"),
                        kind: BugKind::Crash,
                        first_seen: ("t".into(), rep as u32),
                        reproduced: true,
                    });
                }
                for l in 0..11 {
                    bug_records.push(BugRecord {
                        dedup_token: format!("l{l}"),
                        kind: BugKind::Leak,
                        first_seen: ("t".into(), rep as u32),
                        reproduced: true,
                    });
                }
                RepetitionData { repetition: rep as u32, reports: Vec::new(), bug_records }
            })
            .collect();

        let row = summarize(&per_rep, 66, "Automated");
        assert_eq!(format!("{:.1}", row.unique_crashes), "82.6");
        assert_eq!(format!("{:.1}", row.unique_leaks), "11.0");
        assert_eq!(format!("{:.1}", row.total_bugs), "93.6");
        assert_eq!(format!("{:.2}", row.bugs_per_target), "1.42");

        // The distinct-inputs column renders the published mean as-is.
        let automated = row_from_means("Automated", 66, 209_797.6, 82.6, 11.0);
        assert_eq!(format!("{:.1}", automated.distinct_bug_inputs), "209797.6");
        let table = render_table(std::slice::from_ref(&automated));
        assert!(table.contains("93.6"), "{table}");
        assert!(table.contains("1.42"), "{table}");

        // The single-target row: total 4.8 bugs over one target.
        let manual = row_from_means("Manual", 1, 73_465.0, 1.8, 3.0);
        assert_eq!(format!("{:.1}", manual.total_bugs), "4.8");
        assert_eq!(format!("{:.2}", manual.bugs_per_target), "4.80");
    });
}

// ---------------------------------------------------------------------
// Criterion 6: guard behavior for every generated harness. Inputs
// shorter than min_input_size make zero target calls; inputs of exactly
// min_input_size make one. Budget: 10 s.
// ---------------------------------------------------------------------

#[test]
fn criterion_6_guard_behavior() {
    criterion(6, "guard behavior", Duration::from_secs(10), || {
        let targets = generate_annotated(&fixture("guard_corpus.h"));
        assert_eq!(targets.len(), 5);

        let work = tempfile::tempdir().unwrap();
        for name in ["guard_corpus.h", "guard_stubs.c", "guard_driver.c"] {
            std::fs::copy(fixture(name), work.path().join(name)).unwrap();
        }

        let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
        for (target, plan) in &targets {
            let harness = harness_file_name(&target.function_name);
            std::fs::write(work.path().join(&harness), &target.source_text).unwrap();
            let bin = work.path().join(format!("drive_{}", target.function_name));
            let out = Command::new(&cc)
                .current_dir(work.path())
                .args(["-Wall", "-Werror", &harness, "guard_stubs.c", "guard_driver.c", "-o"])
                .arg(&bin)
                .output()
                .expect("cc present");
            assert!(
                out.status.success(),
                "compile failed for {}:\n{}",
                target.function_name,
                String::from_utf8_lossy(&out.stderr)
            );

            let calls_at = |size: usize| -> u64 {
                let out = Command::new(&bin).arg(size.to_string()).output().unwrap();
                assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
                String::from_utf8_lossy(&out.stdout)
                    .lines()
                    .find_map(|l| l.strip_prefix("calls=").and_then(|n| n.parse().ok()))
                    .expect("driver prints the call count")
            };

            if plan.min_input_size > 0 {
                assert_eq!(
                    calls_at(plan.min_input_size - 1),
                    0,
                    "{}: input below the minimum must not reach the target",
                    target.function_name
                );
            }
            assert_eq!(
                calls_at(plan.min_input_size),
                1,
                "{}: input of exactly the minimum size calls the target once",
                target.function_name
            );
        }
    });
}
