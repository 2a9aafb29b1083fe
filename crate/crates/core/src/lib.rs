//! Fuzz target generation and campaign tooling for C codebases.
//!
//! The pipeline runs in stages, each of which is usable on its own:
//!
//! 1. [`c_model`] parses a pragmatic subset of C into a queryable
//!    [`SourceModel`] of records, typedefs, and function signatures with
//!    their attached comment blocks.
//! 2. [`directives`] extracts `@fuzztest` annotations from those comment
//!    blocks and binds them to parameters, while [`discovery`] selects
//!    functions that can be fuzzed with no annotations at all.
//! 3. [`abi`] and [`layout`] map a function's parameter list onto a single
//!    contiguous fuzzer input buffer, byte by byte.
//! 4. [`codegen`] emits a compilable C harness implementing the
//!    `LLVMFuzzerTestOneInput` entry point for each planned target, plus a
//!    build manifest.
//! 5. [`campaign`] schedules round-robin fuzzing runs over the built
//!    targets, collects crash artifacts, and replays them for verification.
//! 6. [`report`] parses sanitizer logs, deduplicates bugs by their
//!    `DEDUP_TOKEN`, and renders the results summary.

pub mod abi;
pub mod c_model;
pub mod campaign;
pub mod codegen;
pub mod diag;
pub mod directives;
pub mod discovery;
pub mod layout;
pub mod probe;
pub mod report;

pub use abi::{AbiModel, RecordLayout};
pub use c_model::{
    parse_translation_unit, BasicType, FunctionSignature, Param, RecordDef, SourceModel, TypeRef,
};
pub use campaign::{CampaignConfig, FuzzerRunner, RunOutcome, ScheduleSlot};
pub use codegen::{CodegenOptions, GeneratedTarget};
pub use diag::Diagnostic;
pub use directives::{AnnotatedFunction, Directive, ParamRole, TargetOrigin};
pub use discovery::DiscoveryReport;
pub use layout::{FieldSlot, LayoutPlan};
pub use report::{BugKind, BugRecord, ResultsRow, SanitizerReport};
