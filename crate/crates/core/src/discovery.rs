//! Fully automated target selection: every function that can be fuzzed
//! with no annotations at all.
//!
//! A function is eligible when every parameter classifies BASIC or
//! STRUCT_OF_BASIC (a pointer has no safe serialization without a
//! directive) and it has at least one parameter. Functions carrying an
//! explicit `@fuzztest` block belong to the annotated pipeline and are
//! excluded here. Auto targets never get cleanup calls, so target
//! functions that allocate can produce leak reports; that is the
//! trade-off of running with zero developer input.

use std::fmt;

use crate::c_model::{classify_type, ModelError, SourceModel, TypeClass};
use crate::directives::{
    has_fuzztest_token, validate_roles, AnnotatedFunction, ParamRole, TargetOrigin,
};

/// Machine-readable reason a function was not auto-selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Carries an `@fuzztest` block; handled by the annotated pipeline.
    Annotated,
    NoParams,
    Variadic,
    UnserializableParam,
    UnresolvedType,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SkipReason::Annotated => "ANNOTATED",
            SkipReason::NoParams => "NO_PARAMS",
            SkipReason::Variadic => "VARIADIC",
            SkipReason::UnserializableParam => "UNSERIALIZABLE_PARAM",
            SkipReason::UnresolvedType => "UNRESOLVED_TYPE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DiscoveryReport {
    /// Auto targets: all roles SERIALIZED, no cleanup, origin AUTO, in
    /// source declaration order.
    pub eligible: Vec<AnnotatedFunction>,
    pub skipped: Vec<(String, SkipReason)>,
}

/// Select every function eligible for fully automated generation.
///
/// Total over all models: every parsed function lands in exactly one of
/// `eligible` or `skipped`.
pub fn discover(model: &SourceModel) -> DiscoveryReport {
    let mut report = DiscoveryReport::default();

    'functions: for func in &model.functions {
        if has_fuzztest_token(&func.comment_block) {
            report.skipped.push((func.name.clone(), SkipReason::Annotated));
            continue;
        }
        if func.variadic {
            report.skipped.push((func.name.clone(), SkipReason::Variadic));
            continue;
        }
        if func.params.is_empty() {
            report.skipped.push((func.name.clone(), SkipReason::NoParams));
            continue;
        }
        for param in &func.params {
            match classify_type(model, &param.ty) {
                Ok(TypeClass::Basic | TypeClass::StructOfBasic) => {}
                Ok(_) => {
                    report
                        .skipped
                        .push((func.name.clone(), SkipReason::UnserializableParam));
                    continue 'functions;
                }
                Err(ModelError::UnresolvedName(_) | ModelError::AliasCycle(_)) => {
                    report
                        .skipped
                        .push((func.name.clone(), SkipReason::UnresolvedType));
                    continue 'functions;
                }
            }
        }

        let roles = vec![ParamRole::Serialized; func.params.len()];
        debug_assert!(validate_roles(model, func, &roles).is_ok());
        report.eligible.push(AnnotatedFunction {
            signature: func.clone(),
            roles,
            cleanup: None,
            origin: TargetOrigin::Auto,
        });
    }

    report
}
