//! C harness emission.
//!
//! Each generated file defines exactly one `LLVMFuzzerTestOneInput` entry
//! point that deserializes the input buffer according to a [`LayoutPlan`]
//! and calls the target function exactly once. The emitted scheme is a
//! size guard, one zero-initialized local plus `memcpy` per slot with an
//! advancing cursor, verbatim splices for fixed values, zeroed local
//! storage for output parameters, an optional aligned copy of the buffer
//! tail for the array region, return-value capture when cleanup needs it,
//! and the cleanup call (conditional when a condition was given).
//!
//! `_Static_assert` lines pin the compiler's `sizeof` for every slot type
//! to the byte counts the manifest promises, so an ABI mismatch between
//! the tool and the build fails at compile time instead of corrupting
//! corpora silently.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::abi::AbiModel;
use crate::c_model::{resolve_type, SourceModel, TypeRef};
use crate::directives::{
    mentions_identifier, AnnotatedFunction, ParamRole, TargetOrigin, FUZZER_RETURN_VALUE,
};
use crate::layout::LayoutPlan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodegenOptions {
    /// Raw lines emitted after the system includes, normally `#include`
    /// directives for the headers declaring the target function. When
    /// empty, a prototype for the target is emitted instead so bare
    /// fixtures still compile.
    pub include_lines: Vec<String>,
    /// Copy the buffer tail into freshly allocated storage aligned for
    /// the element type instead of passing an interior buffer pointer.
    /// Avoids undefined behavior from misaligned element access.
    pub aligned_array_copy: bool,
    /// Return 0 without calling the target when the input is shorter
    /// than `min_input_size`.
    pub emit_size_guard: bool,
}

impl Default for CodegenOptions {
    fn default() -> Self {
        CodegenOptions {
            include_lines: Vec::new(),
            aligned_array_copy: true,
            emit_size_guard: true,
        }
    }
}

/// An emitted harness plus the metadata the manifest records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedTarget {
    /// Function name plus ordinal, e.g. `func1_0`.
    pub target_id: String,
    pub source_text: String,
    pub min_input_size: usize,
    pub function_name: String,
    pub origin: TargetOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodegenError {
    /// Internal inconsistency between the bound function and its plan;
    /// a programming error upstream, not a user error.
    #[error("emit failure: {0}")]
    EmitFailure(String),
}

/// File the harness for `function_name` is written to.
pub fn harness_file_name(function_name: &str) -> String {
    format!("{function_name}_fuzz.c")
}

struct NamePool {
    used: BTreeSet<String>,
}

impl NamePool {
    fn new() -> Self {
        // `data` and `size` are taken by the entry point's own parameters.
        let mut used = BTreeSet::new();
        used.insert("data".to_string());
        used.insert("size".to_string());
        NamePool { used }
    }

    fn reserve(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        while self.used.contains(&name) {
            name.push('_');
        }
        self.used.insert(name.clone());
        name
    }
}

fn declare(ty_text: &str, name: &str) -> String {
    if ty_text.ends_with('*') {
        format!("{ty_text}{name}")
    } else {
        format!("{ty_text} {name}")
    }
}

/// Emit the harness for one bound function and its layout plan.
pub fn generate_target(
    model: &SourceModel,
    _abi: &AbiModel,
    func: &AnnotatedFunction,
    plan: &LayoutPlan,
    opts: &CodegenOptions,
) -> Result<GeneratedTarget, CodegenError> {
    let sig = &func.signature;
    if func.roles.len() != sig.params.len() {
        return Err(CodegenError::EmitFailure(format!(
            "{}: {} roles for {} parameters",
            sig.name,
            func.roles.len(),
            sig.params.len()
        )));
    }
    let serialized = func
        .roles
        .iter()
        .filter(|r| **r == ParamRole::Serialized)
        .count();
    if serialized != plan.slots.len() {
        return Err(CodegenError::EmitFailure(format!(
            "{}: plan has {} slots for {} serialized parameters",
            sig.name,
            plan.slots.len(),
            serialized
        )));
    }

    let mut names = NamePool::new();
    // Call-site expression for each parameter, by position.
    let mut call_exprs: Vec<Option<String>> = vec![None; sig.params.len()];
    for (param, role) in sig.params.iter().zip(&func.roles) {
        match role {
            ParamRole::Fixed(text) => call_exprs[param.position] = Some(text.clone()),
            _ => call_exprs[param.position] = Some(names.reserve(&param.name)),
        }
    }

    let ret_is_void = sig.return_type == TypeRef::Basic(crate::c_model::BasicType::Void);
    let capture_return = func.cleanup.as_ref().is_some_and(|c| {
        c.args.iter().any(|a| mentions_identifier(a, FUZZER_RETURN_VALUE))
            || c.condition
                .as_deref()
                .is_some_and(|t| mentions_identifier(t, FUZZER_RETURN_VALUE))
    });
    if capture_return && ret_is_void {
        return Err(CodegenError::EmitFailure(format!(
            "{}: cleanup captures the return value of a void function",
            sig.name
        )));
    }

    let needs_cursor = !plan.slots.is_empty() || plan.array.is_some();
    let guard = opts.emit_size_guard && plan.min_input_size > 0;
    let uses_size = guard || plan.array.is_some();

    let mut src = String::new();
    let w = &mut src;

    writeln!(
        w,
        "/* Fuzz target for {} (minimum input: {} bytes). Generated; do not edit. */",
        sig.name, plan.min_input_size
    )
    .unwrap();
    writeln!(w, "#include <stddef.h>").unwrap();
    writeln!(w, "#include <stdint.h>").unwrap();
    writeln!(w, "#include <string.h>").unwrap();
    if (plan.array.is_some() && opts.aligned_array_copy) || func.cleanup.is_some() {
        writeln!(w, "#include <stdlib.h>").unwrap();
    }
    writeln!(w).unwrap();

    if opts.include_lines.is_empty() {
        let params = if sig.params.is_empty() && !sig.variadic {
            "void".to_string()
        } else {
            sig.params
                .iter()
                .map(|p| declare(&p.ty.c_text(), &p.name))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(w, "{};", declare(&sig.return_type.c_text(), &format!("{}({})", sig.name, params))).unwrap();
        writeln!(w).unwrap();
    } else {
        for line in &opts.include_lines {
            writeln!(w, "{line}").unwrap();
        }
        writeln!(w).unwrap();
    }

    // Pin the build's sizeof to the planned byte counts.
    let mut asserted: BTreeSet<String> = BTreeSet::new();
    for slot in &plan.slots {
        let text = slot.target_type.c_text();
        if asserted.insert(text.clone()) {
            writeln!(
                w,
                "_Static_assert(sizeof({text}) == {}, \"unexpected size for {text}\");",
                slot.length
            )
            .unwrap();
        }
    }
    if let Some(array) = &plan.array {
        let text = array.element_type.c_text();
        if asserted.insert(text.clone()) {
            writeln!(
                w,
                "_Static_assert(sizeof({text}) == {}, \"unexpected size for {text}\");",
                array.element_size
            )
            .unwrap();
        }
    }
    if !asserted.is_empty() {
        writeln!(w).unwrap();
    }

    writeln!(w, "int LLVMFuzzerTestOneInput(uint8_t *data, size_t size) {{").unwrap();
    if guard {
        writeln!(w, "    if (size < {}) {{", plan.min_input_size).unwrap();
        writeln!(w, "        return 0;").unwrap();
        writeln!(w, "    }}").unwrap();
    }
    if !needs_cursor {
        writeln!(w, "    (void)data;").unwrap();
    }
    if !uses_size {
        writeln!(w, "    (void)size;").unwrap();
    }

    let pos = if needs_cursor {
        let pos = names.reserve("pos");
        writeln!(w, "    uint8_t *{pos} = data;").unwrap();
        pos
    } else {
        String::new()
    };

    // Slot deserialization, Listing-style: zeroed local, memcpy, advance.
    for (i, slot) in plan.slots.iter().enumerate() {
        let param = &sig.params[slot.param_position];
        let local = call_exprs[slot.param_position].as_ref().unwrap();
        let ty_text = slot.target_type.c_text();
        let resolved = resolve_type(model, &slot.target_type).map_err(|e| {
            CodegenError::EmitFailure(format!("{}: {e}", param.name))
        })?;
        match resolved {
            TypeRef::Basic(_) => {
                writeln!(w, "    {} = 0;", declare(&ty_text, local)).unwrap();
            }
            _ => {
                writeln!(w, "    {};", declare(&ty_text, local)).unwrap();
                writeln!(w, "    memset(&{local}, 0, sizeof({local}));").unwrap();
            }
        }
        writeln!(w, "    memcpy(&{local}, {pos}, sizeof({ty_text}));").unwrap();
        let last = i + 1 == plan.slots.len() && plan.array.is_none();
        if !last {
            writeln!(w, "    {pos} += sizeof({ty_text});").unwrap();
        }
    }

    // Output parameters: zeroed storage of the pointee type, pass its
    // address through a pointer local named after the parameter so
    // cleanup text can refer to it directly.
    for (param, role) in sig.params.iter().zip(&func.roles) {
        if *role != ParamRole::Output {
            continue;
        }
        let TypeRef::Pointer(pointee) = &param.ty else {
            return Err(CodegenError::EmitFailure(format!(
                "{}: output parameter `{}` is not a pointer",
                sig.name, param.name
            )));
        };
        let local = call_exprs[param.position].as_ref().unwrap().clone();
        let storage = names.reserve(&format!("{}_storage", param.name));
        let pointee_text = pointee.c_text();
        writeln!(w, "    {};", declare(&pointee_text, &storage)).unwrap();
        writeln!(w, "    memset(&{storage}, 0, sizeof({storage}));").unwrap();
        writeln!(w, "    {} = &{storage};", declare(&param.ty.c_text(), &local)).unwrap();
    }

    // Array region: everything after the fixed slots.
    let mut array_to_free: Option<String> = None;
    if let Some(array) = &plan.array {
        let data_local = call_exprs[array.data_param_position].as_ref().unwrap().clone();
        let len_param = &sig.params[array.len_param_position];
        let len_local = call_exprs[array.len_param_position].as_ref().unwrap().clone();
        let elem = array.element_type.c_text();
        let remaining = names.reserve("remaining");
        let count = names.reserve("count");

        if plan.fixed_size == 0 {
            writeln!(w, "    size_t {remaining} = size;").unwrap();
        } else if guard {
            writeln!(w, "    size_t {remaining} = size - {};", plan.fixed_size).unwrap();
        } else {
            writeln!(
                w,
                "    size_t {remaining} = size > {fixed} ? size - {fixed} : 0;",
                fixed = plan.fixed_size
            )
            .unwrap();
        }
        writeln!(w, "    size_t {count} = {remaining} / sizeof({elem});").unwrap();

        if opts.aligned_array_copy {
            writeln!(w, "    {} = NULL;", declare(&format!("{elem} *"), &data_local)).unwrap();
            writeln!(w, "    if ({count} > 0) {{").unwrap();
            writeln!(w, "        {data_local} = ({elem} *)malloc({count} * sizeof({elem}));").unwrap();
            writeln!(w, "        if ({data_local} == NULL) {{").unwrap();
            writeln!(w, "            return 0;").unwrap();
            writeln!(w, "        }}").unwrap();
            writeln!(w, "        memcpy({data_local}, {pos}, {count} * sizeof({elem}));").unwrap();
            writeln!(w, "    }}").unwrap();
            array_to_free = Some(data_local.clone());
        } else {
            writeln!(w, "    {} = ({elem} *){pos};", declare(&format!("{elem} *"), &data_local)).unwrap();
        }
        let len_ty = len_param.ty.c_text();
        writeln!(w, "    {} = ({len_ty}){count};", declare(&len_ty, &len_local)).unwrap();
    }

    // The call, with the return value captured when cleanup needs it.
    let args: Vec<String> = sig
        .params
        .iter()
        .map(|p| call_exprs[p.position].clone().unwrap())
        .collect();
    let call = format!("{}({})", sig.name, args.join(", "));
    let ret_name = if capture_return {
        let ret = names.reserve("ret");
        writeln!(w, "    {} = {call};", declare(&sig.return_type.c_text(), &ret)).unwrap();
        Some(ret)
    } else {
        writeln!(w, "    {call};").unwrap();
        None
    };

    // Cleanup call, with fuzzer_return_value and parameter names
    // rewritten to their call-site expressions.
    if let Some(cleanup) = &func.cleanup {
        let rewrite = |text: &str| -> String {
            let mut substitutions: Vec<(&str, String)> = Vec::new();
            if let Some(ret) = &ret_name {
                substitutions.push((FUZZER_RETURN_VALUE, ret.clone()));
            }
            for param in &sig.params {
                let expr = call_exprs[param.position].as_ref().unwrap();
                if expr != &param.name {
                    substitutions.push((param.name.as_str(), expr.clone()));
                }
            }
            substitute_identifiers(text, &substitutions)
        };
        let args = cleanup.args.iter().map(|a| rewrite(a)).collect::<Vec<_>>().join(", ");
        let call = format!("{}({args});", cleanup.function);
        match &cleanup.condition {
            Some(cond) => {
                writeln!(w, "    if ({}) {{", rewrite(cond)).unwrap();
                writeln!(w, "        {call}").unwrap();
                writeln!(w, "    }}").unwrap();
            }
            None => writeln!(w, "    {call}").unwrap(),
        }
    }

    if let Some(arr) = array_to_free {
        writeln!(w, "    free({arr});").unwrap();
    }
    writeln!(w, "    return 0;").unwrap();
    writeln!(w, "}}").unwrap();

    Ok(GeneratedTarget {
        target_id: format!("{}_0", sig.name),
        source_text: src,
        min_input_size: plan.min_input_size,
        function_name: sig.name.clone(),
        origin: func.origin,
    })
}

/// Replace whole-identifier occurrences, longest-needle-first.
fn substitute_identifiers(text: &str, substitutions: &[(&str, String)]) -> String {
    let mut subs: Vec<&(&str, String)> = substitutions.iter().collect();
    subs.sort_by_key(|(needle, _)| std::cmp::Reverse(needle.len()));

    let bytes = text.as_bytes();
    let mut out = String::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && {
                let c = bytes[i] as char;
                c.is_ascii_alphanumeric() || c == '_'
            } {
                i += 1;
            }
            let ident = &text[start..i];
            match subs.iter().find(|(needle, _)| *needle == ident) {
                Some((_, replacement)) => out.push_str(replacement),
                None => out.push_str(ident),
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

/// The manifest version marker; the first line of every manifest.
pub const MANIFEST_VERSION: &str = "ftg-manifest v1";

/// Render the build manifest: one record per target with its harness
/// file, minimum input size, slot table, and array info, ordered by
/// target id.
pub fn generate_manifest(targets: &[GeneratedTarget], plans: &[LayoutPlan]) -> String {
    assert_eq!(targets.len(), plans.len(), "targets and plans must be parallel");
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a].target_id.cmp(&targets[b].target_id));

    let mut out = String::new();
    writeln!(out, "{MANIFEST_VERSION}").unwrap();
    for idx in order {
        let target = &targets[idx];
        let plan = &plans[idx];
        writeln!(out).unwrap();
        writeln!(
            out,
            "target id={} function={} file={} origin={} min_input_size={} slots={}",
            target.target_id,
            target.function_name,
            harness_file_name(&target.function_name),
            target.origin,
            target.min_input_size,
            plan.slots.len(),
        )
        .unwrap();
        for slot in &plan.slots {
            writeln!(
                out,
                "slot position={} offset={} length={} type={}",
                slot.param_position, slot.offset, slot.length, slot.target_type.c_text()
            )
            .unwrap();
        }
        match &plan.array {
            Some(array) => writeln!(
                out,
                "array data_position={} len_position={} element_size={} element_type={}",
                array.data_param_position,
                array.len_param_position,
                array.element_size,
                array.element_type.c_text()
            )
            .unwrap(),
            None => writeln!(out, "array none").unwrap(),
        }
    }
    out
}

/// One record read back from a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub target_id: String,
    pub function_name: String,
    pub file: String,
    pub origin: String,
    pub min_input_size: usize,
    pub slots: Vec<ManifestSlot>,
    pub array: Option<ManifestArray>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestSlot {
    pub position: usize,
    pub offset: usize,
    pub length: usize,
    pub type_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestArray {
    pub data_position: usize,
    pub len_position: usize,
    pub element_size: usize,
    pub element_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManifestError {
    #[error("unsupported manifest version `{0}` (expected `{MANIFEST_VERSION}`)")]
    Version(String),
    #[error("manifest line {0}: {1}")]
    Malformed(usize, String),
}

/// Parse a manifest previously rendered by [`generate_manifest`].
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut lines = text.lines().enumerate();
    let version = lines
        .next()
        .map(|(_, l)| l.trim())
        .unwrap_or_default()
        .to_string();
    if version != MANIFEST_VERSION {
        return Err(ManifestError::Version(version));
    }

    fn field(pairs: &[(String, String)], key: &str, line_no: usize) -> Result<String, ManifestError> {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| ManifestError::Malformed(line_no, format!("missing `{key}=`")))
    }
    fn parse_num(s: &str, line_no: usize) -> Result<usize, ManifestError> {
        s.parse()
            .map_err(|_| ManifestError::Malformed(line_no, format!("bad number `{s}`")))
    }
    // Split `k=v` fields; the value of `last_key` (if present) runs to
    // the end of the line so type spellings may contain spaces.
    fn pairs_of(rest: &str, last_key: Option<&str>) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        let mut remainder = rest.trim();
        if let Some(last) = last_key {
            let marker = format!("{last}=");
            if let Some(at) = remainder.find(&marker) {
                let value = remainder[at + marker.len()..].to_string();
                pairs.push((last.to_string(), value));
                remainder = remainder[..at].trim_end();
            }
        }
        for piece in remainder.split_whitespace() {
            if let Some((k, v)) = piece.split_once('=') {
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        pairs
    }

    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (kind, rest) = line.split_once(' ').unwrap_or((line, ""));
        match kind {
            "target" => {
                let pairs = pairs_of(rest, None);
                entries.push(ManifestEntry {
                    target_id: field(&pairs, "id", line_no)?,
                    function_name: field(&pairs, "function", line_no)?,
                    file: field(&pairs, "file", line_no)?,
                    origin: field(&pairs, "origin", line_no)?,
                    min_input_size: parse_num(&field(&pairs, "min_input_size", line_no)?, line_no)?,
                    slots: Vec::new(),
                    array: None,
                });
            }
            "slot" => {
                let pairs = pairs_of(rest, Some("type"));
                let entry = entries
                    .last_mut()
                    .ok_or_else(|| ManifestError::Malformed(line_no, "slot before target".into()))?;
                entry.slots.push(ManifestSlot {
                    position: parse_num(&field(&pairs, "position", line_no)?, line_no)?,
                    offset: parse_num(&field(&pairs, "offset", line_no)?, line_no)?,
                    length: parse_num(&field(&pairs, "length", line_no)?, line_no)?,
                    type_text: field(&pairs, "type", line_no)?,
                });
            }
            "array" => {
                let entry = entries
                    .last_mut()
                    .ok_or_else(|| ManifestError::Malformed(line_no, "array before target".into()))?;
                if rest.trim() == "none" {
                    entry.array = None;
                } else {
                    let pairs = pairs_of(rest, Some("element_type"));
                    entry.array = Some(ManifestArray {
                        data_position: parse_num(&field(&pairs, "data_position", line_no)?, line_no)?,
                        len_position: parse_num(&field(&pairs, "len_position", line_no)?, line_no)?,
                        element_size: parse_num(&field(&pairs, "element_size", line_no)?, line_no)?,
                        element_type: field(&pairs, "element_type", line_no)?,
                    });
                }
            }
            other => {
                return Err(ManifestError::Malformed(line_no, format!("unknown record `{other}`")));
            }
        }
    }
    Ok(entries)
}
