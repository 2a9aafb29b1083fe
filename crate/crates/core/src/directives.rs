//! `@fuzztest` directive extraction and parameter binding.
//!
//! Grammar, applied to the comment block above a function: an `@fuzztest`
//! token, then zero or more `Name(args)` groups separated by whitespace,
//! continuing across subsequent comment lines of the same block. Args
//! split on top-level commas only (commas inside nested parentheses do
//! not split), with leading/trailing whitespace trimmed. An empty first
//! `Cleanup` arg denotes "no condition".

use std::fmt;

use crate::c_model::{
    classify_type, resolve_type, FunctionSignature, SourceModel, TypeClass, TypeRef,
};

/// One parsed directive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    FuzzTest,
    /// `Array(ptr_param, len_param)`: the named pair is an array and its
    /// length. Only one Array is supported per target.
    Array { ptr_param: String, len_param: String },
    /// `Value(param, value)`: splice `value` verbatim at the call site
    /// instead of reading the parameter from the fuzzer input.
    Value { param: String, value_text: String },
    /// `Output(param)`: pass zero-initialized local storage; the fuzzer
    /// input contributes nothing.
    Output { param: String },
    /// `Cleanup(condition, function [, params])`: call `function` after
    /// the target; `fuzzer_return_value` in the args or condition names
    /// the captured return value.
    Cleanup {
        condition_text: String,
        function_name: String,
        arg_texts: Vec<String>,
    },
}

/// The role a parameter plays in the serialized input format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamRole {
    /// Read `sizeof(type)` bytes from the input buffer (the default).
    Serialized,
    ArrayData,
    ArrayLen,
    /// Fixed to verbatim C expression text.
    Fixed(String),
    Output,
}

impl ParamRole {
    pub fn consumes_input(&self) -> bool {
        matches!(self, ParamRole::Serialized | ParamRole::ArrayData)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetOrigin {
    Annotated,
    Auto,
}

impl fmt::Display for TargetOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetOrigin::Annotated => write!(f, "annotated"),
            TargetOrigin::Auto => write!(f, "auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanupSpec {
    /// `None` when the directive's first argument was empty.
    pub condition: Option<String>,
    pub function: String,
    pub args: Vec<String>,
}

/// A function signature with a resolved role for every parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedFunction {
    pub signature: FunctionSignature,
    /// One role per parameter, indexed by position.
    pub roles: Vec<ParamRole>,
    pub cleanup: Option<CleanupSpec>,
    pub origin: TargetOrigin,
}

impl AnnotatedFunction {
    pub fn role(&self, position: usize) -> &ParamRole {
        &self.roles[position]
    }

    pub fn array_pair(&self) -> Option<(usize, usize)> {
        let data = self.roles.iter().position(|r| *r == ParamRole::ArrayData)?;
        let len = self.roles.iter().position(|r| *r == ParamRole::ArrayLen)?;
        Some((data, len))
    }
}

/// The special cleanup identifier naming the target's return value.
pub const FUZZER_RETURN_VALUE: &str = "fuzzer_return_value";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DirectiveError {
    #[error("line {line}, column {column}: malformed directive: {reason}")]
    Malformed { line: u32, column: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("directive `{directive}` names unknown parameter `{param}`")]
    UnknownParam { directive: String, param: String },
    #[error("only one Array directive is supported per target")]
    MultipleArrays,
    #[error("only one Cleanup directive is supported per target")]
    MultipleCleanups,
    #[error("parameter `{param}` is named by more than one directive")]
    ConflictingRoles { param: String },
    #[error("Array data parameter `{param}` is not a pointer")]
    NonPointerArrayData { param: String },
    #[error("Array length parameter `{param}` is not a basic integer")]
    NonIntegerArrayLen { param: String },
    #[error("Output parameter `{param}` is not a pointer")]
    NonPointerOutput { param: String },
    #[error("parameter `{param}` has no serializable representation ({class}); annotate it or exclude the function")]
    UnserializableParam { param: String, class: String },
    #[error("cleanup references `fuzzer_return_value` but the target returns void")]
    VoidReturnCleanup,
    #[error(transparent)]
    Model(#[from] crate::c_model::ModelError),
}

/// Extract directives from a comment block.
///
/// Returns an empty list when no `@fuzztest` token is present. Otherwise
/// returns `FuzzTest` plus every directive found on the `@fuzztest` line
/// and on subsequent comment lines of the block, in order. A blank line
/// ends the directive region, so concatenating unrelated blocks never
/// merges their directives.
pub fn extract_directives(comment_block: &str) -> Result<Vec<Directive>, DirectiveError> {
    let lines = strip_comment_markers(comment_block);

    let mut start: Option<(usize, usize)> = None;
    'outer: for (ln, text) in lines.iter().enumerate() {
        if let Some(col) = find_fuzztest_token(text) {
            start = Some((ln, col + "@fuzztest".len()));
            break 'outer;
        }
    }
    let Some((start_line, start_col)) = start else {
        return Ok(Vec::new());
    };

    let mut directives = vec![Directive::FuzzTest];
    for (ln, text) in lines.iter().enumerate().skip(start_line) {
        if ln > start_line && text.trim().is_empty() {
            break;
        }
        let from = if ln == start_line { start_col } else { 0 };
        parse_directive_groups(&text[from..], (ln + 1) as u32, from as u32, &mut directives)?;
    }
    Ok(directives)
}

/// True when the block carries the `@fuzztest` marker at all. Functions
/// with the marker belong to the annotated pipeline even if their
/// directives turn out to be malformed.
pub fn has_fuzztest_token(comment_block: &str) -> bool {
    strip_comment_markers(comment_block)
        .iter()
        .any(|line| find_fuzztest_token(line).is_some())
}

fn find_fuzztest_token(line: &str) -> Option<usize> {
    let mut search = 0usize;
    while let Some(found) = line[search..].find("@fuzztest") {
        let at = search + found;
        let end = at + "@fuzztest".len();
        let boundary_ok = line[end..]
            .chars()
            .next()
            .map_or(true, |c| !c.is_alphanumeric() && c != '_');
        if boundary_ok {
            return Some(at);
        }
        search = end;
    }
    None
}

/// Remove `//`, `/*`, `*/`, and decorative leading `*` markers, one
/// output line per input line.
fn strip_comment_markers(block: &str) -> Vec<String> {
    block
        .lines()
        .map(|raw| {
            let mut line = raw.trim_start();
            if let Some(rest) = line.strip_prefix("//") {
                return rest.to_string();
            }
            if let Some(rest) = line.strip_prefix("/*") {
                line = rest;
            }
            if let Some(rest) = line.trim_end().strip_suffix("*/") {
                line = rest;
            }
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix('*') {
                return rest.to_string();
            }
            line.to_string()
        })
        .collect()
}

/// Parse whitespace-separated `Name(args)` groups from one line.
fn parse_directive_groups(
    text: &str,
    line: u32,
    col_base: u32,
    out: &mut Vec<Directive>,
) -> Result<(), DirectiveError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    let malformed = |i: usize, reason: String| DirectiveError::Malformed {
        line,
        column: col_base + i as u32 + 1,
        reason,
    };

    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let name_start = i;
        while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
            i += 1;
        }
        if i == name_start {
            return Err(malformed(i, "expected a directive name".into()));
        }
        let name: String = chars[name_start..i].iter().collect();
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() || chars[i] != '(' {
            return Err(malformed(name_start, "expected `(` after directive name".into()));
        }
        i += 1;

        let args_start = i;
        let mut depth = 1i32;
        while i < chars.len() && depth > 0 {
            match chars[i] {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            i += 1;
        }
        if depth != 0 {
            return Err(malformed(name_start, "unbalanced parentheses".into()));
        }
        let args_text: String = chars[args_start..i - 1].iter().collect();
        let args = split_top_level(&args_text);
        out.push(build_directive(&name, args).map_err(|reason| malformed(name_start, reason))?);
    }
    Ok(())
}

/// Split on commas not enclosed in parentheses; trim each piece.
fn split_top_level(text: &str) -> Vec<String> {
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' => {
                depth += 1;
                current.push(c);
            }
            ')' => {
                depth -= 1;
                current.push(c);
            }
            ',' if depth == 0 => {
                args.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(c),
        }
    }
    args.push(current.trim().to_string());
    args
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn build_directive(name: &str, args: Vec<String>) -> Result<Directive, String> {
    match name {
        "Array" => {
            if args.len() != 2 || !args.iter().all(|a| is_identifier(a)) {
                return Err("Array takes exactly two parameter names".into());
            }
            Ok(Directive::Array {
                ptr_param: args[0].clone(),
                len_param: args[1].clone(),
            })
        }
        "Value" => {
            if args.len() != 2 || !is_identifier(&args[0]) || args[1].is_empty() {
                return Err("Value takes a parameter name and a value".into());
            }
            Ok(Directive::Value {
                param: args[0].clone(),
                value_text: args[1].clone(),
            })
        }
        "Output" => {
            if args.len() != 1 || !is_identifier(&args[0]) {
                return Err("Output takes exactly one parameter name".into());
            }
            Ok(Directive::Output { param: args[0].clone() })
        }
        "Cleanup" => {
            if args.len() < 2 || !is_identifier(&args[1]) {
                return Err(
                    "Cleanup takes a condition (may be empty), a function name, and optional arguments"
                        .into(),
                );
            }
            Ok(Directive::Cleanup {
                condition_text: args[0].clone(),
                function_name: args[1].clone(),
                arg_texts: args[2..].to_vec(),
            })
        }
        other => Err(format!("unknown directive `{other}`")),
    }
}

/// Bind directives to a function's parameters.
///
/// Every parameter defaults to `SERIALIZED`; directives override roles
/// and at most one `(ARRAY_DATA, ARRAY_LEN)` pair may exist. All role
/// invariants are validated before returning, so no partially-bound
/// output is ever produced.
pub fn bind(
    model: &SourceModel,
    sig: &FunctionSignature,
    directives: &[Directive],
) -> Result<AnnotatedFunction, BindError> {
    debug_assert!(directives.contains(&Directive::FuzzTest));

    let position_of = |directive: &str, param: &str| -> Result<usize, BindError> {
        sig.params
            .iter()
            .position(|p| p.name == param)
            .ok_or_else(|| BindError::UnknownParam {
                directive: directive.to_string(),
                param: param.to_string(),
            })
    };

    let mut roles: Vec<ParamRole> = vec![ParamRole::Serialized; sig.params.len()];
    let mut assigned: Vec<bool> = vec![false; sig.params.len()];
    let mut cleanup: Option<CleanupSpec> = None;
    let mut saw_array = false;

    fn assign(
        sig: &FunctionSignature,
        pos: usize,
        role: ParamRole,
        roles: &mut [ParamRole],
        assigned: &mut [bool],
    ) -> Result<(), BindError> {
        if assigned[pos] {
            return Err(BindError::ConflictingRoles {
                param: sig.params[pos].name.clone(),
            });
        }
        roles[pos] = role;
        assigned[pos] = true;
        Ok(())
    }

    for directive in directives {
        match directive {
            Directive::FuzzTest => {}
            Directive::Array { ptr_param, len_param } => {
                if saw_array {
                    return Err(BindError::MultipleArrays);
                }
                saw_array = true;
                let data_pos = position_of("Array", ptr_param)?;
                let len_pos = position_of("Array", len_param)?;
                assign(sig, data_pos, ParamRole::ArrayData, &mut roles, &mut assigned)?;
                assign(sig, len_pos, ParamRole::ArrayLen, &mut roles, &mut assigned)?;
            }
            Directive::Value { param, value_text } => {
                let pos = position_of("Value", param)?;
                assign(sig, pos, ParamRole::Fixed(value_text.clone()), &mut roles, &mut assigned)?;
            }
            Directive::Output { param } => {
                let pos = position_of("Output", param)?;
                assign(sig, pos, ParamRole::Output, &mut roles, &mut assigned)?;
            }
            Directive::Cleanup { condition_text, function_name, arg_texts } => {
                if cleanup.is_some() {
                    return Err(BindError::MultipleCleanups);
                }
                cleanup = Some(CleanupSpec {
                    condition: if condition_text.is_empty() {
                        None
                    } else {
                        Some(condition_text.clone())
                    },
                    function: function_name.clone(),
                    args: arg_texts.clone(),
                });
            }
        }
    }

    validate_roles(model, sig, &roles)?;

    if let Some(spec) = &cleanup {
        let uses_ret = spec.args.iter().any(|a| mentions_identifier(a, FUZZER_RETURN_VALUE))
            || spec
                .condition
                .as_deref()
                .is_some_and(|c| mentions_identifier(c, FUZZER_RETURN_VALUE));
        if uses_ret && sig.return_type == TypeRef::Basic(crate::c_model::BasicType::Void) {
            return Err(BindError::VoidReturnCleanup);
        }
    }

    Ok(AnnotatedFunction {
        signature: sig.clone(),
        roles,
        cleanup,
        origin: TargetOrigin::Annotated,
    })
}

/// Typing rules shared by annotated and discovered targets.
pub(crate) fn validate_roles(
    model: &SourceModel,
    sig: &FunctionSignature,
    roles: &[ParamRole],
) -> Result<(), BindError> {
    for (param, role) in sig.params.iter().zip(roles) {
        let class = classify_type(model, &param.ty)?;
        match role {
            ParamRole::Serialized => {
                if !matches!(class, TypeClass::Basic | TypeClass::StructOfBasic) {
                    return Err(BindError::UnserializableParam {
                        param: param.name.clone(),
                        class: format!("{class:?}"),
                    });
                }
            }
            ParamRole::ArrayData => {
                if class != TypeClass::Pointer {
                    return Err(BindError::NonPointerArrayData { param: param.name.clone() });
                }
            }
            ParamRole::ArrayLen => {
                let resolved = resolve_type(model, &param.ty)?;
                let integer = matches!(resolved, TypeRef::Basic(b) if b.is_integer());
                if !integer {
                    return Err(BindError::NonIntegerArrayLen { param: param.name.clone() });
                }
            }
            ParamRole::Output => {
                if class != TypeClass::Pointer {
                    return Err(BindError::NonPointerOutput { param: param.name.clone() });
                }
            }
            ParamRole::Fixed(_) => {}
        }
    }
    Ok(())
}

/// True when `text` contains `ident` as a whole identifier token.
pub(crate) fn mentions_identifier(text: &str, ident: &str) -> bool {
    let bytes = text.as_bytes();
    let mut search = 0usize;
    while let Some(found) = text[search..].find(ident) {
        let at = search + found;
        let end = at + ident.len();
        let before_ok = at == 0 || {
            let c = bytes[at - 1] as char;
            !c.is_ascii_alphanumeric() && c != '_'
        };
        let after_ok = end == bytes.len() || {
            let c = bytes[end] as char;
            !c.is_ascii_alphanumeric() && c != '_'
        };
        if before_ok && after_ok {
            return true;
        }
        search = end;
    }
    false
}
