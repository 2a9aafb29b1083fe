//! A queryable model of C translation units.
//!
//! The parser accepts a pragmatic subset of C: top-level record (struct)
//! definitions, `typedef` aliases of basic/record/pointer types, and
//! function declarations or definitions whose parameters are subset types.
//! Preprocessor directives are not expanded; lines starting with `#` are
//! skipped. Function bodies are skipped by brace matching. Constructs
//! outside the subset (unions, enums, bitfields, function pointers,
//! globals, ...) are skipped with a diagnostic, never a crash.
//!
//! Fixed-width aliases (`int8_t` ... `uint64_t`, `size_t`) are built in
//! rather than read from headers, with their LP64 resolutions.

mod lex;
mod parse;
mod print;

pub use parse::{parse_translation_unit, ParseError, ParsedUnit};
pub use print::pretty_print;

use std::collections::BTreeMap;
use std::fmt;

use crate::diag::Diagnostic;

/// Built-in basic C types the tool can serialize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasicType {
    Void,
    Bool,
    Char,
    SChar,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    Long,
    ULong,
    LongLong,
    ULongLong,
    Float,
    Double,
}

impl BasicType {
    /// The C spelling of this type.
    pub fn c_name(self) -> &'static str {
        match self {
            BasicType::Void => "void",
            BasicType::Bool => "_Bool",
            BasicType::Char => "char",
            BasicType::SChar => "signed char",
            BasicType::UChar => "unsigned char",
            BasicType::Short => "short",
            BasicType::UShort => "unsigned short",
            BasicType::Int => "int",
            BasicType::UInt => "unsigned int",
            BasicType::Long => "long",
            BasicType::ULong => "unsigned long",
            BasicType::LongLong => "long long",
            BasicType::ULongLong => "unsigned long long",
            BasicType::Float => "float",
            BasicType::Double => "double",
        }
    }

    /// True for integer types (including `_Bool` and the char family).
    pub fn is_integer(self) -> bool {
        !matches!(self, BasicType::Void | BasicType::Float | BasicType::Double)
    }

    /// All basic types except `void`, in declaration-table order.
    pub fn all_sized() -> &'static [BasicType] {
        &[
            BasicType::Bool,
            BasicType::Char,
            BasicType::SChar,
            BasicType::UChar,
            BasicType::Short,
            BasicType::UShort,
            BasicType::Int,
            BasicType::UInt,
            BasicType::Long,
            BasicType::ULong,
            BasicType::LongLong,
            BasicType::ULongLong,
            BasicType::Float,
            BasicType::Double,
        ]
    }
}

impl fmt::Display for BasicType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.c_name())
    }
}

/// Reference to a C type as it appears in a declaration.
///
/// Alias names are preserved so generated code can spell types the way the
/// target codebase does; use [`resolve_type`] to strip alias layers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeRef {
    Basic(BasicType),
    Record(String),
    Alias(String),
    Pointer(Box<TypeRef>),
}

impl TypeRef {
    pub fn pointer_to(pointee: TypeRef) -> TypeRef {
        TypeRef::Pointer(Box::new(pointee))
    }

    /// C spelling of this type, e.g. `unsigned long`, `struct Foo`, `int *`.
    pub fn c_text(&self) -> String {
        match self {
            TypeRef::Basic(b) => b.c_name().to_string(),
            TypeRef::Record(name) => format!("struct {name}"),
            TypeRef::Alias(name) => name.clone(),
            TypeRef::Pointer(inner) => {
                let inner = inner.c_text();
                if inner.ends_with('*') {
                    format!("{inner}*")
                } else {
                    format!("{inner} *")
                }
            }
        }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, TypeRef::Pointer(_))
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.c_text())
    }
}

/// One named field of a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub ty: TypeRef,
}

/// A struct definition. Field names are unique and the field list is
/// never empty; the parser rejects violations before construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDef {
    pub name: String,
    pub fields: Vec<Field>,
}

/// One function parameter. `position` is its 0-based index in the
/// declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: TypeRef,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLoc {
    pub file: String,
    pub line: u32,
}

/// A function declaration or definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSignature {
    pub name: String,
    pub return_type: TypeRef,
    pub params: Vec<Param>,
    /// True when the parameter list ends in `...`.
    pub variadic: bool,
    /// Raw text of the contiguous run of comment lines directly above the
    /// declaration, markers included, or empty when there is none.
    pub comment_block: String,
    pub location: SourceLoc,
}

/// Parsed view of one or more translation units.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceModel {
    pub records: BTreeMap<String, RecordDef>,
    pub aliases: BTreeMap<String, TypeRef>,
    pub functions: Vec<FunctionSignature>,
}

/// Classification of a resolved type with respect to what the generator
/// can serialize from a fuzzer input buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeClass {
    Basic,
    StructOfBasic,
    Pointer,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unresolved type name `{0}`")]
    UnresolvedName(String),
    #[error("typedef cycle involving `{0}`")]
    AliasCycle(String),
}

/// Fixed-width typedefs that are always available without any headers,
/// resolved per the default LP64 data model. `int64_t`/`uint64_t` map to
/// `long long` so the resolutions also hold on common 32-bit ABIs.
const BUILTIN_ALIASES: &[(&str, BasicType)] = &[
    ("int8_t", BasicType::SChar),
    ("uint8_t", BasicType::UChar),
    ("int16_t", BasicType::Short),
    ("uint16_t", BasicType::UShort),
    ("int32_t", BasicType::Int),
    ("uint32_t", BasicType::UInt),
    ("int64_t", BasicType::LongLong),
    ("uint64_t", BasicType::ULongLong),
    ("size_t", BasicType::ULong),
];

pub fn builtin_alias(name: &str) -> Option<TypeRef> {
    BUILTIN_ALIASES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, b)| TypeRef::Basic(*b))
}

impl SourceModel {
    pub fn new() -> Self {
        SourceModel::default()
    }

    /// Look up an alias, checking user typedefs before the builtin table.
    pub fn alias(&self, name: &str) -> Option<TypeRef> {
        self.aliases.get(name).cloned().or_else(|| builtin_alias(name))
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSignature> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Merge another unit into this model.
    ///
    /// Records and aliases defined in both keep the first definition and
    /// reject the later one with a diagnostic. A function seen again keeps
    /// its first occurrence; when the first occurrence had no comment block
    /// and the later one does (a bare header declaration followed by an
    /// annotated definition), the later signature replaces it in place.
    pub fn merge(&mut self, other: SourceModel) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for (name, rec) in other.records {
            if self.records.contains_key(&name) {
                diags.push(Diagnostic::error(
                    "<merge>",
                    0,
                    format!("duplicate definition of struct `{name}`; later definition rejected"),
                ));
            } else {
                self.records.insert(name, rec);
            }
        }
        for (name, ty) in other.aliases {
            if self.aliases.contains_key(&name) {
                diags.push(Diagnostic::error(
                    "<merge>",
                    0,
                    format!("duplicate typedef `{name}`; later definition rejected"),
                ));
            } else {
                self.aliases.insert(name, ty);
            }
        }
        for func in other.functions {
            self.add_function(func);
        }
        diags
    }

    /// Insert a function, deduplicating by name (see [`SourceModel::merge`]).
    pub(crate) fn add_function(&mut self, func: FunctionSignature) {
        if let Some(existing) = self.functions.iter_mut().find(|f| f.name == func.name) {
            if existing.comment_block.is_empty() && !func.comment_block.is_empty() {
                *existing = func;
            }
        } else {
            self.functions.push(func);
        }
    }
}

/// Strip all alias layers from a type; pointer pointees are resolved
/// recursively and basic/record kinds are returned unchanged.
pub fn resolve_type(model: &SourceModel, t: &TypeRef) -> Result<TypeRef, ModelError> {
    match t {
        TypeRef::Basic(b) => Ok(TypeRef::Basic(*b)),
        TypeRef::Record(name) => {
            if model.records.contains_key(name) {
                Ok(TypeRef::Record(name.clone()))
            } else {
                Err(ModelError::UnresolvedName(name.clone()))
            }
        }
        TypeRef::Alias(name) => resolve_type(model, &chase_alias(model, name)?),
        TypeRef::Pointer(inner) => Ok(TypeRef::pointer_to(resolve_type(model, inner)?)),
    }
}

/// Follow one alias name to its first non-alias target.
fn chase_alias(model: &SourceModel, name: &str) -> Result<TypeRef, ModelError> {
    let mut seen = vec![name.to_string()];
    let mut current = model
        .alias(name)
        .ok_or_else(|| ModelError::UnresolvedName(name.to_string()))?;
    while let TypeRef::Alias(next) = current {
        if seen.iter().any(|s| *s == next) {
            return Err(ModelError::AliasCycle(next));
        }
        seen.push(next.clone());
        current = model
            .alias(&next)
            .ok_or(ModelError::UnresolvedName(next))?;
    }
    Ok(current)
}

/// Classify a type with respect to buffer serialization.
///
/// `STRUCT_OF_BASIC` requires every field of the record to classify
/// `BASIC`; nested records and pointer fields make the record
/// unsupported. `void` classifies unsupported as a parameter type.
/// Pointers classify `POINTER` without resolving the pointee.
pub fn classify_type(model: &SourceModel, t: &TypeRef) -> Result<TypeClass, ModelError> {
    match t {
        TypeRef::Basic(BasicType::Void) => Ok(TypeClass::Unsupported),
        TypeRef::Basic(_) => Ok(TypeClass::Basic),
        TypeRef::Pointer(_) => Ok(TypeClass::Pointer),
        TypeRef::Alias(name) => classify_type(model, &chase_alias(model, name)?),
        TypeRef::Record(name) => {
            let rec = model
                .records
                .get(name)
                .ok_or_else(|| ModelError::UnresolvedName(name.clone()))?;
            for field in &rec.fields {
                if classify_type(model, &field.ty)? != TypeClass::Basic {
                    return Ok(TypeClass::Unsupported);
                }
            }
            Ok(TypeClass::StructOfBasic)
        }
    }
}
