//! Type sizes, alignments, and record layouts under a configurable
//! target ABI.
//!
//! Every buffer offset the generator plans depends on these tables. The
//! default is LP64 natural alignment, matching x86-64 Linux; alternate
//! ABIs load from a key-value config file (`type = size,alignment` lines,
//! one per basic type, plus `pointer`). All multi-byte values are read
//! with host endianness by the generated harnesses, so corpora are not
//! endian-portable.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::c_model::{
    classify_type, resolve_type, BasicType, ModelError, RecordDef, SourceModel, TypeClass, TypeRef,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbiError {
    #[error("type `{0}` is not serializable from a fuzzer input buffer")]
    UnsupportedType(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbiConfigError {
    #[error("{file}:{line}: malformed ABI config line (expected `type = size,alignment`)")]
    Malformed { file: String, line: u32 },
    #[error("{file}:{line}: unknown type `{name}`")]
    UnknownType { file: String, line: u32, name: String },
    #[error("{file}: missing entry for `{name}`")]
    MissingEntry { file: String, name: String },
    #[error("{file}:{line}: invalid size/alignment {size}/{alignment} for `{name}`")]
    InvalidEntry { file: String, line: u32, name: String, size: usize, alignment: usize },
    #[error("cannot read `{file}`: {message}")]
    Io { file: String, message: String },
}

/// Size and alignment of one type, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeAlign {
    pub size: usize,
    pub alignment: usize,
}

/// Per-basic-type size/alignment tables plus pointer width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbiModel {
    pub name: String,
    basics: BTreeMap<BasicType, SizeAlign>,
    pub pointer_size: usize,
    pub pointer_alignment: usize,
}

impl AbiModel {
    /// The default ABI: LP64 natural alignment.
    pub fn lp64() -> Self {
        let mut basics = BTreeMap::new();
        let table: &[(BasicType, usize, usize)] = &[
            (BasicType::Bool, 1, 1),
            (BasicType::Char, 1, 1),
            (BasicType::SChar, 1, 1),
            (BasicType::UChar, 1, 1),
            (BasicType::Short, 2, 2),
            (BasicType::UShort, 2, 2),
            (BasicType::Int, 4, 4),
            (BasicType::UInt, 4, 4),
            (BasicType::Long, 8, 8),
            (BasicType::ULong, 8, 8),
            (BasicType::LongLong, 8, 8),
            (BasicType::ULongLong, 8, 8),
            (BasicType::Float, 4, 4),
            (BasicType::Double, 8, 8),
        ];
        for &(b, size, alignment) in table {
            basics.insert(b, SizeAlign { size, alignment });
        }
        AbiModel {
            name: "lp64".to_string(),
            basics,
            pointer_size: 8,
            pointer_alignment: 8,
        }
    }

    pub fn basic(&self, b: BasicType) -> Option<SizeAlign> {
        self.basics.get(&b).copied()
    }

    /// Load an ABI from a config file. Every sized basic type and
    /// `pointer` must have an entry; sizes and alignments must be powers
    /// of two with `size` a multiple of `alignment`.
    pub fn from_config_file(path: &Path) -> Result<Self, AbiConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| AbiConfigError::Io {
            file: file.clone(),
            message: e.to_string(),
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        Self::from_config_text(&text, &file, name)
    }

    pub fn from_config_text(
        text: &str,
        file: &str,
        name: String,
    ) -> Result<Self, AbiConfigError> {
        let mut basics: BTreeMap<BasicType, SizeAlign> = BTreeMap::new();
        let mut pointer: Option<SizeAlign> = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = (idx + 1) as u32;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(AbiConfigError::Malformed {
                file: file.to_string(),
                line: line_no,
            })?;
            let key = key.trim();
            let (size, alignment) = value
                .trim()
                .split_once(',')
                .and_then(|(s, a)| {
                    Some((s.trim().parse::<usize>().ok()?, a.trim().parse::<usize>().ok()?))
                })
                .ok_or(AbiConfigError::Malformed {
                    file: file.to_string(),
                    line: line_no,
                })?;

            let valid = size > 0
                && alignment > 0
                && size.is_power_of_two()
                && alignment.is_power_of_two()
                && size % alignment == 0;
            if !valid {
                return Err(AbiConfigError::InvalidEntry {
                    file: file.to_string(),
                    line: line_no,
                    name: key.to_string(),
                    size,
                    alignment,
                });
            }

            if key == "pointer" {
                pointer = Some(SizeAlign { size, alignment });
                continue;
            }
            let basic = BasicType::all_sized()
                .iter()
                .copied()
                .find(|b| b.c_name() == key)
                .ok_or_else(|| AbiConfigError::UnknownType {
                    file: file.to_string(),
                    line: line_no,
                    name: key.to_string(),
                })?;
            basics.insert(basic, SizeAlign { size, alignment });
        }

        for b in BasicType::all_sized() {
            if !basics.contains_key(b) {
                return Err(AbiConfigError::MissingEntry {
                    file: file.to_string(),
                    name: b.c_name().to_string(),
                });
            }
        }
        let pointer = pointer.ok_or_else(|| AbiConfigError::MissingEntry {
            file: file.to_string(),
            name: "pointer".to_string(),
        })?;

        Ok(AbiModel {
            name,
            basics,
            pointer_size: pointer.size,
            pointer_alignment: pointer.alignment,
        })
    }
}

/// Layout of one record: field offsets, total size, and alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordLayout {
    pub record_name: String,
    pub fields: Vec<FieldLayout>,
    pub total_size: usize,
    pub alignment: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldLayout {
    pub name: String,
    pub offset: usize,
    pub size: usize,
}

fn align_up(offset: usize, alignment: usize) -> usize {
    debug_assert!(alignment.is_power_of_two());
    (offset + alignment - 1) & !(alignment - 1)
}

/// Size in bytes of a serializable type.
pub fn size_of(model: &SourceModel, abi: &AbiModel, t: &TypeRef) -> Result<usize, AbiError> {
    size_align_of(model, abi, t).map(|sa| sa.size)
}

/// Alignment in bytes of a serializable type.
pub fn align_of(model: &SourceModel, abi: &AbiModel, t: &TypeRef) -> Result<usize, AbiError> {
    size_align_of(model, abi, t).map(|sa| sa.alignment)
}

pub fn size_align_of(
    model: &SourceModel,
    abi: &AbiModel,
    t: &TypeRef,
) -> Result<SizeAlign, AbiError> {
    let resolved = resolve_type(model, t)?;
    match &resolved {
        TypeRef::Basic(b) => abi
            .basic(*b)
            .ok_or_else(|| AbiError::UnsupportedType(b.c_name().to_string())),
        TypeRef::Pointer(_) => Ok(SizeAlign {
            size: abi.pointer_size,
            alignment: abi.pointer_alignment,
        }),
        TypeRef::Record(name) => {
            let rec = model
                .records
                .get(name)
                .ok_or_else(|| ModelError::UnresolvedName(name.clone()))?;
            let layout = record_layout(model, abi, rec)?;
            Ok(SizeAlign {
                size: layout.total_size,
                alignment: layout.alignment,
            })
        }
        TypeRef::Alias(_) => unreachable!("resolve_type strips aliases"),
    }
}

/// Standard natural-alignment layout: each field is placed at the next
/// offset that is a multiple of its alignment, and the total size is
/// rounded up to the record alignment (the maximum field alignment).
pub fn record_layout(
    model: &SourceModel,
    abi: &AbiModel,
    rec: &RecordDef,
) -> Result<RecordLayout, AbiError> {
    if classify_type(model, &TypeRef::Record(rec.name.clone()))? != TypeClass::StructOfBasic {
        return Err(AbiError::UnsupportedType(format!("struct {}", rec.name)));
    }

    let mut fields = Vec::with_capacity(rec.fields.len());
    let mut offset = 0usize;
    let mut alignment = 1usize;
    for field in &rec.fields {
        let sa = size_align_of(model, abi, &field.ty)?;
        offset = align_up(offset, sa.alignment);
        fields.push(FieldLayout {
            name: field.name.clone(),
            offset,
            size: sa.size,
        });
        offset += sa.size;
        alignment = alignment.max(sa.alignment);
    }

    Ok(RecordLayout {
        record_name: rec.name.clone(),
        fields,
        total_size: align_up(offset, alignment),
        alignment,
    })
}

impl fmt::Display for RecordLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "struct {}: size {}, alignment {}",
            self.record_name, self.total_size, self.alignment
        )?;
        for field in &self.fields {
            writeln!(f, "  {} @ {} ({} bytes)", field.name, field.offset, field.size)?;
        }
        Ok(())
    }
}
