//! Byte-exact serialization plan: how one contiguous fuzzer input buffer
//! maps onto a function's parameter list.
//!
//! Serialized parameters get packed slots in declaration order with no
//! inter-parameter padding (struct interiors still carry their ABI
//! padding, since the harness copies `sizeof(record)` bytes wholesale).
//! When an Array pair exists, the data region starts at `fixed_size` and
//! extends to the end of the input; the length argument is computed from
//! the remaining byte count, never read from the buffer, so the length
//! passed is always accurate for the array actually passed. FIXED,
//! OUTPUT, and ARRAY_LEN parameters consume zero input bytes.

use crate::abi::{size_of, AbiError, AbiModel};
use crate::c_model::{resolve_type, SourceModel, TypeRef};
use crate::directives::{AnnotatedFunction, ParamRole};

/// One serialized parameter's slice of the input buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSlot {
    pub param_position: usize,
    pub offset: usize,
    pub length: usize,
    /// Declared type, alias spelling preserved.
    pub target_type: TypeRef,
}

/// The trailing variable-size array region, when an Array pair exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayRegion {
    pub data_param_position: usize,
    pub len_param_position: usize,
    pub element_type: TypeRef,
    pub element_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutPlan {
    /// Slots for SERIALIZED parameters, in declaration order, packed
    /// from offset 0.
    pub slots: Vec<FieldSlot>,
    /// Sum of all slot lengths.
    pub fixed_size: usize,
    pub array: Option<ArrayRegion>,
    /// Smallest input the harness will act on; the array region may be
    /// empty, so this equals `fixed_size`.
    pub min_input_size: usize,
}

impl LayoutPlan {
    /// Elements the harness will pass for an input of `input_size` bytes.
    pub fn element_count(&self, input_size: usize) -> Option<usize> {
        let array = self.array.as_ref()?;
        Some(input_size.saturating_sub(self.fixed_size) / array.element_size)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error(transparent)]
    Abi(#[from] AbiError),
    #[error(transparent)]
    Model(#[from] crate::c_model::ModelError),
    #[error("array element type `{0}` has no size")]
    ZeroSizeElement(String),
    #[error("array of `{0}` is not supported (elements must be basic types)")]
    UnsupportedElementType(String),
}

/// Plan the buffer layout for a bound function.
pub fn plan_layout(
    model: &SourceModel,
    abi: &AbiModel,
    func: &AnnotatedFunction,
) -> Result<LayoutPlan, LayoutError> {
    let mut slots = Vec::new();
    let mut offset = 0usize;

    for (param, role) in func.signature.params.iter().zip(&func.roles) {
        if *role != ParamRole::Serialized {
            continue;
        }
        let length = size_of(model, abi, &param.ty)?;
        slots.push(FieldSlot {
            param_position: param.position,
            offset,
            length,
            target_type: param.ty.clone(),
        });
        offset += length;
    }
    let fixed_size = offset;

    let array = match func.array_pair() {
        None => None,
        Some((data_pos, len_pos)) => {
            let data_ty = resolve_type(model, &func.signature.params[data_pos].ty)?;
            let TypeRef::Pointer(pointee) = data_ty else {
                // bind() already validated this; re-check defensively.
                return Err(LayoutError::Abi(AbiError::UnsupportedType(
                    func.signature.params[data_pos].ty.c_text(),
                )));
            };
            let element_type = (*pointee).clone();
            match &element_type {
                TypeRef::Basic(b) if *b == crate::c_model::BasicType::Void => {
                    return Err(LayoutError::ZeroSizeElement(element_type.c_text()));
                }
                TypeRef::Basic(_) => {}
                other => {
                    return Err(LayoutError::UnsupportedElementType(other.c_text()));
                }
            }
            let element_size = size_of(model, abi, &element_type)?;
            Some(ArrayRegion {
                data_param_position: data_pos,
                len_param_position: len_pos,
                element_type,
                element_size,
            })
        }
    };

    Ok(LayoutPlan {
        slots,
        fixed_size,
        array,
        min_input_size: fixed_size,
    })
}
