//! Render a model back to C declaration text.
//!
//! Printing then re-parsing a model yields the same records, aliases, and
//! functions (locations aside); the round-trip property test relies on
//! this. Comment blocks are reproduced verbatim above their functions.

use super::{SourceModel, TypeRef};

/// Render all declarations of a model as compilable C declaration text.
pub fn pretty_print(model: &SourceModel) -> String {
    let mut out = String::new();

    for rec in model.records.values() {
        out.push_str(&format!("struct {} {{\n", rec.name));
        for field in &rec.fields {
            out.push_str(&format!("    {};\n", declarator(&field.ty, &field.name)));
        }
        out.push_str("};\n\n");
    }

    for (name, ty) in &model.aliases {
        out.push_str(&format!("typedef {};\n", declarator(ty, name)));
    }
    if !model.aliases.is_empty() {
        out.push('\n');
    }

    for func in &model.functions {
        if !func.comment_block.is_empty() {
            out.push_str(&func.comment_block);
            out.push('\n');
        }
        let params = if func.params.is_empty() && !func.variadic {
            "void".to_string()
        } else {
            let mut parts: Vec<String> = func
                .params
                .iter()
                .map(|p| declarator(&p.ty, &p.name))
                .collect();
            if func.variadic {
                parts.push("...".to_string());
            }
            parts.join(", ")
        };
        out.push_str(&format!(
            "{};\n\n",
            declarator_suffix(&func.return_type, &format!("{}({})", func.name, params))
        ));
    }

    out
}

/// `int *x`, `struct Foo f`, `unsigned long n`.
fn declarator(ty: &TypeRef, name: &str) -> String {
    declarator_suffix(ty, name)
}

fn declarator_suffix(ty: &TypeRef, suffix: &str) -> String {
    let text = ty.c_text();
    if text.ends_with('*') {
        format!("{text}{suffix}")
    } else {
        format!("{text} {suffix}")
    }
}
