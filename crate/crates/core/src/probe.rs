//! Host-compiler layout probe.
//!
//! Compiles a small C program that prints `sizeof`, `_Alignof`, and
//! `offsetof` for every record in a model, then parses its output. This
//! is the independent route for checking the [`crate::abi`] tables: the
//! numbers come from the actual compiler, not from this crate's layout
//! arithmetic. The oracle test suites and the acceptance suite diff the
//! two routes record by record.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use crate::abi::{FieldLayout, RecordLayout};
use crate::c_model::{pretty_print, SourceModel};

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("C compiler `{0}` failed to run: {1}")]
    CompilerUnavailable(String, String),
    #[error("probe compilation failed:\n{0}")]
    CompileFailed(String),
    #[error("probe run failed with status {0:?}")]
    RunFailed(Option<i32>),
    #[error("unparseable probe output line: `{0}`")]
    BadOutput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The C compiler to probe with: `$CC`, defaulting to `cc`.
pub fn host_compiler() -> String {
    std::env::var("CC").unwrap_or_else(|_| "cc".to_string())
}

/// Measure every record in `model` with the host compiler.
pub fn probe_record_layouts(
    model: &SourceModel,
) -> Result<BTreeMap<String, RecordLayout>, ProbeError> {
    let declarations = pretty_print(&SourceModel {
        records: model.records.clone(),
        aliases: model.aliases.clone(),
        functions: Vec::new(),
    });

    let mut src = String::new();
    src.push_str("#include <stddef.h>\n#include <stdint.h>\n#include <stdio.h>\n\n");
    src.push_str(&declarations);
    src.push_str("\nint main(void) {\n");
    for rec in model.records.values() {
        src.push_str(&format!(
            "    printf(\"record|{name}|%zu|%zu\\n\", sizeof(struct {name}), _Alignof(struct {name}));\n",
            name = rec.name
        ));
        for field in &rec.fields {
            src.push_str(&format!(
                "    printf(\"field|{name}|{field}|%zu|%zu\\n\", offsetof(struct {name}, {field}), sizeof(((struct {name} *)0)->{field}));\n",
                name = rec.name,
                field = field.name
            ));
        }
    }
    src.push_str("    return 0;\n}\n");

    let dir = tempfile::tempdir()?;
    let c_path = dir.path().join("layout_probe.c");
    let bin_path = dir.path().join("layout_probe");
    std::fs::write(&c_path, &src)?;
    let stdout = compile_and_run(&c_path, &bin_path, &src)?;

    parse_probe_output(&stdout)
}

fn compile_and_run(c_path: &Path, bin_path: &Path, src: &str) -> Result<String, ProbeError> {
    let cc = host_compiler();
    let output = Command::new(&cc)
        .arg("-o")
        .arg(bin_path)
        .arg(c_path)
        .output()
        .map_err(|e| ProbeError::CompilerUnavailable(cc.clone(), e.to_string()))?;
    if !output.status.success() {
        return Err(ProbeError::CompileFailed(format!(
            "{}\n--- source ---\n{src}",
            String::from_utf8_lossy(&output.stderr)
        )));
    }
    let run = Command::new(bin_path).output()?;
    if !run.status.success() {
        return Err(ProbeError::RunFailed(run.status.code()));
    }
    Ok(String::from_utf8_lossy(&run.stdout).into_owned())
}

fn parse_probe_output(stdout: &str) -> Result<BTreeMap<String, RecordLayout>, ProbeError> {
    let mut layouts: BTreeMap<String, RecordLayout> = BTreeMap::new();
    for line in stdout.lines() {
        let parts: Vec<&str> = line.split('|').collect();
        let bad = || ProbeError::BadOutput(line.to_string());
        match parts.as_slice() {
            ["record", name, size, align] => {
                layouts.insert(
                    name.to_string(),
                    RecordLayout {
                        record_name: name.to_string(),
                        fields: Vec::new(),
                        total_size: size.parse().map_err(|_| bad())?,
                        alignment: align.parse().map_err(|_| bad())?,
                    },
                );
            }
            ["field", name, field, offset, size] => {
                let layout = layouts.get_mut(*name).ok_or_else(bad)?;
                layout.fields.push(FieldLayout {
                    name: field.to_string(),
                    offset: offset.parse().map_err(|_| bad())?,
                    size: size.parse().map_err(|_| bad())?,
                });
            }
            _ => return Err(bad()),
        }
    }
    Ok(layouts)
}
