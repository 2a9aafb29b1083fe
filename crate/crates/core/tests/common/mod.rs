//! Shared helpers for tests that compile and run generated C.

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn cc() -> String {
    std::env::var("CC").unwrap_or_else(|_| "cc".to_string())
}

pub fn write_files(dir: &Path, files: &[(&str, &str)]) {
    for (name, content) in files {
        std::fs::write(dir.join(name), content).unwrap();
    }
}

/// Compile `inputs` into `output`, panicking with the compiler's stderr
/// on failure.
pub fn compile(dir: &Path, inputs: &[&str], output: &str, flags: &[&str]) -> PathBuf {
    let out_path = dir.join(output);
    let mut cmd = Command::new(cc());
    cmd.current_dir(dir).args(flags);
    for input in inputs {
        cmd.arg(input);
    }
    cmd.arg("-o").arg(&out_path);
    let result = cmd.output().expect("compiler runs");
    assert!(
        result.status.success(),
        "compile of {inputs:?} failed:\n{}",
        String::from_utf8_lossy(&result.stderr)
    );
    out_path
}

pub struct RunResult {
    pub status: Option<i32>,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

pub fn run(bin: &Path, args: &[&str], env: &[(&str, &str)]) -> RunResult {
    let mut cmd = Command::new(bin);
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    RunResult {
        status: out.status.code(),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
