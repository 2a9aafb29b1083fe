//! Diagnostics emitted while processing source files.
//!
//! Constructs outside the accepted C subset are skipped with a diagnostic
//! rather than failing the whole run. The rendered format is
//! `file:line: level: message`, one per line on standard error.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Warning,
    Error,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Warning => write!(f, "warning"),
            Level::Error => write!(f, "error"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub level: Level,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(file: impl Into<String>, line: u32, message: impl Into<String>) -> Self {
        Diagnostic {
            file: file.into(),
            line,
            level: Level::Warning,
            message: message.into(),
        }
    }

    pub fn error(file: impl Into<String>, line: u32, message: impl Into<String>) -> Self {
        Diagnostic {
            file: file.into(),
            line,
            level: Level::Error,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.file, self.line, self.level, self.message
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_compiler_style() {
        let d = Diagnostic::warning("foo.c", 12, "skipping union `U`");
        assert_eq!(d.to_string(), "foo.c:12: warning: skipping union `U`");
    }
}
