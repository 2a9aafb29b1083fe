//! Token-level scanning for the C subset parser.
//!
//! The lexer keeps comments out of the token stream but records each one
//! with its line extent so the parser can attach contiguous comment runs
//! to the declaration that follows them. Preprocessor lines (`#...`,
//! including backslash continuations) are skipped entirely. String and
//! character literals are scanned as opaque tokens so that brace matching
//! inside skipped function bodies cannot be confused by quoted braces.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    StrLit,
    CharLit,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Star,
    Ellipsis,
    Other(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: Tok,
    pub line: u32,
}

/// One comment, `//` or `/* */`, with raw text including its markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Comment {
    pub raw: String,
    pub start_line: u32,
    pub end_line: u32,
    /// False when a code token precedes the comment on its start line
    /// (a trailing comment); such comments never join an attachment run.
    pub owns_line: bool,
}

pub(crate) struct LexOutput {
    pub tokens: Vec<Token>,
    pub comments: Vec<Comment>,
}

pub(crate) fn lex(source: &str) -> LexOutput {
    let mut tokens = Vec::new();
    let mut comments = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0usize;
    let mut line: u32 = 1;
    // Line of the most recent code token, for trailing-comment detection.
    let mut last_token_line: u32 = 0;
    // True until a token or comment has been seen on the current line;
    // preprocessor `#` is only recognized at the start of a line.
    let mut line_has_code = false;

    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                line_has_code = false;
                i += 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '#' if !line_has_code => {
                // Skip the preprocessor line, honoring backslash continuations.
                while i < chars.len() {
                    if chars[i] == '\\' && i + 1 < chars.len() && chars[i + 1] == '\n' {
                        line += 1;
                        i += 2;
                        continue;
                    }
                    if chars[i] == '\n' {
                        line += 1;
                        line_has_code = false;
                        i += 1;
                        break;
                    }
                    i += 1;
                }
            }
            '/' if i + 1 < chars.len() && chars[i + 1] == '/' => {
                let start = i;
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                comments.push(Comment {
                    raw: chars[start..i].iter().collect(),
                    start_line: line,
                    end_line: line,
                    owns_line: last_token_line < line,
                });
            }
            '/' if i + 1 < chars.len() && chars[i + 1] == '*' => {
                let start = i;
                let start_line = line;
                let owns_line = last_token_line < line;
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && i + 1 < chars.len() && chars[i + 1] == '/') {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i = (i + 2).min(chars.len());
                comments.push(Comment {
                    raw: chars[start..i].iter().collect(),
                    start_line,
                    end_line: line,
                    owns_line,
                });
            }
            '"' => {
                line_has_code = true;
                last_token_line = line;
                tokens.push(Token { kind: Tok::StrLit, line });
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    if chars[i] == '\\' {
                        i += 1;
                    } else if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            '\'' => {
                line_has_code = true;
                last_token_line = line;
                tokens.push(Token { kind: Tok::CharLit, line });
                i += 1;
                while i < chars.len() && chars[i] != '\'' {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                line_has_code = true;
                last_token_line = line;
                tokens.push(Token {
                    kind: Tok::Ident(chars[start..i].iter().collect()),
                    line,
                });
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_')
                {
                    i += 1;
                }
                line_has_code = true;
                last_token_line = line;
                tokens.push(Token {
                    kind: Tok::Number(chars[start..i].iter().collect()),
                    line,
                });
            }
            '.' if i + 2 < chars.len() && chars[i + 1] == '.' && chars[i + 2] == '.' => {
                line_has_code = true;
                last_token_line = line;
                tokens.push(Token { kind: Tok::Ellipsis, line });
                i += 3;
            }
            _ => {
                let kind = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '*' => Tok::Star,
                    other => Tok::Other(other),
                };
                line_has_code = true;
                last_token_line = line;
                tokens.push(Token { kind, line });
                i += 1;
            }
        }
    }

    LexOutput { tokens, comments }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idents(out: &LexOutput) -> Vec<String> {
        out.tokens
            .iter()
            .filter_map(|t| match &t.kind {
                Tok::Ident(s) => Some(s.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn skips_preprocessor_lines() {
        let out = lex("#include <stdio.h>\n#define X \\\n  1\nint x;\n");
        assert_eq!(idents(&out), vec!["int", "x"]);
        assert_eq!(out.tokens[0].line, 4);
    }

    #[test]
    fn records_comment_extents() {
        let out = lex("// one\n// two\nint f();\n");
        assert_eq!(out.comments.len(), 2);
        assert_eq!(out.comments[0].raw, "// one");
        assert_eq!(out.comments[0].start_line, 1);
        assert!(out.comments[0].owns_line);
    }

    #[test]
    fn trailing_comment_does_not_own_its_line() {
        let out = lex("int x; // trailing\nint f();\n");
        assert_eq!(out.comments.len(), 1);
        assert!(!out.comments[0].owns_line);
    }

    #[test]
    fn block_comment_spans_lines() {
        let out = lex("/* a\n   b */\nint f();\n");
        assert_eq!(out.comments.len(), 1);
        assert_eq!(out.comments[0].start_line, 1);
        assert_eq!(out.comments[0].end_line, 2);
        assert_eq!(out.comments[0].raw, "/* a\n   b */");
    }

    #[test]
    fn braces_inside_strings_are_opaque() {
        let out = lex("char *s = \"{{{\"; int y;\n");
        let braces = out
            .tokens
            .iter()
            .filter(|t| matches!(t.kind, Tok::LBrace | Tok::RBrace))
            .count();
        assert_eq!(braces, 0);
    }
}
