//! Recursive-descent parser for the accepted C subset.
//!
//! Accepted at the top level: struct definitions, `typedef` aliases of
//! basic/record/pointer types, and function declarations/definitions.
//! Bodies are skipped by brace matching. Anything else is skipped with a
//! diagnostic. The only unrecoverable error is a brace/paren mismatch
//! that reaches end of file (or a stray closing brace at the top level).

use super::lex::{lex, Comment, Tok, Token};
use super::{
    BasicType, Field, FunctionSignature, Param, RecordDef, SourceLoc, SourceModel, TypeRef,
};
use crate::diag::Diagnostic;

/// Result of parsing one translation unit: the model plus any
/// skipped-construct diagnostics collected along the way.
#[derive(Debug, Clone)]
pub struct ParsedUnit {
    pub model: SourceModel,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{file}:{line}: error: unbalanced braces or parentheses")]
    UnbalancedDelimiters { file: String, line: u32 },
}

/// Parse C-like source text into a [`SourceModel`].
///
/// Every top-level function declaration/definition, record definition,
/// and typedef in the accepted subset is captured; each function carries
/// the contiguous run of comment lines directly above it as its
/// `comment_block`.
pub fn parse_translation_unit(
    source_text: &str,
    file_name: &str,
) -> Result<ParsedUnit, ParseError> {
    let out = lex(source_text);
    let mut parser = Parser {
        tokens: out.tokens,
        comments: out.comments,
        pos: 0,
        file: file_name.to_string(),
        model: SourceModel::new(),
        diagnostics: Vec::new(),
        last_decl_start_line: None,
    };
    parser.parse_unit()?;
    Ok(ParsedUnit {
        model: parser.model,
        diagnostics: parser.diagnostics,
    })
}

const STORAGE_WORDS: &[&str] = &[
    "static", "extern", "inline", "__inline", "__inline__", "register", "_Noreturn",
];
const QUALIFIER_WORDS: &[&str] = &["const", "volatile", "restrict", "__restrict", "__restrict__"];

struct Parser {
    tokens: Vec<Token>,
    comments: Vec<Comment>,
    pos: usize,
    file: String,
    model: SourceModel,
    diagnostics: Vec<Diagnostic>,
    last_decl_start_line: Option<u32>,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn line(&self) -> u32 {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|t| t.line)
            .unwrap_or(0)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.kind.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &Tok) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == word)
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.at_word(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn warn(&mut self, line: u32, message: impl Into<String>) {
        self.diagnostics
            .push(Diagnostic::warning(&self.file, line, message));
    }

    fn err_diag(&mut self, line: u32, message: impl Into<String>) {
        self.diagnostics
            .push(Diagnostic::error(&self.file, line, message));
    }

    fn unbalanced(&self, line: u32) -> ParseError {
        ParseError::UnbalancedDelimiters {
            file: self.file.clone(),
            line,
        }
    }

    fn parse_unit(&mut self) -> Result<(), ParseError> {
        while !self.at_end() {
            let decl_line = self.line();
            match self.peek() {
                Some(Tok::Semi) => {
                    self.pos += 1;
                }
                Some(Tok::RBrace) => {
                    return Err(self.unbalanced(decl_line));
                }
                _ => self.parse_declaration(decl_line)?,
            }
        }
        Ok(())
    }

    fn parse_declaration(&mut self, decl_line: u32) -> Result<(), ParseError> {
        while matches!(self.peek(), Some(Tok::Ident(w))
            if STORAGE_WORDS.contains(&w.as_str()) || QUALIFIER_WORDS.contains(&w.as_str()))
        {
            self.pos += 1;
        }

        match self.peek() {
            Some(Tok::Ident(w)) if w == "typedef" => {
                self.last_decl_start_line = Some(decl_line);
                return self.parse_typedef(decl_line);
            }
            Some(Tok::Ident(w)) if w == "union" || w == "enum" => {
                let what = w.clone();
                self.last_decl_start_line = Some(decl_line);
                self.warn(decl_line, format!("skipping `{what}`: not in the accepted subset"));
                return self.skip_declaration();
            }
            Some(Tok::Ident(w)) if w == "struct" => {
                // A struct definition, a forward declaration, or the start
                // of a function/global whose type is `struct X`.
                match (self.peek_at(1), self.peek_at(2)) {
                    (Some(Tok::Ident(_)), Some(Tok::LBrace)) => {
                        self.last_decl_start_line = Some(decl_line);
                        return self.parse_record_def(decl_line);
                    }
                    (Some(Tok::Ident(_)), Some(Tok::Semi)) => {
                        // Forward declaration; harmless, skip silently.
                        self.pos += 3;
                        self.last_decl_start_line = Some(decl_line);
                        return Ok(());
                    }
                    (Some(Tok::LBrace), _) => {
                        self.last_decl_start_line = Some(decl_line);
                        self.warn(decl_line, "skipping anonymous struct: not in the accepted subset");
                        return self.skip_declaration();
                    }
                    _ => {}
                }
            }
            None => return Ok(()),
            _ => {}
        }

        // Function declaration/definition, or a global we skip.
        self.last_decl_start_line = Some(decl_line);
        let ty = match self.parse_full_type(decl_line) {
            Some(ty) => ty,
            None => {
                self.warn(decl_line, "skipping declaration: not in the accepted subset");
                return self.skip_declaration();
            }
        };
        let name = match self.peek() {
            Some(Tok::Ident(n)) => {
                let n = n.clone();
                self.pos += 1;
                n
            }
            _ => {
                self.warn(decl_line, "skipping declaration: expected a declarator name");
                return self.skip_declaration();
            }
        };
        if self.peek() == Some(&Tok::LParen) {
            self.parse_function(decl_line, ty, name)
        } else {
            self.warn(
                decl_line,
                format!("skipping non-function declaration `{name}`"),
            );
            self.skip_declaration()
        }
    }

    /// Type specifier plus any pointer declarators. Returns `None` when
    /// the tokens do not form a subset type (no tokens are consumed past
    /// the failure point; callers recover with `skip_declaration`).
    fn parse_full_type(&mut self, decl_line: u32) -> Option<TypeRef> {
        let mut base: Option<TypeRef> = None;

        while matches!(self.peek(), Some(Tok::Ident(w)) if QUALIFIER_WORDS.contains(&w.as_str())) {
            self.pos += 1;
        }
        if self.eat_word("struct") {
            match self.bump() {
                Some(Tok::Ident(tag)) => base = Some(TypeRef::Record(tag)),
                _ => return None,
            }
        } else if matches!(self.peek(), Some(Tok::Ident(w)) if is_basic_word(w)) {
            base = Some(self.parse_basic_combo(decl_line)?);
        } else if let Some(Tok::Ident(name)) = self.peek() {
            if !is_reserved_word(name) {
                let name = name.clone();
                self.pos += 1;
                base = Some(TypeRef::Alias(name));
            }
        }

        let mut ty = base?;
        loop {
            while matches!(self.peek(), Some(Tok::Ident(w)) if QUALIFIER_WORDS.contains(&w.as_str()))
            {
                self.pos += 1;
            }
            if self.eat(&Tok::Star) {
                ty = TypeRef::pointer_to(ty);
            } else {
                break;
            }
        }
        Some(ty)
    }

    /// Multi-word basic specifiers: `unsigned long long int`, `signed
    /// char`, and friends.
    fn parse_basic_combo(&mut self, decl_line: u32) -> Option<TypeRef> {
        let mut unsigned: Option<bool> = None;
        let mut long_count = 0u8;
        let mut saw = (false, false, false, false, false, false, false); // void,bool,char,short,int,float,double

        loop {
            match self.peek() {
                Some(Tok::Ident(w)) if QUALIFIER_WORDS.contains(&w.as_str()) => {
                    self.pos += 1;
                }
                Some(Tok::Ident(w)) if is_basic_word(w) => {
                    match w.as_str() {
                        "void" => saw.0 = true,
                        "_Bool" | "bool" => saw.1 = true,
                        "char" => saw.2 = true,
                        "short" => saw.3 = true,
                        "int" => saw.4 = true,
                        "float" => saw.5 = true,
                        "double" => saw.6 = true,
                        "long" => long_count += 1,
                        "signed" => unsigned = Some(false),
                        "unsigned" => unsigned = Some(true),
                        _ => unreachable!(),
                    }
                    self.pos += 1;
                }
                _ => break,
            }
        }

        let u = unsigned == Some(true);
        let basic = match (saw, long_count) {
            ((true, false, false, false, false, false, false), 0) => BasicType::Void,
            ((false, true, false, false, false, false, false), 0) => BasicType::Bool,
            ((false, false, true, false, false, false, false), 0) => match unsigned {
                Some(true) => BasicType::UChar,
                Some(false) => BasicType::SChar,
                None => BasicType::Char,
            },
            ((false, false, false, true, _, false, false), 0) => {
                if u { BasicType::UShort } else { BasicType::Short }
            }
            ((false, false, false, false, _, false, false), 0) => {
                if u { BasicType::UInt } else { BasicType::Int }
            }
            ((false, false, false, false, _, false, false), 1) => {
                if u { BasicType::ULong } else { BasicType::Long }
            }
            ((false, false, false, false, _, false, false), 2) => {
                if u { BasicType::ULongLong } else { BasicType::LongLong }
            }
            ((false, false, false, false, false, true, false), 0) => BasicType::Float,
            ((false, false, false, false, false, false, true), 0) => BasicType::Double,
            _ => {
                self.warn(decl_line, "unsupported type specifier combination");
                return None;
            }
        };

        Some(TypeRef::Basic(basic))
    }

    fn parse_typedef(&mut self, decl_line: u32) -> Result<(), ParseError> {
        self.pos += 1; // typedef
        while matches!(self.peek(), Some(Tok::Ident(w)) if QUALIFIER_WORDS.contains(&w.as_str())) {
            self.pos += 1;
        }

        // typedef struct [Tag] { ... } Alias;
        if self.at_word("struct")
            && matches!(
                (self.peek_at(1), self.peek_at(2)),
                (Some(Tok::LBrace), _) | (Some(Tok::Ident(_)), Some(Tok::LBrace))
            )
        {
            self.pos += 1; // struct
            let tag = match self.peek() {
                Some(Tok::Ident(t)) => {
                    let t = t.clone();
                    self.pos += 1;
                    Some(t)
                }
                _ => None,
            };
            let Some(tag) = tag else {
                self.warn(decl_line, "skipping typedef of anonymous struct: not in the accepted subset");
                return self.skip_declaration();
            };
            let fields = match self.parse_record_body(decl_line, &tag)? {
                Some(fields) => fields,
                None => return self.skip_declaration(),
            };
            self.register_record(decl_line, tag.clone(), fields);
            let mut ty = TypeRef::Record(tag);
            while self.eat(&Tok::Star) {
                ty = TypeRef::pointer_to(ty);
            }
            return self.finish_typedef(decl_line, ty);
        }

        let ty = match self.parse_full_type(decl_line) {
            Some(ty) => ty,
            None => {
                self.warn(decl_line, "skipping typedef: unsupported underlying type");
                return self.skip_declaration();
            }
        };
        if self.peek() == Some(&Tok::LParen) {
            self.warn(decl_line, "skipping function pointer typedef: not in the accepted subset");
            return self.skip_declaration();
        }
        self.finish_typedef(decl_line, ty)
    }

    fn finish_typedef(&mut self, decl_line: u32, ty: TypeRef) -> Result<(), ParseError> {
        let name = match self.peek() {
            Some(Tok::Ident(n)) => {
                let n = n.clone();
                self.pos += 1;
                n
            }
            _ => {
                self.warn(decl_line, "skipping typedef: expected an alias name");
                return self.skip_declaration();
            }
        };
        match self.peek() {
            Some(Tok::LParen) => {
                self.warn(
                    decl_line,
                    format!("skipping function type typedef `{name}`: not in the accepted subset"),
                );
                return self.skip_declaration();
            }
            Some(Tok::LBracket) => {
                self.warn(
                    decl_line,
                    format!("skipping array typedef `{name}`: not in the accepted subset"),
                );
                return self.skip_declaration();
            }
            _ => {}
        }
        if !self.eat(&Tok::Semi) {
            self.warn(decl_line, format!("skipping malformed typedef `{name}`"));
            return self.skip_declaration();
        }
        self.insert_alias(decl_line, name, ty);
        Ok(())
    }

    fn insert_alias(&mut self, line: u32, name: String, ty: TypeRef) {
        if self.model.aliases.contains_key(&name) {
            self.err_diag(
                line,
                format!("duplicate typedef `{name}`; later definition rejected"),
            );
            return;
        }
        self.model.aliases.insert(name.clone(), ty);
        // Reject typedefs that close an alias cycle.
        if let Err(super::ModelError::AliasCycle(_)) =
            super::resolve_type(&self.model, &TypeRef::Alias(name.clone()))
        {
            self.model.aliases.remove(&name);
            self.err_diag(line, format!("typedef `{name}` creates an alias cycle; rejected"));
        }
    }

    /// `struct Tag { ... } ;` at the top level.
    fn parse_record_def(&mut self, decl_line: u32) -> Result<(), ParseError> {
        self.pos += 1; // struct
        let name = match self.bump() {
            Some(Tok::Ident(n)) => n,
            _ => unreachable!("caller checked"),
        };
        let fields = match self.parse_record_body(decl_line, &name)? {
            Some(fields) => fields,
            None => return self.skip_declaration(),
        };
        if !self.eat(&Tok::Semi) {
            self.warn(
                decl_line,
                format!("skipping declarator after struct `{name}` definition"),
            );
            self.register_record(decl_line, name, fields);
            return self.skip_declaration();
        }
        self.register_record(decl_line, name, fields);
        Ok(())
    }

    fn register_record(&mut self, line: u32, name: String, fields: Vec<Field>) {
        if self.model.records.contains_key(&name) {
            self.err_diag(
                line,
                format!("duplicate definition of struct `{name}`; later definition rejected"),
            );
            return;
        }
        self.model.records.insert(name.clone(), RecordDef { name, fields });
    }

    /// Field list between braces. Returns `Ok(None)` after emitting a
    /// diagnostic when the body is outside the subset; the caller then
    /// recovers. The brace itself is always consumed past on success.
    fn parse_record_body(
        &mut self,
        decl_line: u32,
        name: &str,
    ) -> Result<Option<Vec<Field>>, ParseError> {
        let brace_line = self.line();
        if !self.eat(&Tok::LBrace) {
            unreachable!("caller checked for brace");
        }
        let mut fields: Vec<Field> = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.unbalanced(brace_line)),
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    break;
                }
                _ => {}
            }
            let field_line = self.line();
            let Some(base) = self.parse_full_type(field_line) else {
                self.warn(
                    decl_line,
                    format!("skipping struct `{name}`: unsupported field type"),
                );
                self.skip_to_close_brace(brace_line)?;
                return Ok(None);
            };
            // One or more declarators; each may add its own pointer stars.
            let mut ty = base.clone();
            loop {
                let fname = match self.peek() {
                    Some(Tok::Ident(n)) => {
                        let n = n.clone();
                        self.pos += 1;
                        n
                    }
                    _ => {
                        self.warn(decl_line, format!("skipping struct `{name}`: malformed field"));
                        self.skip_to_close_brace(brace_line)?;
                        return Ok(None);
                    }
                };
                match self.peek() {
                    Some(Tok::LBracket) => {
                        self.warn(
                            decl_line,
                            format!("skipping struct `{name}`: array fields are not supported"),
                        );
                        self.skip_to_close_brace(brace_line)?;
                        return Ok(None);
                    }
                    Some(Tok::Other(':')) => {
                        self.warn(
                            decl_line,
                            format!("skipping struct `{name}`: bitfields are not supported"),
                        );
                        self.skip_to_close_brace(brace_line)?;
                        return Ok(None);
                    }
                    _ => {}
                }
                if fields.iter().any(|f| f.name == fname) {
                    self.warn(
                        decl_line,
                        format!("skipping struct `{name}`: duplicate field `{fname}`"),
                    );
                    self.skip_to_close_brace(brace_line)?;
                    return Ok(None);
                }
                fields.push(Field { name: fname, ty: ty.clone() });
                if self.eat(&Tok::Comma) {
                    // Next declarator shares the base type, fresh stars.
                    ty = base.clone();
                    while self.eat(&Tok::Star) {
                        ty = TypeRef::pointer_to(ty);
                    }
                    continue;
                }
                break;
            }
            if !self.eat(&Tok::Semi) {
                self.warn(decl_line, format!("skipping struct `{name}`: malformed field list"));
                self.skip_to_close_brace(brace_line)?;
                return Ok(None);
            }
        }
        if fields.is_empty() {
            self.warn(decl_line, format!("empty struct `{name}` rejected"));
            // Trailing `;` after the brace, if present.
            self.eat(&Tok::Semi);
            return Ok(None);
        }
        Ok(Some(fields))
    }

    fn parse_function(
        &mut self,
        decl_line: u32,
        return_type: TypeRef,
        name: String,
    ) -> Result<(), ParseError> {
        let paren_line = self.line();
        self.pos += 1; // (
        let mut params: Vec<Param> = Vec::new();
        let mut variadic = false;

        if self.eat(&Tok::RParen) {
            // ()
        } else if self.at_word("void") && self.peek_at(1) == Some(&Tok::RParen) {
            self.pos += 2;
        } else {
            loop {
                if self.at_end() {
                    return Err(self.unbalanced(paren_line));
                }
                if self.eat(&Tok::Ellipsis) {
                    variadic = true;
                    if !self.eat(&Tok::RParen) {
                        self.warn(decl_line, format!("skipping function `{name}`: malformed parameter list"));
                        return self.skip_declaration();
                    }
                    break;
                }
                let Some(mut pty) = self.parse_full_type(decl_line) else {
                    self.warn(
                        decl_line,
                        format!("skipping function `{name}`: unsupported parameter type"),
                    );
                    return self.skip_balanced_parens_then_decl(paren_line);
                };
                let pname = match self.peek() {
                    Some(Tok::Ident(n)) => {
                        let n = n.clone();
                        self.pos += 1;
                        n
                    }
                    _ => {
                        // Unnamed parameter (common in header declarations);
                        // synthesize a stable name.
                        let mut candidate = format!("arg{}", params.len());
                        while params.iter().any(|p| p.name == candidate) {
                            candidate.push('_');
                        }
                        candidate
                    }
                };
                // Array parameters decay to pointers.
                if self.eat(&Tok::LBracket) {
                    while !self.eat(&Tok::RBracket) {
                        if self.bump().is_none() {
                            return Err(self.unbalanced(paren_line));
                        }
                    }
                    pty = TypeRef::pointer_to(pty);
                }
                params.push(Param {
                    name: pname,
                    ty: pty,
                    position: params.len(),
                });
                if self.eat(&Tok::Comma) {
                    continue;
                }
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.warn(decl_line, format!("skipping function `{name}`: malformed parameter list"));
                return self.skip_balanced_parens_then_decl(paren_line);
            }
        }

        match self.peek() {
            Some(Tok::Semi) => {
                self.pos += 1;
            }
            Some(Tok::LBrace) => {
                self.skip_balanced_braces()?;
            }
            _ => {
                self.warn(
                    decl_line,
                    format!("skipping function `{name}`: unexpected tokens after parameter list"),
                );
                return self.skip_declaration();
            }
        }

        for i in 0..params.len() {
            if params[i + 1..].iter().any(|p| p.name == params[i].name) {
                self.warn(
                    decl_line,
                    format!("skipping function `{name}`: duplicate parameter `{}`", params[i].name),
                );
                return Ok(());
            }
        }

        let comment_block = self.comment_block_for(decl_line);
        self.model.add_function(FunctionSignature {
            name,
            return_type,
            params,
            variadic,
            comment_block,
            location: SourceLoc {
                file: self.file.clone(),
                line: decl_line,
            },
        });
        Ok(())
    }

    /// Maximal run of whole-line comments ending on the line directly
    /// above `decl_line`, with no blank or code line in between. Only the
    /// first declaration starting on a given line may claim a run.
    fn comment_block_for(&self, decl_line: u32) -> String {
        let mut run: Vec<&Comment> = Vec::new();
        let mut expect_end = decl_line.saturating_sub(1);
        if expect_end == 0 {
            return String::new();
        }
        for comment in self.comments.iter().rev() {
            if !comment.owns_line || comment.end_line != expect_end {
                continue;
            }
            run.push(comment);
            if comment.start_line == 0 {
                break;
            }
            expect_end = comment.start_line - 1;
        }
        run.reverse();
        run.iter()
            .map(|c| c.raw.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Recovery: skip to the next top-level `;` or past one balanced
    /// brace block (plus an optional trailing `;`).
    fn skip_declaration(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                None => return Ok(()),
                Some(Tok::Semi) => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(Tok::LBrace) => {
                    self.skip_balanced_braces()?;
                    self.eat(&Tok::Semi);
                    return Ok(());
                }
                Some(Tok::RBrace) => {
                    return Err(self.unbalanced(self.line()));
                }
                _ => {
                    self.pos += 1;
                }
            }
        }
    }

    fn skip_balanced_parens_then_decl(&mut self, open_line: u32) -> Result<(), ParseError> {
        let mut depth = 1i32; // caller consumed the opening paren
        while depth > 0 {
            match self.bump() {
                None => return Err(self.unbalanced(open_line)),
                Some(Tok::LParen) => depth += 1,
                Some(Tok::RParen) => depth -= 1,
                _ => {}
            }
        }
        self.skip_declaration()
    }

    fn skip_balanced_braces(&mut self) -> Result<(), ParseError> {
        let open_line = self.line();
        if !self.eat(&Tok::LBrace) {
            return Ok(());
        }
        let mut depth = 1i32;
        while depth > 0 {
            match self.bump() {
                None => return Err(self.unbalanced(open_line)),
                Some(Tok::LBrace) => depth += 1,
                Some(Tok::RBrace) => depth -= 1,
                _ => {}
            }
        }
        Ok(())
    }

    fn skip_to_close_brace(&mut self, open_line: u32) -> Result<(), ParseError> {
        let mut depth = 1i32;
        while depth > 0 {
            match self.bump() {
                None => return Err(self.unbalanced(open_line)),
                Some(Tok::LBrace) => depth += 1,
                Some(Tok::RBrace) => depth -= 1,
                _ => {}
            }
        }
        // Definition tail: `} ;` or `} name;` (the declarator is skipped
        // by the caller's recovery path when present).
        self.eat(&Tok::Semi);
        Ok(())
    }
}

fn is_basic_word(w: &str) -> bool {
    matches!(
        w,
        "void" | "_Bool" | "bool" | "char" | "short" | "int" | "long" | "float" | "double"
            | "signed" | "unsigned"
    )
}

fn is_reserved_word(w: &str) -> bool {
    is_basic_word(w)
        || STORAGE_WORDS.contains(&w)
        || QUALIFIER_WORDS.contains(&w)
        || matches!(
            w,
            "struct" | "union" | "enum" | "typedef" | "return" | "if" | "else" | "while"
                | "for" | "do" | "switch" | "case" | "default" | "break" | "continue"
                | "goto" | "sizeof"
        )
}
