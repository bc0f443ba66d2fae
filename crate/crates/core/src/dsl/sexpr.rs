use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Position of a form in its source text; line and column are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Option<Arc<str>>,
    pub line: usize,
    pub column: usize,
    /// Byte offset of the first character.
    pub offset: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// Lower-cased.
    Symbol(String),
    /// Decimal literal, kept as written so costs can be parsed exactly.
    Number(String),
    Str(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Atom(Atom),
    List(Vec<SExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SExpr {
    pub node: Node,
    pub span: SourceSpan,
}

impl SExpr {
    pub fn as_symbol(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(Atom::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    /// Symbols and numbers both serve as constants.
    pub fn as_term(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(Atom::Symbol(s)) | Node::Atom(Atom::Number(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<&str> {
        match &self.node {
            Node::Atom(Atom::Number(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match &self.node {
            Node::List(items) => Some(items),
            _ => None,
        }
    }

    /// A list whose first element is the given keyword symbol.
    pub fn is_form(&self, keyword: &str) -> bool {
        self.as_list()
            .and_then(|items| items.first())
            .and_then(SExpr::as_symbol)
            .is_some_and(|s| s == keyword)
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Validation {
            span: self.span.clone(),
            message: message.into(),
        }
    }

    pub fn parse_error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            span: self.span.clone(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Atom(Atom::Symbol(s)) | Node::Atom(Atom::Number(s)) => f.write_str(s),
            Node::Atom(Atom::Str(s)) => write!(f, "{s:?}"),
            Node::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn is_number(token: &str) -> bool {
    let body = token.strip_prefix(['-', '+']).unwrap_or(token);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    (!int.is_empty() || !frac.is_empty())
        && int.chars().all(|c| c.is_ascii_digit())
        && frac.chars().all(|c| c.is_ascii_digit())
}

struct Reader<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    column: usize,
    file: Option<Arc<str>>,
}

impl Reader<'_> {
    fn span(&self) -> SourceSpan {
        SourceSpan {
            file: self.file.clone(),
            line: self.line,
            column: self.column,
            offset: self.pos,
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn error(&self, span: SourceSpan, message: impl Into<String>) -> Error {
        Error::Parse {
            span,
            message: message.into(),
        }
    }

    fn read(&mut self) -> Result<SExpr> {
        let span = self.span();
        match self.peek() {
            None => Err(self.error(span, "unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(self.error(span, "unclosed `(`")),
                        Some(')') => {
                            self.bump();
                            return Ok(SExpr {
                                node: Node::List(items),
                                span,
                            });
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(')') => Err(self.error(span, "unexpected `)`")),
            Some('"') => {
                self.bump();
                let mut out = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error(span, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => out.push('\n'),
                            Some('t') => out.push('\t'),
                            Some(c @ ('"' | '\\')) => out.push(c),
                            _ => return Err(self.error(self.span(), "bad escape in string")),
                        },
                        Some(c) => out.push(c),
                    }
                }
                Ok(SExpr {
                    node: Node::Atom(Atom::Str(out)),
                    span,
                })
            }
            Some(_) => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '"') {
                        break;
                    }
                    self.bump();
                }
                let token = &self.text[start..self.pos];
                let atom = if is_number(token) {
                    Atom::Number(token.to_string())
                } else {
                    Atom::Symbol(token.to_lowercase())
                };
                Ok(SExpr {
                    node: Node::Atom(atom),
                    span,
                })
            }
        }
    }
}

/// Reads every top-level form of `text`.
pub fn parse_sexprs(text: &str, file: Option<&str>) -> Result<Vec<SExpr>> {
    let mut reader = Reader {
        text,
        pos: 0,
        line: 1,
        column: 1,
        file: file.map(Arc::from),
    };
    let mut forms = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(forms);
        }
        forms.push(reader.read()?);
    }
}
