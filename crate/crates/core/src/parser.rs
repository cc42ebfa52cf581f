//! The line-oriented Block Diagram Language (`.bdl`).
//!
//! ```text
//! model gain_chain
//! sample_time 0.5          # optional, defaults to 1
//! block u Inport
//! block g Gain k=2
//! block y Outport
//! wire u.0 -> g.0
//! wire g.0 -> y.0
//! ```
//!
//! Numeric literals are exact decimals (`-1.25e-3`) or fractions (`1/3`).
//! Parsing checks syntax and parameters only; wiring is checked by
//! [`crate::validate`].

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{Block, BlockKind, Model, PortRef, Sign, UnaryOp, Wire};
use crate::rational::{format_exact, parse_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lex,
    Syntax,
    UnknownKind,
    BadParam,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}:{}: {message}", .span.line, .span.column)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    /// Renders the error with the offending source line and a caret marker.
    pub fn render(&self, source_name: &str, text: &str) -> String {
        let mut out = format!(
            "error: {}\n  --> {}:{}:{}\n",
            self.message, source_name, self.span.line, self.span.column
        );
        if let Some(line) = text.lines().nth(self.span.line - 1) {
            let line = line.trim_end_matches('\r');
            let gutter = self.span.line.to_string();
            let pad = " ".repeat(gutter.len());
            let _ = writeln!(out, "{pad} |");
            let _ = writeln!(out, "{gutter} | {line}");
            let _ = writeln!(
                out,
                "{pad} | {}{}",
                " ".repeat(self.span.column - 1),
                "^".repeat(self.span.length.max(1))
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Signs(String),
    Dot,
    Arrow,
    Eq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Signs(s) => format!("sign string `{s}`"),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    column: usize,
    length: usize,
}

fn lex_line(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = if c == '#' {
            break;
        } else if c.is_whitespace() {
            i += 1;
            continue;
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || ((c == '+' || c == '-') && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            i = scan_number(&chars, i);
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            Tok::Arrow
        } else if c == '+' || c == '-' {
            while i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                i += 1;
            }
            Tok::Signs(chars[start..i].iter().collect())
        } else if c == '.' {
            i += 1;
            Tok::Dot
        } else if c == '=' {
            i += 1;
            Tok::Eq
        } else {
            return Err(ParseError {
                span: SourceSpan {
                    line: line_no,
                    column: start + 1,
                    length: 1,
                },
                kind: ParseErrorKind::Lex,
                message: format!("unexpected character `{c}`"),
            });
        };
        tokens.push(Token {
            tok,
            column: start + 1,
            length: i - start,
        });
    }
    Ok(tokens)
}

fn scan_number(chars: &[char], mut i: usize) -> usize {
    let digits = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
    };
    if chars[i] == '+' || chars[i] == '-' {
        i += 1;
    }
    digits(&mut i);
    let digit_at = |j: usize| chars.get(j).is_some_and(char::is_ascii_digit);
    if chars.get(i) == Some(&'.') && digit_at(i + 1) {
        i += 1;
        digits(&mut i);
    }
    if matches!(chars.get(i), Some('e' | 'E')) {
        let signed = matches!(chars.get(i + 1), Some('+' | '-'));
        let first = if signed { i + 2 } else { i + 1 };
        if digit_at(first) {
            i = first;
            digits(&mut i);
        }
    }
    if chars.get(i) == Some(&'/') && digit_at(i + 1) {
        i += 1;
        digits(&mut i);
    }
    i
}

struct LineParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
    line_len: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, kind: ParseErrorKind, column: usize, length: usize, message: String) -> ParseError {
        ParseError {
            span: SourceSpan {
                line: self.line,
                column,
                length: length.max(1),
            },
            kind,
            message,
        }
    }

    fn err_at(&self, token: &Token, kind: ParseErrorKind, message: String) -> ParseError {
        self.err(kind, token.column, token.length, message)
    }

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<&'a Token, ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(self.err(
                ParseErrorKind::Syntax,
                self.line_len + 1,
                1,
                format!("expected {expected}, found end of line"),
            )),
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(&'a Token, &'a str), ParseError> {
        let t = self.next(expected)?;
        match &t.tok {
            Tok::Ident(s) => Ok((t, s.as_str())),
            other => Err(self.err_at(
                t,
                ParseErrorKind::Syntax,
                format!("expected {expected}, found {}", other.describe()),
            )),
        }
    }

    fn punct(&mut self, want: Tok) -> Result<(), ParseError> {
        let t = self.next(&want.describe())?;
        if t.tok == want {
            Ok(())
        } else {
            Err(self.err_at(
                t,
                ParseErrorKind::Syntax,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            ))
        }
    }

    fn nat(&mut self, expected: &str) -> Result<usize, ParseError> {
        let t = self.next(expected)?;
        match &t.tok {
            Tok::Number(s) if s.chars().all(|c| c.is_ascii_digit()) => s
                .parse()
                .map_err(|_| self.err_at(t, ParseErrorKind::Syntax, format!("port index `{s}` is too large"))),
            other => Err(self.err_at(
                t,
                ParseErrorKind::Syntax,
                format!("expected {expected}, found {}", other.describe()),
            )),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err_at(
                t,
                ParseErrorKind::Syntax,
                format!("unexpected {} at end of statement", t.tok.describe()),
            )),
        }
    }

    fn port(&mut self, what: &str) -> Result<PortRef, ParseError> {
        let (_, block) = self.ident(&format!("{what} block id"))?;
        self.punct(Tok::Dot)?;
        let port = self.nat("port index")?;
        Ok(PortRef::new(block, port))
    }
}

/// Parses BDL text into a [`Model`], stopping at the first error.
pub fn parse_bdl(text: &str) -> Result<Model, ParseError> {
    let mut model: Option<Model> = None;
    let mut sample_time_seen = false;
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let tokens = lex_line(line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser {
            tokens: &tokens,
            pos: 0,
            line: line_no,
            line_len: tokens.last().map_or(0, |t| t.column + t.length - 1),
        };
        let (kw_tok, keyword) = p.ident("a statement keyword")?;
        let Some(m) = model.as_mut() else {
            if keyword != "model" {
                return Err(p.err_at(
                    kw_tok,
                    ParseErrorKind::Syntax,
                    "file must start with `model <name>`".into(),
                ));
            }
            let (_, name) = p.ident("model name")?;
            p.end()?;
            model = Some(Model::new(name));
            continue;
        };
        match keyword {
            "model" => return Err(p.err_at(kw_tok, ParseErrorKind::Syntax, "duplicate `model` header".into())),
            "block" => {
                let block = parse_block(&mut p)?;
                m.blocks.push(block);
            }
            "wire" => {
                let src = p.port("source")?;
                p.punct(Tok::Arrow)?;
                let dst = p.port("destination")?;
                p.end()?;
                m.wires.push(Wire::new(src, dst));
            }
            "sample_time" => {
                if sample_time_seen {
                    return Err(p.err_at(kw_tok, ParseErrorKind::Syntax, "duplicate `sample_time`".into()));
                }
                sample_time_seen = true;
                let t = p.next("a number")?;
                let value = match &t.tok {
                    Tok::Number(s) => parse_rational(s),
                    _ => None,
                };
                match value {
                    Some(v) if v > Rational::from_integer(0.into()) => m.sample_time = v,
                    _ => {
                        return Err(p.err_at(
                            t,
                            ParseErrorKind::BadParam,
                            "sample_time must be a positive number".into(),
                        ))
                    }
                }
                p.end()?;
            }
            other => return Err(p.err_at(kw_tok, ParseErrorKind::Syntax, format!("unknown statement `{other}`"))),
        }
    }
    model.ok_or(ParseError {
        span: SourceSpan {
            line: 1,
            column: 1,
            length: 1,
        },
        kind: ParseErrorKind::Syntax,
        message: "missing `model <name>` header".into(),
    })
}

fn parse_block(p: &mut LineParser<'_>) -> Result<Block, ParseError> {
    let (_, id) = p.ident("block id")?;
    let (kind_tok, kind_name) = p.ident("block kind")?;
    if !BlockKind::NAMES.contains(&kind_name) {
        return Err(p.err_at(
            kind_tok,
            ParseErrorKind::UnknownKind,
            format!(
                "unknown block kind `{kind_name}` (expected one of {})",
                BlockKind::NAMES.join(", ")
            ),
        ));
    }
    let mut params: Vec<(&Token, &str, &Token)> = Vec::new();
    while p.peek().is_some() {
        let (key_tok, key) = p.ident("parameter name")?;
        p.punct(Tok::Eq)?;
        let value = p.next("parameter value")?;
        if params.iter().any(|(_, k, _)| *k == key) {
            return Err(p.err_at(
                key_tok,
                ParseErrorKind::BadParam,
                format!("duplicate parameter `{key}`"),
            ));
        }
        params.push((key_tok, key, value));
    }
    let expected: &[&str] = match kind_name {
        "Constant" => &["value"],
        "Gain" => &["k"],
        "Sum" => &["signs"],
        "Product" => &["arity"],
        "UnaryFn" => &["op"],
        "UnitDelay" | "Integrator" => &["init"],
        _ => &[],
    };
    if let Some((key_tok, key, _)) = params.iter().find(|(_, k, _)| !expected.contains(k)) {
        return Err(p.err_at(
            key_tok,
            ParseErrorKind::BadParam,
            format!("{kind_name} has no parameter `{key}`"),
        ));
    }
    let param = |name: &str| -> Result<&Token, ParseError> {
        params
            .iter()
            .find(|(_, k, _)| *k == name)
            .map(|(_, _, v)| *v)
            .ok_or_else(|| {
                p.err_at(
                    kind_tok,
                    ParseErrorKind::BadParam,
                    format!("{kind_name} requires parameter `{name}=`"),
                )
            })
    };
    let number = |name: &str| -> Result<Rational, ParseError> {
        let t = param(name)?;
        match &t.tok {
            Tok::Number(s) => parse_rational(s),
            _ => None,
        }
        .ok_or_else(|| {
            p.err_at(
                t,
                ParseErrorKind::BadParam,
                format!("parameter `{name}` must be a number, found {}", t.tok.describe()),
            )
        })
    };
    let kind = match kind_name {
        "Inport" => BlockKind::Inport,
        "Outport" => BlockKind::Outport,
        "Clock" => BlockKind::Clock,
        "Constant" => BlockKind::Constant {
            value: number("value")?,
        },
        "Gain" => BlockKind::Gain { k: number("k")? },
        "UnitDelay" => BlockKind::UnitDelay { init: number("init")? },
        "Integrator" => BlockKind::Integrator { init: number("init")? },
        "Sum" => {
            let t = param("signs")?;
            let signs: Option<Vec<Sign>> = match &t.tok {
                Tok::Signs(s) => Some(
                    s.chars()
                        .map(|c| if c == '+' { Sign::Plus } else { Sign::Minus })
                        .collect(),
                ),
                _ => None,
            };
            match signs {
                Some(signs) if signs.len() >= 2 => BlockKind::Sum { signs },
                _ => {
                    return Err(p.err_at(
                        t,
                        ParseErrorKind::BadParam,
                        "parameter `signs` must be at least two of `+`/`-`".into(),
                    ))
                }
            }
        }
        "Product" => {
            let t = param("arity")?;
            match &t.tok {
                Tok::Number(s) if s.chars().all(|c| c.is_ascii_digit()) => match s.parse() {
                    Ok(arity) if arity >= 2 => BlockKind::Product { arity },
                    _ => {
                        return Err(p.err_at(
                            t,
                            ParseErrorKind::BadParam,
                            "parameter `arity` must be an integer >= 2".into(),
                        ))
                    }
                },
                _ => {
                    return Err(p.err_at(
                        t,
                        ParseErrorKind::BadParam,
                        "parameter `arity` must be an integer >= 2".into(),
                    ))
                }
            }
        }
        "UnaryFn" => {
            let t = param("op")?;
            match &t.tok {
                Tok::Ident(s) => match UnaryOp::from_name(s) {
                    Some(op) => BlockKind::UnaryFn { op },
                    None => {
                        return Err(p.err_at(
                            t,
                            ParseErrorKind::BadParam,
                            format!("unknown op `{s}` (expected sin, cos, neg or abs)"),
                        ))
                    }
                },
                other => {
                    return Err(p.err_at(
                        t,
                        ParseErrorKind::BadParam,
                        format!("parameter `op` must be a name, found {}", other.describe()),
                    ))
                }
            }
        }
        _ => unreachable!("kind names checked above"),
    };
    Ok(Block::new(id, kind))
}

/// Canonical text: header, blocks sorted by id, wires sorted by destination.
pub fn serialize_bdl(model: &Model) -> String {
    let m = model.canonical();
    let mut out = String::new();
    let _ = writeln!(out, "model {}", m.name);
    if m.sample_time != Rational::from_integer(1.into()) {
        let _ = writeln!(out, "sample_time {}", format_exact(&m.sample_time));
    }
    for b in &m.blocks {
        let _ = writeln!(out, "block {} {}", b.id, BlockParams(&b.kind));
    }
    for w in &m.wires {
        let _ = writeln!(out, "wire {} -> {}", w.src, w.dst);
    }
    out
}

struct BlockParams<'a>(&'a BlockKind);

impl fmt::Display for BlockParams<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = self.0;
        f.write_str(kind.name())?;
        match kind {
            BlockKind::Constant { value } => write!(f, " value={}", format_exact(value)),
            BlockKind::Gain { k } => write!(f, " k={}", format_exact(k)),
            BlockKind::Sum { signs } => {
                f.write_str(" signs=")?;
                signs.iter().try_for_each(|s| f.write_char(s.as_char()))
            }
            BlockKind::Product { arity } => write!(f, " arity={arity}"),
            BlockKind::UnaryFn { op } => write!(f, " op={op}"),
            BlockKind::UnitDelay { init } | BlockKind::Integrator { init } => {
                write!(f, " init={}", format_exact(init))
            }
            BlockKind::Inport | BlockKind::Outport | BlockKind::Clock => Ok(()),
        }
    }
}
