//! Parser for the `.poly` signature/query language.
//!
//! The grammar mirrors the mathematical notation one-for-one: `+{...}` for
//! variants, `&{...}` for records, `*` for products (binds tighter than the
//! right-associative `->`), `1` for unit, and `forall`/`exists` binders.
//! Lines starting with `--` are comments.
//!
//! Parsing happens in two steps: a span-carrying concrete tree, then a
//! resolution pass that classifies identifiers (binder variable, enclosing
//! definition's parameter, or constructor reference) and checks arities.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::syntax::Variance;

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    fn join(self, other: Span) -> Span {
        Span {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    /// 1-based (line, column) of the span start.
    pub fn line_col(&self, text: &str) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for (i, ch) in text.char_indices() {
            if i >= self.start {
                break;
            }
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct ParseError {
    pub message: String,
    pub span: Span,
}

impl ParseError {
    fn new(message: impl Into<String>, span: Span) -> Self {
        ParseError {
            message: message.into(),
            span,
        }
    }

    /// Renders as `line:col: message` against the original source.
    pub fn display_with(&self, text: &str) -> String {
        let (line, col) = self.span.line_col(text);
        format!("{line}:{col}: {}", self.message)
    }
}

// ---------------------------------------------------------------------------
// Concrete syntax trees
// ---------------------------------------------------------------------------

/// A parsed `.poly` file, in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemKind {
    Type,
    Abbrev,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    pub name: String,
    pub params: Vec<String>,
    pub body: RawType,
    pub span: Span,
}

/// Unresolved type tree; identifiers are classified later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawType {
    Ident(String, Vec<RawType>, Span),
    Product(Box<RawType>, Box<RawType>),
    Unit,
    Variant(Vec<(String, RawType, Span)>),
    Record(Vec<(String, RawType, Span)>),
    Arrow(Box<RawType>, Box<RawType>),
    Forall(String, Box<RawType>),
    Exists(String, Box<RawType>),
}

/// A resolved surface type. `Param` is a position into the enclosing
/// definition's parameter list; `Var` is a de Bruijn index to the enclosing
/// `forall`/`exists` binder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceType {
    Con(String, Vec<SurfaceType>),
    Param(u32),
    Var(u32),
    Product(Box<SurfaceType>, Box<SurfaceType>),
    Unit,
    Variant(Vec<(String, SurfaceType)>),
    Record(Vec<(String, SurfaceType)>),
    Arrow(Box<SurfaceType>, Box<SurfaceType>),
    Forall(String, Box<SurfaceType>),
    Exists(String, Box<SurfaceType>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefKind {
    Defined,
    Abbrev,
}

/// A resolved definition, ready for elaboration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceDef {
    pub kind: DefKind,
    pub name: String,
    pub params: Vec<String>,
    pub body: SurfaceType,
}

/// A resolved signature: definitions in source order, names unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurfaceSignature {
    pub defs: Vec<SurfaceDef>,
}

impl SurfaceSignature {
    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.defs
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.params.len())
    }
}

/// A parsed subtyping query. `a >= b` is stored as `b <= a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub left: SurfaceType,
    pub right: SurfaceType,
    pub variance: Variance,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    KwType,
    KwAbbrev,
    KwForall,
    KwExists,
    One,
    Star,
    Arrow,
    Plus,
    Amp,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Eq,
    Le,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::KwType => f.write_str("`type`"),
            Tok::KwAbbrev => f.write_str("`abbrev`"),
            Tok::KwForall => f.write_str("`forall`"),
            Tok::KwExists => f.write_str("`exists`"),
            Tok::One => f.write_str("`1`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    // `end$` spells the paper's `$` label; primes allow names like alist'.
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '$'
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let start = i;
        let single = |t: Tok| (t, Span { start, end: start + 1 });
        match c {
            '*' => toks.push(single(Tok::Star)),
            '+' => toks.push(single(Tok::Plus)),
            '&' => toks.push(single(Tok::Amp)),
            '{' => toks.push(single(Tok::LBrace)),
            '}' => toks.push(single(Tok::RBrace)),
            '[' => toks.push(single(Tok::LBracket)),
            ']' => toks.push(single(Tok::RBracket)),
            '(' => toks.push(single(Tok::LParen)),
            ')' => toks.push(single(Tok::RParen)),
            ',' => toks.push(single(Tok::Comma)),
            ':' => toks.push(single(Tok::Colon)),
            '.' => toks.push(single(Tok::Dot)),
            '=' => toks.push(single(Tok::Eq)),
            '1' => toks.push(single(Tok::One)),
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                toks.push((Tok::Arrow, Span { start, end: start + 2 }));
                chars.next();
            }
            '<' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((Tok::Le, Span { start, end: start + 2 }));
                chars.next();
            }
            '>' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((Tok::Ge, Span { start, end: start + 2 }));
                chars.next();
            }
            c if is_ident_start(c) => {
                chars.next();
                let mut end = i + c.len_utf8();
                while let Some(&(j, c2)) = chars.peek() {
                    if is_ident_continue(c2) {
                        end = j + c2.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let span = Span { start, end };
                let word = &text[start..end];
                let tok = match word {
                    "type" => Tok::KwType,
                    "abbrev" => Tok::KwAbbrev,
                    "forall" => Tok::KwForall,
                    "exists" => Tok::KwExists,
                    _ => Tok::Ident(word.to_string()),
                };
                toks.push((tok, span));
                continue;
            }
            other => {
                return Err(ParseError::new(
                    format!("unexpected character `{other}`"),
                    Span { start, end: start + c.len_utf8() },
                ));
            }
        }
        chars.next();
    }
    let end = text.len();
    toks.push((Tok::Eof, Span { start: end, end }));
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<Span, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(ParseError::new(
                format!("expected {tok}, found {}", self.peek()),
                self.span(),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        match self.bump() {
            (Tok::Ident(s), sp) => Ok((s, sp)),
            (other, sp) => Err(ParseError::new(
                format!("expected {what}, found {other}"),
                sp,
            )),
        }
    }

    fn file(&mut self) -> Result<SourceFile, ParseError> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(SourceFile { items })
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let (kw, start) = self.bump();
        let kind = match kw {
            Tok::KwType => ItemKind::Type,
            Tok::KwAbbrev => ItemKind::Abbrev,
            other => {
                return Err(ParseError::new(
                    format!("expected `type` or `abbrev`, found {other}"),
                    start,
                ))
            }
        };
        let (name, _) = self.ident("a definition name")?;
        let mut params = Vec::new();
        if *self.peek() == Tok::LBracket {
            self.bump();
            loop {
                let (p, sp) = self.ident("a parameter name")?;
                if params.contains(&p) {
                    return Err(ParseError::new(format!("duplicate parameter `{p}`"), sp));
                }
                params.push(p);
                match self.bump() {
                    (Tok::Comma, _) => continue,
                    (Tok::RBracket, _) => break,
                    (other, sp) => {
                        return Err(ParseError::new(
                            format!("expected `,` or `]`, found {other}"),
                            sp,
                        ))
                    }
                }
            }
        }
        self.expect(Tok::Eq)?;
        let body = self.ty()?;
        let end = self.toks[self.pos.saturating_sub(1)].1;
        Ok(Item {
            kind,
            name,
            params,
            body,
            span: start.join(end),
        })
    }

    fn ty(&mut self) -> Result<RawType, ParseError> {
        match self.peek() {
            Tok::KwForall | Tok::KwExists => {
                let is_forall = *self.peek() == Tok::KwForall;
                self.bump();
                let (x, _) = self.ident("a variable name")?;
                self.expect(Tok::Dot)?;
                let body = Box::new(self.ty()?);
                Ok(if is_forall {
                    RawType::Forall(x, body)
                } else {
                    RawType::Exists(x, body)
                })
            }
            _ => self.arrow(),
        }
    }

    fn arrow(&mut self) -> Result<RawType, ParseError> {
        let lhs = self.prod()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.ty()?;
            Ok(RawType::Arrow(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn prod(&mut self) -> Result<RawType, ParseError> {
        let mut acc = self.atom()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let rhs = self.atom()?;
            acc = RawType::Product(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<RawType, ParseError> {
        match self.bump() {
            (Tok::One, _) => Ok(RawType::Unit),
            (Tok::Plus, _) => {
                self.expect(Tok::LBrace)?;
                Ok(RawType::Variant(self.fields()?))
            }
            (Tok::Amp, _) => {
                self.expect(Tok::LBrace)?;
                Ok(RawType::Record(self.fields()?))
            }
            (Tok::LParen, _) => {
                let inner = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            (Tok::Ident(name), sp) => {
                let mut args = Vec::new();
                if *self.peek() == Tok::LBracket {
                    self.bump();
                    loop {
                        args.push(self.ty()?);
                        match self.bump() {
                            (Tok::Comma, _) => continue,
                            (Tok::RBracket, _) => break,
                            (other, sp) => {
                                return Err(ParseError::new(
                                    format!("expected `,` or `]`, found {other}"),
                                    sp,
                                ))
                            }
                        }
                    }
                }
                Ok(RawType::Ident(name, args, sp))
            }
            (other, sp) => Err(ParseError::new(
                format!("expected a type, found {other}"),
                sp,
            )),
        }
    }

    fn fields(&mut self) -> Result<Vec<(String, RawType, Span)>, ParseError> {
        let mut fields: Vec<(String, RawType, Span)> = Vec::new();
        if *self.peek() == Tok::RBrace {
            self.bump();
            return Ok(fields);
        }
        loop {
            let (label, sp) = self.ident("a label")?;
            if fields.iter().any(|(l, _, _)| *l == label) {
                return Err(ParseError::new(format!("duplicate label `{label}`"), sp));
            }
            self.expect(Tok::Colon)?;
            let ty = self.ty()?;
            fields.push((label, ty, sp));
            match self.bump() {
                (Tok::Comma, _) => continue,
                (Tok::RBrace, _) => break,
                (other, sp) => {
                    return Err(ParseError::new(
                        format!("expected `,` or `}}`, found {other}"),
                        sp,
                    ))
                }
            }
        }
        Ok(fields)
    }
}

/// Parses a `.poly` file into its concrete tree, in source order.
pub fn parse_source(text: &str) -> Result<SourceFile, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    p.file()
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

struct Resolver<'a> {
    /// Constructor name → arity, over the whole file (definitions may be
    /// mutually recursive and forward-referencing).
    arities: &'a HashMap<String, usize>,
    /// The enclosing definition's parameters.
    params: &'a [String],
    /// Innermost binder last.
    binders: Vec<String>,
}

impl Resolver<'_> {
    fn resolve(&mut self, raw: &RawType) -> Result<SurfaceType, ParseError> {
        match raw {
            RawType::Ident(name, args, span) => {
                // Binder-scoped name, else parameter, else constructor.
                if let Some(depth) = self.binders.iter().rev().position(|b| b == name) {
                    if !args.is_empty() {
                        return Err(ParseError::new(
                            format!("variable `{name}` cannot take arguments"),
                            *span,
                        ));
                    }
                    return Ok(SurfaceType::Var(depth as u32));
                }
                if let Some(idx) = self.params.iter().position(|p| p == name) {
                    if !args.is_empty() {
                        return Err(ParseError::new(
                            format!("parameter `{name}` cannot take arguments"),
                            *span,
                        ));
                    }
                    return Ok(SurfaceType::Param(idx as u32));
                }
                match self.arities.get(name) {
                    Some(&arity) => {
                        if args.len() != arity {
                            return Err(ParseError::new(
                                format!(
                                    "`{name}` expects {arity} argument(s), found {}",
                                    args.len()
                                ),
                                *span,
                            ));
                        }
                        let args = args
                            .iter()
                            .map(|a| self.resolve(a))
                            .collect::<Result<_, _>>()?;
                        Ok(SurfaceType::Con(name.clone(), args))
                    }
                    None => Err(ParseError::new(
                        format!("unbound identifier `{name}`"),
                        *span,
                    )),
                }
            }
            RawType::Product(a, b) => Ok(SurfaceType::Product(
                Box::new(self.resolve(a)?),
                Box::new(self.resolve(b)?),
            )),
            RawType::Unit => Ok(SurfaceType::Unit),
            RawType::Variant(fields) => Ok(SurfaceType::Variant(self.resolve_fields(fields)?)),
            RawType::Record(fields) => Ok(SurfaceType::Record(self.resolve_fields(fields)?)),
            RawType::Arrow(a, b) => Ok(SurfaceType::Arrow(
                Box::new(self.resolve(a)?),
                Box::new(self.resolve(b)?),
            )),
            RawType::Forall(x, body) => {
                self.binders.push(x.clone());
                let body = self.resolve(body);
                self.binders.pop();
                Ok(SurfaceType::Forall(x.clone(), Box::new(body?)))
            }
            RawType::Exists(x, body) => {
                self.binders.push(x.clone());
                let body = self.resolve(body);
                self.binders.pop();
                Ok(SurfaceType::Exists(x.clone(), Box::new(body?)))
            }
        }
    }

    fn resolve_fields(
        &mut self,
        fields: &[(String, RawType, Span)],
    ) -> Result<Vec<(String, SurfaceType)>, ParseError> {
        fields
            .iter()
            .map(|(l, t, _)| Ok((l.clone(), self.resolve(t)?)))
            .collect()
    }
}

/// Parses and resolves a full signature file.
pub fn parse_signature(text: &str) -> Result<SurfaceSignature, ParseError> {
    let file = parse_source(text)?;
    resolve_source(&file)
}

/// Resolves an already-parsed file: checks duplicate definitions, arities,
/// and classifies identifiers.
pub fn resolve_source(file: &SourceFile) -> Result<SurfaceSignature, ParseError> {
    let mut arities = HashMap::new();
    for item in &file.items {
        if arities
            .insert(item.name.clone(), item.params.len())
            .is_some()
        {
            return Err(ParseError::new(
                format!("duplicate definition of `{}`", item.name),
                item.span,
            ));
        }
    }
    let mut defs = Vec::new();
    for item in &file.items {
        let mut resolver = Resolver {
            arities: &arities,
            params: &item.params,
            binders: Vec::new(),
        };
        let body = resolver.resolve(&item.body)?;
        defs.push(SurfaceDef {
            kind: match item.kind {
                ItemKind::Type => DefKind::Defined,
                ItemKind::Abbrev => DefKind::Abbrev,
            },
            name: item.name.clone(),
            params: item.params.clone(),
            body,
        });
    }
    Ok(SurfaceSignature { defs })
}

/// Parses a query `ty <= ty` or `ty >= ty` (the latter swaps sides), and
/// resolves both sides as closed types against `sig`'s constructors.
pub fn parse_query(text: &str, sig: &SurfaceSignature) -> Result<Query, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let lhs = p.ty()?;
    let swap = match p.bump() {
        (Tok::Le, _) => false,
        (Tok::Ge, _) => true,
        (other, sp) => {
            return Err(ParseError::new(
                format!("expected `<=` or `>=`, found {other}"),
                sp,
            ))
        }
    };
    let rhs = p.ty()?;
    if *p.peek() != Tok::Eof {
        return Err(ParseError::new(
            format!("unexpected {} after query", p.peek()),
            p.span(),
        ));
    }
    let arities: HashMap<String, usize> = sig
        .defs
        .iter()
        .map(|d| (d.name.clone(), d.params.len()))
        .collect();
    let no_params: Vec<String> = Vec::new();
    let mut resolver = Resolver {
        arities: &arities,
        params: &no_params,
        binders: Vec::new(),
    };
    let left = resolver.resolve(&lhs)?;
    debug_assert!(resolver.binders.is_empty());
    let right = resolver.resolve(&rhs)?;
    let (left, right) = if swap { (right, left) } else { (left, right) };
    Ok(Query {
        left,
        right,
        variance: Variance::Plus,
    })
}

// ---------------------------------------------------------------------------
// Printing (used by the round-trip property and `--emit-normal`)
// ---------------------------------------------------------------------------

impl fmt::Display for SourceFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(f, "{item}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.kind {
            ItemKind::Type => "type",
            ItemKind::Abbrev => "abbrev",
        };
        write!(f, "{kw} {}", self.name)?;
        if !self.params.is_empty() {
            write!(f, "[{}]", self.params.join(", "))?;
        }
        write!(f, " = {}", self.body)
    }
}

/// Precedence levels for minimal parenthesization: a context expecting an
/// atom needs parens around arrows, products, and quantifiers.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Ty = 0,
    Arrow = 1,
    Prod = 2,
    Atom = 3,
}

impl RawType {
    fn prec(&self) -> Prec {
        match self {
            RawType::Forall(..) | RawType::Exists(..) => Prec::Ty,
            RawType::Arrow(..) => Prec::Arrow,
            RawType::Product(..) => Prec::Prod,
            _ => Prec::Atom,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, want: Prec) -> fmt::Result {
        let parens = (self.prec() as u8) < (want as u8);
        if parens {
            f.write_str("(")?;
        }
        match self {
            RawType::Ident(name, args, _) => {
                f.write_str(name)?;
                if !args.is_empty() {
                    f.write_str("[")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        a.fmt_prec(f, Prec::Ty)?;
                    }
                    f.write_str("]")?;
                }
            }
            RawType::Product(a, b) => {
                a.fmt_prec(f, Prec::Prod)?;
                f.write_str(" * ")?;
                b.fmt_prec(f, Prec::Atom)?;
            }
            RawType::Unit => f.write_str("1")?,
            RawType::Variant(fields) => fmt_fields(f, "+", fields)?,
            RawType::Record(fields) => fmt_fields(f, "&", fields)?,
            RawType::Arrow(a, b) => {
                a.fmt_prec(f, Prec::Prod)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, Prec::Arrow)?;
            }
            RawType::Forall(x, body) => {
                write!(f, "forall {x}. ")?;
                body.fmt_prec(f, Prec::Ty)?;
            }
            RawType::Exists(x, body) => {
                write!(f, "exists {x}. ")?;
                body.fmt_prec(f, Prec::Ty)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn fmt_fields(
    f: &mut fmt::Formatter<'_>,
    sigil: &str,
    fields: &[(String, RawType, Span)],
) -> fmt::Result {
    write!(f, "{sigil}{{")?;
    for (i, (label, ty, _)) in fields.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{label}: ")?;
        ty.fmt_prec(f, Prec::Ty)?;
    }
    f.write_str("}")
}

impl fmt::Display for RawType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, Prec::Ty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nat() {
        let sig = parse_signature("type nat = +{z: 1, s: nat}").unwrap();
        assert_eq!(sig.defs.len(), 1);
        let def = &sig.defs[0];
        assert_eq!(def.name, "nat");
        assert!(def.params.is_empty());
        assert_eq!(
            def.body,
            SurfaceType::Variant(vec![
                ("z".into(), SurfaceType::Unit),
                ("s".into(), SurfaceType::Con("nat".into(), vec![])),
            ])
        );
    }

    #[test]
    fn parses_empty_input() {
        let sig = parse_signature("").unwrap();
        assert!(sig.defs.is_empty());
    }

    #[test]
    fn parses_list_with_parameter() {
        let sig = parse_signature("type list[a] = +{nil: 1, cons: a * list[a]}").unwrap();
        assert_eq!(sig.defs.len(), 1);
        let def = &sig.defs[0];
        assert_eq!(def.params, vec!["a".to_string()]);
        let cons = match &def.body {
            SurfaceType::Variant(fields) => &fields[1].1,
            other => panic!("unexpected body {other:?}"),
        };
        assert_eq!(
            *cons,
            SurfaceType::Product(
                Box::new(SurfaceType::Param(0)),
                Box::new(SurfaceType::Con(
                    "list".into(),
                    vec![SurfaceType::Param(0)]
                )),
            )
        );
    }

    #[test]
    fn product_binds_tighter_than_arrow_and_arrow_is_right_assoc() {
        let sig = parse_signature("type t[a, b] = a * b -> a -> b").unwrap();
        let body = &sig.defs[0].body;
        assert_eq!(
            *body,
            SurfaceType::Arrow(
                Box::new(SurfaceType::Product(
                    Box::new(SurfaceType::Param(0)),
                    Box::new(SurfaceType::Param(1)),
                )),
                Box::new(SurfaceType::Arrow(
                    Box::new(SurfaceType::Param(0)),
                    Box::new(SurfaceType::Param(1)),
                )),
            )
        );
    }

    #[test]
    fn binder_shadows_parameter() {
        let sig = parse_signature("type t[x] = forall x. x").unwrap();
        assert_eq!(
            sig.defs[0].body,
            SurfaceType::Forall("x".into(), Box::new(SurfaceType::Var(0)))
        );
    }

    #[test]
    fn rejects_bad_inputs_with_positions() {
        for (text, needle) in [
            ("type t = +{a: 1, a: 1}", "duplicate label"),
            ("type t = 1 type t = 1", "duplicate definition"),
            ("type t = u", "unbound identifier"),
            ("type t[a] = t", "expects 1 argument(s)"),
            ("type t[a] = a[1]", "parameter `a` cannot take arguments"),
            ("type t = ", "expected a type"),
            ("type t[a, a] = 1", "duplicate parameter"),
        ] {
            let err = parse_signature(text).unwrap_err();
            assert!(
                err.message.contains(needle),
                "{text}: expected {needle:?} in {:?}",
                err.message
            );
        }
    }

    #[test]
    fn parses_queries() {
        let sig = parse_signature("type even = +{z: 1, s: odd}\ntype odd = +{s: even}\ntype nat = +{z: 1, s: nat}").unwrap();
        let q = parse_query("even <= nat", &sig).unwrap();
        assert_eq!(q.left, SurfaceType::Con("even".into(), vec![]));
        assert_eq!(q.right, SurfaceType::Con("nat".into(), vec![]));
        assert_eq!(q.variance, Variance::Plus);

        // >= swaps sides
        let q2 = parse_query("nat >= even", &sig).unwrap();
        assert_eq!(q2.left, SurfaceType::Con("even".into(), vec![]));
        assert_eq!(q2.right, SurfaceType::Con("nat".into(), vec![]));

        let t = parse_signature("type t = 1").unwrap();
        let q3 = parse_query("t <= t", &t).unwrap();
        assert_eq!(q3.left, q3.right);
    }

    #[test]
    fn parses_nested_application_query() {
        let sig = parse_signature(
            "type nat = +{z: 1, s: nat}\n\
             type stack[a] = &{push: a -> stack[a], pop: 1}\n\
             type qstack1[b] = &{push: b -> qstack1[b], pop: 1}\n\
             type qstack2[b] = &{pop: 1}",
        )
        .unwrap();
        let q = parse_query("stack[stack[nat]] <= qstack2[qstack1[nat]]", &sig).unwrap();
        let nat = SurfaceType::Con("nat".into(), vec![]);
        assert_eq!(
            q.left,
            SurfaceType::Con(
                "stack".into(),
                vec![SurfaceType::Con("stack".into(), vec![nat.clone()])]
            )
        );
        assert_eq!(
            q.right,
            SurfaceType::Con(
                "qstack2".into(),
                vec![SurfaceType::Con("qstack1".into(), vec![nat])]
            )
        );
    }

    #[test]
    fn query_requires_closed_types() {
        let sig = parse_signature("type t[a] = a * a").unwrap();
        let err = parse_query("t[b] <= t[b]", &sig).unwrap_err();
        assert!(err.message.contains("unbound identifier"));
    }

    #[test]
    fn comments_are_skipped() {
        let sig = parse_signature("-- a file\ntype t = 1 -- trailing\n").unwrap();
        assert_eq!(sig.defs.len(), 1);
    }

    #[test]
    fn pretty_print_parse_is_a_fixpoint() {
        let text = "type stree[a, k] = +{leaf: k, node: a * stree[a, stree[a, k]]}\n\
                    abbrev pair[a, b] = a * b\n\
                    type t = pair[1, 1] * (1 -> 1)\n\
                    type u = forall x. x -> (exists y. y * x)";
        let once = parse_source(text).unwrap();
        let printed = once.to_string();
        let twice = parse_source(&printed).unwrap();
        assert_eq!(printed, twice.to_string());
        assert_eq!(once, twice);
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Arbitrary input never panics: it parses or reports a positioned
        /// error.
        #[test]
        fn parser_is_total_on_garbage(text in "\\PC{0,80}") {
            let _ = parse_signature(&text);
        }

        /// Token soups assembled from the grammar's own alphabet.
        #[test]
        fn parser_is_total_on_token_soup(
            toks in prop::collection::vec(
                prop::sample::select(vec![
                    "type", "abbrev", "forall", "exists", "1", "*", "->", "+", "&",
                    "{", "}", "[", "]", "(", ")", ",", ":", ".", "=", "<=", ">=",
                    "t", "a", "nat", "end$", "x'",
                ]),
                0..40,
            )
        ) {
            let text = toks.join(" ");
            let _ = parse_signature(&text);
            let empty = SurfaceSignature::default();
            let _ = parse_query(&text, &empty);
        }
    }
}
