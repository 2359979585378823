//! The `.psl` model language.
//!
//! ```text
//! # comment
//! predicate Is/2 : open
//! predicate Likes/2 : closed
//! 1.0 : Is(U, C) & Likes(U, P) & Likes(V, P) -> Is(V, C)
//! 0.5 : !Is(U, fem) & Likes(U, P) -> !Represents(P, fem) ^2
//! hard : Is(U, "some constant") -> Flag(U)
//! ```
//!
//! One statement per line. Identifiers starting with an uppercase letter are
//! variables; lowercase identifiers, tokens starting with a digit and quoted
//! strings are constants. A rule without `^2` has a linear hinge.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::logic::{Closure, Exponent, Literal, LogicError, PredicateDecl, Rule, Term, Weight};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("predicate {0} is not declared")]
    UndeclaredPredicate(String),
    #[error("predicate {predicate} expects {expected} arguments, found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("head variable {0} does not occur in the rule body")]
    UnboundHeadVariable(String),
    #[error("rule weights must be nonnegative")]
    NegativeWeight,
    #[error("predicate {0} is declared twice")]
    DuplicatePredicate(String),
    #[error("rule heads must be a single literal")]
    DisjunctiveHead,
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// A rejected model with the 1-based position of the offending token.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

/// Where each declaration and rule came from. Empty for models built in code.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub declarations: Vec<Location>,
    pub rules: Vec<Location>,
}

/// Predicate declarations plus validated rules.
///
/// Equality is structural and ignores source locations.
#[derive(Debug, Clone, Default)]
pub struct ModelFile {
    pub declarations: Vec<PredicateDecl>,
    pub rules: Vec<Rule>,
    pub locations: SourceMap,
}

impl PartialEq for ModelFile {
    fn eq(&self, other: &Self) -> bool {
        self.declarations == other.declarations && self.rules == other.rules
    }
}

impl ModelFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declaration(&self, symbol: &str) -> Option<&PredicateDecl> {
        self.declarations.iter().find(|d| d.symbol == symbol)
    }

    pub fn declare(&mut self, decl: PredicateDecl) -> Result<(), ParseErrorKind> {
        if self.declaration(&decl.symbol).is_some() {
            return Err(ParseErrorKind::DuplicatePredicate(decl.symbol));
        }
        self.declarations.push(decl);
        Ok(())
    }

    fn check_literal(&self, lit: &Literal) -> Result<(), ParseErrorKind> {
        let decl = self
            .declaration(&lit.predicate)
            .ok_or_else(|| ParseErrorKind::UndeclaredPredicate(lit.predicate.clone()))?;
        if decl.arity != lit.args.len() {
            return Err(ParseErrorKind::ArityMismatch {
                predicate: lit.predicate.clone(),
                expected: decl.arity,
                found: lit.args.len(),
            });
        }
        Ok(())
    }

    /// Appends a rule after checking its predicates against the declarations.
    /// Returns the new rule's id.
    pub fn add_rule(&mut self, rule: Rule) -> Result<usize, ParseErrorKind> {
        for lit in rule.body.iter().chain(core::iter::once(&rule.head)) {
            self.check_literal(lit)?;
        }
        self.rules.push(rule);
        Ok(self.rules.len() - 1)
    }

    /// Whether any rule mentions `predicate`.
    pub fn uses_predicate(&self, predicate: &str) -> bool {
        self.rules.iter().any(|r| {
            r.head.predicate == predicate || r.body.iter().any(|l| l.predicate == predicate)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Quoted(String),
    Negative(String),
    LParen,
    RParen,
    Comma,
    Amp,
    Bang,
    Colon,
    Arrow,
    Caret,
    Slash,
    Pipe,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Negative(s) => write!(f, "`-{s}`"),
            Tok::Quoted(s) => write!(f, "\"{s}\""),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Pipe => f.write_str("`|`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        kind: ParseErrorKind::Syntax(msg.into()),
    }
}

fn lex_line(text: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, column });
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '(' | ')' | ',' | '&' | '!' | ':' | '^' | '/' | '|' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '&' => Tok::Amp,
                    '!' => Tok::Bang,
                    ':' => Tok::Colon,
                    '^' => Tok::Caret,
                    '/' => Tok::Slash,
                    _ => Tok::Pipe,
                };
                push(&mut out, tok);
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                push(&mut out, Tok::Arrow);
                i += 2;
            }
            '-' if chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) => {
                let (s, next) = lex_number(&chars, i + 1);
                push(&mut out, Tok::Negative(s));
                i = next;
            }
            '"' => {
                let start = i + 1;
                let end = chars[start..]
                    .iter()
                    .position(|&c| c == '"')
                    .map(|p| start + p)
                    .ok_or_else(|| syntax(line, column, "unterminated quoted constant"))?;
                push(&mut out, Tok::Quoted(chars[start..end].iter().collect()));
                i = end + 1;
            }
            c if c.is_ascii_digit() => {
                let (s, next) = lex_number(&chars, i);
                push(&mut out, Tok::Number(s));
                i = next;
            }
            c if c.is_alphabetic() || c == '_' => {
                let end = chars[i..]
                    .iter()
                    .position(|&c| !is_word_char(c))
                    .map_or(chars.len(), |p| i + p);
                push(&mut out, Tok::Ident(chars[i..end].iter().collect()));
                i = end;
            }
            other => return Err(syntax(line, column, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

/// Digits, an optional `.digits` fraction, then any trailing word characters.
fn lex_number(chars: &[char], start: usize) -> (String, usize) {
    let mut i = start;
    while i < chars.len() && chars[i].is_ascii_digit() {
        i += 1;
    }
    if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
    }
    while i < chars.len() && is_word_char(chars[i]) {
        i += 1;
    }
    (chars[start..i].iter().collect(), i)
}

fn is_decimal(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    line_len: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn end_error(&self, what: &str) -> ParseError {
        syntax(self.line, self.line_len.max(1), format!("expected {what}, found end of line"))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        match self.next() {
            Some(t) if t.tok == want => Ok(t),
            Some(t) => Err(syntax(t.line, t.column, format!("expected {what}, found {}", t.tok))),
            None => Err(self.end_error(what)),
        }
    }
}

/// A literal plus the token positions needed for diagnostics.
struct SpannedLiteral {
    literal: Literal,
    predicate_at: Location,
    var_at: Vec<(String, Location)>,
}

fn parse_literal(cur: &mut Cursor) -> Result<SpannedLiteral, ParseError> {
    let mut negated = false;
    if matches!(cur.peek(), Some(Token { tok: Tok::Bang, .. })) {
        cur.next();
        negated = true;
    }
    let pred = match cur.next() {
        Some(Token {
            tok: Tok::Ident(s),
            line,
            column,
        }) => (s, Location { line, column }),
        Some(t) => return Err(syntax(t.line, t.column, format!("expected predicate, found {}", t.tok))),
        None => return Err(cur.end_error("predicate")),
    };
    cur.expect(Tok::LParen, "`(`")?;
    let mut args = Vec::new();
    let mut var_at = Vec::new();
    loop {
        let t = cur.next().ok_or_else(|| cur.end_error("argument"))?;
        let at = Location {
            line: t.line,
            column: t.column,
        };
        let term = match t.tok {
            Tok::Ident(s) if s.starts_with(|c: char| c.is_uppercase()) => {
                var_at.push((s.clone(), at));
                Term::Var(s)
            }
            Tok::Ident(s) if s.starts_with(|c: char| c.is_lowercase()) => Term::Const(s),
            Tok::Number(s) | Tok::Quoted(s) => Term::Const(s),
            other => return Err(syntax(t.line, t.column, format!("expected argument, found {other}"))),
        };
        args.push(term);
        match cur.next() {
            Some(Token { tok: Tok::Comma, .. }) => continue,
            Some(Token { tok: Tok::RParen, .. }) => break,
            Some(t) => return Err(syntax(t.line, t.column, format!("expected `,` or `)`, found {}", t.tok))),
            None => return Err(cur.end_error("`)`")),
        }
    }
    Ok(SpannedLiteral {
        literal: Literal {
            predicate: pred.0,
            args,
            negated,
        },
        predicate_at: pred.1,
        var_at,
    })
}

enum Statement {
    Decl(PredicateDecl, Location),
    Rule {
        weight: Weight,
        body: Vec<SpannedLiteral>,
        head: SpannedLiteral,
        exponent: Exponent,
        at: Location,
    },
}

fn parse_statement(cur: &mut Cursor) -> Result<Statement, ParseError> {
    let first = cur.next().expect("caller checked for an empty line");
    let at = Location {
        line: first.line,
        column: first.column,
    };
    let weight = match &first.tok {
        Tok::Ident(k) if k == "predicate" => return parse_declaration(cur).map(|d| Statement::Decl(d.0, d.1)),
        Tok::Ident(k) if k == "hard" => Weight::Hard,
        Tok::Number(n) if is_decimal(n) => Weight::Soft(n.parse().map_err(|_| syntax(at.line, at.column, "invalid weight"))?),
        Tok::Negative(n) if is_decimal(n) => {
            return Err(ParseError {
                line: at.line,
                column: at.column,
                kind: ParseErrorKind::NegativeWeight,
            })
        }
        other => {
            return Err(syntax(
                at.line,
                at.column,
                format!("expected `predicate`, a weight or `hard`, found {other}"),
            ))
        }
    };
    cur.expect(Tok::Colon, "`:`")?;
    let mut body = alloc::vec![parse_literal(cur)?];
    loop {
        match cur.next() {
            Some(Token { tok: Tok::Amp, .. }) => body.push(parse_literal(cur)?),
            Some(Token { tok: Tok::Arrow, .. }) => break,
            Some(t) => return Err(syntax(t.line, t.column, format!("expected `&` or `->`, found {}", t.tok))),
            None => return Err(cur.end_error("`->`")),
        }
    }
    let head = parse_literal(cur)?;
    let mut exponent = Exponent::Linear;
    if let Some(t) = cur.next() {
        match t.tok {
            Tok::Pipe | Tok::Amp => {
                return Err(ParseError {
                    line: t.line,
                    column: t.column,
                    kind: ParseErrorKind::DisjunctiveHead,
                })
            }
            Tok::Caret => {
                let p = cur.next().ok_or_else(|| cur.end_error("exponent"))?;
                exponent = match &p.tok {
                    Tok::Number(n) if n == "1" => Exponent::Linear,
                    Tok::Number(n) if n == "2" => Exponent::Squared,
                    other => return Err(syntax(p.line, p.column, format!("exponent must be 1 or 2, found {other}"))),
                };
            }
            other => return Err(syntax(t.line, t.column, format!("unexpected {other} after rule head"))),
        }
    }
    if let Some(t) = cur.next() {
        return Err(syntax(t.line, t.column, format!("unexpected {}", t.tok)));
    }
    Ok(Statement::Rule {
        weight,
        body,
        head,
        exponent,
        at,
    })
}

fn parse_declaration(cur: &mut Cursor) -> Result<(PredicateDecl, Location), ParseError> {
    let sym = cur.next().ok_or_else(|| cur.end_error("predicate symbol"))?;
    let at = Location {
        line: sym.line,
        column: sym.column,
    };
    let symbol = match sym.tok {
        Tok::Ident(s) => s,
        other => return Err(syntax(sym.line, sym.column, format!("expected predicate symbol, found {other}"))),
    };
    cur.expect(Tok::Slash, "`/`")?;
    let ar = cur.next().ok_or_else(|| cur.end_error("arity"))?;
    let arity = match &ar.tok {
        Tok::Number(n) => n
            .parse::<usize>()
            .ok()
            .filter(|&a| a > 0)
            .ok_or_else(|| syntax(ar.line, ar.column, "arity must be a positive integer"))?,
        other => return Err(syntax(ar.line, ar.column, format!("expected arity, found {other}"))),
    };
    cur.expect(Tok::Colon, "`:`")?;
    let cl = cur.next().ok_or_else(|| cur.end_error("`open` or `closed`"))?;
    let closure = match &cl.tok {
        Tok::Ident(s) if s == "open" => Closure::Open,
        Tok::Ident(s) if s == "closed" => Closure::Closed,
        other => return Err(syntax(cl.line, cl.column, format!("expected `open` or `closed`, found {other}"))),
    };
    if let Some(t) = cur.next() {
        return Err(syntax(t.line, t.column, format!("unexpected {}", t.tok)));
    }
    Ok((PredicateDecl { symbol, arity, closure }, at))
}

/// Parses and validates a model. Declarations may appear anywhere in the file.
pub fn parse_model(text: &str) -> Result<ModelFile, ParseError> {
    let mut statements = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = lex_line(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks,
            pos: 0,
            line,
            line_len: raw.chars().count(),
        };
        statements.push(parse_statement(&mut cur)?);
    }

    let mut model = ModelFile::new();
    for st in &statements {
        if let Statement::Decl(d, at) = st {
            model.declare(d.clone()).map_err(|kind| ParseError {
                line: at.line,
                column: at.column,
                kind,
            })?;
            model.locations.declarations.push(*at);
        }
    }
    for st in statements {
        let Statement::Rule {
            weight,
            body,
            head,
            exponent,
            at,
        } = st
        else {
            continue;
        };
        for lit in body.iter().chain(core::iter::once(&head)) {
            model.check_literal(&lit.literal).map_err(|kind| ParseError {
                line: lit.predicate_at.line,
                column: lit.predicate_at.column,
                kind,
            })?;
        }
        let bound: Vec<&str> = body.iter().flat_map(|l| l.literal.variables()).collect();
        if let Some((v, loc)) = head.var_at.iter().find(|(v, _)| !bound.contains(&v.as_str())) {
            return Err(ParseError {
                line: loc.line,
                column: loc.column,
                kind: ParseErrorKind::UnboundHeadVariable(v.clone()),
            });
        }
        let rule = Rule::new(
            weight,
            body.into_iter().map(|l| l.literal).collect(),
            head.literal,
            exponent,
        )
        .map_err(|e| ParseError {
            line: at.line,
            column: at.column,
            kind: e.into(),
        })?;
        model.rules.push(rule);
        model.locations.rules.push(at);
    }
    Ok(model)
}

fn is_bare_constant(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => chars.all(is_word_char),
        _ => false,
    }
}

fn write_literal(out: &mut String, lit: &Literal) {
    if lit.negated {
        out.push('!');
    }
    out.push_str(&lit.predicate);
    out.push('(');
    for (i, t) in lit.args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match t {
            Term::Var(v) => out.push_str(v),
            Term::Const(c) if is_bare_constant(c) => out.push_str(c),
            Term::Const(c) => {
                out.push('"');
                out.push_str(c);
                out.push('"');
            }
        }
    }
    out.push(')');
}

/// Renders a model in canonical form: declarations, a blank line, then one
/// rule per line.
pub fn render_model(model: &ModelFile) -> String {
    let mut out = String::new();
    for d in &model.declarations {
        let closure = match d.closure {
            Closure::Open => "open",
            Closure::Closed => "closed",
        };
        let _ = writeln!(out, "predicate {}/{} : {}", d.symbol, d.arity, closure);
    }
    if !model.declarations.is_empty() && !model.rules.is_empty() {
        out.push('\n');
    }
    for r in &model.rules {
        out.push_str(&render_rule(r));
        out.push('\n');
    }
    out
}

/// One rule in canonical form, without a trailing newline.
pub fn render_rule(r: &Rule) -> String {
    let mut out = String::new();
    match r.weight {
        Weight::Hard => out.push_str("hard"),
        Weight::Soft(w) => out.push_str(&w.to_string()),
    }
    out.push_str(" : ");
    for (i, lit) in r.body.iter().enumerate() {
        if i > 0 {
            out.push_str(" & ");
        }
        write_literal(&mut out, lit);
    }
    out.push_str(" -> ");
    write_literal(&mut out, &r.head);
    if r.exponent == Exponent::Squared {
        out.push_str(" ^2");
    }
    out
}
