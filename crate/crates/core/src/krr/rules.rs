//! Safe positive Horn rules and their line-oriented text syntax.
//!
//! ```text
//! body1(?x, ?y), body2(?y, ?z) -> head(?x, ?z)
//! ```
//!
//! Predicates are identifiers (`[A-Za-z][A-Za-z0-9_]*`), variables are
//! `?`-prefixed identifiers, constants are double-quoted strings. Lines
//! starting with `#` are comments. A rule may carry an explicit id as an
//! `ident:` prefix; otherwise ids are assigned positionally (`rule-1` …).

use serde::{Deserialize, Serialize};

use super::ontology::Datatype;
use crate::error::{Error, Result};

/// A ground value in object position: an identifier (entity id or class
/// name) or a typed literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Id(String),
    Literal { lexical: String, datatype: Datatype },
}

impl Node {
    /// Display form: the id, or the literal's lexical form.
    pub fn display(&self) -> &str {
        match self {
            Node::Id(s) => s,
            Node::Literal { lexical, .. } => lexical,
        }
    }

    /// Quoted rule-text constants match ids exactly and literals by
    /// lexical form.
    pub fn matches_constant(&self, constant: &str) -> bool {
        match self {
            Node::Id(s) => s == constant,
            Node::Literal { lexical, .. } => lexical == constant,
        }
    }
}

/// A term in a rule or query atom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleTerm {
    Var(String),
    Const(String),
}

/// A binary atom: `predicate(subject, object)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub subject: RuleTerm,
    pub object: RuleTerm,
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let term = |t: &RuleTerm| match t {
            RuleTerm::Var(v) => format!("?{v}"),
            RuleTerm::Const(c) => format!("{c:?}"),
        };
        write!(f, "{}({}, {})", self.predicate, term(&self.subject), term(&self.object))
    }
}

/// A safe positive Horn rule: non-empty body, single head, every head
/// variable bound in the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub body: Vec<Atom>,
    pub head: Atom,
}

impl Rule {
    pub fn new(id: impl Into<String>, body: Vec<Atom>, head: Atom) -> Result<Self> {
        let rule = Rule { id: id.into(), body, head };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<()> {
        if self.body.is_empty() {
            return Err(Error::Invalid(format!("rule {}: body must be non-empty", self.id)));
        }
        let mut body_vars = std::collections::BTreeSet::new();
        for atom in &self.body {
            for t in [&atom.subject, &atom.object] {
                if let RuleTerm::Var(v) = t {
                    body_vars.insert(v.clone());
                }
            }
        }
        for t in [&self.head.subject, &self.head.object] {
            if let RuleTerm::Var(v) = t {
                if !body_vars.contains(v) {
                    return Err(Error::Invalid(format!(
                        "rule {}: head variable ?{v} does not occur in the body",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let body = self
            .body
            .iter()
            .map(Atom::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        format!("{}: {} -> {}", self.id, body, self.head)
    }
}

// ---------------------------------------------------------------------------
// Text syntax
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Arrow,
    Colon,
}

pub(crate) fn lex(line: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            ' ' | '\t' => {}
            '(' => toks.push(Tok::LParen),
            ')' => toks.push(Tok::RParen),
            ',' => toks.push(Tok::Comma),
            ':' => toks.push(Tok::Colon),
            '-' => match chars.next() {
                Some((_, '>')) => toks.push(Tok::Arrow),
                _ => return Err(Error::Parse(format!("expected '->' at byte {i}"))),
            },
            '?' => {
                let ident = take_ident(&mut chars)?;
                toks.push(Tok::Var(ident));
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, '\\')) => match chars.next() {
                            Some((_, c2)) => s.push(c2),
                            None => return Err(Error::Parse("unterminated escape".into())),
                        },
                        Some((_, c2)) => s.push(c2),
                        None => return Err(Error::Parse("unterminated string constant".into())),
                    }
                }
                toks.push(Tok::Str(s));
            }
            c if c.is_ascii_alphabetic() => {
                let mut ident = String::from(c);
                while let Some((_, c2)) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || *c2 == '_' {
                        ident.push(*c2);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Ident(ident));
            }
            other => return Err(Error::Parse(format!("unexpected character {other:?} at byte {i}"))),
        }
    }
    Ok(toks)
}

fn take_ident(chars: &mut std::iter::Peekable<std::str::CharIndices>) -> Result<String> {
    let mut ident = String::new();
    match chars.next() {
        Some((_, c)) if c.is_ascii_alphabetic() => ident.push(c),
        _ => return Err(Error::Parse("variable name must start with a letter".into())),
    }
    while let Some((_, c)) = chars.peek() {
        if c.is_ascii_alphanumeric() || *c == '_' {
            ident.push(*c);
            chars.next();
        } else {
            break;
        }
    }
    Ok(ident)
}

/// Token-stream parser shared by the rule and query-pattern syntaxes.
pub(crate) struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(toks: Vec<Tok>) -> Self {
        Parser { toks, pos: 0 }
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    pub(crate) fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn expect(&mut self, tok: Tok) -> Result<()> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Parse(format!("expected {tok:?}, found {other:?}"))),
        }
    }

    pub(crate) fn atom(&mut self) -> Result<Atom> {
        let predicate = match self.next() {
            Some(Tok::Ident(p)) => p,
            other => return Err(Error::Parse(format!("expected predicate, found {other:?}"))),
        };
        self.expect(Tok::LParen)?;
        let subject = self.term()?;
        self.expect(Tok::Comma)?;
        let object = self.term()?;
        self.expect(Tok::RParen)?;
        Ok(Atom { predicate, subject, object })
    }

    fn term(&mut self) -> Result<RuleTerm> {
        match self.next() {
            Some(Tok::Var(v)) => Ok(RuleTerm::Var(v)),
            Some(Tok::Str(s)) => Ok(RuleTerm::Const(s)),
            other => Err(Error::Parse(format!(
                "expected a ?variable or a quoted constant, found {other:?}"
            ))),
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }
}

/// Parse one rule line. `default_id` applies when no `ident:` prefix is
/// present.
pub fn parse_rule(line: &str, default_id: &str) -> Result<Rule> {
    let mut p = Parser::new(lex(line)?);
    let id = match (p.peek().cloned(), p.toks.get(p.pos + 1)) {
        (Some(Tok::Ident(name)), Some(Tok::Colon)) => {
            p.next();
            p.next();
            name
        }
        _ => default_id.to_string(),
    };
    let mut body = vec![p.atom()?];
    loop {
        match p.next() {
            Some(Tok::Comma) => body.push(p.atom()?),
            Some(Tok::Arrow) => break,
            other => return Err(Error::Parse(format!("expected ',' or '->', found {other:?}"))),
        }
    }
    let head = p.atom()?;
    if !p.at_end() {
        return Err(Error::Parse("trailing input after rule head".into()));
    }
    Rule::new(id, body, head)
}

/// Parse a whole rule file: one rule per line, `#` comments, blank lines
/// ignored.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rule = parse_rule(line, &format!("rule-{}", rules.len() + 1))
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        rules.push(rule);
    }
    Ok(rules)
}
