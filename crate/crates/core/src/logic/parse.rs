//! Text format: one clause per line,
//!
//! ```text
//! Uncle(x,y) <- Brother(x,p) & Parent(p,y)   # comment
//! Clear(x) <- forall y !On(y,x)
//! ```
//!
//! `forall v` / `exists v` may prefix any literal and fix the quantifier of
//! a body-only variable; they must come no later than its first use.

use super::{Atom, HornClause, HornProgram, Literal, LogicError, Quantifier};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Self { chars: src.chars().collect(), pos: 0, line }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Parse { line: self.line, column: self.pos + 1, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.peek().is_none()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), LogicError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, LogicError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => {}
            _ => return self.err("expected an identifier"),
        }
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    /// Reads `forall`/`exists` as a keyword only when followed by a variable.
    fn keyword(&mut self) -> Option<Quantifier> {
        self.skip_ws();
        let save = self.pos;
        for (kw, q) in [("forall", Quantifier::Forall), ("exists", Quantifier::Exists)] {
            if self.eat(kw) {
                let boundary = self.peek().is_some_and(|c| c.is_whitespace());
                if boundary {
                    return Some(q);
                }
                self.pos = save;
            }
        }
        None
    }

    fn atom(&mut self) -> Result<Atom, LogicError> {
        let predicate = self.ident()?;
        let mut args = Vec::new();
        if self.eat("(") {
            if !self.eat(")") {
                loop {
                    args.push(self.ident()?);
                    if self.eat(")") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
        }
        Ok(Atom { predicate, args })
    }
}

fn clause_on_line(text: &str, line: usize) -> Result<Option<HornClause>, LogicError> {
    let text = text.split('#').next().unwrap_or("");
    let mut cur = Cursor::new(text, line);
    if cur.at_end() {
        return Ok(None);
    }
    let head = cur.atom()?;
    cur.expect("<-")?;
    let mut body = Vec::new();
    let mut prefix: Vec<(String, Quantifier)> = Vec::new();
    loop {
        while let Some(q) = cur.keyword() {
            cur.skip_ws();
            let col = cur.pos;
            let v = cur.ident()?;
            if head.args.contains(&v) {
                cur.pos = col;
                return cur.err(format!("head variable `{v}` cannot be quantified"));
            }
            if prefix.iter().any(|(p, _)| *p == v) {
                cur.pos = col;
                return cur.err(format!("quantifier for `{v}` must come before its first use"));
            }
            prefix.push((v, q));
        }
        let negated = cur.eat("!");
        let atom = cur.atom()?;
        for a in &atom.args {
            if !head.args.contains(a) && !prefix.iter().any(|(p, _)| p == a) {
                prefix.push((a.clone(), Quantifier::Exists));
            }
        }
        body.push(Literal { atom, negated });
        if cur.at_end() {
            break;
        }
        cur.expect("&")?;
    }
    let used: Vec<&String> = body.iter().flat_map(|l| &l.atom.args).collect();
    if let Some((v, _)) = prefix.iter().find(|(v, _)| !used.contains(&v)) {
        return cur.err(format!("quantified variable `{v}` is never used"));
    }
    let clause = HornClause { head, body, prefix };
    clause.check().map_err(|e| match e {
        LogicError::Clause { reason, .. } => LogicError::Parse { line, column: 1, message: reason },
        other => other,
    })?;
    Ok(Some(clause))
}

/// Parses a single clause.
pub fn parse_clause(text: &str) -> Result<HornClause, LogicError> {
    clause_on_line(text, 1)?.ok_or(LogicError::Parse { line: 1, column: 1, message: "empty clause".into() })
}

/// Parses a program, one clause per line, and orders it by dependency.
pub fn parse_program(text: &str) -> Result<HornProgram, LogicError> {
    let mut clauses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = clause_on_line(line, i + 1)? {
            clauses.push(c);
        }
    }
    HornProgram::new(clauses)
}
