use crate::rational::{format_exact, parse_rational, Prob};
use std::fmt;

/// A first-order term. Identifiers starting with a lowercase letter are
/// variables; numeric literals are exact rationals; everything else is a
/// constant symbol. `State(0)`-style compounds are supported.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Sym(String),
    Num(Prob),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn sym(name: impl Into<String>) -> Term {
        Term::Sym(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Sym(_) | Term::Num(_) => true,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_num(&self) -> Option<&Prob> {
        match self {
            Term::Num(n) => Some(n),
            _ => None,
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    /// Interprets a bare token the way the scenario syntax does.
    pub fn from_token(token: &str) -> Term {
        if let Ok(n) = parse_rational(token) {
            return Term::Num(n);
        }
        let first = token.chars().next().unwrap_or('A');
        if first.is_lowercase() || first == '?' || first == '_' {
            Term::Var(token.trim_start_matches('?').to_string())
        } else {
            Term::Sym(token.to_string())
        }
    }

    /// Renders a term as it would be written in a scenario file.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Sym(s) => write!(f, "{s}"),
            Term::Num(n) => write!(f, "{}", format_exact(n)),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom { pred: pred.into(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.args.iter().for_each(|a| a.collect_vars(&mut out));
        out
    }

    pub fn parse(text: &str) -> Result<Atom, SyntaxError> {
        let mut p = Parser::new(text);
        let atom = p.atom()?;
        p.skip_ws();
        if !p.at_end() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(atom)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if self.args.is_empty() {
            return Ok(());
        }
        write!(f, "(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `head :- body`. Facts have an empty body.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HornClause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl HornClause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn parse(text: &str) -> Result<HornClause, SyntaxError> {
        let mut p = Parser::new(text);
        let head = p.atom()?;
        p.skip_ws();
        let mut body = Vec::new();
        if p.eat(":-") {
            loop {
                body.push(p.atom()?);
                p.skip_ws();
                if !p.eat(",") {
                    break;
                }
            }
        }
        p.skip_ws();
        p.eat(".");
        p.skip_ws();
        if !p.at_end() {
            return Err(p.error("expected `:-`, `,` or end of clause"));
        }
        Ok(HornClause { head, body })
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{b}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

const DELIMS: &[char] = &['(', ')', ',', ' ', '\t', '\n', '\r'];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        let t: Vec<char> = tok.chars().collect();
        if self.chars[self.pos..].starts_with(&t) {
            self.pos += t.len();
            true
        } else {
            false
        }
    }

    fn error(&self, message: &str) -> SyntaxError {
        let mut line = 1;
        let mut column = 1;
        for c in &self.chars[..self.pos.min(self.chars.len())] {
            if *c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        SyntaxError { line, column, message: message.to_string() }
    }

    fn token(&mut self) -> Result<String, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if DELIMS.contains(&c) || (c == ':' && self.chars.get(self.pos + 1) == Some(&'-')) {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected an identifier or literal"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn args(&mut self) -> Result<Vec<Term>, SyntaxError> {
        let mut args = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    return Ok(args);
                }
                Some(',') => {
                    self.pos += 1;
                }
                None => return Err(self.error("unclosed argument list")),
                _ => args.push(self.term()?),
            }
        }
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        let name = self.token()?;
        if self.peek() == Some('(') {
            self.pos += 1;
            let args = self.args()?;
            return Ok(Term::App(name, args));
        }
        Ok(Term::from_token(&name))
    }

    fn atom(&mut self) -> Result<Atom, SyntaxError> {
        let name = self.token()?;
        if !name.chars().next().is_some_and(char::is_alphabetic) {
            return Err(self.error("predicate names must start with a letter"));
        }
        if self.peek() == Some('(') {
            self.pos += 1;
            let args = self.args()?;
            Ok(Atom { pred: name, args })
        } else {
            Ok(Atom { pred: name, args: Vec::new() })
        }
    }
}
