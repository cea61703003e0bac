//! Text syntax of programs.
//!
//! ```text
//! Var QueryObject = Unique ( FilterShape ( FilterColor ( FilterSize ( SceneAtStart(), "Small" ), "Gray" ), "Cube" ) )
//! Count (
//!     FilterObjectsFromEvents (
//!         FilterCollideGround (
//!             GetCounterfactEvents ( QueryObject )
//!         )
//!     )
//! )
//! ```
//!
//! Quoted strings are literals (curly quotes accepted, names case-insensitive),
//! `$Z`-style tokens are template slots, bare integers are integer literals.

use std::fmt::Write as _;

use thiserror::Error;

use super::ast::{Binding, Literal, Node, Program};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Slot(String),
    LParen,
    RParen,
    Comma,
    Eq,
}

fn err(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError { offset, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        match c {
            c if c.is_whitespace() => {
                it.next();
            }
            '(' | ')' | ',' | '=' => {
                it.next();
                out.push((
                    i,
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        ',' => Tok::Comma,
                        _ => Tok::Eq,
                    },
                ));
            }
            '"' | '\u{201c}' | '\u{201d}' => {
                it.next();
                let mut s = String::new();
                loop {
                    match it.next() {
                        Some((_, '"' | '\u{201c}' | '\u{201d}')) => break,
                        Some((_, ch)) => s.push(ch),
                        None => return Err(err(i, "unterminated string")),
                    }
                }
                out.push((i, Tok::Str(s)));
            }
            '$' => {
                it.next();
                let mut s = String::new();
                while let Some(&(_, ch)) = it.peek().filter(|(_, ch)| ch.is_ascii_alphanumeric()) {
                    s.push(ch);
                    it.next();
                }
                out.push((i, Tok::Slot(s)));
            }
            c if c.is_ascii_digit() || c == '-' => {
                it.next();
                let mut s = String::from(c);
                while let Some(&(_, ch)) = it.peek().filter(|(_, ch)| ch.is_ascii_digit()) {
                    s.push(ch);
                    it.next();
                }
                let n = s.parse().map_err(|_| err(i, format!("bad integer `{s}`")))?;
                out.push((i, Tok::Int(n)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, ch)) = it.peek().filter(|(_, ch)| ch.is_alphanumeric() || *ch == '_') {
                    s.push(ch);
                    it.next();
                }
                out.push((i, Tok::Ident(s)));
            }
            other => return Err(err(i, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

enum Arg {
    Node(Node),
    Lit(Literal),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let off = self.offset();
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => Err(err(off, format!("expected {what}"))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut lets = Vec::new();
        while self.peek() == Some(&Tok::Ident("Var".into())) {
            self.next();
            let off = self.offset();
            let name = match self.next() {
                Some(Tok::Ident(n)) => n,
                _ => return Err(err(off, "expected variable name after `Var`")),
            };
            self.expect(Tok::Eq, "`=`")?;
            let value = self.node()?;
            lets.push(Binding { name, value });
        }
        let root = self.node()?;
        if self.pos < self.toks.len() {
            return Err(err(self.offset(), "trailing input after program root"));
        }
        Ok(Program { lets, root })
    }

    fn node(&mut self) -> Result<Node, ParseError> {
        let off = self.offset();
        match self.arg()? {
            Arg::Node(n) => Ok(n),
            Arg::Lit(_) => Err(err(off, "literal where an expression is required")),
        }
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let off = self.offset();
        match self.next() {
            Some(Tok::Str(s)) => s.parse().map(Arg::Lit).map_err(|e| err(off, e.to_string())),
            Some(Tok::Slot(s)) => format!("${s}").parse().map(Arg::Lit).map_err(|e| err(off, e.to_string())),
            Some(Tok::Int(i)) => Ok(Arg::Lit(Literal::Int(i))),
            Some(Tok::Ident(name)) => {
                if self.peek() != Some(&Tok::LParen) {
                    return Ok(Arg::Node(Node::Var(name)));
                }
                self.next();
                let mut children = Vec::new();
                let mut args = Vec::new();
                if self.peek() == Some(&Tok::RParen) {
                    self.next();
                } else {
                    loop {
                        let aoff = self.offset();
                        match self.arg()? {
                            Arg::Node(n) if args.is_empty() => children.push(n),
                            Arg::Node(_) => return Err(err(aoff, "expression after a literal argument")),
                            Arg::Lit(l) => args.push(l),
                        }
                        let coff = self.offset();
                        match self.next() {
                            Some(Tok::Comma) => {}
                            Some(Tok::RParen) => break,
                            _ => return Err(err(coff, format!("expected `,` or `)` in arguments of {name}"))),
                        }
                    }
                }
                Ok(Arg::Node(Node::Call { module: name, children, args }))
            }
            _ => Err(err(off, "expected an expression")),
        }
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    Parser { toks, pos: 0, end: src.len() }.program()
}

fn lit_text(l: &Literal) -> String {
    match l {
        Literal::Int(i) => i.to_string(),
        Literal::Slot(_) => l.to_string(),
        other => format!("\"{other}\""),
    }
}

/// Single-line form.
pub fn inline(node: &Node) -> String {
    match node {
        Node::Var(v) => v.clone(),
        Node::Call { module, children, args } => {
            if children.is_empty() && args.is_empty() {
                return format!("{module}()");
            }
            let parts: Vec<String> = children.iter().map(inline).chain(args.iter().map(lit_text)).collect();
            format!("{module} ( {} )", parts.join(", "))
        }
    }
}

fn write_indented(out: &mut String, node: &Node, depth: usize, trailing: &str) {
    let pad = "    ".repeat(depth);
    match node {
        Node::Call { module, children, args } if !children.is_empty() && !is_simple(node) => {
            let _ = writeln!(out, "{pad}{module} (");
            let n = children.len() + args.len();
            for (i, c) in children.iter().enumerate() {
                write_indented(out, c, depth + 1, if i + 1 < n { "," } else { "" });
            }
            for (j, a) in args.iter().enumerate() {
                let sep = if children.len() + j + 1 < n { "," } else { "" };
                let _ = writeln!(out, "{pad}    {}{sep}", lit_text(a));
            }
            let _ = writeln!(out, "{pad}){trailing}");
        }
        _ => {
            let _ = writeln!(out, "{pad}{}{trailing}", inline(node));
        }
    }
}

/// Calls whose children are all leaves stay on one line.
fn is_simple(node: &Node) -> bool {
    match node {
        Node::Var(_) => true,
        Node::Call { children, .. } => children.iter().all(|c| match c {
            Node::Var(_) => true,
            Node::Call { children, args, .. } => children.is_empty() && args.is_empty(),
        }),
    }
}

/// Multi-line form: bindings on one line each, the root indented by nesting.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for b in &program.lets {
        let _ = writeln!(out, "Var {} = {}", b.name, inline(&b.value));
    }
    write_indented(&mut out, &program.root, 0, "");
    out
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&pretty(self))
    }
}

impl std::str::FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}
