//! Tag predicates.
//!
//! ```text
//! expr    := or
//! or      := and ('or' and)*
//! and     := unary ('and' unary)*
//! unary   := 'not' unary | '(' expr ')' | operand cmp operand
//! operand := name | literal
//! cmp     := '==' | '!=' | '<' | '<=' | '>' | '>='
//! literal := 'true' | 'false' | decimal int | decimal float
//! ```
//!
//! Comparisons are numeric: booleans count as 0 and 1, ints and floats are
//! widened to `f64`. An attribute the tag's descriptor lacks reads as zero,
//! unless evaluation is strict.

use std::fmt;

use crate::error::{Error, Result};
use crate::tag::Tag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Float(f64),
}

impl Literal {
    fn as_f64(self) -> f64 {
        match self {
            Literal::Bool(b) => b as u8 as f64,
            Literal::Int(i) => i as f64,
            Literal::Float(x) => x,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Attr(String),
    Lit(Literal),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Attr(n) => f.write_str(n),
            Operand::Lit(l) => l.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Parsed predicate. `Display` prints the tree as `and(ge(nTracks,3),eq(isMuon,true))`.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Cmp(CmpOp, Operand, Operand),
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Cmp(op, a, b) => write!(f, "{}({a},{b})", op.name()),
            Predicate::Not(p) => write!(f, "not({p})"),
            Predicate::And(a, b) => write!(f, "and({a},{b})"),
            Predicate::Or(a, b) => write!(f, "or({a},{b})"),
        }
    }
}

impl std::str::FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_predicate(s)
    }
}

impl Predicate {
    pub fn eval(&self, tag: &Tag, strict: bool) -> Result<bool> {
        Ok(match self {
            Predicate::Cmp(op, a, b) => op.apply(operand(a, tag, strict)?, operand(b, tag, strict)?),
            Predicate::Not(p) => !p.eval(tag, strict)?,
            Predicate::And(a, b) => {
                // evaluate both sides so strict mode reports absent names on either
                let l = a.eval(tag, strict)?;
                let r = b.eval(tag, strict)?;
                l && r
            }
            Predicate::Or(a, b) => {
                let l = a.eval(tag, strict)?;
                let r = b.eval(tag, strict)?;
                l || r
            }
        })
    }

    /// Attribute names mentioned, in order of first appearance.
    pub fn attributes(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Cmp(_, a, b) => {
                for o in [a, b] {
                    if let Operand::Attr(n) = o {
                        if !out.contains(&n.as_str()) {
                            out.push(n);
                        }
                    }
                }
            }
            Predicate::Not(p) => p.collect(out),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }
}

fn operand(o: &Operand, tag: &Tag, strict: bool) -> Result<f64> {
    match o {
        Operand::Lit(l) => Ok(l.as_f64()),
        Operand::Attr(name) => match tag.get(name) {
            Ok(v) => Ok(v.as_f64()),
            Err(Error::UnknownAttribute(_)) if !strict => Ok(0.0),
            Err(e) => Err(e),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(Literal),
    Cmp(CmpOp),
    LParen,
    RParen,
    End,
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::SyntaxError { pos, msg: msg.into() }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            b'=' | b'!' | b'<' | b'>' => {
                let eq = b.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'=', true) => CmpOp::Eq,
                    (b'!', true) => CmpOp::Ne,
                    (b'<', true) => CmpOp::Le,
                    (b'>', true) => CmpOp::Ge,
                    (b'<', false) => CmpOp::Lt,
                    (b'>', false) => CmpOp::Gt,
                    _ => return Err(syntax(start, format!("unexpected {:?}", c as char))),
                };
                i += if eq { 2 } else { 1 };
                out.push((start, Tok::Cmp(op)));
            }
            b'0'..=b'9' | b'-' | b'+' => {
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let mut float = false;
                if i < b.len() && b[i] == b'.' {
                    float = true;
                    i += 1;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    float = true;
                    i += 1;
                    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                        i += 1;
                    }
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &src[start..i];
                let lit = if float {
                    text.parse().ok().filter(|x: &f64| x.is_finite()).map(Literal::Float)
                } else {
                    text.parse().ok().map(Literal::Int)
                };
                out.push((start, Tok::Num(lit.ok_or_else(|| syntax(start, format!("bad number {text:?}")))?)));
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                while i < b.len() && (b[i] == b'_' || b[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[start..].chars().next().unwrap();
                return Err(syntax(start, format!("unexpected {ch:?}")));
            }
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn or(&mut self) -> Result<Predicate> {
        let mut lhs = self.and()?;
        while self.keyword("or") {
            self.bump();
            lhs = Predicate::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate> {
        let mut lhs = self.unary()?;
        while self.keyword("and") {
            self.bump();
            lhs = Predicate::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate> {
        if self.keyword("not") {
            self.bump();
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let e = self.or()?;
            if *self.peek() != Tok::RParen {
                return Err(syntax(self.pos(), "expected ')'"));
            }
            self.bump();
            return Ok(e);
        }
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(syntax(self.pos(), "expected a comparison operator")),
        };
        self.bump();
        let rhs = self.operand()?;
        Ok(Predicate::Cmp(op, lhs, rhs))
    }

    fn operand(&mut self) -> Result<Operand> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(l) => Ok(Operand::Lit(l)),
            Tok::Ident(s) => match s.as_str() {
                "true" => Ok(Operand::Lit(Literal::Bool(true))),
                "false" => Ok(Operand::Lit(Literal::Bool(false))),
                "and" | "or" | "not" => Err(syntax(pos, format!("unexpected keyword {s:?}"))),
                _ => Ok(Operand::Attr(s)),
            },
            Tok::End => Err(syntax(pos, "unexpected end of input")),
            _ => Err(syntax(pos, "expected an attribute name or literal")),
        }
    }
}

pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let e = p.or()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.pos(), "unexpected trailing input"));
    }
    Ok(e)
}
