//! Rate sequences indexed by population size `k ≥ 1`.
//!
//! A sequence is a constant, an arithmetic expression in `k`, an explicit
//! table (`table[0]` is the rate at `k = 1`), or polynomial coefficients.
//! Expressions support `+ - * / ^`, parentheses, unary minus, decimal and
//! exponent-notation constants, and the variable `k`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QsdError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum RateSeq<T> {
    Const(T),
    Expr(Expr),
    Table(Vec<T>),
    /// `c[0] + c[1] k + c[2] k² + ..`, with powers formed by repeated multiplication.
    Poly(Vec<T>),
}

impl<T: Real> RateSeq<T> {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::Expr(Expr::parse(src)?))
    }

    /// Rate at `k ≥ 1`.
    pub fn eval(&self, k: usize) -> Result<T> {
        if k == 0 {
            return Err(QsdError::InvalidArgument("rate sequences start at k = 1".into()));
        }
        let kt = T::from_count(k);
        match self {
            Self::Const(c) => Ok(*c),
            Self::Expr(e) => Ok(e.eval(kt)),
            Self::Table(t) => t.get(k - 1).copied().ok_or_else(|| {
                QsdError::InvalidArgument(format!("rate table of length {} has no entry for k = {k}", t.len()))
            }),
            Self::Poly(c) => {
                let mut acc = T::zero();
                let mut pow = T::one();
                for (p, &ci) in c.iter().enumerate() {
                    if p > 0 {
                        pow = if p == 1 { kt } else { pow * kt };
                    }
                    acc = acc + ci * pow;
                }
                Ok(acc)
            }
        }
    }

    /// Length limit for tables, `None` for unbounded sequences.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Self::Table(t) => Some(t.len()),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RateRepr<T> {
    Num(T),
    Src(String),
    Table(Vec<T>),
    Poly { poly: Vec<T> },
}

impl<T: Real + Serialize> Serialize for RateSeq<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Const(c) => RateRepr::Num(*c),
            Self::Expr(e) => RateRepr::Src(e.source.clone()),
            Self::Table(t) => RateRepr::Table(t.clone()),
            Self::Poly(c) => RateRepr::Poly { poly: c.clone() },
        }
        .serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for RateSeq<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match RateRepr::<T>::deserialize(d)? {
            RateRepr::Num(c) => Self::Const(c),
            RateRepr::Src(s) => Self::Expr(Expr::parse(&s).map_err(serde::de::Error::custom)?),
            RateRepr::Table(t) => Self::Table(t),
            RateRepr::Poly { poly } => Self::Poly(poly),
        })
    }
}

/// Parsed arithmetic expression over `k`.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    K,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self { source: src.trim().to_string(), root })
    }

    pub fn eval<T: Real>(&self, k: T) -> T {
        eval_node(&self.root, k)
    }
}

fn eval_node<T: Real>(n: &Node, k: T) -> T {
    match n {
        Node::Num(v) => T::lit(*v),
        Node::K => k,
        Node::Neg(a) => -eval_node(a, k),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval_node(a, k), eval_node(b, k));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => match integer_exponent(b) {
                    Some(e) => x.powi(e),
                    None => x.powf(y),
                },
            }
        }
    }
}

fn integer_exponent(n: &Node) -> Option<i32> {
    match n {
        Node::Num(v) if v.fract() == 0.0 && v.abs() < 64.0 => Some(*v as i32),
        Node::Neg(a) => integer_exponent(a).map(|e| -e),
        _ => None,
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> QsdError {
        QsdError::Expr(format!("{msg} at column {}", self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(if c == b'+' { Op::Add } else { Op::Sub }, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(if c == b'*' { Op::Mul } else { Op::Div }, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == Some(b'+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'k') => {
                self.pos += 1;
                Ok(Node::K)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && (self.s[self.pos] == b'+' || self.s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.err("malformed number")
        })
    }
}
