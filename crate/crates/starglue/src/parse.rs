//! Text expression parser for polynomials.
//!
//! Grammar: integer and rational literals (`3`, `3/2`), variables `x1..xd`
//! (plus `z`, `zd`, `xt` forms and the constants `i`, `hbar` so canonical
//! output re-parses), operators `+ - * ^` with nonnegative integer powers,
//! and parentheses. Parsing the canonical printed form of any polynomial is a
//! fixpoint: parse(print(p)) == p.

use crate::poly::{AlgebraError, Poly, VarClass};
use crate::scalar::GaussRat;
use num::{BigInt, BigRational};
use std::fmt;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.msg)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    d: usize,
    order: u32,
}

/// Parse an expression string into a polynomial over `d` target dimensions
/// at truncation order `order`.
pub fn parse_poly(text: &str, d: usize, order: u32) -> Result<Poly, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, d, order };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { pos: self.pos, msg: msg.into() }
    }

    fn alg(&self, e: AlgebraError) -> ParseError {
        ParseError { pos: self.pos, msg: e.to_string() }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    self.skip_ws();
                    let t = self.term()?;
                    acc = acc.add(&t).map_err(|e| self.alg(e))?;
                }
                Some(b'-') => {
                    self.bump();
                    self.skip_ws();
                    let t = self.term()?;
                    acc = acc.sub(&t).map_err(|e| self.alg(e))?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly, ParseError> {
        let mut acc = self.unary()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                self.skip_ws();
                let u = self.unary()?;
                acc = acc.mul(&u).map_err(|e| self.alg(e))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Poly, ParseError> {
        self.skip_ws();
        if self.eat(b'-') {
            let u = self.unary()?;
            Ok(u.neg())
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Poly, ParseError> {
        let base = self.atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            let n = self.uint()?;
            if n > 512 {
                self.pos = start;
                return Err(self.err("exponent too large"));
            }
            base.pow(n as u32).map_err(|e| self.alg(e))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Poly, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let e = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.rational(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(format!("unexpected character '{}'", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn uint(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if self.pos == start {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse::<u64>()
            .map_err(|_| ParseError { pos: start, msg: "number too large".into() })
    }

    fn rational(&mut self) -> Result<Poly, ParseError> {
        let n = self.uint()?;
        let num = BigInt::from(n);
        let mut den = BigInt::from(1u8);
        if self.peek() == Some(b'/') {
            self.bump();
            let dpos = self.pos;
            let d = self.uint()?;
            if d == 0 {
                return Err(ParseError { pos: dpos, msg: "zero denominator".into() });
            }
            den = BigInt::from(d);
        }
        let q = BigRational::new(num, den);
        Ok(Poly::constant(self.d, self.order, GaussRat::from_rational(q)))
    }

    fn ident(&mut self) -> Result<Poly, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
            self.bump();
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "i" => Ok(Poly::constant(self.d, self.order, GaussRat::i())),
            "hbar" => Ok(Poly::hbar_mono(self.d, self.order, 1)),
            "x" | "z" | "zd" | "xt" => {
                let class = match name {
                    "x" => VarClass::X,
                    "z" => VarClass::Z,
                    "zd" => VarClass::ZDag,
                    _ => VarClass::Xt,
                };
                let ipos = self.pos;
                let idx = self.uint().map_err(|_| ParseError {
                    pos: ipos,
                    msg: format!("expected variable index after '{name}'"),
                })?;
                Poly::var(self.d, self.order, class, idx as usize)
                    .map_err(|e| ParseError { pos: start, msg: e.to_string() })
            }
            _ => Err(ParseError { pos: start, msg: format!("unknown identifier '{name}'") }),
        }
    }
}

/// Parse an antisymmetric tensor from a JSON matrix of integers and `"p/q"`
/// strings, validating shape and antisymmetry.
pub fn parse_tensor_json(text: &str, d: usize) -> Result<crate::poly::PoissonTensor, ParseError> {
    let err = |msg: String| ParseError { pos: 0, msg };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| err(format!("tensor JSON: {e}")))?;
    let rows_v = value.as_array().ok_or_else(|| err("tensor must be a JSON array of rows".into()))?;
    let mut rows = Vec::with_capacity(rows_v.len());
    for row in rows_v {
        let entries = row.as_array().ok_or_else(|| err("tensor rows must be arrays".into()))?;
        let mut out = Vec::with_capacity(entries.len());
        for e in entries {
            out.push(parse_json_rational(e).map_err(err)?);
        }
        rows.push(out);
    }
    crate::poly::PoissonTensor::new(d, rows).map_err(|e| err(e.to_string()))
}

fn parse_json_rational(v: &serde_json::Value) -> Result<BigRational, String> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(|i| BigRational::from_integer(i.into()))
            .ok_or_else(|| format!("non-integer numeric entry {n}; use \"p/q\" strings for fractions")),
        serde_json::Value::String(s) => parse_rational_str(s),
        other => Err(format!("unsupported tensor entry {other}")),
    }
}

/// Parse a rational `p/q` (or bare integer) string.
pub fn parse_rational_str(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: i64 = num.parse().map_err(|_| format!("bad rational {s}"))?;
    let d: i64 = den.parse().map_err(|_| format!("bad rational {s}"))?;
    if d == 0 {
        return Err(format!("zero denominator in {s}"));
    }
    Ok(BigRational::new(n.into(), d.into()))
}
