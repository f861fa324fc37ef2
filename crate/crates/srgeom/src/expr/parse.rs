//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' exponent)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Decimal literals are exact rationals; literals with an exponent part
//! (`1.5e-3`) are floats.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Expr, ExprError, Func};

pub fn parse<S: AsRef<str>>(text: &str, coords: &[S]) -> Result<Expr, ExprError> {
    if coords.is_empty() {
        return Err(ExprError::Coordinates("coordinate list is empty".into()));
    }
    let mut seen = HashSet::new();
    for c in coords {
        if !seen.insert(c.as_ref()) {
            return Err(ExprError::Coordinates(format!("duplicate coordinate `{}`", c.as_ref())));
        }
    }
    let names: Vec<&str> = coords.iter().map(|c| c.as_ref()).collect();
    let mut p = Parser { src: text.as_bytes(), pos: 0, coords: &names };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    coords: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(Expr::raw_neg(self.term()?));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::raw_add(terms) })
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        let mut factors: Vec<Expr> = Vec::new();
        loop {
            if self.eat(b'*') {
                factors.push(self.unary()?);
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                if !factors.is_empty() {
                    factors.insert(0, acc);
                    acc = Expr::raw_mul(std::mem::take(&mut factors));
                }
                acc = Expr::raw_div(acc, rhs);
            } else {
                break;
            }
        }
        if !factors.is_empty() {
            factors.insert(0, acc);
            acc = Expr::raw_mul(factors);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(Expr::raw_neg(self.unary()?));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let n = self.exponent()?;
            return Ok(Expr::raw_pow(base, n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let paren = self.eat(b'(');
        let neg = self.eat(b'-');
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ExprError::NonIntegerExponent { offset: start });
        }
        if matches!(self.src.get(self.pos), Some(b'.') | Some(b'e') | Some(b'E')) {
            return Err(ExprError::NonIntegerExponent { offset: start });
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap();
        let mut n: i64 = text.parse().map_err(|_| ExprError::NonIntegerExponent { offset: start })?;
        if neg {
            n = -n;
        }
        if paren && !self.eat(b')') {
            return Err(ExprError::NonIntegerExponent { offset: start });
        }
        Ok(n)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let mut int_digits = String::new();
        let mut frac_digits = String::new();
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            int_digits.push(self.src[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                frac_digits.push(self.src[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_digits.is_empty() && frac_digits.is_empty() {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == exp_start {
                self.pos = save;
                return Err(self.error("malformed exponent"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: "malformed float".into(),
            })?;
            return Ok(Expr::float(v));
        }
        let mut digits = int_digits;
        digits.push_str(&frac_digits);
        let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
        let mut denom = BigInt::one();
        for _ in 0..frac_digits.len() {
            denom *= 10;
        }
        Ok(Expr::rational(BigRational::new(numer, denom)))
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(i) = self.coords.iter().position(|c| *c == name) {
            return Ok(Expr::var(i, name));
        }
        if let Some(f) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.error("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Expr::raw_func(f, arg));
        }
        Err(ExprError::UnknownIdentifier { name: name.to_string(), offset: start })
    }
}
