//! Recursive-descent parser and canonical printer for polynomial text.
//!
//! ```text
//! expr   := ('+'|'-')? term (('+'|'-') term)*
//! term   := factor (('*' factor) | ('/' number))*
//! factor := base ('^' uint)?
//! base   := 'x' | 'y' | number | '(' expr ')'
//! number := decimal | int '/' int
//! ```
//!
//! Implicit multiplication is rejected: `2x` is an error, `2*x` is required.

use std::fmt;

use super::{BivariatePoly, PolyError, MAX_DEGREE};

pub fn parse_poly(text: &str) -> Result<BivariatePoly, PolyError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    let out = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> PolyError {
        PolyError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<BivariatePoly, PolyError> {
        let negate = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let first = self.term()?;
        let mut acc = if negate { -first } else { first };
        loop {
            if self.eat(b'+') {
                acc = &acc + &self.term()?;
            } else if self.eat(b'-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<BivariatePoly, PolyError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                let start = self.pos;
                let rhs = self.factor()?;
                acc = self.checked_mul(&acc, &rhs, start)?;
            } else if self.eat(b'/') {
                let d = self.number(false)?;
                if d == 0.0 {
                    return Err(self.error("division by zero"));
                }
                acc = acc.scale(1.0 / d);
            } else {
                self.reject_implicit_mul()?;
                return Ok(acc);
            }
        }
    }

    fn reject_implicit_mul(&self) -> Result<(), PolyError> {
        match self.peek() {
            Some(c) if c.is_ascii_alphanumeric() || c == b'(' || c == b'.' => {
                Err(self.error("expected operator (implicit multiplication is not allowed)"))
            }
            _ => Ok(()),
        }
    }

    fn checked_mul(
        &self,
        a: &BivariatePoly,
        b: &BivariatePoly,
        at: usize,
    ) -> Result<BivariatePoly, PolyError> {
        let da = a.degree().finite().unwrap_or(0);
        let db = b.degree().finite().unwrap_or(0);
        if da + db > MAX_DEGREE {
            return Err(PolyError::ExponentOverflow { offset: at });
        }
        Ok(a * b)
    }

    fn factor(&mut self) -> Result<BivariatePoly, PolyError> {
        let base = self.base()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let digits = self.digits();
        if digits.is_empty() {
            return Err(self.error("expected unsigned integer exponent"));
        }
        let k: u32 = digits
            .parse()
            .map_err(|_| PolyError::ExponentOverflow { offset: at })?;
        self.skip_ws();
        let d = base.degree().finite().unwrap_or(0);
        if d.checked_mul(k).is_none_or(|total| total > MAX_DEGREE) {
            return Err(PolyError::ExponentOverflow { offset: at });
        }
        Ok(base.pow(k))
    }

    fn base(&mut self) -> Result<BivariatePoly, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.eat(b'(');
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                Ok(BivariatePoly::constant(self.number(true)?))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("?");
                let out = match name {
                    "x" => BivariatePoly::x(),
                    "y" => BivariatePoly::y(),
                    _ => {
                        return Err(PolyError::UnknownIdentifier {
                            offset: start,
                            name: name.to_string(),
                        })
                    }
                };
                self.skip_ws();
                Ok(out)
            }
            Some(_) => Err(self.error("expected `x`, `y`, a number or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn digits(&mut self) -> &str {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    /// `decimal | int '/' int`. With `rational` set, a `/` directly after an
    /// integer literal binds as a rational literal; otherwise `/` is left for
    /// `term` to treat as division.
    fn number(&mut self, rational: bool) -> Result<f64, PolyError> {
        let start = self.pos;
        let int_part = self.digits().to_string();
        let mut text = int_part.clone();
        let mut is_int = true;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let frac = self.digits().to_string();
            if int_part.is_empty() && frac.is_empty() {
                self.pos = start;
                return Err(self.error("malformed number"));
            }
            text.push('.');
            text.push_str(&frac);
            is_int = false;
        }
        if text.is_empty() {
            return Err(self.error("expected number"));
        }
        let value: f64 = text.parse().map_err(|_| {
            PolyError::Syntax { offset: start, message: "malformed number".into() }
        })?;
        self.skip_ws();
        if rational && is_int && self.peek() == Some(b'/') {
            let save = self.pos;
            self.pos += 1;
            self.skip_ws();
            let den = self.digits().to_string();
            if den.is_empty() || self.peek() == Some(b'.') {
                // Not a rational literal; let `term` treat it as division.
                self.pos = save;
                return Ok(value);
            }
            self.skip_ws();
            let den: f64 = den.parse().map_err(|_| self.error("malformed denominator"))?;
            if den == 0.0 {
                return Err(self.error("division by zero"));
            }
            return Ok(value / den);
        }
        Ok(value)
    }
}

impl fmt::Display for BivariatePoly {
    /// Canonical text form; reparsing it gives back the same coefficients.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        // highest degree first reads more naturally
        let mut terms: Vec<_> = self.terms().collect();
        terms.sort_by(|a, b| {
            let (da, db) = (a.0 .0 + a.0 .1, b.0 .0 + b.0 .1);
            db.cmp(&da).then(b.0.cmp(&a.0))
        });
        for ((i, j), c) in terms {
            let mag = c.abs();
            if first {
                if c < 0.0 {
                    f.write_str("-")?;
                }
            } else if c < 0.0 {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            first = false;
            let mut parts: Vec<String> = Vec::new();
            if mag != 1.0 || (i == 0 && j == 0) {
                parts.push(format!("{mag}"));
            }
            match i {
                0 => {}
                1 => parts.push("x".into()),
                _ => parts.push(format!("x^{i}")),
            }
            match j {
                0 => {}
                1 => parts.push("y".into()),
                _ => parts.push(format!("y^{j}")),
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}
