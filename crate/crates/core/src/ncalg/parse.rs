//! Scalar free-polynomial expressions such as `1 - x^2`, `x1*x2 + x2*x1` or
//! `(1 + x)y'`. Letters: `x`, `y`, `z` (variables 1–3) or `xN`; a trailing
//! `'` marks the adjoint. `i` is the imaginary unit. Juxtaposition
//! multiplies.

use super::poly::FreePoly;
use super::word::{Letter, Word};
use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Imag,
    Var(Letter),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        let start = i;
        match ch {
            ' ' | '\t' | '\n' => {
                i += 1;
                continue;
            }
            '+' => out.push((start, Tok::Plus)),
            '-' => out.push((start, Tok::Minus)),
            '*' => out.push((start, Tok::Star)),
            '/' => out.push((start, Tok::Slash)),
            '^' => out.push((start, Tok::Caret)),
            '(' => out.push((start, Tok::LParen)),
            ')' => out.push((start, Tok::RParen)),
            'i' => out.push((start, Tok::Imag)),
            '0'..='9' | '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.' || bytes[i] == b'e') {
                    if bytes[i] == b'e' && !(i + 1 < bytes.len() && (bytes[i + 1].is_ascii_digit() || bytes[i + 1] == b'-')) {
                        break;
                    }
                    if bytes[i] == b'e' && bytes[i + 1] == b'-' {
                        i += 1;
                    }
                    i += 1;
                }
                let text = &src[start..i];
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { pos: start, msg: format!("bad number `{text}`") })?;
                out.push((start, Tok::Num(v)));
                continue;
            }
            'x' | 'y' | 'z' => {
                i += 1;
                let digits_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let var = if digits_start == i {
                    (ch as u8 - b'x') as usize
                } else {
                    if ch != 'x' {
                        return Err(Error::Parse { pos: start, msg: "indexed variables use `x`".into() });
                    }
                    let k: usize = src[digits_start..i].parse().expect("digits");
                    if k == 0 {
                        return Err(Error::Parse { pos: start, msg: "variables are numbered from 1".into() });
                    }
                    k - 1
                };
                let adjoint = i < bytes.len() && bytes[i] == b'\'';
                if adjoint {
                    i += 1;
                }
                out.push((start, Tok::Var(Letter { var, adjoint })));
                continue;
            }
            other => return Err(Error::Parse { pos: start, msg: format!("unexpected `{other}`") }),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    g: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.here(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<FreePoly> {
        let mut acc = FreePoly::zero(self.g, (1, 1));
        let mut sign = 1.0;
        match self.peek() {
            Some(Tok::Minus) => {
                sign = -1.0;
                self.pos += 1;
            }
            Some(Tok::Plus) => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = acc.add(&t.scale(C64::new(sign, 0.0)))?;
            match self.peek() {
                Some(Tok::Plus) => sign = 1.0,
                Some(Tok::Minus) => sign = -1.0,
                _ => return Ok(acc),
            }
            self.pos += 1;
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Some(Tok::Num(_) | Tok::Imag | Tok::Var(_) | Tok::LParen))
    }

    fn term(&mut self) -> Result<FreePoly> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?)?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let Some(Tok::Num(v)) = self.peek().cloned() else {
                        return self.err("division only by numbers");
                    };
                    self.pos += 1;
                    acc = acc.scale(C64::new(1.0 / v, 0.0));
                }
                _ if self.starts_factor() => acc = acc.mul(&self.factor()?)?,
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<FreePoly> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let Some(Tok::Num(k)) = self.peek().cloned() else {
            return self.err("exponent must be a non-negative integer");
        };
        if k < 0.0 || k.fract() != 0.0 {
            return self.err("exponent must be a non-negative integer");
        }
        self.pos += 1;
        let mut out = FreePoly::scalar(self.g, C64::new(1.0, 0.0));
        for _ in 0..k as usize {
            out = out.mul(&base)?;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<FreePoly> {
        let g = self.g;
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(FreePoly::scalar(g, C64::new(v, 0.0)))
            }
            Some(Tok::Imag) => {
                self.pos += 1;
                Ok(FreePoly::scalar(g, C64::new(0.0, 1.0)))
            }
            Some(Tok::Var(l)) => {
                self.pos += 1;
                FreePoly::scalar_monomial(g, Word::new(vec![l]), C64::new(1.0, 0.0))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            _ => self.err("expected a number, variable or `(`"),
        }
    }
}

/// Parses a scalar polynomial. `g` fixes the arity; when `None` it is the
/// largest variable index used (at least 1).
pub fn parse_poly(src: &str, g: Option<usize>) -> Result<FreePoly> {
    let toks = lex(src)?;
    let used = toks
        .iter()
        .filter_map(|(_, t)| if let Tok::Var(l) = t { Some(l.var + 1) } else { None })
        .max()
        .unwrap_or(1);
    let g = match g {
        Some(g) if g < used => return Err(Error::Arity { expected: g, found: used }),
        Some(g) => g,
        None => used,
    };
    if toks.is_empty() {
        return Err(Error::Parse { pos: 0, msg: "empty expression".into() });
    }
    let mut p = Parser { toks, pos: 0, g, end: src.len() };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(out)
}
