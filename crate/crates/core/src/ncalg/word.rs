use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A single free letter `x_j` or its formal adjoint `x_j*`. `var` is
/// zero-based; it prints and serialises one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub var: usize,
    pub adjoint: bool,
}

impl Letter {
    pub fn plain(var: usize) -> Self {
        Letter { var, adjoint: false }
    }

    pub fn star(var: usize) -> Self {
        Letter { var, adjoint: true }
    }

    pub fn toggled(self) -> Self {
        Letter { adjoint: !self.adjoint, ..self }
    }

    fn signed(self) -> i64 {
        let j = self.var as i64 + 1;
        if self.adjoint {
            -j
        } else {
            j
        }
    }

    fn from_signed(s: i64) -> Result<Self> {
        match s {
            0 => Err(Error::Invalid("letter index 0 is not allowed".into())),
            s if s > 0 => Ok(Letter::plain(s as usize - 1)),
            s => Ok(Letter::star((-s) as usize - 1)),
        }
    }
}

/// A word in the free monoid; the empty word is the unit.
///
/// Words order graded-lexicographically: shorter words first, then
/// lexicographically by letter with `x_j` before `x_j*` before `x_{j+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    /// Word of plain letters from zero-based indices.
    pub fn plain(vars: &[usize]) -> Self {
        Word(vars.iter().copied().map(Letter::plain).collect())
    }

    /// Word from one-based signed indices (`+j` for `x_j`, `-j` for `x_j*`).
    pub fn from_signed(idx: &[i64]) -> Result<Self> {
        idx.iter().map(|&s| Letter::from_signed(s)).collect::<Result<_>>().map(Word)
    }

    pub fn to_signed(&self) -> Vec<i64> {
        self.0.iter().map(|l| l.signed()).collect()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_plain(&self) -> bool {
        self.0.iter().all(|l| !l.adjoint)
    }

    /// Smallest arity that contains every letter of the word.
    pub fn min_arity(&self) -> usize {
        self.0.iter().map(|l| l.var + 1).max().unwrap_or(0)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prepend(&self, letter: Letter) -> Word {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// The involution of the analytic free algebra: reverse and toggle stars.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.toggled()).collect())
    }

    /// The involution for symmetric variables (`x_j* = x_j`): reverse only.
    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// If `self = prefix · rest`, returns `rest`.
    pub fn strip_prefix(&self, prefix: &Word) -> Option<Word> {
        self.0.strip_prefix(prefix.0.as_slice()).map(|r| Word(r.to_vec()))
    }

    /// All plain words over `g` letters of length at most `max_len`, in
    /// graded-lexicographic order.
    pub fn enumerate_plain(g: usize, max_len: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        let mut layer = vec![Word::empty()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(layer.len() * g);
            for w in &layer {
                for j in 0..g {
                    let mut v = w.0.clone();
                    v.push(Letter::plain(j));
                    next.push(Word(v));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    /// Plain words of exactly `len` letters, graded-lex order.
    pub fn enumerate_plain_exact(g: usize, len: usize) -> Vec<Word> {
        Word::enumerate_plain(g, len).into_iter().filter(|w| w.len() == len).collect()
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        for l in &self.0 {
            write!(f, "x{}", l.var + 1)?;
            if l.adjoint {
                write!(f, "*")?;
            }
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_signed().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Word::from_signed(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order() {
        let mut ws = vec![
            Word::plain(&[1, 0]),
            Word::plain(&[0]),
            Word::empty(),
            Word::new(vec![Letter::star(0)]),
            Word::plain(&[1]),
            Word::plain(&[0, 1]),
        ];
        ws.sort();
        let shown: Vec<String> = ws.iter().map(|w| w.to_string()).collect();
        assert_eq!(shown, ["∅", "x1", "x1*", "x2", "x1x2", "x2x1"]);
    }

    #[test]
    fn enumeration_is_sorted_and_sized() {
        let ws = Word::enumerate_plain(2, 3);
        assert_eq!(ws.len(), 15);
        assert!(ws.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(ws[0], Word::empty());
    }

    #[test]
    fn adjoint_reverses_and_toggles() {
        let w = Word::plain(&[0, 1]);
        assert_eq!(w.adjoint(), Word::new(vec![Letter::star(1), Letter::star(0)]));
        assert_eq!(w.adjoint().adjoint(), w);
        assert_eq!(w.reversed(), Word::plain(&[1, 0]));
    }

    #[test]
    fn signed_encoding() {
        let w = Word::from_signed(&[1, -2, 3]).unwrap();
        assert_eq!(w.to_signed(), vec![1, -2, 3]);
        assert_eq!(w.to_string(), "x1x2*x3");
        assert!(Word::from_signed(&[0]).is_err());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, "[1,-2,3]");
    }
}
