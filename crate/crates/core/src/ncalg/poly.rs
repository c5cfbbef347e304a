use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tuple::MatrixTuple;
use super::word::Word;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Free polynomial with matrix coefficients: `Σ_w C_w w`, each `C_w` of a
/// common `rows × cols` shape. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyJson", into = "PolyJson")]
pub struct FreePoly {
    g: usize,
    shape: (usize, usize),
    terms: BTreeMap<Word, CMat>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    word: Word,
    #[serde(with = "super::json::matrix")]
    coeff: CMat,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolyJson {
    Full { g: usize, shape: Option<(usize, usize)>, terms: Vec<TermJson> },
    Bare(Vec<TermJson>),
}

impl TryFrom<PolyJson> for FreePoly {
    type Error = Error;

    fn try_from(j: PolyJson) -> Result<Self> {
        let (g, shape, terms) = match j {
            PolyJson::Full { g, shape, terms } => (Some(g), shape, terms),
            PolyJson::Bare(terms) => (None, None, terms),
        };
        let g = g.unwrap_or_else(|| terms.iter().map(|t| t.word.min_arity()).max().unwrap_or(1).max(1));
        let shape = shape.or_else(|| terms.first().map(|t| t.coeff.shape())).unwrap_or((1, 1));
        FreePoly::from_terms(g, shape, terms.into_iter().map(|t| (t.word, t.coeff)))
    }
}

impl From<FreePoly> for PolyJson {
    fn from(p: FreePoly) -> Self {
        PolyJson::Full {
            g: p.g,
            shape: Some(p.shape),
            terms: p.terms.into_iter().map(|(word, coeff)| TermJson { word, coeff }).collect(),
        }
    }
}

fn is_zero_matrix(m: &CMat) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

impl FreePoly {
    pub fn zero(g: usize, shape: (usize, usize)) -> Self {
        FreePoly { g, shape, terms: BTreeMap::new() }
    }

    pub fn constant(g: usize, coeff: CMat) -> Self {
        let mut p = FreePoly::zero(g, coeff.shape());
        p.insert_unchecked(Word::empty(), coeff);
        p
    }

    pub fn scalar(g: usize, z: C64) -> Self {
        Self::constant(g, CMat::from_element(1, 1, z))
    }

    pub fn monomial(g: usize, w: Word, coeff: CMat) -> Result<Self> {
        let mut p = FreePoly::zero(g, coeff.shape());
        p.add_term(w, coeff)?;
        Ok(p)
    }

    /// Scalar monomial `z · w`.
    pub fn scalar_monomial(g: usize, w: Word, z: C64) -> Result<Self> {
        Self::monomial(g, w, CMat::from_element(1, 1, z))
    }

    pub fn from_terms(g: usize, shape: (usize, usize), terms: impl IntoIterator<Item = (Word, CMat)>) -> Result<Self> {
        let mut p = FreePoly::zero(g, shape);
        for (w, c) in terms {
            p.add_term(w, c)?;
        }
        Ok(p)
    }

    /// Accumulates `coeff · w`, dropping the term if it cancels exactly.
    pub fn add_term(&mut self, w: Word, coeff: CMat) -> Result<()> {
        if coeff.shape() != self.shape {
            return Err(Error::Shape(format!(
                "coefficient of {w} is {:?}, polynomial coefficients are {:?}",
                coeff.shape(),
                self.shape
            )));
        }
        if w.min_arity() > self.g {
            return Err(Error::Arity { expected: self.g, found: w.min_arity() });
        }
        self.insert_unchecked(w, coeff);
        Ok(())
    }

    fn insert_unchecked(&mut self, w: Word, coeff: CMat) {
        match self.terms.get_mut(&w) {
            Some(c) => {
                *c += coeff;
                if is_zero_matrix(c) {
                    self.terms.remove(&w);
                }
            }
            None if !is_zero_matrix(&coeff) => {
                self.terms.insert(w, coeff);
            }
            None => {}
        }
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &CMat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, w: &Word) -> Option<&CMat> {
        self.terms.get(w)
    }

    /// Coefficient of `w`, zero when absent.
    pub fn coeff_or_zero(&self, w: &Word) -> CMat {
        self.terms.get(w).cloned().unwrap_or_else(|| linalg::zeros(self.shape.0, self.shape.1))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn is_plain(&self) -> bool {
        self.terms.keys().all(Word::is_plain)
    }

    /// Widens the variable count; words are unchanged.
    pub fn with_arity(mut self, g: usize) -> Result<Self> {
        if let Some(need) = self.terms.keys().map(Word::min_arity).max() {
            if need > g {
                return Err(Error::Arity { expected: g, found: need });
            }
        }
        self.g = g;
        Ok(self)
    }

    /// `Σ_w C_w ⊗ X^w`, an `(rows·n) × (cols·n)` matrix.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        x.check_arity(self.g)?;
        let n = x.n();
        let mut acc = linalg::zeros(self.shape.0 * n, self.shape.1 * n);
        for (w, c) in &self.terms {
            acc += c.kronecker(&x.eval_word(w)?);
        }
        Ok(acc)
    }

    /// Analytic involution: words reversed with stars toggled, coefficients
    /// conjugate-transposed.
    pub fn involution(&self) -> FreePoly {
        self.map_terms(Word::adjoint)
    }

    /// Involution for symmetric variables (`x_j* = x_j`): words reversed,
    /// coefficients conjugate-transposed.
    pub fn sym_adjoint(&self) -> FreePoly {
        self.map_terms(Word::reversed)
    }

    fn map_terms(&self, wf: impl Fn(&Word) -> Word) -> FreePoly {
        let mut p = FreePoly::zero(self.g, (self.shape.1, self.shape.0));
        for (w, c) in &self.terms {
            p.insert_unchecked(wf(w), c.adjoint());
        }
        p
    }

    fn check_same(&self, other: &FreePoly) -> Result<()> {
        if self.g != other.g {
            return Err(Error::Arity { expected: self.g, found: other.g });
        }
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    pub fn add(&self, other: &FreePoly) -> Result<FreePoly> {
        self.check_same(other)?;
        let mut p = self.clone();
        for (w, c) in &other.terms {
            p.insert_unchecked(w.clone(), c.clone());
        }
        Ok(p)
    }

    pub fn sub(&self, other: &FreePoly) -> Result<FreePoly> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, z: C64) -> FreePoly {
        let mut p = FreePoly::zero(self.g, self.shape);
        for (w, c) in &self.terms {
            p.insert_unchecked(w.clone(), c * z);
        }
        p
    }

    /// Product with matrix coefficients multiplied in order:
    /// `(pq)_w = Σ_{uv=w} P_u Q_v`.
    pub fn mul(&self, other: &FreePoly) -> Result<FreePoly> {
        if self.g != other.g {
            return Err(Error::Arity { expected: self.g, found: other.g });
        }
        if self.shape.1 != other.shape.0 {
            return Err(Error::Shape(format!("cannot multiply {:?} by {:?}", self.shape, other.shape)));
        }
        let mut p = FreePoly::zero(self.g, (self.shape.0, other.shape.1));
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                p.insert_unchecked(u.concat(v), a * b);
            }
        }
        Ok(p)
    }

    /// Largest entry modulus over all coefficients.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Scalar polynomials, one per coefficient row, of a column-vector
    /// polynomial.
    pub fn components(&self) -> Vec<FreePoly> {
        (0..self.shape.0)
            .map(|i| {
                let mut p = FreePoly::zero(self.g, (1, self.shape.1));
                for (w, c) in &self.terms {
                    p.insert_unchecked(w.clone(), c.rows(i, 1).into_owned());
                }
                p
            })
            .collect()
    }
}

impl fmt::Display for FreePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c.shape() == (1, 1) {
                let z = c[(0, 0)];
                if z.im == 0.0 {
                    write!(f, "{}", z.re)?;
                } else {
                    write!(f, "({}{:+}i)", z.re, z.im)?;
                }
            } else {
                write!(f, "[{}x{}]", c.nrows(), c.ncols())?;
            }
            if !w.is_empty() {
                write!(f, "·{w}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use crate::ncalg::Letter;
    use crate::par::trial_rng;
    use rand::Rng;

    fn sc(z: f64) -> CMat {
        CMat::from_element(1, 1, c(z, 0.0))
    }

    #[test]
    fn constant_one_evaluates_to_identity() {
        let p = FreePoly::scalar(2, c(1.0, 0.0));
        let x = MatrixTuple::zeros(2, 2);
        assert_eq!(p.eval(&x).unwrap(), linalg::eye(2));
    }

    #[test]
    fn linear_combination() {
        let p = FreePoly::from_terms(2, (1, 1), [(Word::plain(&[0]), sc(1.0)), (Word::plain(&[1]), sc(2.0))]).unwrap();
        let x = MatrixTuple::new(vec![linalg::eye(2), linalg::eye(2)]).unwrap();
        assert_eq!(p.eval(&x).unwrap(), linalg::eye(2) * c(3.0, 0.0));
    }

    #[test]
    fn matrix_constant_at_zero() {
        let interior = from_real(2, 2, &[1., 0., 0., 1.]);
        let p = FreePoly::constant(1, interior);
        assert_eq!(p.eval(&MatrixTuple::zeros(1, 1)).unwrap(), linalg::eye(2));
    }

    #[test]
    fn exact_cancellation_drops_terms() {
        let mut p = FreePoly::scalar_monomial(1, Word::plain(&[0]), c(1.0, 0.0)).unwrap();
        p.add_term(Word::plain(&[0]), sc(-1.0)).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn shape_and_arity_errors() {
        let mut p = FreePoly::zero(1, (1, 1));
        assert!(matches!(p.add_term(Word::empty(), linalg::eye(2)), Err(Error::Shape(_))));
        assert!(matches!(p.add_term(Word::plain(&[1]), sc(1.0)), Err(Error::Arity { .. })));
    }

    #[test]
    fn involution_examples() {
        let p = FreePoly::scalar_monomial(2, Word::plain(&[0, 1]), c(1.0, 0.0)).unwrap();
        let q = p.involution();
        assert_eq!(q.coeff(&Word::new(vec![Letter::star(1), Letter::star(0)])), Some(&sc(1.0)));
        let sym = FreePoly::from_terms(1, (1, 1), [(Word::plain(&[0]), sc(1.0)), (Word::new(vec![Letter::star(0)]), sc(1.0))]).unwrap();
        assert_eq!(sym.involution(), sym);
    }

    fn random_poly(seed: u64, g: usize, deg: usize, shape: (usize, usize)) -> FreePoly {
        let mut rng = trial_rng(seed, 0);
        let mut p = FreePoly::zero(g, shape);
        for _ in 0..6 {
            let len = rng.random_range(0..=deg);
            let letters = (0..len)
                .map(|_| Letter { var: rng.random_range(0..g), adjoint: rng.random_bool(0.4) })
                .collect();
            p.add_term(Word::new(letters), linalg::random_matrix(&mut rng, shape.0, shape.1)).unwrap();
        }
        p
    }

    #[test]
    fn involution_is_involutive_and_matches_adjoint() {
        for seed in 0..10 {
            let p = random_poly(seed, 2, 3, (2, 3));
            assert_eq!(p.involution().involution(), p);
            let mut rng = trial_rng(seed, 1);
            let n = 1 + (seed as usize % 4);
            let x = MatrixTuple::new((0..2).map(|_| linalg::random_matrix(&mut rng, n, n)).collect()).unwrap();
            let lhs = p.involution().eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap().adjoint();
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + p.max_abs_coeff()).powi(2) * 100.0);
        }
    }

    #[test]
    fn product_evaluates_to_product() {
        let p = random_poly(1, 2, 2, (2, 3));
        let q = random_poly(2, 2, 2, (3, 1));
        let mut rng = trial_rng(9, 0);
        let x = MatrixTuple::new((0..2).map(|_| linalg::random_matrix(&mut rng, 3, 3)).collect()).unwrap();
        let lhs = p.mul(&q).unwrap().eval(&x).unwrap();
        let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
        assert!((lhs - &rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn json_roundtrip_and_bare_form() {
        let p = random_poly(3, 2, 2, (1, 1));
        let s = serde_json::to_string(&p).unwrap();
        let back: FreePoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bare: FreePoly = serde_json::from_str(r#"[{"word": [], "coeff": 1}, {"word": [1, 1], "coeff": -1}]"#).unwrap();
        assert_eq!(bare.g(), 1);
        assert_eq!(bare.degree(), 2);
    }
}
