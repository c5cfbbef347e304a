use serde::{Deserialize, Serialize};

use super::word::Word;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// A g-tuple of n×n complex matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TupleJson", into = "TupleJson")]
pub struct MatrixTuple {
    n: usize,
    mats: Vec<CMat>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TupleJson {
    Full {
        n: Option<usize>,
        #[serde(rename = "X", with = "super::json::matrices")]
        mats: Vec<CMat>,
    },
    Bare(#[serde(with = "super::json::matrices")] Vec<CMat>),
}

impl TryFrom<TupleJson> for MatrixTuple {
    type Error = Error;

    fn try_from(j: TupleJson) -> Result<Self> {
        match j {
            TupleJson::Full { n: Some(n), mats } if mats.is_empty() => Ok(MatrixTuple::zeros(0, n)),
            TupleJson::Full { n, mats } => {
                let t = MatrixTuple::new(mats)?;
                match n {
                    Some(n) if n != t.n => Err(Error::Shape(format!("declared n={n}, matrices are {}×{}", t.n, t.n))),
                    _ => Ok(t),
                }
            }
            TupleJson::Bare(mats) => MatrixTuple::new(mats),
        }
    }
}

impl From<MatrixTuple> for TupleJson {
    fn from(t: MatrixTuple) -> Self {
        TupleJson::Full { n: Some(t.n), mats: t.mats }
    }
}

impl MatrixTuple {
    pub fn new(mats: Vec<CMat>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(Error::Invalid("empty tuple needs an explicit size".into()));
        };
        let n = first.nrows();
        for (j, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Shape(format!(
                    "entry {} is {}×{}, expected {n}×{n}",
                    j + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(MatrixTuple { n, mats })
    }

    pub fn zeros(g: usize, n: usize) -> Self {
        MatrixTuple { n, mats: vec![linalg::zeros(n, n); g] }
    }

    /// Tuple of 1×1 matrices.
    pub fn scalars(xs: &[C64]) -> Self {
        MatrixTuple { n: 1, mats: xs.iter().map(|&x| CMat::from_element(1, 1, x)).collect() }
    }

    pub fn scalar(x: C64) -> Self {
        Self::scalars(&[x])
    }

    pub fn g(&self) -> usize {
        self.mats.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<CMat> {
        self.mats
    }

    pub fn get(&self, j: usize) -> &CMat {
        &self.mats[j]
    }

    pub fn check_arity(&self, g: usize) -> Result<()> {
        if self.g() != g {
            return Err(Error::Arity { expected: g, found: self.g() });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> MatrixTuple {
        MatrixTuple { n: self.n, mats: self.mats.iter().map(f).collect() }
    }

    pub fn scale(&self, z: C64) -> MatrixTuple {
        self.map(|m| m * z)
    }

    pub fn add(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        self.check_conformal(other)?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| a + b).collect();
        Ok(MatrixTuple { n: self.n, mats })
    }

    pub fn sub(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        self.check_conformal(other)?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| a - b).collect();
        Ok(MatrixTuple { n: self.n, mats })
    }

    fn check_conformal(&self, other: &MatrixTuple) -> Result<()> {
        other.check_arity(self.g())?;
        if self.n != other.n {
            return Err(Error::Shape(format!("sizes {} and {} differ", self.n, other.n)));
        }
        Ok(())
    }

    /// Max over entries of the Frobenius norm of the difference.
    pub fn distance(&self, other: &MatrixTuple) -> Result<f64> {
        self.check_conformal(other)?;
        Ok(self.mats.iter().zip(&other.mats).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// `Σ_j X_j X_j*`.
    pub fn row_gram(&self) -> CMat {
        self.mats.iter().fold(linalg::zeros(self.n, self.n), |acc, x| acc + x * x.adjoint())
    }

    /// Row norm `‖Σ X_j X_j*‖^{1/2}`.
    pub fn row_norm(&self) -> f64 {
        linalg::max_eig(&self.row_gram()).max(0.0).sqrt()
    }

    /// Largest spectral norm among the entries.
    pub fn max_norm(&self) -> f64 {
        self.mats.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.mats.iter().all(|m| linalg::asymmetry(m) <= tol * (1.0 + m.norm()))
    }

    /// `X^w`; letters marked adjoint evaluate to conjugate transposes.
    pub fn eval_word(&self, w: &Word) -> Result<CMat> {
        if w.min_arity() > self.g() {
            return Err(Error::Arity { expected: w.min_arity(), found: self.g() });
        }
        let mut acc = linalg::eye(self.n);
        for l in w.letters() {
            let m = &self.mats[l.var];
            acc = if l.adjoint { acc * m.adjoint() } else { acc * m };
        }
        Ok(acc)
    }

    /// Block direct sum `X ⊕ Y`.
    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        other.check_arity(self.g())?;
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| linalg::block_diag(a, b)).collect();
        Ok(MatrixTuple { n: self.n + other.n, mats })
    }

    /// `U* X U` entrywise. `U` must be unitary to within `1e-10·n`.
    pub fn unitary_conj(&self, u: &CMat) -> Result<MatrixTuple> {
        if u.nrows() != self.n || u.ncols() != self.n {
            return Err(Error::Shape(format!("unitary is {}×{}, tuple size {}", u.nrows(), u.ncols(), self.n)));
        }
        let residual = linalg::unitarity_residual(u);
        if residual > 1e-10 * (self.n.max(1) as f64) {
            return Err(Error::NotUnitary { residual });
        }
        Ok(self.similarity(u, &u.adjoint()))
    }

    /// `L X R` entrywise (no checks).
    pub fn similarity(&self, right: &CMat, left: &CMat) -> MatrixTuple {
        let mats: Vec<CMat> = self.mats.iter().map(|x| left * x * right).collect();
        let n = mats.first().map_or(right.ncols(), CMat::nrows);
        MatrixTuple { n, mats }
    }

    /// `X_j ⊗ K` entrywise.
    pub fn kron_right(&self, k: &CMat) -> MatrixTuple {
        MatrixTuple { n: self.n * k.nrows(), mats: self.mats.iter().map(|x| x.kronecker(k)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real;
    use crate::par::trial_rng;

    fn pair() -> MatrixTuple {
        MatrixTuple::new(vec![from_real(2, 2, &[0., 1., 0., 0.]), from_real(2, 2, &[1., 0., 0., 0.])]).unwrap()
    }

    #[test]
    fn empty_word_is_identity() {
        let x = MatrixTuple::zeros(2, 3);
        assert_eq!(x.eval_word(&Word::empty()).unwrap(), linalg::eye(3));
    }

    #[test]
    fn words_do_not_commute() {
        let x = pair();
        assert_eq!(x.eval_word(&Word::plain(&[0, 1])).unwrap(), linalg::zeros(2, 2));
        assert_eq!(x.eval_word(&Word::plain(&[1, 0])).unwrap(), from_real(2, 2, &[0., 1., 0., 0.]));
    }

    #[test]
    fn arity_mismatch() {
        let x = pair();
        assert!(matches!(x.eval_word(&Word::plain(&[2])), Err(Error::Arity { .. })));
    }

    #[test]
    fn zero_direct_sum() {
        let s = MatrixTuple::zeros(2, 2).direct_sum(&MatrixTuple::zeros(2, 3)).unwrap();
        assert_eq!(s, MatrixTuple::zeros(2, 5));
    }

    #[test]
    fn identity_conjugation() {
        let x = pair();
        assert_eq!(x.unitary_conj(&linalg::eye(2)).unwrap(), x);
        let bad = from_real(2, 2, &[2., 0., 0., 1.]);
        assert!(matches!(x.unitary_conj(&bad), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn word_eval_respects_direct_sum() {
        let mut rng = trial_rng(5, 0);
        for len in 0..5 {
            let x = MatrixTuple::new((0..2).map(|_| linalg::random_matrix(&mut rng, 2, 2)).collect()).unwrap();
            let y = MatrixTuple::new((0..2).map(|_| linalg::random_matrix(&mut rng, 3, 3)).collect()).unwrap();
            let w = Word::new(
                (0..len).map(|k| if k % 2 == 0 { super::super::Letter::plain(k % 2) } else { super::super::Letter::star(1) }).collect(),
            );
            let lhs = x.direct_sum(&y).unwrap().eval_word(&w).unwrap();
            let rhs = linalg::block_diag(&x.eval_word(&w).unwrap(), &y.eval_word(&w).unwrap());
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn json_forms() {
        let bare: MatrixTuple = serde_json::from_str("[0.5, -1]").unwrap();
        assert_eq!((bare.g(), bare.n()), (2, 1));
        let full: MatrixTuple = serde_json::from_str(r#"{"n": 1, "X": [0.5]}"#).unwrap();
        assert_eq!(full.g(), 1);
        let back: MatrixTuple = serde_json::from_str(&serde_json::to_string(&full).unwrap()).unwrap();
        assert_eq!(back, full);
        assert!(serde_json::from_str::<MatrixTuple>(r#"{"X": [0.5, [[0, 1]]]}"#).is_err());
    }
}
