use serde::{Deserialize, Serialize};

use super::poly::FreePoly;
use super::tuple::MatrixTuple;
use super::word::{Letter, Word};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PencilForm {
    /// `L(x) = Σ A_j x_j`
    Homogeneous,
    /// `I + L(x) + L(x)*`
    Hermitian,
    /// `I − Σ A_j x_j` with Hermitian `A_j`, evaluated on Hermitian tuples.
    Monic,
}

/// A linear pencil of size `d` in `g` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PencilJson", into = "PencilJson")]
pub struct LinearPencil {
    form: PencilForm,
    d: usize,
    a: Vec<CMat>,
}

#[derive(Serialize, Deserialize)]
struct PencilJson {
    form: PencilForm,
    d: Option<usize>,
    g: Option<usize>,
    #[serde(rename = "A", with = "super::json::matrices")]
    a: Vec<CMat>,
}

impl TryFrom<PencilJson> for LinearPencil {
    type Error = Error;

    fn try_from(j: PencilJson) -> Result<Self> {
        let p = LinearPencil::new(j.form, j.a)?;
        if let Some(d) = j.d {
            if d != p.d {
                return Err(Error::Shape(format!("declared d={d}, coefficients are {}×{}", p.d, p.d)));
            }
        }
        if let Some(g) = j.g {
            if g != p.g() {
                return Err(Error::Arity { expected: g, found: p.g() });
            }
        }
        Ok(p)
    }
}

impl From<LinearPencil> for PencilJson {
    fn from(p: LinearPencil) -> Self {
        PencilJson { form: p.form, d: Some(p.d), g: Some(p.a.len()), a: p.a }
    }
}

/// Pencil evaluated at a tuple, symmetrised, with the Frobenius norm of the
/// anti-Hermitian part that was discarded.
#[derive(Debug, Clone)]
pub struct PencilValue {
    pub matrix: CMat,
    pub asymmetry: f64,
}

impl LinearPencil {
    pub fn new(form: PencilForm, a: Vec<CMat>) -> Result<Self> {
        let Some(first) = a.first() else {
            return Err(Error::Invalid("pencil needs at least one coefficient".into()));
        };
        let d = first.nrows();
        if d == 0 {
            return Err(Error::Invalid("pencil size must be at least 1".into()));
        }
        for (j, m) in a.iter().enumerate() {
            if m.shape() != (d, d) {
                return Err(Error::Shape(format!("A_{} is {}×{}, expected {d}×{d}", j + 1, m.nrows(), m.ncols())));
            }
        }
        let a = if form == PencilForm::Monic {
            a.into_iter()
                .enumerate()
                .map(|(j, m)| {
                    let asym = linalg::asymmetry(&m);
                    if asym > 1e-12 * (1.0 + m.norm()) {
                        Err(Error::Invalid(format!("monic pencil coefficient A_{} is not Hermitian ({asym:.2e})", j + 1)))
                    } else {
                        Ok(linalg::hermitian_part(&m))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            a
        };
        Ok(LinearPencil { form, d, a })
    }

    pub fn monic(a: Vec<CMat>) -> Result<Self> {
        Self::new(PencilForm::Monic, a)
    }

    pub fn hermitian(a: Vec<CMat>) -> Result<Self> {
        Self::new(PencilForm::Hermitian, a)
    }

    pub fn homogeneous(a: Vec<CMat>) -> Result<Self> {
        Self::new(PencilForm::Homogeneous, a)
    }

    /// The univariate 2×2 pencil `I + Ax + A*x*` with `A = [[1, 1], [0, 0]]`,
    /// whose domain is `{X : ‖X − 1‖ < √2}`.
    pub fn disc_example() -> Self {
        Self::hermitian(vec![linalg::from_real(2, 2, &[1., 1., 0., 0.])]).expect("well-formed")
    }

    pub fn form(&self) -> PencilForm {
        self.form
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn g(&self) -> usize {
        self.a.len()
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.a
    }

    /// `Σ A_j ⊗ X_j`.
    pub fn eval_linear(&self, x: &MatrixTuple) -> Result<CMat> {
        x.check_arity(self.g())?;
        let n = x.n();
        Ok(self.a.iter().zip(x.mats()).fold(linalg::zeros(self.d * n, self.d * n), |acc, (a, xj)| acc + a.kronecker(xj)))
    }

    /// The Hermitian matrix of the canonical substitution. Homogeneous
    /// pencils have no such value.
    pub fn eval(&self, x: &MatrixTuple) -> Result<PencilValue> {
        let lin = self.eval_linear(x)?;
        let id = linalg::eye(self.d * x.n());
        let m = match self.form {
            PencilForm::Hermitian => &id + &lin + lin.adjoint(),
            PencilForm::Monic => id - lin,
            PencilForm::Homogeneous => {
                return Err(Error::Invalid("a homogeneous pencil has no Hermitian evaluation".into()))
            }
        };
        let asymmetry = linalg::asymmetry(&m);
        Ok(PencilValue { matrix: linalg::hermitian_part(&m), asymmetry })
    }

    /// The pencil as a `d × d` matrix polynomial.
    pub fn to_poly(&self) -> FreePoly {
        let g = self.g();
        let mut p = FreePoly::zero(g, (self.d, self.d));
        let push = |p: &mut FreePoly, w: Word, m: CMat| p.add_term(w, m).expect("conformal by construction");
        match self.form {
            PencilForm::Homogeneous => {}
            PencilForm::Hermitian | PencilForm::Monic => push(&mut p, Word::empty(), linalg::eye(self.d)),
        }
        for (j, a) in self.a.iter().enumerate() {
            match self.form {
                PencilForm::Homogeneous => push(&mut p, Word::new(vec![Letter::plain(j)]), a.clone()),
                PencilForm::Hermitian => {
                    push(&mut p, Word::new(vec![Letter::plain(j)]), a.clone());
                    push(&mut p, Word::new(vec![Letter::star(j)]), a.adjoint());
                }
                PencilForm::Monic => push(&mut p, Word::new(vec![Letter::plain(j)]), -a),
            }
        }
        p
    }

    /// Monic pencils `diag(1 − x_1, 1 + x_1, …, 1 − x_g, 1 + x_g)`, whose
    /// domain is the matrix cube `‖X_j‖ < 1`.
    pub fn cube(g: usize) -> Self {
        let d = 2 * g;
        let a = (0..g)
            .map(|j| {
                let mut m = linalg::zeros(d, d);
                m[(2 * j, 2 * j)] = C64::new(1.0, 0.0);
                m[(2 * j + 1, 2 * j + 1)] = C64::new(-1.0, 0.0);
                m
            })
            .collect();
        Self::monic(a).expect("diagonal real coefficients")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};

    #[test]
    fn disc_pencil_at_zero_and_one() {
        let l = LinearPencil::disc_example();
        let at0 = l.eval(&MatrixTuple::scalar(c(0.0, 0.0))).unwrap();
        assert_eq!(at0.matrix, linalg::eye(2));
        let at1 = l.eval(&MatrixTuple::scalar(c(1.0, 0.0))).unwrap();
        assert_eq!(at1.matrix, from_real(2, 2, &[3., 1., 1., 1.]));
        assert_eq!(at1.asymmetry, 0.0);
    }

    #[test]
    fn monic_scalar() {
        let l = LinearPencil::monic(vec![from_real(1, 1, &[1.0])]).unwrap();
        let v = l.eval(&MatrixTuple::scalar(c(0.5, 0.0))).unwrap();
        assert_eq!(v.matrix, from_real(1, 1, &[0.5]));
    }

    #[test]
    fn monic_requires_hermitian() {
        let bad = from_real(2, 2, &[0., 1., 0., 0.]);
        assert!(LinearPencil::monic(vec![bad]).is_err());
    }

    #[test]
    fn homogeneous_has_no_hermitian_value() {
        let l = LinearPencil::homogeneous(vec![linalg::eye(1)]).unwrap();
        assert!(l.eval(&MatrixTuple::scalar(c(1.0, 0.0))).is_err());
        assert_eq!(l.eval_linear(&MatrixTuple::scalar(c(2.0, 0.0))).unwrap()[(0, 0)], c(2.0, 0.0));
    }

    #[test]
    fn to_poly_matches_eval() {
        let l = LinearPencil::disc_example();
        let x = MatrixTuple::scalar(c(0.3, -0.7));
        let direct = l.eval(&x).unwrap().matrix;
        let via_poly = l.to_poly().eval(&x).unwrap();
        assert!((direct - via_poly).norm() < 1e-15);
    }

    #[test]
    fn json_roundtrip() {
        let l = LinearPencil::cube(2);
        let back: LinearPencil = serde_json::from_str(&serde_json::to_string(&l).unwrap()).unwrap();
        assert_eq!(back, l);
        let parsed: LinearPencil = serde_json::from_str(r#"{"form": "monic", "d": 2, "g": 1, "A": [[[1, 0], [0, -1]]]}"#).unwrap();
        assert_eq!(parsed.g(), 1);
        assert!(serde_json::from_str::<LinearPencil>(r#"{"form": "monic", "d": 3, "A": [[[1, 0], [0, -1]]]}"#).is_err());
    }
}
